#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "jointnerf/adam.h"
#include "jointnerf/camera.h"
#include "jointnerf/image.h"
#include "jointnerf/radiance_field.h"
#include "jointnerf/renderer.h"

namespace jointnerf {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class UpdateMode {
  // One step of each optimiser after every image.
  kPerImage,
  // Gradients averaged over all images, one step per epoch.
  kWholeBatch,
};

struct TrainConfig {
  int64_t epochs = 10000;
  int pixels_per_image = 1024;
  int samples_per_ray = 128;
  double lr_nerf = 1e-3;
  double lr_pose = 1e-3;
  double lr_focal = 1e-3;
  double nerf_decay = 0.9954;
  int64_t nerf_decay_every = 10;
  // Shared by the pose and focal optimisers.
  double camera_decay = 0.9;
  int64_t camera_decay_every = 100;
  uint64_t seed = 0;
  // Suppresses wall-clock fields in logs so repeated runs are byte-identical.
  bool deterministic = false;
  int threads = 1;
  // Rays per independent graph; gradients are reduced in chunk order.
  int chunk_rays = 128;
  bool jitter = true;
  UpdateMode update_mode = UpdateMode::kPerImage;
  FieldConfig field = FieldConfig::FullScale();
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
  AdamOptions adam;

  static TrainConfig FullScale();
  static TrainConfig Tiny();
  // Throws std::invalid_argument on a violated invariant.
  void Validate() const;

  double LrNerf(int64_t epoch) const;
  double LrPose(int64_t epoch) const;
  double LrFocal(int64_t epoch) const;
};

// Everything needed to continue training bit-identically: random streams
// are keyed by (seed, phase, epoch, image, chunk) so no generator state is
// carried.
struct TrainState {
  TrainConfig config;
  int width = 0;
  int height = 0;
  double near = 0.0;
  double far = 1.0;
  RadianceField field;
  Parameter phi{"phi", {}};      // N x 3 axis-angle, camera to world
  Parameter t{"t", {}};          // N x 3 camera centres
  Parameter focal{"focal", {}};  // 1 x 2 square-root focal scales
  AdamState nerf_adam;
  AdamState pose_adam;
  AdamState focal_adam;
  int64_t epoch = 0;
  int phase = 0;
  std::vector<double> loss_history;

  int camera_count() const { return static_cast<int>(phi.value.rows()); }
  Intrinsics intrinsics() const;
  Extrinsics pose(int camera) const;
  std::vector<Extrinsics> poses() const;
  RenderSettings render_settings() const;
};

// Identity cameras at the origin, fx = W, fy = H, fresh field.
TrainState InitTrainState(const TrainConfig& config, int camera_count,
                          int width, int height, double near, double far);

// Cameras seeded from camera-to-world rotations and centres. Rotations must
// be orthonormal with det +1 to 1e-4.
TrainState InitFromPoses(const TrainConfig& config,
                         std::span<const Eigen::Matrix3d> rotations,
                         std::span<const Eigen::Vector3d> centers,
                         const std::optional<Intrinsics>& intrinsics, int width,
                         int height, double near, double far);

// Fresh field and optimiser moments from a new seed; cameras kept as they
// are; epoch and schedules restart. Requires at least one completed epoch.
TrainState Refine(const TrainState& state);

struct EpochStats {
  int64_t epoch = 0;  // epoch index that was run
  double loss = 0.0;  // mean over images
  double lr_nerf = 0.0;
  double lr_pose = 0.0;
  double lr_focal = 0.0;
  double seconds = 0.0;
};

// Gradients of one image's loss.
struct StepGradients {
  int camera = 0;
  double loss = 0.0;
  std::vector<Matrix> nerf;
  Matrix phi;
  Matrix t;
  Matrix focal;
};

using GradientObserver = std::function<void(const StepGradients&)>;

// `images[k]` is the target for camera k. Throws NumericalError on a
// non-finite loss, std::invalid_argument on mismatched images.
EpochStats TrainEpoch(TrainState& state, std::span<const Image> images,
                      const GradientObserver& observer = {});

// M pixel indices in [0, W*H) drawn without replacement.
std::vector<int> SamplePixels(int width, int height, int count,
                              std::mt19937_64& rng);

// Loss and gradients for one camera on the given pixel indices.
StepGradients ComputeImageGradients(const TrainState& state, const Image& image,
                                    int camera, std::span<const int> pixels,
                                    uint64_t jitter_key);

}  // namespace jointnerf
