#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "jointnerf/camera.h"
#include "jointnerf/image.h"
#include "jointnerf/synthetic.h"

namespace jointnerf {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// On disk:
//   manifest.txt     key/value lines: width, height, near, far,
//                    split (`every N` or `none`), one `image NAME` per image
//   images/NAME      8-bit binary PPM
//   cameras_gt.txt   optional, camera text format, one pose per image
//   depth_gt/NAME.pfm, opacity_gt/NAME.pfm   optional float maps
struct Dataset {
  int width = 0;
  int height = 0;
  double near = 0.0;
  double far = 1.0;
  // Every `test_every`-th image (0-based: 0, N, 2N, ...) is held out;
  // 0 disables the split.
  int test_every = 8;
  std::vector<std::string> names;
  std::vector<Image> images;
  std::optional<Intrinsics> gt_intrinsics;
  std::vector<Extrinsics> gt_poses;  // empty or one per image
  std::vector<ScalarImage> gt_depth;    // empty or one per image
  std::vector<ScalarImage> gt_opacity;  // empty or one per image

  int size() const { return static_cast<int>(images.size()); }
  bool has_gt_cameras() const { return gt_intrinsics.has_value() && !gt_poses.empty(); }
  bool IsTest(int index) const { return test_every > 0 && index % test_every == 0; }
  std::vector<int> TrainIndices() const;
  std::vector<int> TestIndices() const;
  // Checks the invariants: same size images, parallel arrays.
  void Validate() const;
};

Dataset LoadDataset(const std::string& dir);
void SaveDataset(const Dataset& dataset, const std::string& dir);

struct SynthOptions {
  MotionPattern pattern = MotionPattern::kForwardFacingArc;
  int count = 12;
  int width = 64;
  int height = 64;
  uint64_t seed = 0;
  // Ground-truth focal as a multiple of the image size (fx = scale * W).
  double focal_scale = 1.2;
  int samples = 64;
  int oversample = 8;
  int test_every = 8;
  TrajectoryParams trajectory;
  int threads = 1;
};

// Renders a reproducible synthetic dataset with ground-truth cameras, depth
// and opacity. Bounds are 0.5x the nearest and 1.5x the farthest first hit.
// Images are quantised to 8 bits and maps rounded to float so saving is
// lossless.
Dataset MakeSyntheticDataset(const SynthOptions& options);

}  // namespace jointnerf
