#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "jointnerf/camera.h"
#include "jointnerf/image.h"
#include "jointnerf/radiance_field.h"
#include "jointnerf/renderer.h"

namespace jointnerf {

class EvalError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// x -> scale * rotation * x + translation.
template <typename Scalar>
struct Sim3 {
  Scalar scale = Scalar(1);
  Matrix3<Scalar> rotation = Matrix3<Scalar>::Identity();
  Vector3<Scalar> translation = Vector3<Scalar>::Zero();

  Vector3<Scalar> operator*(const Vector3<Scalar>& x) const {
    return scale * (rotation * x) + translation;
  }
  Sim3 Inverse() const {
    Sim3 inv;
    inv.scale = Scalar(1) / scale;
    inv.rotation = rotation.transpose();
    inv.translation = -inv.scale * (inv.rotation * translation);
    return inv;
  }
  // Camera-to-world pose expressed in the target frame.
  Extrinsics Apply(const Extrinsics& pose) const {
    return Extrinsics::FromRotation(rotation * pose.Rotation(), *this * pose.t);
  }
};

using Trajectory = std::vector<Extrinsics>;

// Closed-form similarity (Umeyama) mapping the camera centres of `estimate`
// onto those of `reference`. Throws EvalError with fewer than three poses or
// when the centres are coincident or collinear.
Sim3<double> Sim3Align(std::span<const Extrinsics> estimate,
                       std::span<const Extrinsics> reference);
// Root-mean-square centre residual after applying `sim`.
double AlignmentResidual(const Sim3<double>& sim,
                         std::span<const Extrinsics> estimate,
                         std::span<const Extrinsics> reference);

struct AteMetrics {
  double rotation_deg = 0.0;  // mean over poses
  double translation = 0.0;   // mean centre distance, reference units
  Sim3<double> alignment;
};
AteMetrics ComputeAte(std::span<const Extrinsics> estimate,
                      std::span<const Extrinsics> reference);
// Errors of `estimate` against `reference` without any alignment.
AteMetrics ComputeAteUnaligned(std::span<const Extrinsics> estimate,
                               std::span<const Extrinsics> reference);

// Largest distance between two camera centres.
double TrajectoryDiameter(std::span<const Extrinsics> poses);

// +infinity for identical images. Throws EvalError on size mismatch.
double Psnr(const Image& a, const Image& b);
// Mean SSIM of the channel-mean luminance over valid 11x11 Gaussian windows.
double Ssim(const Image& a, const Image& b);

struct FocalError {
  double dx = 0.0;
  double dy = 0.0;
};
FocalError ComputeFocalError(const Intrinsics& estimate,
                             const Intrinsics& reference);

struct PoseAlignOptions {
  int iterations = 200;
  double lr = 1e-3;
  double decay = 0.9;
  int decay_every = 50;
  int pixels = 1024;  // fixed random subset, all pixels if larger
  int patience = 10;  // consecutive loss increases counted as divergence
  uint64_t seed = 0;
  int threads = 1;
  int chunk_rays = 256;
};

struct PoseAlignResult {
  Extrinsics pose;
  double initial_loss = 0.0;
  double best_loss = 0.0;
  int iterations = 0;
  bool diverged = false;
};

// Adam on one camera's rotation and centre against the photometric loss,
// field and intrinsics frozen. Returns the best pose seen, the initial one
// included.
PoseAlignResult TestTimePoseAlign(const RadianceField& field,
                                  const Intrinsics& intrinsics,
                                  const RenderSettings& settings,
                                  const Image& target, const Extrinsics& init,
                                  const PoseAlignOptions& options = {});

}  // namespace jointnerf
