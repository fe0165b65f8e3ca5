#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "jointnerf/camera.h"
#include "jointnerf/image.h"
#include "jointnerf/radiance_field.h"
#include "jointnerf/renderer.h"

namespace jointnerf {

// Constant-density coloured sphere or axis-aligned box.
struct Primitive {
  enum class Kind { kSphere, kBox };

  Kind kind = Kind::kSphere;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  // Sphere: radius in x. Box: half extents.
  Eigen::Vector3d size = Eigen::Vector3d::Constant(0.5);
  double sigma = 1.0;
  Eigen::Vector3d rgb = Eigen::Vector3d::Constant(0.5);

  bool Contains(const Eigen::Vector3d& p) const;
  // Entry / exit depths of the ray's line through the primitive, if any.
  std::optional<std::pair<double, double>> Intersect(const Ray& ray) const;

  static Primitive Sphere(const Eigen::Vector3d& center, double radius,
                          double sigma, const Eigen::Vector3d& rgb);
  static Primitive Box(const Eigen::Vector3d& center,
                       const Eigen::Vector3d& half_extent, double sigma,
                       const Eigen::Vector3d& rgb);
};

// Depth of the tiled backdrop of SyntheticScene::Random.
inline constexpr double kBackdropDepth = -1.05;

// Overlapping primitives add densities; colour is the density-weighted mean.
struct SyntheticScene {
  std::vector<Primitive> primitives;
  Eigen::AlignedBox3d bounds;

  FieldSample Evaluate(const Eigen::Vector3d& p) const;

  // Tiled backdrop plus a handful of foreground spheres and boxes around the
  // origin, all opaque; reproducible from `seed`.
  static SyntheticScene Random(uint64_t seed);
};

struct GroundTruthView {
  Image color;
  ScalarImage depth;
  ScalarImage opacity;
};

// Renders with the shared compositing rule on `oversample * samples` uniform
// bins, split further at every primitive boundary so that each interval has
// constant density and colour (the quadrature is then exact).
GroundTruthView RenderGroundTruth(const SyntheticScene& scene,
                                  const Intrinsics& intr, const Extrinsics& extr,
                                  const RenderSettings& settings, int oversample,
                                  int threads = 1);
RenderOutput RenderGroundTruthRay(const SyntheticScene& scene, const Ray& ray,
                                  int bins,
                                  const Eigen::Vector3d& background =
                                      Eigen::Vector3d::Zero());

// Nearest and farthest primitive hit over every pixel of every camera;
// nullopt when nothing is hit.
std::optional<std::pair<double, double>> HitRange(
    const SyntheticScene& scene, const Intrinsics& intr,
    std::span<const Extrinsics> cameras);

enum class MotionPattern {
  kForwardFacingArc,
  kRotationDominant,
  kPureRotation,
  kTraversal,
  kZoomIn,
};

MotionPattern ParseMotionPattern(const std::string& name);
std::string MotionPatternName(MotionPattern pattern);

struct TrajectoryParams {
  // Fixation point of the arc. The default sits on the backdrop so that every
  // object lies between the cameras and the point their axes converge on.
  Eigen::Vector3d target = Eigen::Vector3d(0.0, 0.0, kBackdropDepth);
  // Distance from target for the arc and default start position.
  double distance = 2.5 - kBackdropDepth;
  // Start position for rotation / traversal / zoom; default target + distance z.
  std::optional<Eigen::Vector3d> eye;
  double arc_degrees = 15.0;    // half-angle of the spherical cap
  double sweep_degrees = 40.0;  // total yaw sweep
  double spacing = 0.1;         // traversal step along x
  double zoom_step = 0.1;       // zoom step along the view axis
  double rotation_dominant_baseline = 0.05;  // translation radius
};

// Camera-to-world rotation looking from `eye` at `target`, y up.
Eigen::Matrix3d LookAt(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                       const Eigen::Vector3d& up = Eigen::Vector3d::UnitY());

std::vector<Extrinsics> MakeTrajectory(MotionPattern pattern, int n,
                                       const TrajectoryParams& params = {});

}  // namespace jointnerf
