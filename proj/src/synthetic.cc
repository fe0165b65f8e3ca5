#include "jointnerf/synthetic.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "jointnerf/parallel.h"
#include "jointnerf/rng.h"

namespace jointnerf {

Primitive Primitive::Sphere(const Eigen::Vector3d& center, double radius,
                            double sigma, const Eigen::Vector3d& rgb) {
  Primitive p;
  p.kind = Kind::kSphere;
  p.center = center;
  p.size = Eigen::Vector3d(radius, radius, radius);
  p.sigma = sigma;
  p.rgb = rgb;
  return p;
}

Primitive Primitive::Box(const Eigen::Vector3d& center,
                         const Eigen::Vector3d& half_extent, double sigma,
                         const Eigen::Vector3d& rgb) {
  Primitive p;
  p.kind = Kind::kBox;
  p.center = center;
  p.size = half_extent;
  p.sigma = sigma;
  p.rgb = rgb;
  return p;
}

bool Primitive::Contains(const Eigen::Vector3d& p) const {
  if (kind == Kind::kSphere) return (p - center).squaredNorm() <= size.x() * size.x();
  return ((p - center).cwiseAbs().array() <= size.array()).all();
}

std::optional<std::pair<double, double>> Primitive::Intersect(const Ray& ray) const {
  const Eigen::Vector3d oc = ray.origin - center;
  const Eigen::Vector3d& d = ray.direction;
  if (kind == Kind::kSphere) {
    const double a = d.squaredNorm();
    const double b = oc.dot(d);
    const double c = oc.squaredNorm() - size.x() * size.x();
    const double disc = b * b - a * c;
    if (disc < 0.0) return std::nullopt;
    const double s = std::sqrt(disc);
    return std::make_pair((-b - s) / a, (-b + s) / a);
  }
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    if (d(k) == 0.0) {
      if (std::abs(oc(k)) > size(k)) return std::nullopt;
      continue;
    }
    double t0 = (-size(k) - oc(k)) / d(k);
    double t1 = (size(k) - oc(k)) / d(k);
    if (t0 > t1) std::swap(t0, t1);
    lo = std::max(lo, t0);
    hi = std::min(hi, t1);
  }
  if (lo > hi) return std::nullopt;
  return std::make_pair(lo, hi);
}

FieldSample SyntheticScene::Evaluate(const Eigen::Vector3d& p) const {
  FieldSample s{Eigen::Vector3d::Zero(), 0.0};
  for (const Primitive& prim : primitives) {
    if (prim.sigma > 0.0 && prim.Contains(p)) {
      s.sigma += prim.sigma;
      s.rgb += prim.sigma * prim.rgb;
    }
  }
  if (s.sigma > 0.0) s.rgb /= s.sigma;
  return s;
}

SyntheticScene SyntheticScene::Random(uint64_t seed) {
  std::mt19937_64 rng = MakeRng(seed, RngPurpose::kScene);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto color = [&] {
    return Eigen::Vector3d(0.1 + 0.8 * unit(rng), 0.1 + 0.8 * unit(rng),
                           0.1 + 0.8 * unit(rng));
  };
  constexpr double kSigma = 40.0;
  SyntheticScene scene;

  // Backdrop: 6 x 6 tiles behind everything else.
  constexpr int kTiles = 6;
  constexpr double kTile = 0.75;
  for (int i = 0; i < kTiles; ++i) {
    for (int j = 0; j < kTiles; ++j) {
      const Eigen::Vector3d c((i - 0.5 * (kTiles - 1)) * kTile,
                              (j - 0.5 * (kTiles - 1)) * kTile, kBackdropDepth);
      scene.primitives.push_back(Primitive::Box(
          c, Eigen::Vector3d(0.5 * kTile, 0.5 * kTile, 0.15), kSigma, color()));
    }
  }
  // Foreground objects at varying depth for parallax.
  constexpr int kObjects = 6;
  for (int k = 0; k < kObjects; ++k) {
    const Eigen::Vector3d c(-0.7 + 1.4 * unit(rng), -0.7 + 1.4 * unit(rng),
                            -0.5 + 1.0 * unit(rng));
    const double r = 0.15 + 0.15 * unit(rng);
    if (k % 2 == 0) {
      scene.primitives.push_back(Primitive::Sphere(c, r, kSigma, color()));
    } else {
      scene.primitives.push_back(
          Primitive::Box(c, Eigen::Vector3d(r, r * (0.6 + 0.8 * unit(rng)), r),
                         kSigma, color()));
    }
  }
  for (const Primitive& p : scene.primitives) {
    scene.bounds.extend(p.center - p.size);
    scene.bounds.extend(p.center + p.size);
  }
  return scene;
}

RenderOutput RenderGroundTruthRay(const SyntheticScene& scene, const Ray& ray,
                                  int bins, const Eigen::Vector3d& background) {
  if (!(ray.near < ray.far) || bins < 1) {
    throw RenderError("ground truth: degenerate ray bounds or bin count");
  }
  std::vector<double> edges;
  edges.reserve(static_cast<size_t>(bins) + 2 * scene.primitives.size());
  const double step = (ray.far - ray.near) / bins;
  for (int k = 0; k < bins; ++k) edges.push_back(ray.near + k * step);
  for (const Primitive& p : scene.primitives) {
    if (const auto hit = p.Intersect(ray)) {
      for (double h : {hit->first, hit->second}) {
        if (h > ray.near && h < ray.far) edges.push_back(h);
      }
    }
  }
  std::sort(edges.begin(), edges.end());
  const double eps = 1e-12 * std::max(1.0, std::abs(ray.far));
  std::vector<double> depths;
  depths.reserve(edges.size());
  for (double e : edges) {
    if (depths.empty() || e - depths.back() > eps) depths.push_back(e);
  }
  if (ray.far - depths.back() <= eps && depths.size() > 1) depths.pop_back();

  std::vector<double> sigmas(depths.size());
  std::vector<Eigen::Vector3d> colors(depths.size());
  for (size_t k = 0; k < depths.size(); ++k) {
    const double next = k + 1 < depths.size() ? depths[k + 1] : ray.far;
    const FieldSample s = scene.Evaluate(ray.At(0.5 * (depths[k] + next)));
    sigmas[k] = s.sigma;
    colors[k] = s.rgb;
  }
  return Composite(sigmas, colors, depths, ray.far, background);
}

GroundTruthView RenderGroundTruth(const SyntheticScene& scene,
                                  const Intrinsics& intr, const Extrinsics& extr,
                                  const RenderSettings& settings, int oversample,
                                  int threads) {
  if (oversample < 1) throw RenderError("ground truth: oversample must be >= 1");
  const int w = intr.width;
  const int h = intr.height;
  GroundTruthView view{Image(w, h), ScalarImage(w, h), ScalarImage(w, h)};
  const int bins = oversample * settings.samples;
  ParallelFor(h, threads, [&](int v) {
    for (int u = 0; u < w; ++u) {
      const Ray ray = RayForPixel(u, v, intr, extr, settings.near, settings.far);
      const RenderOutput r =
          RenderGroundTruthRay(scene, ray, bins, settings.background);
      view.color.pixel(u, v) = r.color.transpose();
      view.depth.value(v, u) = r.depth;
      view.opacity.value(v, u) = 1.0 - r.transmittance_far;
    }
  });
  return view;
}

std::optional<std::pair<double, double>> HitRange(
    const SyntheticScene& scene, const Intrinsics& intr,
    std::span<const Extrinsics> cameras) {
  double nearest = std::numeric_limits<double>::infinity();
  double farthest = 0.0;
  for (const Extrinsics& cam : cameras) {
    for (int v = 0; v < intr.height; ++v) {
      for (int u = 0; u < intr.width; ++u) {
        const Ray ray = RayForPixel(u, v, intr, cam);
        double first = std::numeric_limits<double>::infinity();
        for (const Primitive& p : scene.primitives) {
          if (const auto hit = p.Intersect(ray)) {
            if (hit->second > 0.0) first = std::min(first, std::max(hit->first, 0.0));
          }
        }
        if (std::isfinite(first)) {
          nearest = std::min(nearest, first);
          farthest = std::max(farthest, first);
        }
      }
    }
  }
  if (!std::isfinite(nearest)) return std::nullopt;
  return std::make_pair(nearest, farthest);
}

MotionPattern ParseMotionPattern(const std::string& name) {
  if (name == "forward-facing-arc") return MotionPattern::kForwardFacingArc;
  if (name == "rotation-dominant") return MotionPattern::kRotationDominant;
  if (name == "pure-rotation") return MotionPattern::kPureRotation;
  if (name == "traversal") return MotionPattern::kTraversal;
  if (name == "zoom-in") return MotionPattern::kZoomIn;
  throw std::invalid_argument("unknown motion pattern '" + name + "'");
}

std::string MotionPatternName(MotionPattern pattern) {
  switch (pattern) {
    case MotionPattern::kForwardFacingArc: return "forward-facing-arc";
    case MotionPattern::kRotationDominant: return "rotation-dominant";
    case MotionPattern::kPureRotation: return "pure-rotation";
    case MotionPattern::kTraversal: return "traversal";
    case MotionPattern::kZoomIn: return "zoom-in";
  }
  return "unknown";
}

Eigen::Matrix3d LookAt(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                       const Eigen::Vector3d& up) {
  // The camera looks down its -z axis.
  const Eigen::Vector3d z = (eye - target).normalized();
  const Eigen::Vector3d x = up.cross(z).normalized();
  const Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix3d r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return r;
}

std::vector<Extrinsics> MakeTrajectory(MotionPattern pattern, int n,
                                       const TrajectoryParams& params) {
  if (n < 2) throw std::invalid_argument("trajectory: need at least 2 cameras");
  const double deg = std::numbers::pi / 180.0;
  const Eigen::Vector3d eye =
      params.eye.value_or(params.target + params.distance * Eigen::Vector3d::UnitZ());
  std::vector<Extrinsics> poses;
  poses.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double s = static_cast<double>(i) / (n - 1);
    Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
    Eigen::Vector3d c = eye;
    switch (pattern) {
      case MotionPattern::kForwardFacingArc: {
        // Sunflower spiral over the cap: camera 0 on the axis, the rest
        // spread evenly in area out to the rim.
        const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
        const double polar = params.arc_degrees * deg * std::sqrt(s);
        const double azimuth = golden * i;
        c = params.target +
            params.distance * Eigen::Vector3d(std::sin(polar) * std::cos(azimuth),
                                              std::sin(polar) * std::sin(azimuth),
                                              std::cos(polar));
        r = LookAt(c, params.target);
        break;
      }
      case MotionPattern::kRotationDominant: {
        const double yaw = (s - 0.5) * params.sweep_degrees * deg;
        r = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitY()).toRotationMatrix();
        c = eye + params.rotation_dominant_baseline *
                      Eigen::Vector3d(std::sin(2 * std::numbers::pi * s), 0.0,
                                      std::cos(2 * std::numbers::pi * s) - 1.0);
        break;
      }
      case MotionPattern::kPureRotation: {
        const double yaw = (s - 0.5) * params.sweep_degrees * deg;
        r = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitY()).toRotationMatrix();
        break;
      }
      case MotionPattern::kTraversal:
        c = eye + i * params.spacing * Eigen::Vector3d::UnitX();
        break;
      case MotionPattern::kZoomIn:
        c = eye - i * params.zoom_step * Eigen::Vector3d::UnitZ();
        break;
    }
    poses.push_back(Extrinsics::FromRotation(r, c));
  }
  return poses;
}

}  // namespace jointnerf
