#pragma once

#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "jointnerf/autodiff.h"
#include "jointnerf/camera.h"
#include "jointnerf/image.h"
#include "jointnerf/radiance_field.h"

namespace jointnerf {

struct RenderSettings {
  double near = 0.0;
  double far = 1.0;
  int samples = 128;
  bool jitter = false;
  // Colour behind the last sample; black unless configured (e.g. white).
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
};

class RenderError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RaySamples {
  std::vector<double> depths;
  std::vector<Eigen::Vector3d> points;
  bool jittered = false;
};

// Stratified samples: `count` equal bins on [near, far], one sample per bin
// (bin midpoint, or uniform in the bin when jittering).
RaySamples SampleAlongRay(const Ray& ray, int count, bool jitter,
                          std::mt19937_64* rng);
// Depths for a batch of `rays` rays sharing [near, far], rays x count.
Matrix SampleDepths(Eigen::Index rays, double near, double far, int count,
                    bool jitter, std::mt19937_64* rng);

struct RenderOutput {
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
  double depth = 0.0;
  std::vector<double> weights;
  double transmittance_far = 1.0;
};

// Discrete volume rendering: alpha_j = 1 - exp(-sigma_j delta_j) with
// delta_j = h_{j+1} - h_j and delta_last = far - h_last,
// T_j = exp(-sum_{k<j} sigma_k delta_k), w_j = T_j alpha_j = T_j - T_{j+1}.
RenderOutput Composite(std::span<const double> sigmas,
                       std::span<const Eigen::Vector3d> colors,
                       std::span<const double> depths, double far,
                       const Eigen::Vector3d& background = Eigen::Vector3d::Zero());

// Differentiable counterpart of Composite for M rays with S samples each.
// `sigma` is (S*M) x 1 and `rgb` (S*M) x 3 in sample-major order (rows
// j*M .. j*M+M-1 hold sample j of every ray); `depths` is M x S.
struct RenderTensors {
  Tensor color;              // M x 3
  Tensor depth;              // M x 1
  Tensor opacity;            // M x 1, sum of weights
  Tensor transmittance_far;  // M x 1
  Matrix weights;            // M x S values (not differentiable)
};
RenderTensors Composite(Graph& graph, Tensor sigma, Tensor rgb,
                        const Matrix& depths, double far,
                        const Eigen::Vector3d& background = Eigen::Vector3d::Zero());

// Samples the field along every ray of `rays` at `depths` and composites.
RenderTensors RenderRays(Graph& graph, const RadianceField& field,
                         std::span<const Tensor> leaves, const RayBundle& rays,
                         const Matrix& depths, const RenderSettings& settings);

// One pixel through the full differentiable path, evaluated with
// everything held constant.
RenderOutput RenderPixel(const Pixel& pixel, const Intrinsics& intr,
                         const Extrinsics& extr, const RadianceField& field,
                         const RenderSettings& settings,
                         std::mt19937_64* rng = nullptr);

// Renders an analytic field `f(point, direction) -> FieldSample` along a ray
// with the same sampling and compositing rules.
template <typename Field>
RenderOutput RenderAnalyticRay(const Ray& ray, Field&& f, int samples,
                               bool jitter, std::mt19937_64* rng,
                               const Eigen::Vector3d& background =
                                   Eigen::Vector3d::Zero()) {
  const RaySamples s = SampleAlongRay(ray, samples, jitter, rng);
  std::vector<double> sigmas(s.depths.size());
  std::vector<Eigen::Vector3d> colors(s.depths.size());
  for (size_t j = 0; j < s.depths.size(); ++j) {
    const FieldSample fs = f(s.points[j], ray.direction);
    sigmas[j] = fs.sigma;
    colors[j] = fs.rgb;
  }
  return Composite(sigmas, colors, s.depths, ray.far, background);
}

struct RenderedView {
  Image color;
  ScalarImage depth;
};

// Full-image render without gradients, in chunks of `chunk_rays` rays
// spread over `threads` workers. Deterministic for any thread count.
RenderedView RenderImage(const RadianceField& field, const Intrinsics& intr,
                         const Extrinsics& extr, const RenderSettings& settings,
                         int threads = 1, int chunk_rays = 1024);

}  // namespace jointnerf
