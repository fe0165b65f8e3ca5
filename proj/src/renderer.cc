#include "jointnerf/renderer.h"

#include <cmath>
#include <string>

#include "jointnerf/parallel.h"

namespace jointnerf {

namespace {

void CheckBounds(double near, double far, int count) {
  if (!(near < far)) {
    throw RenderError("ray bounds: near (" + std::to_string(near) +
                      ") must be below far (" + std::to_string(far) + ")");
  }
  if (count < 2) throw RenderError("ray sampling: need at least 2 samples");
}

}  // namespace

Matrix SampleDepths(Eigen::Index rays, double near, double far, int count,
                    bool jitter, std::mt19937_64* rng) {
  CheckBounds(near, far, count);
  if (jitter && rng == nullptr) {
    throw RenderError("ray sampling: jitter requires a random generator");
  }
  const double step = (far - near) / count;
  Matrix depths(rays, count);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Eigen::Index r = 0; r < rays; ++r) {
    for (int k = 0; k < count; ++k) {
      const double offset = jitter ? unit(*rng) : 0.5;
      depths(r, k) = near + (k + offset) * step;
    }
  }
  return depths;
}

RaySamples SampleAlongRay(const Ray& ray, int count, bool jitter,
                          std::mt19937_64* rng) {
  const Matrix d = SampleDepths(1, ray.near, ray.far, count, jitter, rng);
  RaySamples s;
  s.jittered = jitter;
  s.depths.assign(d.data(), d.data() + d.size());
  for (double h : s.depths) s.points.push_back(ray.At(h));
  return s;
}

RenderOutput Composite(std::span<const double> sigmas,
                       std::span<const Eigen::Vector3d> colors,
                       std::span<const double> depths, double far,
                       const Eigen::Vector3d& background) {
  if (sigmas.size() != colors.size() || sigmas.size() != depths.size() ||
      sigmas.empty()) {
    throw RenderError("composite: got " + std::to_string(sigmas.size()) +
                      " densities, " + std::to_string(colors.size()) +
                      " colours and " + std::to_string(depths.size()) +
                      " depths");
  }
  for (size_t j = 1; j < depths.size(); ++j) {
    if (!(depths[j] > depths[j - 1])) {
      throw RenderError("composite: depths must be strictly ascending");
    }
  }
  RenderOutput out;
  out.weights.resize(sigmas.size());
  double optical_depth = 0.0;
  double t_prev = 1.0;
  for (size_t j = 0; j < sigmas.size(); ++j) {
    const double delta = (j + 1 < depths.size() ? depths[j + 1] : far) - depths[j];
    optical_depth += sigmas[j] * delta;
    const double t_next = std::exp(-optical_depth);
    const double w = t_prev - t_next;
    out.weights[j] = w;
    out.color += w * colors[j];
    out.depth += w * depths[j];
    t_prev = t_next;
  }
  out.transmittance_far = t_prev;
  out.color += t_prev * background;
  return out;
}

RenderTensors Composite(Graph& graph, Tensor sigma, Tensor rgb,
                        const Matrix& depths, double far,
                        const Eigen::Vector3d& background) {
  const Eigen::Index m = depths.rows();
  const Eigen::Index s = depths.cols();
  if (sigma.shape() != Shape{s * m, 1} || rgb.shape() != Shape{s * m, 3}) {
    throw RenderError("composite: expected " + Shape{s * m, 1}.ToString() +
                      " densities and " + Shape{s * m, 3}.ToString() +
                      " colours, got " + sigma.shape().ToString() + " and " +
                      rgb.shape().ToString());
  }
  for (Eigen::Index r = 0; r < m; ++r) {
    for (Eigen::Index j = 1; j < s; ++j) {
      if (!(depths(r, j) > depths(r, j - 1))) {
        throw RenderError("composite: depths must be strictly ascending");
      }
    }
  }

  RenderTensors out;
  out.weights.resize(m, s);
  Tensor optical_depth;
  Tensor t_prev = graph.Constant(Matrix::Ones(m, 1));
  Tensor color;
  Tensor depth;
  for (Eigen::Index j = 0; j < s; ++j) {
    Matrix delta(m, 1);
    if (j + 1 < s) {
      delta = depths.col(j + 1) - depths.col(j);
    } else {
      delta = (far - depths.col(j).array()).matrix();
    }
    const Tensor sd =
        Mul(Slice(sigma, Axis::kRows, j * m, m), graph.Constant(std::move(delta)));
    optical_depth = j == 0 ? sd : Add(optical_depth, sd);
    const Tensor t_next = Exp(Neg(optical_depth));
    const Tensor w = Sub(t_prev, t_next);
    out.weights.col(j) = w.value();
    const Tensor wc =
        Mul(Broadcast(w, {m, 3}), Slice(rgb, Axis::kRows, j * m, m));
    const Tensor wd = Mul(w, graph.Constant(depths.col(j)));
    color = j == 0 ? wc : Add(color, wc);
    depth = j == 0 ? wd : Add(depth, wd);
    t_prev = t_next;
  }
  if (!background.isZero()) {
    const Tensor bg = graph.Constant(background.transpose().replicate(m, 1));
    color = Add(color, Mul(Broadcast(t_prev, {m, 3}), bg));
  }
  out.color = color;
  out.depth = depth;
  out.transmittance_far = t_prev;
  out.opacity = Add(Neg(t_prev), 1.0);
  return out;
}

RenderTensors RenderRays(Graph& graph, const RadianceField& field,
                         std::span<const Tensor> leaves, const RayBundle& rays,
                         const Matrix& depths, const RenderSettings& settings) {
  const Eigen::Index m = depths.rows();
  const Eigen::Index s = depths.cols();
  if (rays.origins.shape() != Shape{m, 3} ||
      rays.directions.shape() != Shape{m, 3}) {
    throw RenderError("render: ray bundle does not match depth samples");
  }
  std::vector<Tensor> points;
  points.reserve(static_cast<size_t>(s));
  for (Eigen::Index j = 0; j < s; ++j) {
    const Tensor h = Broadcast(graph.Constant(depths.col(j)), {m, 3});
    points.push_back(Add(rays.origins, Mul(h, rays.directions)));
  }
  const Tensor encoded = field.EncodeDirections(rays.directions);
  const std::vector<Tensor> dir_copies(static_cast<size_t>(s), encoded);
  const RadianceField::Output f = field.ForwardEncoded(
      leaves, Concat(points, Axis::kRows), Concat(dir_copies, Axis::kRows));
  return Composite(graph, f.sigma, f.rgb, depths, settings.far,
                   settings.background);
}

RenderOutput RenderPixel(const Pixel& pixel, const Intrinsics& intr,
                         const Extrinsics& extr, const RadianceField& field,
                         const RenderSettings& settings, std::mt19937_64* rng) {
  Graph graph;
  const Tensor phi = graph.Constant(extr.phi.transpose());
  const Tensor t = graph.Constant(extr.t.transpose());
  Matrix focal(1, 2);
  focal << intr.sx_root, intr.sy_root;
  const Tensor focal_root = graph.Constant(std::move(focal));
  const RayBundle rays = BuildRays(graph, phi, t, focal_root,
                                   std::span<const Pixel>(&pixel, 1),
                                   intr.width, intr.height);
  const Matrix depths = SampleDepths(1, settings.near, settings.far,
                                     settings.samples, settings.jitter, rng);
  const std::vector<Tensor> leaves = field.Bind(graph, false);
  const RenderTensors r =
      RenderRays(graph, field, leaves, rays, depths, settings);
  RenderOutput out;
  out.color = r.color.value().row(0).transpose();
  out.depth = r.depth.value()(0, 0);
  out.transmittance_far = r.transmittance_far.value()(0, 0);
  out.weights.assign(r.weights.data(), r.weights.data() + r.weights.size());
  return out;
}

RenderedView RenderImage(const RadianceField& field, const Intrinsics& intr,
                         const Extrinsics& extr, const RenderSettings& settings,
                         int threads, int chunk_rays) {
  const int w = intr.width;
  const int h = intr.height;
  const int total = w * h;
  const int chunks = (total + chunk_rays - 1) / chunk_rays;
  RenderedView view{Image(w, h), ScalarImage(w, h)};
  Matrix focal(1, 2);
  focal << intr.sx_root, intr.sy_root;
  RenderSettings fixed = settings;
  fixed.jitter = false;

  ParallelFor(chunks, threads, [&](int c) {
    const int begin = c * chunk_rays;
    const int end = std::min(total, begin + chunk_rays);
    std::vector<Pixel> pixels;
    pixels.reserve(static_cast<size_t>(end - begin));
    for (int i = begin; i < end; ++i) {
      pixels.push_back({static_cast<double>(i % w), static_cast<double>(i / w)});
    }
    Graph graph;
    const RayBundle rays = BuildRays(
        graph, graph.Constant(extr.phi.transpose()),
        graph.Constant(extr.t.transpose()), graph.Constant(focal), pixels, w, h);
    const Matrix depths = SampleDepths(end - begin, fixed.near, fixed.far,
                                       fixed.samples, false, nullptr);
    const std::vector<Tensor> leaves = field.Bind(graph, false);
    const RenderTensors r = RenderRays(graph, field, leaves, rays, depths, fixed);
    view.color.rgb.middleRows(begin, end - begin) = r.color.value();
    for (int i = begin; i < end; ++i) {
      view.depth.value(i / w, i % w) = r.depth.value()(i - begin, 0);
    }
  });
  return view;
}

}  // namespace jointnerf
