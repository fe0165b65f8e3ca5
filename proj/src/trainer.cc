#include "jointnerf/trainer.h"

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "jointnerf/parallel.h"
#include "jointnerf/rng.h"

namespace jointnerf {

TrainConfig TrainConfig::FullScale() { return TrainConfig{}; }

TrainConfig TrainConfig::Tiny() {
  TrainConfig c;
  c.field = FieldConfig::Tiny();
  c.epochs = 3000;
  c.pixels_per_image = 128;
  c.samples_per_ray = 32;
  c.lr_nerf = 5e-3;
  c.lr_pose = 5e-3;
  c.lr_focal = 5e-3;
  c.nerf_decay = 0.9954;
  c.nerf_decay_every = 10;
  c.camera_decay = 0.9;
  c.camera_decay_every = 100;
  c.chunk_rays = 256;
  return c;
}

void TrainConfig::Validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("train config: ") + what);
  };
  require(epochs >= 1, "epochs must be >= 1");
  require(pixels_per_image >= 1, "pixels per image must be >= 1");
  require(samples_per_ray >= 2, "samples per ray must be >= 2");
  require(lr_nerf >= 0 && lr_pose >= 0 && lr_focal >= 0,
          "learning rates must be >= 0");
  require(nerf_decay > 0 && camera_decay > 0, "decay factors must be > 0");
  require(nerf_decay_every >= 1 && camera_decay_every >= 1,
          "decay periods must be >= 1");
  require(threads >= 1, "threads must be >= 1");
  require(chunk_rays >= 1, "chunk size must be >= 1");
  require(field.depth >= 1 && field.width >= 1 && field.dir_width >= 1,
          "field layers must be non-empty");
  require(field.skip_after < field.depth, "skip layer out of range");
}

double TrainConfig::LrNerf(int64_t epoch) const {
  return LearningRateAt(epoch, lr_nerf, nerf_decay, nerf_decay_every);
}
double TrainConfig::LrPose(int64_t epoch) const {
  return LearningRateAt(epoch, lr_pose, camera_decay, camera_decay_every);
}
double TrainConfig::LrFocal(int64_t epoch) const {
  return LearningRateAt(epoch, lr_focal, camera_decay, camera_decay_every);
}

Intrinsics TrainState::intrinsics() const {
  return Intrinsics{focal.value(0, 0), focal.value(0, 1), width, height};
}

Extrinsics TrainState::pose(int camera) const {
  return Extrinsics{phi.value.row(camera).transpose(),
                    t.value.row(camera).transpose()};
}

std::vector<Extrinsics> TrainState::poses() const {
  std::vector<Extrinsics> out;
  for (int i = 0; i < camera_count(); ++i) out.push_back(pose(i));
  return out;
}

RenderSettings TrainState::render_settings() const {
  RenderSettings s;
  s.near = near;
  s.far = far;
  s.samples = config.samples_per_ray;
  s.background = config.background;
  return s;
}

namespace {

uint64_t FieldSeed(uint64_t seed, int phase) {
  return MakeRng(seed, RngPurpose::kInit, {static_cast<uint64_t>(phase)})();
}

void ResetOptimisers(TrainState& s) {
  std::vector<Parameter*> nerf = s.field.parameter_ptrs();
  s.nerf_adam = MakeAdamState(std::vector<const Parameter*>(nerf.begin(), nerf.end()));
  const Parameter* pose[] = {&s.phi, &s.t};
  s.pose_adam = MakeAdamState(pose);
  const Parameter* focal[] = {&s.focal};
  s.focal_adam = MakeAdamState(focal);
}

TrainState MakeState(const TrainConfig& config, int n, int width, int height,
                     double near, double far) {
  config.Validate();
  if (n < 1) throw std::invalid_argument("train: need at least one camera");
  if (width < 1 || height < 1) throw std::invalid_argument("train: bad image size");
  if (!(near < far)) throw std::invalid_argument("train: near must be below far");
  TrainState s;
  s.config = config;
  s.width = width;
  s.height = height;
  s.near = near;
  s.far = far;
  s.field = RadianceField(config.field, FieldSeed(config.seed, 0));
  s.phi.value = Matrix::Zero(n, 3);
  s.t.value = Matrix::Zero(n, 3);
  s.focal.value = Matrix::Ones(1, 2);
  ResetOptimisers(s);
  return s;
}

}  // namespace

TrainState InitTrainState(const TrainConfig& config, int camera_count, int width,
                          int height, double near, double far) {
  return MakeState(config, camera_count, width, height, near, far);
}

TrainState InitFromPoses(const TrainConfig& config,
                         std::span<const Eigen::Matrix3d> rotations,
                         std::span<const Eigen::Vector3d> centers,
                         const std::optional<Intrinsics>& intrinsics, int width,
                         int height, double near, double far) {
  if (rotations.size() != centers.size()) {
    throw std::invalid_argument("init from poses: rotation and centre counts differ");
  }
  TrainState s = MakeState(config, static_cast<int>(rotations.size()), width,
                           height, near, far);
  for (size_t i = 0; i < rotations.size(); ++i) {
    if (!IsRotation(rotations[i], 1e-4)) {
      std::ostringstream os;
      os << "init from poses: matrix " << i << " is not a rotation";
      throw std::invalid_argument(os.str());
    }
    s.phi.value.row(static_cast<Eigen::Index>(i)) =
        RotationLog(rotations[i]).transpose();
    s.t.value.row(static_cast<Eigen::Index>(i)) = centers[i].transpose();
  }
  if (intrinsics) {
    if (intrinsics->width != width || intrinsics->height != height) {
      throw std::invalid_argument("init from poses: intrinsics image size mismatch");
    }
    s.focal.value << intrinsics->sx_root, intrinsics->sy_root;
  }
  return s;
}

TrainState Refine(const TrainState& state) {
  if (state.epoch < 1) {
    throw std::invalid_argument("refine: the state has not completed an epoch");
  }
  TrainState s = state;
  s.phase = state.phase + 1;
  s.epoch = 0;
  s.field = RadianceField(state.config.field, FieldSeed(state.config.seed, s.phase));
  ResetOptimisers(s);
  return s;
}

std::vector<int> SamplePixels(int width, int height, int count,
                              std::mt19937_64& rng) {
  const int total = width * height;
  if (count > total) {
    throw std::invalid_argument("cannot sample " + std::to_string(count) +
                                " distinct pixels from " + std::to_string(total));
  }
  std::vector<int> pool(static_cast<size_t>(total));
  std::iota(pool.begin(), pool.end(), 0);
  // Partial Fisher-Yates with an explicit bounded draw so the sequence does
  // not depend on the standard library's distribution implementation.
  for (int i = 0; i < count; ++i) {
    const uint64_t span = static_cast<uint64_t>(total - i);
    const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t r;
    do r = rng(); while (r >= limit);
    std::swap(pool[static_cast<size_t>(i)],
              pool[static_cast<size_t>(i) + static_cast<size_t>(r % span)]);
  }
  pool.resize(static_cast<size_t>(count));
  return pool;
}

StepGradients ComputeImageGradients(const TrainState& state, const Image& image,
                                    int camera, std::span<const int> pixels,
                                    uint64_t jitter_key) {
  const TrainConfig& cfg = state.config;
  const int m = static_cast<int>(pixels.size());
  const int chunk = cfg.chunk_rays;
  const int chunks = (m + chunk - 1) / chunk;
  const double norm = 1.0 / (3.0 * m);
  const size_t nparams = state.field.parameters().size();
  const RenderSettings settings = state.render_settings();

  struct ChunkResult {
    double loss = 0.0;
    std::vector<Matrix> nerf;
    Matrix phi, t, focal;
  };
  std::vector<ChunkResult> results(static_cast<size_t>(chunks));

  ParallelFor(chunks, cfg.threads, [&](int c) {
    const int begin = c * chunk;
    const int count = std::min(m, begin + chunk) - begin;
    std::vector<Pixel> px(static_cast<size_t>(count));
    Matrix target(count, 3);
    for (int k = 0; k < count; ++k) {
      const int idx = pixels[static_cast<size_t>(begin + k)];
      px[static_cast<size_t>(k)] = {static_cast<double>(idx % state.width),
                                    static_cast<double>(idx / state.width)};
      target.row(k) = image.rgb.row(idx);
    }
    std::mt19937_64 rng = MakeRng(cfg.seed, RngPurpose::kJitter,
                                  {jitter_key, static_cast<uint64_t>(c)});
    const Matrix depths = SampleDepths(count, state.near, state.far,
                                       cfg.samples_per_ray, cfg.jitter, &rng);

    Graph graph;
    const Tensor phi_all = graph.Leaf(state.phi);
    const Tensor t_all = graph.Leaf(state.t);
    const Tensor focal = graph.Leaf(state.focal);
    const std::vector<Tensor> leaves = state.field.Bind(graph);
    const RayBundle rays =
        BuildRays(graph, Row(phi_all, camera), Row(t_all, camera), focal, px,
                  state.width, state.height);
    const RenderTensors r =
        RenderRays(graph, state.field, leaves, rays, depths, settings);
    const Tensor diff = Sub(r.color, graph.Constant(std::move(target)));
    const Tensor loss = Mul(Sum(Mul(diff, diff), Axis::kAll), norm);
    graph.Backward(loss);

    ChunkResult& out = results[static_cast<size_t>(c)];
    out.loss = loss.value()(0, 0);
    out.nerf.reserve(nparams);
    for (const Tensor& leaf : leaves) out.nerf.push_back(graph.Grad(leaf));
    out.phi = graph.Grad(phi_all);
    out.t = graph.Grad(t_all);
    out.focal = graph.Grad(focal);
  });

  StepGradients g;
  g.camera = camera;
  for (size_t c = 0; c < results.size(); ++c) {
    ChunkResult& r = results[c];
    if (c == 0) {
      g.loss = r.loss;
      g.nerf = std::move(r.nerf);
      g.phi = std::move(r.phi);
      g.t = std::move(r.t);
      g.focal = std::move(r.focal);
      continue;
    }
    g.loss += r.loss;
    for (size_t p = 0; p < nparams; ++p) g.nerf[p] += r.nerf[p];
    g.phi += r.phi;
    g.t += r.t;
    g.focal += r.focal;
  }
  return g;
}

namespace {

void CheckFinite(const StepGradients& g, int64_t epoch) {
  if (std::isfinite(g.loss)) return;
  std::ostringstream os;
  os << "non-finite loss " << g.loss << " at epoch " << epoch << ", camera "
     << g.camera;
  throw NumericalError(os.str());
}

void ApplyUpdate(TrainState& s, const StepGradients& g, double lr_nerf,
                 double lr_pose, double lr_focal) {
  const std::vector<Parameter*> nerf = s.field.parameter_ptrs();
  AdamStep(nerf, g.nerf, s.nerf_adam, lr_nerf, s.config.adam);
  Parameter* pose[] = {&s.phi, &s.t};
  const Matrix pose_grads[] = {g.phi, g.t};
  AdamStep(pose, pose_grads, s.pose_adam, lr_pose, s.config.adam);
  Parameter* focal[] = {&s.focal};
  AdamStep(focal, std::span<const Matrix>(&g.focal, 1), s.focal_adam, lr_focal,
           s.config.adam);
}

}  // namespace

EpochStats TrainEpoch(TrainState& state, std::span<const Image> images,
                      const GradientObserver& observer) {
  const auto start = std::chrono::steady_clock::now();
  const int n = state.camera_count();
  if (static_cast<int>(images.size()) != n) {
    throw std::invalid_argument("train: " + std::to_string(images.size()) +
                                " images for " + std::to_string(n) + " cameras");
  }
  for (const Image& im : images) {
    if (im.width != state.width || im.height != state.height) {
      throw std::invalid_argument("train: image size does not match the state");
    }
  }
  const TrainConfig& cfg = state.config;
  EpochStats stats;
  stats.epoch = state.epoch;
  stats.lr_nerf = cfg.LrNerf(state.epoch);
  stats.lr_pose = cfg.LrPose(state.epoch);
  stats.lr_focal = cfg.LrFocal(state.epoch);
  const uint64_t phase = static_cast<uint64_t>(state.phase);
  const uint64_t epoch = static_cast<uint64_t>(state.epoch);

  StepGradients total;
  for (int i = 0; i < n; ++i) {
    std::mt19937_64 pixel_rng = MakeRng(cfg.seed, RngPurpose::kPixels,
                                        {phase, epoch, static_cast<uint64_t>(i)});
    const std::vector<int> pixels = SamplePixels(
        state.width, state.height, cfg.pixels_per_image, pixel_rng);
    const uint64_t jitter_key =
        SplitMix64(SplitMix64(phase ^ SplitMix64(epoch)) ^ static_cast<uint64_t>(i));
    StepGradients g =
        ComputeImageGradients(state, images[static_cast<size_t>(i)], i, pixels,
                              jitter_key);
    CheckFinite(g, state.epoch);
    if (observer) observer(g);
    stats.loss += g.loss / n;
    if (cfg.update_mode == UpdateMode::kPerImage) {
      ApplyUpdate(state, g, stats.lr_nerf, stats.lr_pose, stats.lr_focal);
    } else if (i == 0) {
      total = std::move(g);
    } else {
      total.loss += g.loss;
      for (size_t p = 0; p < total.nerf.size(); ++p) total.nerf[p] += g.nerf[p];
      total.phi += g.phi;
      total.t += g.t;
      total.focal += g.focal;
    }
  }
  if (cfg.update_mode == UpdateMode::kWholeBatch) {
    const double inv = 1.0 / n;
    for (Matrix& m : total.nerf) m *= inv;
    total.phi *= inv;
    total.t *= inv;
    total.focal *= inv;
    ApplyUpdate(state, total, stats.lr_nerf, stats.lr_pose, stats.lr_focal);
  }
  state.loss_history.push_back(stats.loss);
  ++state.epoch;
  stats.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return stats;
}

}  // namespace jointnerf
