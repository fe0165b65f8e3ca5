#include "jointnerf/eval.h"

#include <numeric>

#include <Eigen/SVD>

#include "jointnerf/adam.h"
#include "jointnerf/parallel.h"
#include "jointnerf/rng.h"
#include "jointnerf/trainer.h"

namespace jointnerf {

namespace {

Eigen::Matrix3Xd Centers(std::span<const Extrinsics> poses) {
  Eigen::Matrix3Xd c(3, static_cast<Eigen::Index>(poses.size()));
  for (size_t i = 0; i < poses.size(); ++i) c.col(static_cast<Eigen::Index>(i)) = poses[i].t;
  return c;
}

void CheckPair(std::span<const Extrinsics> a, std::span<const Extrinsics> b) {
  if (a.size() != b.size()) {
    throw EvalError("trajectories differ in length: " + std::to_string(a.size()) +
                    " vs " + std::to_string(b.size()));
  }
}

constexpr double kRadToDeg = 180.0 / 3.14159265358979323846;

}  // namespace

Sim3<double> Sim3Align(std::span<const Extrinsics> estimate,
                       std::span<const Extrinsics> reference) {
  CheckPair(estimate, reference);
  if (estimate.size() < 3) throw EvalError("sim3 alignment needs at least 3 poses");
  const Eigen::Matrix3Xd src = Centers(estimate);
  const Eigen::Matrix3Xd dst = Centers(reference);
  for (const Eigen::Matrix3Xd* pts : {&src, &dst}) {
    const Eigen::Matrix3Xd centered = pts->colwise() - pts->rowwise().mean();
    const Eigen::Vector3d sv = Eigen::JacobiSVD<Eigen::Matrix3d>(
                                   centered * centered.transpose()).singularValues();
    if (!(sv(0) > 1e-20) || sv(1) <= 1e-12 * sv(0)) {
      throw EvalError("sim3 alignment: camera centres are coincident or collinear");
    }
  }
  const Eigen::Matrix4d t = Eigen::umeyama(src, dst, true);
  Sim3<double> sim;
  sim.scale = std::cbrt(t.topLeftCorner<3, 3>().determinant());
  sim.rotation = t.topLeftCorner<3, 3>() / sim.scale;
  sim.translation = t.topRightCorner<3, 1>();
  return sim;
}

double AlignmentResidual(const Sim3<double>& sim,
                         std::span<const Extrinsics> estimate,
                         std::span<const Extrinsics> reference) {
  CheckPair(estimate, reference);
  double sum = 0.0;
  for (size_t i = 0; i < estimate.size(); ++i) {
    sum += (sim * estimate[i].t - reference[i].t).squaredNorm();
  }
  return estimate.empty() ? 0.0 : std::sqrt(sum / estimate.size());
}

AteMetrics ComputeAteUnaligned(std::span<const Extrinsics> estimate,
                               std::span<const Extrinsics> reference) {
  CheckPair(estimate, reference);
  if (estimate.empty()) throw EvalError("ate: empty trajectory");
  AteMetrics m;
  for (size_t i = 0; i < estimate.size(); ++i) {
    m.rotation_deg += RotationAngleBetween(estimate[i].Rotation(),
                                           reference[i].Rotation()) * kRadToDeg;
    m.translation += (estimate[i].t - reference[i].t).norm();
  }
  m.rotation_deg /= estimate.size();
  m.translation /= estimate.size();
  return m;
}

AteMetrics ComputeAte(std::span<const Extrinsics> estimate,
                      std::span<const Extrinsics> reference) {
  const Sim3<double> sim = Sim3Align(estimate, reference);
  std::vector<Extrinsics> aligned;
  aligned.reserve(estimate.size());
  for (const Extrinsics& e : estimate) aligned.push_back(sim.Apply(e));
  AteMetrics m = ComputeAteUnaligned(aligned, reference);
  m.alignment = sim;
  return m;
}

double TrajectoryDiameter(std::span<const Extrinsics> poses) {
  double d = 0.0;
  for (size_t i = 0; i < poses.size(); ++i) {
    for (size_t j = i + 1; j < poses.size(); ++j) {
      d = std::max(d, (poses[i].t - poses[j].t).norm());
    }
  }
  return d;
}

namespace {

void CheckSameSize(const Image& a, const Image& b, const char* what) {
  if (a.width != b.width || a.height != b.height) {
    throw EvalError(std::string(what) + ": image sizes differ (" +
                    std::to_string(a.width) + "x" + std::to_string(a.height) +
                    " vs " + std::to_string(b.width) + "x" +
                    std::to_string(b.height) + ")");
  }
}

// Valid-mode separable filtering of `img` with `k`.
Eigen::MatrixXd FilterValid(const Eigen::MatrixXd& img, const Eigen::VectorXd& k) {
  const Eigen::Index n = k.size();
  const Eigen::Index rows = img.rows() - n + 1;
  const Eigen::Index cols = img.cols() - n + 1;
  Eigen::MatrixXd horiz(img.rows(), cols);
  for (Eigen::Index c = 0; c < cols; ++c) horiz.col(c) = img.middleCols(c, n) * k;
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    out.row(r) = k.transpose() * horiz.middleRows(r, n);
  }
  return out;
}

Eigen::MatrixXd Luminance(const Image& im) {
  Eigen::MatrixXd y(im.height, im.width);
  for (int v = 0; v < im.height; ++v) {
    for (int u = 0; u < im.width; ++u) y(v, u) = im.pixel(u, v).mean();
  }
  return y;
}

}  // namespace

double Psnr(const Image& a, const Image& b) {
  CheckSameSize(a, b, "psnr");
  const double mse = (a.rgb - b.rgb).squaredNorm() / static_cast<double>(a.rgb.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

double Ssim(const Image& a, const Image& b) {
  CheckSameSize(a, b, "ssim");
  constexpr int kWindow = 11;
  constexpr double kSigma = 1.5;
  if (a.width < kWindow || a.height < kWindow) {
    throw EvalError("ssim: images must be at least 11x11");
  }
  Eigen::VectorXd k(kWindow);
  for (int i = 0; i < kWindow; ++i) {
    const double x = i - (kWindow - 1) / 2.0;
    k(i) = std::exp(-x * x / (2 * kSigma * kSigma));
  }
  k /= k.sum();
  const double c1 = 0.01 * 0.01;
  const double c2 = 0.03 * 0.03;
  const Eigen::MatrixXd x = Luminance(a);
  const Eigen::MatrixXd y = Luminance(b);
  const Eigen::ArrayXXd mx = FilterValid(x, k).array();
  const Eigen::ArrayXXd my = FilterValid(y, k).array();
  const Eigen::ArrayXXd sxx = FilterValid(x.cwiseProduct(x), k).array() - mx * mx;
  const Eigen::ArrayXXd syy = FilterValid(y.cwiseProduct(y), k).array() - my * my;
  const Eigen::ArrayXXd sxy = FilterValid(x.cwiseProduct(y), k).array() - mx * my;
  const Eigen::ArrayXXd map = ((2 * mx * my + c1) * (2 * sxy + c2)) /
                              ((mx * mx + my * my + c1) * (sxx + syy + c2));
  return map.mean();
}

FocalError ComputeFocalError(const Intrinsics& estimate, const Intrinsics& reference) {
  return {std::abs(estimate.fx() - reference.fx()),
          std::abs(estimate.fy() - reference.fy())};
}

PoseAlignResult TestTimePoseAlign(const RadianceField& field,
                                  const Intrinsics& intrinsics,
                                  const RenderSettings& settings,
                                  const Image& target, const Extrinsics& init,
                                  const PoseAlignOptions& options) {
  if (target.width != intrinsics.width || target.height != intrinsics.height) {
    throw EvalError("pose alignment: target image does not match intrinsics");
  }
  const int total = target.width * target.height;
  std::vector<int> pixels;
  if (options.pixels >= total) {
    pixels.resize(static_cast<size_t>(total));
    std::iota(pixels.begin(), pixels.end(), 0);
  } else {
    std::mt19937_64 rng = MakeRng(options.seed, RngPurpose::kAlign);
    pixels = SamplePixels(target.width, target.height, options.pixels, rng);
  }
  const int m = static_cast<int>(pixels.size());
  const int chunk = std::max(1, options.chunk_rays);
  const int chunks = (m + chunk - 1) / chunk;
  const Matrix depths_all =
      SampleDepths(chunk, settings.near, settings.far, settings.samples, false, nullptr);
  Parameter focal{"focal", Matrix(1, 2)};
  focal.value << intrinsics.sx_root, intrinsics.sy_root;
  Parameter phi{"phi", init.phi.transpose()};
  Parameter t{"t", init.t.transpose()};

  struct Eval {
    double loss;
    Matrix dphi, dt;
  };
  auto evaluate = [&]() {
    std::vector<Eval> parts(static_cast<size_t>(chunks));
    ParallelFor(chunks, options.threads, [&](int c) {
      const int begin = c * chunk;
      const int count = std::min(m, begin + chunk) - begin;
      std::vector<Pixel> px(static_cast<size_t>(count));
      Matrix rgb(count, 3);
      for (int k = 0; k < count; ++k) {
        const int idx = pixels[static_cast<size_t>(begin + k)];
        px[static_cast<size_t>(k)] = {static_cast<double>(idx % target.width),
                                      static_cast<double>(idx / target.width)};
        rgb.row(k) = target.rgb.row(idx);
      }
      Graph graph;
      const Tensor phi_leaf = graph.Leaf(phi);
      const Tensor t_leaf = graph.Leaf(t);
      const RayBundle rays =
          BuildRays(graph, phi_leaf, t_leaf, graph.Leaf(focal, false), px,
                    target.width, target.height);
      const std::vector<Tensor> leaves = field.Bind(graph, false);
      const RenderTensors r = RenderRays(graph, field, leaves, rays,
                                         depths_all.topRows(count), settings);
      const Tensor diff = Sub(r.color, graph.Constant(std::move(rgb)));
      const Tensor loss = Mul(Sum(Mul(diff, diff), Axis::kAll), 1.0 / (3.0 * m));
      graph.Backward(loss);
      parts[static_cast<size_t>(c)] = {loss.value()(0, 0), graph.Grad(phi_leaf),
                                       graph.Grad(t_leaf)};
    });
    Eval e = parts[0];
    for (size_t c = 1; c < parts.size(); ++c) {
      e.loss += parts[c].loss;
      e.dphi += parts[c].dphi;
      e.dt += parts[c].dt;
    }
    return e;
  };

  PoseAlignResult result;
  result.pose = init;
  Parameter* params[] = {&phi, &t};
  const Parameter* cparams[] = {&phi, &t};
  AdamState adam = MakeAdamState(cparams);
  double previous = 0.0;
  int increases = 0;
  for (int it = 0; it <= options.iterations; ++it) {
    const Eval e = evaluate();
    if (!std::isfinite(e.loss)) {
      result.diverged = true;
      break;
    }
    if (it == 0) {
      result.initial_loss = result.best_loss = e.loss;
    } else {
      increases = e.loss > previous ? increases + 1 : 0;
      if (e.loss < result.best_loss) {
        result.best_loss = e.loss;
        result.pose = Extrinsics{phi.value.row(0).transpose(), t.value.row(0).transpose()};
      }
    }
    previous = e.loss;
    result.iterations = it;
    if (increases >= options.patience) {
      result.diverged = true;
      break;
    }
    if (it == options.iterations) break;
    const double lr = LearningRateAt(it, options.lr, options.decay, options.decay_every);
    const Matrix grads[] = {e.dphi, e.dt};
    AdamStep(params, grads, adam, lr);
  }
  return result;
}

}  // namespace jointnerf
