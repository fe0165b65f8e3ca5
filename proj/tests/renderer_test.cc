#include "jointnerf/renderer.h"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "test_util.h"

namespace jointnerf {
namespace {

using testing::NumericGradient;
using testing::RelativeError;

Ray UnitRay() { return Ray{Eigen::Vector3d::Zero(), Eigen::Vector3d(0, 0, -1), 0.0, 1.0}; }

// Density `sigma` and colour `gray` on depths [lo, hi] of UnitRay().
auto Slab(double lo, double hi, double sigma, double gray) {
  return [=](const Eigen::Vector3d& p, const Eigen::Vector3d&) {
    const double h = -p.z();
    const bool inside = h >= lo && h <= hi;
    return FieldSample{Eigen::Vector3d::Constant(gray), inside ? sigma : 0.0};
  };
}

// Smooth blob with spatially varying colour.
FieldSample Blob(const Eigen::Vector3d& p, const Eigen::Vector3d&) {
  const double h = -p.z();
  return FieldSample{Eigen::Vector3d(0.5 + 0.4 * std::sin(6 * h), 0.3 + 0.2 * h, 0.8 - 0.5 * h * h),
                     4.0 * std::exp(-40.0 * (h - 0.5) * (h - 0.5))};
}

TEST(SampleAlongRayTest, MidpointsWithoutJitter) {
  const RaySamples s = SampleAlongRay(UnitRay(), 2, false, nullptr);
  ASSERT_EQ(s.depths.size(), 2u);
  EXPECT_DOUBLE_EQ(s.depths[0], 0.25);
  EXPECT_DOUBLE_EQ(s.depths[1], 0.75);
  EXPECT_LT((s.points[1] - Eigen::Vector3d(0, 0, -0.75)).norm(), 1e-15);
  EXPECT_FALSE(s.jittered);
}

TEST(SampleAlongRayTest, JitterStaysInsideBins) {
  std::mt19937_64 rng(1);
  Ray ray = UnitRay();
  ray.near = 0.5;
  ray.far = 4.0;
  const RaySamples s = SampleAlongRay(ray, 128, true, &rng);
  const double bin = 3.5 / 128;
  for (size_t j = 0; j < s.depths.size(); ++j) {
    EXPECT_GE(s.depths[j], 0.5 + j * bin);
    EXPECT_LE(s.depths[j], 0.5 + (j + 1) * bin);
    if (j > 0) EXPECT_GT(s.depths[j], s.depths[j - 1]);
  }
}

TEST(SampleAlongRayTest, SameSeedSameSamples) {
  std::mt19937_64 a(5), b(5);
  EXPECT_EQ(SampleAlongRay(UnitRay(), 16, true, &a).depths,
            SampleAlongRay(UnitRay(), 16, true, &b).depths);
}

TEST(SampleAlongRayTest, RejectsBadArguments) {
  Ray ray = UnitRay();
  ray.near = 1.0;
  EXPECT_THROW(SampleAlongRay(ray, 8, false, nullptr), RenderError);
  EXPECT_THROW(SampleAlongRay(UnitRay(), 1, false, nullptr), RenderError);
  EXPECT_THROW(SampleAlongRay(UnitRay(), 8, true, nullptr), RenderError);
}

TEST(CompositeTest, EmptySpaceIsBlack) {
  const std::vector<double> sigma(8, 0.0), depth{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
  const std::vector<Eigen::Vector3d> rgb(8, Eigen::Vector3d(0.2, 0.4, 0.6));
  const RenderOutput out = Composite(sigma, rgb, depth, 1.0);
  EXPECT_EQ(out.color, Eigen::Vector3d::Zero());
  EXPECT_EQ(out.depth, 0.0);
  EXPECT_EQ(out.transmittance_far, 1.0);
  for (double w : out.weights) EXPECT_EQ(w, 0.0);
}

TEST(CompositeTest, EmptySpaceShowsConfiguredBackground) {
  const std::vector<double> sigma(2, 0.0), depth{0.25, 0.75};
  const std::vector<Eigen::Vector3d> rgb(2, Eigen::Vector3d::Zero());
  EXPECT_EQ(Composite(sigma, rgb, depth, 1.0, Eigen::Vector3d::Ones()).color, Eigen::Vector3d::Ones());
}

TEST(CompositeTest, OpaqueFirstSampleTakesItsColour) {
  const std::vector<double> sigma{1e9, 3.0, 5.0}, depth{0.2, 0.5, 0.8};
  const std::vector<Eigen::Vector3d> rgb{{0.9, 0.1, 0.3}, {0, 1, 0}, {1, 1, 1}};
  const RenderOutput out = Composite(sigma, rgb, depth, 1.0);
  EXPECT_LT((out.color - rgb[0]).norm(), 1e-12);
  EXPECT_NEAR(out.weights[0], 1.0, 1e-12);
  EXPECT_NEAR(out.depth, 0.2, 1e-12);
}

TEST(CompositeTest, ConstantDensityTransmittance) {
  const RaySamples s = SampleAlongRay(UnitRay(), 128, false, nullptr);
  const std::vector<double> sigma(128, 1.0);
  const std::vector<Eigen::Vector3d> rgb(128, Eigen::Vector3d::Ones());
  const RenderOutput out = Composite(sigma, rgb, s.depths, 1.0);
  EXPECT_NEAR(out.transmittance_far, std::exp(-1.0), 1e-2);
}

TEST(CompositeTest, WeightsAndTransmittancePartitionUnity) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 20.0);
  for (int trial = 0; trial < 50; ++trial) {
    const RaySamples s = SampleAlongRay(UnitRay(), 64, true, &rng);
    std::vector<double> sigma(64);
    for (double& x : sigma) x = u(rng);
    const std::vector<Eigen::Vector3d> rgb(64, Eigen::Vector3d::Ones());
    const RenderOutput out = Composite(sigma, rgb, s.depths, 1.0);
    double total = out.transmittance_far;
    for (double w : out.weights) {
      EXPECT_GE(w, 0.0);
      total += w;
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(CompositeTest, MoreDensityNeverLowersEarlierOpacity) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  const RaySamples s = SampleAlongRay(UnitRay(), 16, false, nullptr);
  const std::vector<Eigen::Vector3d> rgb(16, Eigen::Vector3d::Ones());
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> sigma(16);
    for (double& x : sigma) x = u(rng);
    const RenderOutput before = Composite(sigma, rgb, s.depths, 1.0);
    const size_t j = static_cast<size_t>(trial % 16);
    sigma[j] += 3.0;
    const RenderOutput after = Composite(sigma, rgb, s.depths, 1.0);
    double a = 0.0, b = 0.0;
    for (size_t k = 0; k <= j; ++k) {
      a += before.weights[k];
      b += after.weights[k];
    }
    EXPECT_GE(b, a - 1e-15);
  }
}

TEST(CompositeTest, RejectsMismatchedOrUnsortedInput) {
  const std::vector<Eigen::Vector3d> rgb(2, Eigen::Vector3d::Zero());
  EXPECT_THROW(Composite(std::vector<double>{1.0}, rgb, std::vector<double>{0.1, 0.2}, 1.0), RenderError);
  EXPECT_THROW(Composite(std::vector<double>{1.0, 1.0}, rgb, std::vector<double>{0.2, 0.1}, 1.0), RenderError);
}

TEST(CompositeTest, GraphVersionMatchesPlainAndDifferentiates) {
  std::mt19937_64 rng(4);
  const int m = 3, s = 6;
  Matrix depths = SampleDepths(m, 0.5, 2.0, s, true, &rng);
  Parameter sigma{"sigma", testing::RandomMatrix(s * m, 1, rng, 0.0, 3.0)};
  Parameter rgb{"rgb", testing::RandomMatrix(s * m, 3, rng, 0.0, 1.0)};
  const Eigen::Vector3d bg(0.2, 0.3, 0.9);
  Graph g;
  const Tensor ls = g.Leaf(sigma), lc = g.Leaf(rgb);
  const RenderTensors out = Composite(g, ls, lc, depths, 2.0, bg);
  for (int r = 0; r < m; ++r) {
    std::vector<double> sg(s), dp(s);
    std::vector<Eigen::Vector3d> cl(s);
    for (int j = 0; j < s; ++j) {
      sg[j] = sigma.value(j * m + r, 0);
      cl[j] = rgb.value.row(j * m + r).transpose();
      dp[j] = depths(r, j);
    }
    const RenderOutput ref = Composite(sg, cl, dp, 2.0, bg);
    EXPECT_LT((out.color.value().row(r).transpose() - ref.color).norm(), 1e-14);
    EXPECT_NEAR(out.depth.value()(r, 0), ref.depth, 1e-14);
    EXPECT_NEAR(out.transmittance_far.value()(r, 0), ref.transmittance_far, 1e-14);
    EXPECT_NEAR(out.opacity.value()(r, 0), 1.0 - ref.transmittance_far, 1e-14);
  }
  const Matrix w = testing::RandomMatrix(m, 3, rng);
  auto loss = [&](Graph& h, Tensor& a, Tensor& b) {
    a = h.Leaf(sigma);
    b = h.Leaf(rgb);
    const RenderTensors o = Composite(h, a, b, depths, 2.0, bg);
    return Add(Sum(Mul(o.color, h.Constant(w)), Axis::kAll), Sum(o.depth, Axis::kAll));
  };
  Graph h;
  Tensor a, b;
  h.Backward(loss(h, a, b));
  auto f = [&] {
    Graph k;
    Tensor x, y;
    return loss(k, x, y).value()(0, 0);
  };
  EXPECT_LT(RelativeError(h.Grad(a), NumericGradient(f, sigma.value)), 1e-6);
  EXPECT_LT(RelativeError(h.Grad(b), NumericGradient(f, rgb.value)), 1e-6);
}

TEST(AnalyticRenderTest, SlabMatchesClosedFormAndDenseQuadrature) {
  const double gray = 0.5;
  const auto slab = Slab(0.4, 0.6, 1.0, gray);
  const RenderOutput dense = RenderAnalyticRay(UnitRay(), slab, 10000, false, nullptr);
  EXPECT_NEAR(dense.color.x(), (1 - std::exp(-0.2)) * gray, 1e-4);
  const RenderOutput coarse = RenderAnalyticRay(UnitRay(), slab, 512, false, nullptr);
  EXPECT_LT((coarse.color - dense.color).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(AnalyticRenderTest, SmoothFieldConvergesWithSampleCount) {
  const RenderOutput s128 = RenderAnalyticRay(UnitRay(), Blob, 128, false, nullptr);
  const RenderOutput s256 = RenderAnalyticRay(UnitRay(), Blob, 256, false, nullptr);
  const RenderOutput oracle = RenderAnalyticRay(UnitRay(), Blob, 12800, false, nullptr);
  EXPECT_LT((s128.color - s256.color).cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_LT((s128.color - oracle.color).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(RenderPixelTest, ZeroDensityFieldRendersBlack) {
  RadianceField field(FieldConfig::Tiny(), 0);
  for (Parameter& p : field.parameters()) {
    if (p.name.starts_with("sigma")) p.value.setZero();
  }
  RenderSettings settings;
  settings.near = 0.5;
  settings.far = 3.0;
  settings.samples = 16;
  const RenderOutput out = RenderPixel({4, 4}, Intrinsics{1, 1, 8, 8}, Extrinsics{}, field, settings);
  EXPECT_EQ(out.color, Eigen::Vector3d::Zero());
  EXPECT_EQ(out.depth, 0.0);
  EXPECT_EQ(out.transmittance_far, 1.0);
}

TEST(RenderPixelTest, AgreesWithAnalyticRenderOfTheField) {
  const RadianceField field(FieldConfig::Tiny(), 3);
  const Intrinsics intr{1.0, 1.0, 16, 12};
  const Extrinsics pose{Eigen::Vector3d(0.1, -0.2, 0.05), Eigen::Vector3d(0.3, 0.1, 1.0)};
  RenderSettings settings;
  settings.near = 0.2;
  settings.far = 2.5;
  settings.samples = 24;
  const RenderOutput a = RenderPixel({5, 7}, intr, pose, field, settings);
  const Ray ray = RayForPixel(5, 7, intr, pose, settings.near, settings.far);
  const RenderOutput b = RenderAnalyticRay(
      ray, [&](const Eigen::Vector3d& p, const Eigen::Vector3d& d) { return field.Evaluate(p, d); },
      settings.samples, false, nullptr);
  EXPECT_LT((a.color - b.color).norm(), 1e-12);
  EXPECT_NEAR(a.depth, b.depth, 1e-12);
}

TEST(RenderImageTest, IndependentOfThreadCount) {
  const RadianceField field(FieldConfig::Tiny(), 4);
  const Intrinsics intr{1.0, 1.0, 12, 10};
  const Extrinsics pose{Eigen::Vector3d(0.0, 0.1, 0.0), Eigen::Vector3d(0.0, 0.0, 1.5)};
  RenderSettings settings;
  settings.near = 0.5;
  settings.far = 3.0;
  settings.samples = 16;
  const RenderedView a = RenderImage(field, intr, pose, settings, 1, 1024);
  const RenderedView b = RenderImage(field, intr, pose, settings, 3, 1024);
  const RenderedView c = RenderImage(field, intr, pose, settings, 3, 7);
  EXPECT_TRUE(a.color.rgb == b.color.rgb);
  EXPECT_TRUE(a.depth.value == b.depth.value);
  // Chunk size changes the matrix shapes, and with them the kernel's
  // summation order.
  EXPECT_LT((a.color.rgb - c.color.rgb).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((a.depth.value - c.depth.value).cwiseAbs().maxCoeff(), 1e-12);
  const RenderOutput px = RenderPixel({5, 3}, intr, pose, field, settings);
  EXPECT_LT((a.color.pixel(5, 3).transpose() - px.color).norm(), 1e-14);
}

}  // namespace
}  // namespace jointnerf
