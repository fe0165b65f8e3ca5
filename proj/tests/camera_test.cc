#include "jointnerf/camera.h"

#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "test_util.h"

namespace jointnerf {
namespace {

using testing::NumericGradient;
using testing::RelativeError;

Eigen::Vector3d RandomAxisAngle(std::mt19937_64& rng, double max_angle) {
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u(0.0, max_angle);
  return Eigen::Vector3d(n(rng), n(rng), n(rng)).normalized() * u(rng);
}

TEST(RodriguesTest, ZeroIsIdentity) {
  EXPECT_EQ(RodriguesExp(Eigen::Vector3d::Zero().eval()), Eigen::Matrix3d::Identity());
}

TEST(RodriguesTest, QuarterTurnAboutXMatchesQuaternion) {
  const Eigen::Vector3d phi(std::numbers::pi / 2, 0, 0);
  const Eigen::Matrix3d r = RodriguesExp(phi);
  const Eigen::Matrix3d q =
      Eigen::AngleAxisd(std::numbers::pi / 2, Eigen::Vector3d::UnitX()).toRotationMatrix();
  EXPECT_LT((r - q).norm(), 1e-15);
  EXPECT_LT((r * Eigen::Vector3d::UnitY() - Eigen::Vector3d::UnitZ()).norm(), 1e-15);
}

TEST(RodriguesTest, MatchesQuaternionOracleOnRandomInputs) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d phi = RandomAxisAngle(rng, std::numbers::pi);
    const Eigen::Matrix3d q =
        Eigen::AngleAxisd(phi.norm(), phi.normalized()).toRotationMatrix();
    EXPECT_LT((RodriguesExp(phi) - q).norm(), 1e-13);
  }
}

TEST(RodriguesTest, TraceRecoversAngle) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d phi = RandomAxisAngle(rng, std::numbers::pi * 0.999);
    const Eigen::Matrix3d r = RodriguesExp(phi);
    EXPECT_NEAR(std::acos((r.trace() - 1) / 2), phi.norm(), 1e-9);
  }
}

TEST(RodriguesTest, NegatedAxisGivesTranspose) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d phi = RandomAxisAngle(rng, std::numbers::pi);
    EXPECT_LT((RodriguesExp((-phi).eval()) - RodriguesExp(phi).transpose()).norm(), 1e-14);
  }
}

TEST(RodriguesTest, SmallAngleBranchIsOrthonormal) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d phi = RandomAxisAngle(rng, 1e-7);
    const Eigen::Matrix3d r = RodriguesExp(phi);
    EXPECT_LT((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-9);
    EXPECT_LT((RotationLog(r) - phi).norm(), 1e-12);
  }
}

TEST(RodriguesTest, BranchesAgreeAtTheThreshold) {
  const Eigen::Vector3d axis = Eigen::Vector3d(1, 2, 3).normalized();
  const Eigen::Matrix3d below = RodriguesExp((axis * kSmallAngle * 0.999).eval());
  const Eigen::Matrix3d above = RodriguesExp((axis * kSmallAngle * 1.001).eval());
  EXPECT_LT((below - above).norm(), 1e-8);
}

TEST(RotationLogTest, RoundTripsThroughExp) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Vector3d phi = RandomAxisAngle(rng, std::numbers::pi * 0.9999);
    EXPECT_LT((RotationLog(RodriguesExp(phi)) - phi).norm(), 1e-9);
  }
}

TEST(RotationLogTest, HalfTurnHasAnglePi) {
  const Eigen::Matrix3d r = Eigen::AngleAxisd(std::numbers::pi, Eigen::Vector3d::UnitY())
                                .toRotationMatrix();
  EXPECT_NEAR(RotationLog(r).norm(), std::numbers::pi, 1e-12);
  EXPECT_LT((RodriguesExp(RotationLog(r)) - r).norm(), 1e-12);
}

TEST(IntrinsicsTest, FocalFromSquareRootScale) {
  const Intrinsics intr{1.1, 0.9, 1000, 500};
  EXPECT_DOUBLE_EQ(intr.fx(), 1.1 * 1.1 * 1000);
  EXPECT_DOUBLE_EQ(intr.fy(), 0.9 * 0.9 * 500);
  EXPECT_EQ(intr.cx(), 500.0);
  EXPECT_EQ(intr.cy(), 250.0);
  const Intrinsics back = Intrinsics::FromFocal(intr.fx(), intr.fy(), 1000, 500);
  EXPECT_NEAR(back.sx_root, 1.1, 1e-15);
  EXPECT_NEAR(back.sy_root, 0.9, 1e-15);
}

TEST(InitCamerasTest, IdentityPosesAndImageSizedFocal) {
  const CameraSet set = InitCameras(3, 64, 64);
  ASSERT_EQ(set.poses.size(), 3u);
  for (const Extrinsics& e : set.poses) {
    EXPECT_EQ(e.Rotation(), Eigen::Matrix3d::Identity());
    EXPECT_EQ(e.t, Eigen::Vector3d::Zero());
  }
  EXPECT_EQ(set.intrinsics.fx(), 64.0);
  EXPECT_EQ(set.intrinsics.fy(), 64.0);
  // Horizontal field of view 2 atan(1/2), about 53 degrees.
  EXPECT_NEAR(2 * std::atan(0.5 * 64 / set.intrinsics.fx()) * 180 / std::numbers::pi,
              53.13, 0.01);
  EXPECT_EQ(InitCameras(1, 8, 8).poses.size(), 1u);
  EXPECT_THROW(InitCameras(0, 8, 8), CameraError);
}

TEST(RayForPixelTest, PrincipalPointLooksDownNegativeZ) {
  const Intrinsics intr{1.0, 1.0, 64, 48};
  const Ray ray = RayForPixel(32, 24, intr, Extrinsics{});
  EXPECT_EQ(ray.origin, Eigen::Vector3d::Zero());
  EXPECT_LT((ray.direction - Eigen::Vector3d(0, 0, -1)).norm(), 1e-15);
}

TEST(RayForPixelTest, OneFocalLengthRightIsFortyFiveDegrees) {
  // A focal of W/4 keeps u = W/2 + fx inside the image.
  const Intrinsics intr{0.5, 0.5, 64, 64};
  ASSERT_EQ(intr.fx(), 16.0);
  const Ray ray = RayForPixel(32 + 16, 32, intr, Extrinsics{});
  EXPECT_LT((ray.direction - Eigen::Vector3d(1, 0, -1).normalized()).norm(), 1e-15);
  EXPECT_NEAR(ray.direction.norm(), 1.0, 1e-15);
}

TEST(RayForPixelTest, HalfTurnAboutZNegatesX) {
  const Intrinsics intr{1.0, 1.0, 64, 64};
  Extrinsics turned;
  turned.phi = Eigen::Vector3d(0, 0, std::numbers::pi);
  const Ray a = RayForPixel(40, 20, intr, Extrinsics{});
  const Ray b = RayForPixel(40, 20, intr, turned);
  EXPECT_NEAR(b.direction.x(), -a.direction.x(), 1e-15);
  EXPECT_NEAR(b.direction.z(), a.direction.z(), 1e-15);
}

TEST(RayForPixelTest, RejectsOutOfBoundsPixels) {
  const Intrinsics intr{1.0, 1.0, 8, 8};
  EXPECT_THROW(RayForPixel(8, 0, intr, Extrinsics{}), CameraError);
  EXPECT_THROW(RayForPixel(0, -0.5, intr, Extrinsics{}), CameraError);
  EXPECT_NO_THROW(RayForPixel(7.9, 7.9, intr, Extrinsics{}));
}

TEST(RayForPixelTest, EquivariantUnderRigidTransforms) {
  std::mt19937_64 rng(6);
  const Intrinsics intr{0.9, 1.2, 40, 30};
  for (int i = 0; i < 20; ++i) {
    const Extrinsics pose{RandomAxisAngle(rng, 3.0), Eigen::Vector3d::Random()};
    const Eigen::Matrix3d r0 = RodriguesExp(RandomAxisAngle(rng, 3.0));
    const Eigen::Vector3d t0 = Eigen::Vector3d::Random();
    const Extrinsics moved =
        Extrinsics::FromRotation(r0 * pose.Rotation(), r0 * pose.t + t0);
    const Ray a = RayForPixel(13, 7, intr, pose);
    const Ray b = RayForPixel(13, 7, intr, moved);
    EXPECT_LT((b.direction - r0 * a.direction).norm(), 1e-12);
    EXPECT_LT((b.origin - (r0 * a.origin + t0)).norm(), 1e-12);
  }
}

TEST(BuildRaysTest, MatchesRayForPixel) {
  std::mt19937_64 rng(7);
  const Intrinsics intr{0.8, 1.3, 32, 24};
  const Extrinsics pose{RandomAxisAngle(rng, 3.0), Eigen::Vector3d(0.3, -1, 2)};
  const std::vector<Pixel> pixels{{0, 0}, {31, 23}, {16, 12}, {5.5, 20.25}};
  Graph g;
  Matrix focal(1, 2);
  focal << intr.sx_root, intr.sy_root;
  const RayBundle rays =
      BuildRays(g, g.Constant(pose.phi.transpose()), g.Constant(pose.t.transpose()),
                g.Constant(focal), pixels, intr.width, intr.height);
  for (size_t i = 0; i < pixels.size(); ++i) {
    const Ray r = RayForPixel(pixels[i].u, pixels[i].v, intr, pose);
    const auto row = static_cast<Eigen::Index>(i);
    EXPECT_LT((rays.directions.value().row(row).transpose() - r.direction).norm(), 1e-14);
    EXPECT_LT((rays.origins.value().row(row).transpose() - r.origin).norm(), 1e-15);
  }
}

TEST(BuildRaysTest, GraphRodriguesMatchesClosedFormBothBranches) {
  for (const Eigen::Vector3d& phi : {Eigen::Vector3d(0.3, -1.2, 0.5),
                                     Eigen::Vector3d(1e-8, 0, -2e-8),
                                     Eigen::Vector3d::Zero().eval()}) {
    Graph g;
    const Tensor p = g.Constant(phi.transpose());
    const Matrix r = RodriguesExp(g, p, false).value();
    const Matrix rt = RodriguesExp(g, p, true).value();
    EXPECT_LT((r - Matrix(RodriguesExp(phi))).norm(), 1e-15);
    EXPECT_LT((rt - Matrix(RodriguesExp(phi).transpose())).norm(), 1e-15);
  }
}

// Every direction component against central differences in phi, t and the
// focal roots, including at phi = 0 where training starts.
TEST(BuildRaysTest, GradientsMatchFiniteDifferences) {
  const std::vector<Pixel> pixels{{3, 4}, {10, 1}, {7.5, 9}};
  for (const Eigen::Vector3d& phi0 :
       {Eigen::Vector3d(0.4, -0.2, 0.9), Eigen::Vector3d::Zero().eval()}) {
    Parameter phi{"phi", phi0.transpose()};
    Parameter t{"t", Matrix(1, 3)};
    t.value << 0.1, -0.4, 0.7;
    Parameter focal{"focal", Matrix(1, 2)};
    focal.value << 1.1, 0.85;
    Matrix weights(3, 3);
    weights << 0.3, -1.1, 0.7, 0.2, 0.9, -0.5, 1.3, 0.4, -0.8;
    auto loss = [&](Graph& g, Tensor& lp, Tensor& lt, Tensor& lf) {
      lp = g.Leaf(phi);
      lt = g.Leaf(t);
      lf = g.Leaf(focal);
      const RayBundle rays = BuildRays(g, lp, lt, lf, pixels, 12, 10);
      const Tensor w = g.Constant(weights);
      return Sum(Add(Mul(rays.directions, w), Mul(rays.origins, w)), Axis::kAll);
    };
    Graph g;
    Tensor lp, lt, lf;
    g.Backward(loss(g, lp, lt, lf));
    auto f = [&] {
      Graph h;
      Tensor a, b, c;
      return loss(h, a, b, c).value()(0, 0);
    };
    EXPECT_LT(RelativeError(g.Grad(lp), NumericGradient(f, phi.value)), 1e-6);
    EXPECT_LT(RelativeError(g.Grad(lt), NumericGradient(f, t.value)), 1e-6);
    EXPECT_LT(RelativeError(g.Grad(lf), NumericGradient(f, focal.value)), 1e-6);
  }
}

TEST(CameraFileTest, RoundTripIsExact) {
  std::mt19937_64 rng(8);
  CameraFile file;
  file.intrinsics = Intrinsics{1.0954451150103321, 0.98, 64, 48};
  for (int i = 0; i < 4; ++i) {
    file.poses.push_back({"img_" + std::to_string(i) + ".ppm",
                          Extrinsics{RandomAxisAngle(rng, 3.0), Eigen::Vector3d::Random()}});
  }
  const CameraFile back = ParseCameraText(FormatCameraText(file));
  ASSERT_TRUE(back.intrinsics.has_value());
  EXPECT_EQ(back.intrinsics->sx_root, file.intrinsics->sx_root);
  EXPECT_EQ(back.intrinsics->width, 64);
  ASSERT_EQ(back.poses.size(), file.poses.size());
  for (size_t i = 0; i < file.poses.size(); ++i) {
    EXPECT_EQ(back.poses[i].name, file.poses[i].name);
    EXPECT_EQ(back.poses[i].pose.phi, file.poses[i].pose.phi);
    EXPECT_EQ(back.poses[i].pose.t, file.poses[i].pose.t);
  }
}

TEST(CameraFileTest, CommentsAndBlankLinesAreIgnored) {
  const CameraFile f = ParseCameraText(
      "# header\n\n1 1 8 8  # intrinsics\na.ppm 0 0 0 1 2 3\n   \n");
  ASSERT_EQ(f.poses.size(), 1u);
  EXPECT_EQ(f.poses[0].pose.t, Eigen::Vector3d(1, 2, 3));
}

TEST(CameraFileTest, MalformedLineReportsLineNumber) {
  try {
    ParseCameraText("# ok\na.ppm 0 0 0 1 2 3\nb.ppm 0 0 zero 1 2 3\n");
    FAIL() << "expected CameraError";
  } catch (const CameraError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(ParseCameraText("a.ppm 1 2\n"), CameraError);
}

}  // namespace
}  // namespace jointnerf
