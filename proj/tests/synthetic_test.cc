#include "jointnerf/synthetic.h"

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

namespace jointnerf {
namespace {

RenderSettings Bounds(double near, double far, int samples = 64) {
  RenderSettings s;
  s.near = near;
  s.far = far;
  s.samples = samples;
  return s;
}

TEST(PrimitiveTest, SphereAndBoxIntersections) {
  const Ray ray{Eigen::Vector3d(0, 0, 5), Eigen::Vector3d(0, 0, -1), 0, 10};
  const auto s = Primitive::Sphere(Eigen::Vector3d::Zero(), 1.0, 1.0, Eigen::Vector3d::Ones()).Intersect(ray);
  ASSERT_TRUE(s.has_value());
  EXPECT_NEAR(s->first, 4.0, 1e-12);
  EXPECT_NEAR(s->second, 6.0, 1e-12);
  const auto b = Primitive::Box(Eigen::Vector3d(0, 0, 1), Eigen::Vector3d(1, 1, 0.5), 1.0,
                                Eigen::Vector3d::Ones()).Intersect(ray);
  ASSERT_TRUE(b.has_value());
  EXPECT_NEAR(b->first, 3.5, 1e-12);
  EXPECT_NEAR(b->second, 4.5, 1e-12);
  const Ray miss{Eigen::Vector3d(3, 0, 5), Eigen::Vector3d(0, 0, -1), 0, 10};
  EXPECT_FALSE(Primitive::Sphere(Eigen::Vector3d::Zero(), 1.0, 1.0, Eigen::Vector3d::Ones())
                   .Intersect(miss).has_value());
}

TEST(SyntheticSceneTest, OverlapsAddDensityAndWeightColour) {
  SyntheticScene scene;
  scene.primitives.push_back(Primitive::Sphere(Eigen::Vector3d::Zero(), 1.0, 1.0, Eigen::Vector3d(1, 0, 0)));
  scene.primitives.push_back(Primitive::Sphere(Eigen::Vector3d::Zero(), 1.0, 3.0, Eigen::Vector3d(0, 0, 1)));
  const FieldSample s = scene.Evaluate(Eigen::Vector3d::Zero());
  EXPECT_EQ(s.sigma, 4.0);
  EXPECT_LT((s.rgb - Eigen::Vector3d(0.25, 0, 0.75)).norm(), 1e-15);
  EXPECT_EQ(scene.Evaluate(Eigen::Vector3d(2, 0, 0)).sigma, 0.0);
}

TEST(GroundTruthTest, EmptySceneIsBlack) {
  const GroundTruthView v = RenderGroundTruth(SyntheticScene{}, Intrinsics{1, 1, 8, 6},
                                              Extrinsics{}, Bounds(0.5, 3.0), 8);
  EXPECT_TRUE(v.color.rgb.isZero());
  EXPECT_TRUE(v.opacity.value.isZero());
}

TEST(GroundTruthTest, CentredSphereSilhouette) {
  SyntheticScene scene;
  const Eigen::Vector3d rgb(0.2, 0.7, 0.4);
  scene.primitives.push_back(Primitive::Sphere(Eigen::Vector3d(0, 0, -3), 0.5, 1e4, rgb));
  const Intrinsics intr{1, 1, 32, 32};
  const GroundTruthView v = RenderGroundTruth(scene, intr, Extrinsics{}, Bounds(1.0, 5.0), 8);
  EXPECT_LT((v.color.pixel(16, 16).transpose() - rgb).norm(), 1e-9);
  EXPECT_NEAR(v.depth.value(16, 16), 2.5, 1e-3);
  // The silhouette radius is f * tan(asin(r / d)) = 32 * 0.1690 pixels.
  const double radius = 32 * std::tan(std::asin(0.5 / 3.0));
  EXPECT_GT(v.opacity.value(16, 16 + static_cast<int>(radius) - 1), 0.999);
  EXPECT_LT(v.opacity.value(16, 16 + static_cast<int>(radius) + 2), 1e-12);
  EXPECT_LT(v.opacity.value(0, 0), 1e-12);
}

TEST(GroundTruthTest, DeterministicAndConvergedInOversampling) {
  const SyntheticScene scene = SyntheticScene::Random(3);
  const Intrinsics intr = Intrinsics::FromFocal(20, 20, 16, 16);
  const Extrinsics pose = Extrinsics::FromRotation(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0, 0, 2.5));
  const RenderSettings s = Bounds(0.8, 6.0, 32);
  const GroundTruthView a = RenderGroundTruth(scene, intr, pose, s, 8, 1);
  const GroundTruthView b = RenderGroundTruth(scene, intr, pose, s, 8, 3);
  const GroundTruthView c = RenderGroundTruth(scene, intr, pose, s, 16, 1);
  EXPECT_TRUE(a.color.rgb == b.color.rgb);
  EXPECT_LT((a.color.rgb - c.color.rgb).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(GroundTruthTest, SharesTheCompositingRuleOnConstantIntervals) {
  // One slab of constant density: with breakpoints at its faces the
  // quadrature is exact.
  SyntheticScene scene;
  scene.primitives.push_back(Primitive::Box(Eigen::Vector3d(0, 0, -1.5), Eigen::Vector3d(5, 5, 0.25),
                                            2.0, Eigen::Vector3d::Constant(0.6)));
  const Ray ray{Eigen::Vector3d::Zero(), Eigen::Vector3d(0, 0, -1), 0.5, 3.0};
  const RenderOutput out = RenderGroundTruthRay(scene, ray, 7);
  EXPECT_NEAR(out.color.x(), 0.6 * (1 - std::exp(-1.0)), 1e-12);
  EXPECT_NEAR(out.transmittance_far, std::exp(-1.0), 1e-12);
}

TEST(HitRangeTest, NearestAndFarthestFirstHit) {
  SyntheticScene scene;
  scene.primitives.push_back(Primitive::Box(Eigen::Vector3d(0, 0, -4), Eigen::Vector3d(10, 10, 0.5),
                                            1.0, Eigen::Vector3d::Ones()));
  const Intrinsics intr{1, 1, 4, 4};
  const std::vector<Extrinsics> cams{Extrinsics{}};
  const auto range = HitRange(scene, intr, cams);
  ASSERT_TRUE(range.has_value());
  EXPECT_NEAR(range->first, 3.5, 1e-12);
  EXPECT_GT(range->second, 3.5);
  EXPECT_FALSE(HitRange(SyntheticScene{}, intr, cams).has_value());
}

TEST(TrajectoryTest, PureRotationSharesCentreWithEvenYaw) {
  TrajectoryParams p;
  p.sweep_degrees = 40;
  const auto poses = MakeTrajectory(MotionPattern::kPureRotation, 5, p);
  ASSERT_EQ(poses.size(), 5u);
  for (size_t i = 0; i < poses.size(); ++i) {
    EXPECT_EQ(poses[i].t, poses[0].t);
    if (i > 0) {
      EXPECT_NEAR(RotationAngleBetween(poses[i - 1].Rotation(), poses[i].Rotation()) * 180 / std::numbers::pi,
                  10.0, 1e-9);
    }
  }
}

TEST(TrajectoryTest, TraversalSteps) {
  TrajectoryParams p;
  p.eye = Eigen::Vector3d::Zero();
  p.spacing = 0.1;
  const auto poses = MakeTrajectory(MotionPattern::kTraversal, 3, p);
  EXPECT_LT((poses[0].t - Eigen::Vector3d(0, 0, 0)).norm(), 1e-15);
  EXPECT_LT((poses[1].t - Eigen::Vector3d(0.1, 0, 0)).norm(), 1e-15);
  EXPECT_LT((poses[2].t - Eigen::Vector3d(0.2, 0, 0)).norm(), 1e-15);
  for (const Extrinsics& e : poses) EXPECT_EQ(e.Rotation(), poses[0].Rotation());
}

TEST(TrajectoryTest, ZoomMovesAlongViewAxis) {
  const auto poses = MakeTrajectory(MotionPattern::kZoomIn, 4);
  for (size_t i = 1; i < poses.size(); ++i) {
    const Eigen::Vector3d step = poses[i].t - poses[i - 1].t;
    const Eigen::Vector3d axis = -poses[i].Rotation().col(2);
    EXPECT_NEAR(step.normalized().dot(axis), 1.0, 1e-12);
  }
}

TEST(TrajectoryTest, ArcOpticalAxesPassThroughTarget) {
  TrajectoryParams p;
  p.target = Eigen::Vector3d(0.1, -0.2, -1.0);
  const auto poses = MakeTrajectory(MotionPattern::kForwardFacingArc, 12, p);
  for (const Extrinsics& e : poses) {
    EXPECT_TRUE(IsRotation(e.Rotation(), 1e-12));
    const Eigen::Vector3d axis = -e.Rotation().col(2);
    const Eigen::Vector3d to_target = p.target - e.t;
    EXPECT_LT(axis.cross(to_target).norm(), 1e-9);
    EXPECT_NEAR(to_target.norm(), p.distance, 1e-12);
    EXPECT_LE(std::acos(std::clamp(to_target.normalized().dot(-Eigen::Vector3d::UnitZ()), -1.0, 1.0)),
              p.arc_degrees * std::numbers::pi / 180 + 1e-12);
  }
}

TEST(TrajectoryTest, RejectsTooFewCamerasAndUnknownPatterns) {
  EXPECT_THROW(MakeTrajectory(MotionPattern::kTraversal, 1), std::invalid_argument);
  EXPECT_THROW(ParseMotionPattern("spiral"), std::invalid_argument);
  for (MotionPattern m : {MotionPattern::kForwardFacingArc, MotionPattern::kRotationDominant,
                          MotionPattern::kPureRotation, MotionPattern::kTraversal, MotionPattern::kZoomIn}) {
    EXPECT_EQ(ParseMotionPattern(MotionPatternName(m)), m);
  }
}

}  // namespace
}  // namespace jointnerf
