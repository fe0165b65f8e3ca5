#include "jointnerf/adam.h"

#include <cmath>

#include <gtest/gtest.h>

namespace jointnerf {
namespace {

TEST(LearningRateTest, StepDecay) {
  EXPECT_DOUBLE_EQ(LearningRateAt(0, 1e-3, 0.9954, 10), 1e-3);
  EXPECT_DOUBLE_EQ(LearningRateAt(9, 1e-3, 0.9954, 10), 1e-3);
  EXPECT_DOUBLE_EQ(LearningRateAt(10, 1e-3, 0.9954, 10), 1e-3 * 0.9954);
  EXPECT_DOUBLE_EQ(LearningRateAt(250, 1e-3, 0.9, 100), 1e-3 * 0.9 * 0.9);
}

TEST(AdamTest, ZeroGradientLeavesParametersUnchanged) {
  Parameter p{"p", Matrix::Constant(2, 3, 0.7)};
  Parameter* params[] = {&p};
  AdamState state = MakeAdamState(params);
  const Matrix grads[] = {Matrix::Zero(2, 3)};
  for (int i = 0; i < 5; ++i) AdamStep(params, grads, state, 1e-3);
  EXPECT_TRUE(p.value == Matrix::Constant(2, 3, 0.7));
  EXPECT_EQ(state.step, 5);
}

TEST(AdamTest, FirstStepMovesByLearningRate) {
  Parameter p{"p", Matrix::Zero(1, 4)};
  Parameter* params[] = {&p};
  AdamState state = MakeAdamState(params);
  const Matrix grads[] = {Matrix::Ones(1, 4)};
  AdamStep(params, grads, state, 1e-3);
  // m_hat = 1 and v_hat = 1, so the step is lr / (1 + eps).
  for (Eigen::Index j = 0; j < 4; ++j) EXPECT_NEAR(p.value(0, j), -1e-3 / (1 + 1e-8), 1e-18);
  EXPECT_EQ(state.step, 1);
}

TEST(AdamTest, MatchesScalarReference) {
  Parameter p{"p", Matrix::Constant(1, 1, 0.3)};
  Parameter* params[] = {&p};
  AdamState state = MakeAdamState(params);
  double x = 0.3, m = 0, v = 0;
  const double gs[] = {0.5, -1.25, 2.0, 0.1};
  for (int k = 0; k < 4; ++k) {
    const Matrix grads[] = {Matrix::Constant(1, 1, gs[k])};
    AdamStep(params, grads, state, 0.01);
    m = 0.9 * m + 0.1 * gs[k];
    v = 0.999 * v + 0.001 * gs[k] * gs[k];
    const double mh = m / (1 - std::pow(0.9, k + 1));
    const double vh = v / (1 - std::pow(0.999, k + 1));
    x -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    EXPECT_NEAR(p.value(0, 0), x, 1e-15);
  }
}

TEST(AdamTest, MinimisesQuadratic) {
  Parameter p{"x", Matrix::Constant(1, 1, 1.0)};
  Parameter* params[] = {&p};
  AdamState state = MakeAdamState(params);
  for (int i = 0; i < 100; ++i) {
    const Matrix grads[] = {2.0 * p.value};
    AdamStep(params, grads, state, 0.1);
  }
  EXPECT_LT(std::abs(p.value(0, 0)), 0.1);
}

TEST(AdamTest, ShapeMismatchesAreRejected) {
  Parameter p{"weights", Matrix::Zero(2, 2)};
  Parameter* params[] = {&p};
  AdamState state = MakeAdamState(params);
  const Matrix wrong[] = {Matrix::Zero(2, 3)};
  EXPECT_THROW(AdamStep(params, wrong, state, 1e-3), ShapeError);
  EXPECT_THROW(AdamStep(params, std::span<const Matrix>{}, state, 1e-3), ShapeError);
  AdamState empty;
  const Matrix right[] = {Matrix::Zero(2, 2)};
  EXPECT_THROW(AdamStep(params, right, empty, 1e-3), ShapeError);
  EXPECT_EQ(state.step, 0);
}

}  // namespace
}  // namespace jointnerf
