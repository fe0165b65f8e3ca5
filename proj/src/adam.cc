#include "jointnerf/adam.h"

#include <cmath>
#include <string>

namespace jointnerf {

AdamState MakeAdamState(std::span<const Parameter* const> params) {
  AdamState state;
  for (const Parameter* p : params) {
    state.first_moment.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    state.second_moment.push_back(
        Matrix::Zero(p->value.rows(), p->value.cols()));
  }
  return state;
}

void AdamStep(std::span<Parameter* const> params,
              std::span<const Matrix> grads, AdamState& state, double lr,
              const AdamOptions& options) {
  if (grads.size() != params.size() ||
      state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw ShapeError("adam: expected " + std::to_string(params.size()) +
                     " gradients and moments, got " +
                     std::to_string(grads.size()) + "/" +
                     std::to_string(state.first_moment.size()));
  }
  for (size_t i = 0; i < params.size(); ++i) {
    const Shape s = params[i]->shape();
    const Shape gs{grads[i].rows(), grads[i].cols()};
    const Shape ms{state.first_moment[i].rows(), state.first_moment[i].cols()};
    const Shape vs{state.second_moment[i].rows(),
                   state.second_moment[i].cols()};
    if (gs != s || ms != s || vs != s) {
      throw ShapeError("adam: parameter '" + params[i]->name + "' is " +
                       s.ToString() + " but gradient is " + gs.ToString() +
                       " and moments are " + ms.ToString());
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(options.beta1, t);
  const double bias2 = 1.0 - std::pow(options.beta2, t);
  for (size_t i = 0; i < params.size(); ++i) {
    auto m = state.first_moment[i].array();
    auto v = state.second_moment[i].array();
    const auto g = grads[i].array();
    m = options.beta1 * m + (1.0 - options.beta1) * g;
    v = options.beta2 * v + (1.0 - options.beta2) * g.square();
    params[i]->value.array() -=
        lr * (m / bias1) / ((v / bias2).sqrt() + options.epsilon);
  }
}

double LearningRateAt(int64_t epoch, double base, double factor,
                      int64_t every) {
  if (epoch < 0) epoch = 0;
  return base * std::pow(factor, static_cast<double>(epoch / every));
}

}  // namespace jointnerf
