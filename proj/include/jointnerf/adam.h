#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "jointnerf/autodiff.h"

namespace jointnerf {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  int64_t step = 0;
};

// Zero moments shaped like `params`.
AdamState MakeAdamState(std::span<const Parameter* const> params);

// One bias-corrected Adam update of every parameter in the group. `grads[i]`
// belongs to `params[i]`. Throws ShapeError on any mismatch.
void AdamStep(std::span<Parameter* const> params,
              std::span<const Matrix> grads, AdamState& state, double lr,
              const AdamOptions& options = {});

// Step decay: base * factor^floor(epoch / every).
double LearningRateAt(int64_t epoch, double base, double factor,
                      int64_t every);

}  // namespace jointnerf
