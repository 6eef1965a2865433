#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "pansharp/errors.hpp"
#include "pansharp/tensor.hpp"

namespace pansharp {

// Compares analytic gradients against central finite differences at 64-bit.
//
// params:    tensors perturbed in place; restored afterwards.
// loss_fn:   re-evaluates the scalar loss under the current param values.
// analytic:  gradients for each param, aligned with `params`.
//
// Returns max over all elements of |analytic - numeric| scaled by
// max(|analytic|, |numeric|, 1e-12).
inline double finite_diff_check(const std::vector<Tensor<double>*>& params,
                                const std::function<double()>& loss_fn,
                                const std::vector<Tensor<double>>& analytic,
                                double epsilon) {
  if (epsilon < 1e-7 || epsilon > 1e-3)
    throw ContractError("finite_diff_check: epsilon must be in [1e-7, 1e-3]");
  if (params.size() != analytic.size())
    throw ContractError("finite_diff_check: params/analytic count mismatch");
  double worst = 0.0;
  for (size_t p = 0; p < params.size(); ++p) {
    Tensor<double>& theta = *params[p];
    if (theta.shape() != analytic[p].shape())
      throw ContractError("finite_diff_check: gradient shape mismatch");
    for (int64_t j = 0; j < theta.size(); ++j) {
      const double saved = theta[j];
      theta[j] = saved + epsilon;
      const double up = loss_fn();
      theta[j] = saved - epsilon;
      const double down = loss_fn();
      theta[j] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = analytic[p][j];
      const double scale = std::max({std::abs(a), std::abs(numeric), 1e-12});
      worst = std::max(worst, std::abs(a - numeric) / scale);
    }
  }
  return worst;
}

}  // namespace pansharp
