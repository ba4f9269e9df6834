#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "rumor/tensor.hpp"

namespace rumor {

// One evaluation of a scalar loss. `kink_signature` identifies the branch
// taken at every non-differentiable point (see ad::Tape::activation_signature);
// loss functions without kinks may leave it at 0.
struct LossProbe {
  double value = 0.0;
  std::uint64_t kink_signature = 0;
};

// Evaluates the loss at the current contents of the parameter tensors.
using LossFn = std::function<LossProbe()>;

struct GradCheckOptions {
  double step = 1e-5;
  // 0 checks every coordinate; otherwise at most this many random coordinates
  // per tensor.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t seed = 0;
  // Only used to tally coordinates above it in the result.
  double tolerance = 1e-4;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  // Coordinates where f(x+h) and f(x-h) fell on different sides of a kink.
  std::size_t skipped_kinks = 0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  // Coordinates whose relative error exceeds options.tolerance, and the
  // largest max(|analytic|, |numeric|) among them.
  std::size_t over_tolerance = 0;
  double largest_over_tolerance = 0.0;
};

// Central differences (f(x+h) - f(x-h)) / 2h against `analytic`, one entry
// per parameter tensor. Relative error per coordinate is
// |a - n| / max(|a|, |n|, 1e-8). Parameters are restored before returning.
GradCheckResult grad_check(const LossFn& loss, std::span<Tensor* const> params,
                           std::span<const Tensor> analytic,
                           const GradCheckOptions& options = {});

std::string describe(const GradCheckResult& r);

}  // namespace rumor
