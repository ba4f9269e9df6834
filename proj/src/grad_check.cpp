#include "rumor/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "rumor/errors.hpp"
#include "rumor/random.hpp"

namespace rumor {

GradCheckResult grad_check(const LossFn& loss, std::span<Tensor* const> params,
                           std::span<const Tensor> analytic, const GradCheckOptions& options) {
  if (params.size() != analytic.size()) {
    throw NumericError("grad_check: parameter and gradient counts differ");
  }
  GradCheckResult result;
  Rng rng(options.seed);
  const double h = options.step;

  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = *params[t];
    if (!p.same_shape(analytic[t])) {
      throw NumericError("grad_check: gradient shape mismatch for tensor " + std::to_string(t));
    }
    std::vector<std::size_t> coords(p.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords_per_tensor != 0 && coords.size() > options.max_coords_per_tensor) {
      shuffle(coords, rng);
      coords.resize(options.max_coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }

    for (std::size_t i : coords) {
      const double saved = p[i];
      p[i] = saved + h;
      const LossProbe plus = loss();
      p[i] = saved - h;
      const LossProbe minus = loss();
      p[i] = saved;

      if (plus.kink_signature != minus.kink_signature) {
        ++result.skipped_kinks;
        continue;
      }
      const double numeric = (plus.value - minus.value) / (2.0 * h);
      const double a = analytic[t][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      ++result.checked;
      if (rel > options.tolerance) {
        ++result.over_tolerance;
        result.largest_over_tolerance = std::max(result.largest_over_tolerance, denom);
      }
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_tensor = t;
        result.worst_index = i;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

std::string describe(const GradCheckResult& r) {
  std::ostringstream os;
  os << "max_rel_error=" << r.max_rel_error << " checked=" << r.checked
     << " skipped_kinks=" << r.skipped_kinks << " worst=(tensor " << r.worst_tensor << ", index "
     << r.worst_index << ", analytic " << r.worst_analytic << ", numeric " << r.worst_numeric
     << ") over_tolerance=" << r.over_tolerance << " largest_over_tolerance=" << r.largest_over_tolerance;
  return os.str();
}

}  // namespace rumor
