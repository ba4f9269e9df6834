#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rumor/tensor.hpp"

namespace rumor {

struct AdamWHyper {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

// Per-parameter moments for AdamW with decoupled weight decay.
class AdamW {
 public:
  explicit AdamW(AdamWHyper hyper = {}) : hyper_(hyper) {}

  const AdamWHyper& hyper() const { return hyper_; }
  std::uint64_t step_count() const { return step_; }
  const std::vector<Tensor>& first_moment() const { return m_; }
  const std::vector<Tensor>& second_moment() const { return v_; }

  // One update over all parameters. Moments are sized on the first call and
  // must keep the same shapes afterwards. A non-finite gradient aborts the
  // step before any parameter or moment changes (NumericError).
  void step(std::span<Tensor* const> params, std::span<const Tensor> grads);

 private:
  AdamWHyper hyper_;
  std::uint64_t step_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

// Row-wise numerically stable softmax (each row shifted by its maximum).
Tensor softmax_rows(const Tensor& z);

}  // namespace rumor
