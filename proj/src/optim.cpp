#include "rumor/optim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rumor/errors.hpp"

namespace rumor {

void AdamW::step(std::span<Tensor* const> params, std::span<const Tensor> grads) {
  if (params.size() != grads.size()) {
    throw NumericError("adamw: " + std::to_string(params.size()) + " parameters but " +
                       std::to_string(grads.size()) + " gradients");
  }
  if (!m_.empty() && m_.size() != params.size()) {
    throw NumericError("adamw: parameter count changed between steps");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(grads[i])) {
      throw NumericError("adamw: parameter " + std::to_string(i) + " shape " +
                         shape_string(*params[i]) + " vs gradient " + shape_string(grads[i]));
    }
    if (!m_.empty() && !m_[i].same_shape(grads[i])) {
      throw NumericError("adamw: parameter " + std::to_string(i) + " changed shape");
    }
    grads[i].require_finite("adamw gradient " + std::to_string(i));
  }
  if (m_.empty()) {
    for (Tensor* p : params) {
      m_.emplace_back(p->rows(), p->cols());
      v_.emplace_back(p->rows(), p->cols());
    }
  }

  ++step_;
  const auto& h = hyper_;
  const double t = static_cast<double>(step_);
  const double bc1 = 1.0 - std::pow(h.beta1, t);
  const double bc2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& theta = *params[i];
    const Tensor& g = grads[i];
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m[j] = h.beta1 * m[j] + (1.0 - h.beta1) * g[j];
      v[j] = h.beta2 * v[j] + (1.0 - h.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      theta[j] -= h.learning_rate * m_hat / (std::sqrt(v_hat) + h.epsilon) +
                  h.learning_rate * h.weight_decay * theta[j];
    }
  }
}

Tensor softmax_rows(const Tensor& z) {
  Tensor out(z.rows(), z.cols());
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto in = z.row(r);
    if (in.empty()) continue;
    const double mx = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    auto o = out.row(r);
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(in[c] - mx);
      total += o[c];
    }
    for (double& v : o) v /= total;
  }
  return out;
}

}  // namespace rumor
