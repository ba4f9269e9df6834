#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rumor/tensor.hpp"

namespace rumor::ad {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
};

// Grouping of E messages by receiving node, CSR style: messages of receiver v
// occupy [offsets[v], offsets[v+1]). offsets.size() == receivers + 1.
struct Segments {
  std::vector<std::size_t> offsets;

  std::size_t receivers() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  std::size_t messages() const { return offsets.empty() ? 0 : offsets.back(); }
  std::size_t begin(std::size_t v) const { return offsets[v]; }
  std::size_t end(std::size_t v) const { return offsets[v + 1]; }
  std::size_t count(std::size_t v) const { return offsets[v + 1] - offsets[v]; }
};

// Reverse-mode recording. Nodes are appended in evaluation order, which is a
// topological order, so backward() is one reverse sweep visiting each op once.
// A tape belongs to a single forward/backward context.
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Var constant(Tensor value);
  Var parameter(Tensor value);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  bool needs_grad(Var v) const { return nodes_.at(v.id).needs_grad; }
  // Gradient of the last backward() target; a zero tensor if v did not
  // contribute.
  Tensor grad(Var v) const;

  // `loss` must be 1x1.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  // Hash of every ReLU activation pattern recorded so far. Two evaluations
  // with equal signatures took the same branch at every kink.
  std::uint64_t activation_signature() const { return signature_; }
  void mix_signature(std::uint64_t bits);

  // Op construction interface. `parents` are node ids the op reads.
  Var record(Tensor value, std::span<const Var> parents, Backward backward,
             const char* op_name);

  // Valid inside a Backward callback.
  const Tensor& grad_at(std::size_t id) const { return nodes_[id].grad; }
  const Tensor& value_at(std::size_t id) const { return nodes_[id].value; }
  bool wants_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  // Zero-initialized on first use.
  Tensor& grad_accumulator(std::size_t id);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    Backward backward;
  };

  std::vector<Node> nodes_;
  std::uint64_t signature_ = 0;
};

// ---- differentiable ops -------------------------------------------------

Var matmul(Var x, Var w);
// x: n x m, bias: 1 x m broadcast over rows.
Var add_row_bias(Var x, Var bias);
// x * w (+ bias)
Var affine(Var x, Var w);
Var affine(Var x, Var w, Var bias);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var x, double s);
Var sum(Var x);  // 1x1

// max(0, x); the subgradient at 0 is 0.
Var relu(Var x);

// Inverted dropout. Identity when !training or p == 0.
Var dropout(Var x, double p, std::uint64_t seed, bool training);

// out[i] = x[index[i]]
Var gather_rows(Var x, std::span<const std::size_t> index);
// out[v] = mean of x[senders[m]] over messages m of receiver v; zero row for
// receivers with no messages.
Var segment_mean(Var x, const Segments& seg, std::span<const std::size_t> senders);
// out[m] = <a[m], b[m]> for row-aligned a, b (E x d) -> E x 1
Var row_dot(Var a, Var b);
// x: E x d -> E x 1 row means
Var row_mean(Var x);
// Softmax of E x 1 scores within each receiver's segment.
Var segment_softmax(Var scores, const Segments& seg);
// out[v] = sum over messages m of v of weights[m] * values[m]
Var segment_weighted_sum(Var weights, Var values, const Segments& seg);

Var concat_cols(Var a, Var b);
Var select_row(Var x, std::size_t row);

// -log softmax(logits)[label] for 1 x C logits, log-sum-exp stable.
Var cross_entropy(Var logits, std::size_t label);

}  // namespace rumor::ad
