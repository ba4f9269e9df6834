#include "rumor/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "rumor/errors.hpp"
#include "rumor/random.hpp"

namespace rumor::ad {

const Tensor& Var::value() const { return tape->value(*this); }

Var Tape::constant(Tensor value) {
  value.require_finite("constant");
  nodes_.push_back(Node{std::move(value), {}, false, {}});
  return Var{this, nodes_.size() - 1};
}

Var Tape::parameter(Tensor value) {
  value.require_finite("parameter");
  nodes_.push_back(Node{std::move(value), {}, true, {}});
  return Var{this, nodes_.size() - 1};
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.grad.empty() && !n.value.empty()) return Tensor(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::mix_signature(std::uint64_t bits) { signature_ = splitmix64(signature_ ^ bits); }

Var Tape::record(Tensor value, std::span<const Var> parents, Backward backward,
                 const char* op_name) {
  value.require_finite(op_name);
  bool needs = false;
  for (const Var& p : parents) {
    if (p.tape != this) throw NumericError(std::string(op_name) + ": operand from another tape");
    needs = needs || nodes_[p.id].needs_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(backward) : Backward{}});
  return Var{this, nodes_.size() - 1};
}

Tensor& Tape::grad_accumulator(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw NumericError("backward: loss from another tape");
  const Tensor& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw NumericError("backward: loss must be 1x1, got " + shape_string(lv));
  }
  for (Node& n : nodes_) n.grad = Tensor();
  grad_accumulator(loss.id)(0, 0) = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, i);
    n.grad.require_finite("gradient");
  }
}

namespace {

std::size_t id_of(Var v) { return v.id; }

Tape& same_tape(Var a, Var b, const char* op) {
  if (a.tape == nullptr || a.tape != b.tape) {
    throw NumericError(std::string(op) + ": operands are not on the same tape");
  }
  return *a.tape;
}

[[noreturn]] void bad_shape(const char* op, const Tensor& a, const Tensor& b) {
  throw NumericError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                     shape_string(b));
}

}  // namespace

Var matmul(Var x, Var w) {
  Tape& t = same_tape(x, w, "matmul");
  Tensor out = kernels::matmul(x.value(), w.value());
  const std::size_t xi = id_of(x), wi = id_of(w);
  const Var parents[] = {x, w};
  return t.record(std::move(out), parents, [xi, wi](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_at(self);
    if (tp.wants_grad(xi)) kernels::matmul_nt_acc(g, tp.value_at(wi), tp.grad_accumulator(xi));
    if (tp.wants_grad(wi)) kernels::matmul_tn_acc(tp.value_at(xi), g, tp.grad_accumulator(wi));
  }, "matmul");
}

Var add_row_bias(Var x, Var bias) {
  Tape& t = same_tape(x, bias, "add_row_bias");
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (bv.rows() != 1 || bv.cols() != xv.cols()) bad_shape("add_row_bias", xv, bv);
  Tensor out = xv;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bv(0, c);
  }
  const std::size_t xi = x.id, bi = bias.id;
  const Var parents[] = {x, bias};
  return t.record(std::move(out), parents, [xi, bi](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_at(self);
    if (tp.wants_grad(xi)) kernels::add_inplace(tp.grad_accumulator(xi), g);
    if (tp.wants_grad(bi)) {
      Tensor& gb = tp.grad_accumulator(bi);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c);
      }
    }
  }, "add_row_bias");
}

Var affine(Var x, Var w) { return matmul(x, w); }

Var affine(Var x, Var w, Var bias) { return add_row_bias(matmul(x, w), bias); }

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b, "add");
  if (!a.value().same_shape(b.value())) bad_shape("add", a.value(), b.value());
  Tensor out = a.value();
  kernels::add_inplace(out, b.value());
  const std::size_t ai = a.id, bi = b.id;
  const Var parents[] = {a, b};
  return t.record(std::move(out), parents, [ai, bi](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_at(self);
    if (tp.wants_grad(ai)) kernels::add_inplace(tp.grad_accumulator(ai), g);
    if (tp.wants_grad(bi)) kernels::add_inplace(tp.grad_accumulator(bi), g);
  }, "add");
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b, "sub");
  if (!a.value().same_shape(b.value())) bad_shape("sub", a.value(), b.value());
  Tensor out = a.value();
  kernels::add_inplace(out, b.value(), -1.0);
  const std::size_t ai = a.id, bi = b.id;
  const Var parents[] = {a, b};
  return t.record(std::move(out), parents, [ai, bi](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_at(self);
    if (tp.wants_grad(ai)) kernels::add_inplace(tp.grad_accumulator(ai), g);
    if (tp.wants_grad(bi)) kernels::add_inplace(tp.grad_accumulator(bi), g, -1.0);
  }, "sub");
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b, "mul");
  if (!a.value().same_shape(b.value())) bad_shape("mul", a.value(), b.value());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  const std::size_t ai = a.id, bi = b.id;
  const Var parents[] = {a, b};
  return t.record(std::move(out), parents, [ai, bi](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_at(self);
    if (tp.wants_grad(ai)) {
      Tensor& ga = tp.grad_accumulator(ai);
      const Tensor& bv = tp.value_at(bi);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (tp.wants_grad(bi)) {
      Tensor& gb = tp.grad_accumulator(bi);
      const Tensor& av = tp.value_at(ai);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  }, "mul");
}

Var scale(Var x, double s) {
  Tensor out = x.value();
  for (double& v : out.values()) v *= s;
  const std::size_t xi = x.id;
  const Var parents[] = {x};
  return x.tape->record(std::move(out), parents, [xi, s](Tape& tp, std::size_t self) {
    kernels::add_inplace(tp.grad_accumulator(xi), tp.grad_at(self), s);
  }, "scale");
}

Var sum(Var x) {
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  const std::size_t xi = x.id;
  const Var parents[] = {x};
  return x.tape->record(Tensor(1, 1, total), parents, [xi](Tape& tp, std::size_t self) {
    const double g = tp.grad_at(self)(0, 0);
    for (double& v : tp.grad_accumulator(xi).values()) v += g;
  }, "sum");
}

Var relu(Var x) {
  Tensor out = x.value();
  std::uint64_t pattern = 0x52454C55ULL;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const bool on = out[i] > 0.0;
    if (!on) out[i] = 0.0;
    pattern = splitmix64(pattern ^ (on ? 0x9E37ULL + i : i));
  }
  x.tape->mix_signature(pattern);
  const std::size_t xi = x.id;
  const Var parents[] = {x};
  return x.tape->record(std::move(out), parents, [xi](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_at(self);
    const Tensor& in = tp.value_at(xi);
    Tensor& gx = tp.grad_accumulator(xi);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (in[i] > 0.0) gx[i] += g[i];
    }
  }, "relu");
}

Var dropout(Var x, double p, std::uint64_t seed, bool training) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw NumericError("dropout: probability must be in [0, 1), got " + std::to_string(p));
  }
  if (!training || p == 0.0) return x;
  Rng rng(seed);
  const double keep_scale = 1.0 / (1.0 - p);
  auto mask = std::make_shared<std::vector<double>>(x.value().size());
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double m = uniform01(rng) < p ? 0.0 : keep_scale;
    (*mask)[i] = m;
    out[i] *= m;
  }
  const std::size_t xi = x.id;
  const Var parents[] = {x};
  return x.tape->record(std::move(out), parents, [xi, mask](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_at(self);
    Tensor& gx = tp.grad_accumulator(xi);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (*mask)[i];
  }, "dropout");
}

Var gather_rows(Var x, std::span<const std::size_t> index) {
  const Tensor& xv = x.value();
  Tensor out(index.size(), xv.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= xv.rows()) throw NumericError("gather_rows: index out of range");
    std::copy(xv.row(index[i]).begin(), xv.row(index[i]).end(), out.row(i).begin());
  }
  const std::size_t xi = x.id;
  std::vector<std::size_t> idx(index.begin(), index.end());
  const Var parents[] = {x};
  return x.tape->record(std::move(out), parents, [xi, idx = std::move(idx)](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_at(self);
    Tensor& gx = tp.grad_accumulator(xi);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      auto dst = gx.row(idx[i]);
      auto src = g.row(i);
      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
    }
  }, "gather_rows");
}

Var segment_mean(Var x, const Segments& seg, std::span<const std::size_t> senders) {
  const Tensor& xv = x.value();
  if (senders.size() != seg.messages()) {
    throw NumericError("segment_mean: sender count does not match segments");
  }
  Tensor out(seg.receivers(), xv.cols());
  for (std::size_t v = 0; v < seg.receivers(); ++v) {
    const std::size_t n = seg.count(v);
    if (n == 0) continue;
    auto dst = out.row(v);
    for (std::size_t m = seg.begin(v); m < seg.end(v); ++m) {
      if (senders[m] >= xv.rows()) throw NumericError("segment_mean: sender out of range");
      auto src = xv.row(senders[m]);
      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
    }
    for (double& d : dst) d /= static_cast<double>(n);
  }
  const std::size_t xi = x.id;
  std::vector<std::size_t> snd(senders.begin(), senders.end());
  const Var parents[] = {x};
  return x.tape->record(std::move(out), parents,
                        [xi, seg, snd = std::move(snd)](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_at(self);
    Tensor& gx = tp.grad_accumulator(xi);
    for (std::size_t v = 0; v < seg.receivers(); ++v) {
      const std::size_t n = seg.count(v);
      if (n == 0) continue;
      const double w = 1.0 / static_cast<double>(n);
      auto src = g.row(v);
      for (std::size_t m = seg.begin(v); m < seg.end(v); ++m) {
        auto dst = gx.row(snd[m]);
        for (std::size_t c = 0; c < src.size(); ++c) dst[c] += w * src[c];
      }
    }
  }, "segment_mean");
}

Var row_dot(Var a, Var b) {
  Tape& t = same_tape(a, b, "row_dot");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (!av.same_shape(bv)) bad_shape("row_dot", av, bv);
  Tensor out(av.rows(), 1);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < av.cols(); ++c) s += av(r, c) * bv(r, c);
    out(r, 0) = s;
  }
  const std::size_t ai = a.id, bi = b.id;
  const Var parents[] = {a, b};
  return t.record(std::move(out), parents, [ai, bi](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_at(self);
    const Tensor& av = tp.value_at(ai);
    const Tensor& bv = tp.value_at(bi);
    if (tp.wants_grad(ai)) {
      Tensor& ga = tp.grad_accumulator(ai);
      for (std::size_t r = 0; r < av.rows(); ++r) {
        for (std::size_t c = 0; c < av.cols(); ++c) ga(r, c) += g(r, 0) * bv(r, c);
      }
    }
    if (tp.wants_grad(bi)) {
      Tensor& gb = tp.grad_accumulator(bi);
      for (std::size_t r = 0; r < av.rows(); ++r) {
        for (std::size_t c = 0; c < av.cols(); ++c) gb(r, c) += g(r, 0) * av(r, c);
      }
    }
  }, "row_dot");
}

Var row_mean(Var x) {
  const Tensor& xv = x.value();
  Tensor out(xv.rows(), 1);
  const double inv = xv.cols() == 0 ? 0.0 : 1.0 / static_cast<double>(xv.cols());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    double s = 0.0;
    for (double v : xv.row(r)) s += v;
    out(r, 0) = s * inv;
  }
  const std::size_t xi = x.id;
  const Var parents[] = {x};
  return x.tape->record(std::move(out), parents, [xi, inv](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_at(self);
    Tensor& gx = tp.grad_accumulator(xi);
    for (std::size_t r = 0; r < gx.rows(); ++r) {
      for (double& v : gx.row(r)) v += g(r, 0) * inv;
    }
  }, "row_mean");
}

Var segment_softmax(Var scores, const Segments& seg) {
  const Tensor& s = scores.value();
  if (s.cols() != 1 || s.rows() != seg.messages()) {
    throw NumericError("segment_softmax: expected " + std::to_string(seg.messages()) +
                       "x1 scores, got " + shape_string(s));
  }
  Tensor out(s.rows(), 1);
  for (std::size_t v = 0; v < seg.receivers(); ++v) {
    if (seg.count(v) == 0) continue;
    double mx = s(seg.begin(v), 0);
    for (std::size_t m = seg.begin(v); m < seg.end(v); ++m) mx = std::max(mx, s(m, 0));
    double z = 0.0;
    for (std::size_t m = seg.begin(v); m < seg.end(v); ++m) {
      out(m, 0) = std::exp(s(m, 0) - mx);
      z += out(m, 0);
    }
    for (std::size_t m = seg.begin(v); m < seg.end(v); ++m) out(m, 0) /= z;
  }
  const std::size_t si = scores.id;
  const Var parents[] = {scores};
  return scores.tape->record(std::move(out), parents, [si, seg](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_at(self);
    const Tensor& p = tp.value_at(self);
    Tensor& gs = tp.grad_accumulator(si);
    for (std::size_t v = 0; v < seg.receivers(); ++v) {
      double dot = 0.0;
      for (std::size_t m = seg.begin(v); m < seg.end(v); ++m) dot += g(m, 0) * p(m, 0);
      for (std::size_t m = seg.begin(v); m < seg.end(v); ++m) {
        gs(m, 0) += p(m, 0) * (g(m, 0) - dot);
      }
    }
  }, "segment_softmax");
}

Var segment_weighted_sum(Var weights, Var values, const Segments& seg) {
  Tape& t = same_tape(weights, values, "segment_weighted_sum");
  const Tensor& w = weights.value();
  const Tensor& val = values.value();
  if (w.cols() != 1 || w.rows() != seg.messages() || val.rows() != seg.messages()) {
    bad_shape("segment_weighted_sum", w, val);
  }
  Tensor out(seg.receivers(), val.cols());
  for (std::size_t v = 0; v < seg.receivers(); ++v) {
    auto dst = out.row(v);
    for (std::size_t m = seg.begin(v); m < seg.end(v); ++m) {
      auto src = val.row(m);
      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += w(m, 0) * src[c];
    }
  }
  const std::size_t wi = weights.id, vi = values.id;
  const Var parents[] = {weights, values};
  return t.record(std::move(out), parents, [wi, vi, seg](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_at(self);
    const Tensor& w = tp.value_at(wi);
    const Tensor& val = tp.value_at(vi);
    const bool gw = tp.wants_grad(wi), gv = tp.wants_grad(vi);
    for (std::size_t v = 0; v < seg.receivers(); ++v) {
      auto gr = g.row(v);
      for (std::size_t m = seg.begin(v); m < seg.end(v); ++m) {
        if (gw) {
          double d = 0.0;
          auto src = val.row(m);
          for (std::size_t c = 0; c < src.size(); ++c) d += gr[c] * src[c];
          tp.grad_accumulator(wi)(m, 0) += d;
        }
        if (gv) {
          auto dst = tp.grad_accumulator(vi).row(m);
          for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += w(m, 0) * gr[c];
        }
      }
    }
  }, "segment_weighted_sum");
}

Var concat_cols(Var a, Var b) {
  Tape& t = same_tape(a, b, "concat_cols");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rows() != bv.rows()) bad_shape("concat_cols", av, bv);
  const std::size_t ca = av.cols(), cb = bv.cols();
  Tensor out(av.rows(), ca + cb);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    std::copy(av.row(r).begin(), av.row(r).end(), out.row(r).begin());
    std::copy(bv.row(r).begin(), bv.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(ca));
  }
  const std::size_t ai = a.id, bi = b.id;
  const Var parents[] = {a, b};
  return t.record(std::move(out), parents, [ai, bi, ca, cb](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_at(self);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      if (tp.wants_grad(ai)) {
        auto dst = tp.grad_accumulator(ai).row(r);
        for (std::size_t c = 0; c < ca; ++c) dst[c] += g(r, c);
      }
      if (tp.wants_grad(bi)) {
        auto dst = tp.grad_accumulator(bi).row(r);
        for (std::size_t c = 0; c < cb; ++c) dst[c] += g(r, ca + c);
      }
    }
  }, "concat_cols");
}

Var select_row(Var x, std::size_t row) {
  const std::size_t index[] = {row};
  return gather_rows(x, index);
}

Var cross_entropy(Var logits, std::size_t label) {
  const Tensor& z = logits.value();
  if (z.rows() != 1 || z.cols() == 0) {
    throw NumericError("cross_entropy: expected 1xC logits, got " + shape_string(z));
  }
  if (label >= z.cols()) {
    throw NumericError("cross_entropy: label " + std::to_string(label) + " out of range for " +
                       std::to_string(z.cols()) + " classes");
  }
  double mx = z[0];
  for (double v : z.values()) mx = std::max(mx, v);
  double total = 0.0;
  for (double v : z.values()) total += std::exp(v - mx);
  const double lse = mx + std::log(total);
  const double loss = lse - z[label];
  const std::size_t zi = logits.id;
  const Var parents[] = {logits};
  return logits.tape->record(Tensor(1, 1, loss), parents,
                             [zi, label, lse](Tape& tp, std::size_t self) {
    const double g = tp.grad_at(self)(0, 0);
    const Tensor& z = tp.value_at(zi);
    Tensor& gz = tp.grad_accumulator(zi);
    for (std::size_t c = 0; c < z.cols(); ++c) {
      const double p = std::exp(z[c] - lse);
      gz[c] += g * (p - (c == label ? 1.0 : 0.0));
    }
  }, "cross_entropy");
}

}  // namespace rumor::ad
