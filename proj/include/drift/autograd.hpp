#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "drift/error.hpp"

namespace drift {

using Mat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<float, 1, Eigen::Dynamic, Eigen::RowMajor>;

/// A named trainable tensor. `grad` is only ever written for trainable
/// parameters; frozen ones never enter the backward pass.
struct Parameter {
  std::string name;
  Mat value;
  Mat grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Mat v) : name(std::move(n)), value(std::move(v)) {
    grad = Mat::Zero(value.rows(), value.cols());
  }

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  double grad_norm() const { return grad.size() ? static_cast<double>(grad.norm()) : 0.0; }
};

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

/// Reverse-mode tape. Nodes are appended in evaluation order; `backward`
/// walks them in reverse. With gradients disabled no closures or saved
/// activations are kept.
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const noexcept { return grad_enabled_; }

  Var constant(Mat value) { return push(std::move(value), false); }

  /// An input leaf whose gradient is readable after backward (e.g. embedding rows).
  Var leaf(Mat value, bool requires_grad) { return push(std::move(value), requires_grad && grad_enabled_); }

  /// References the parameter's storage; the parameter must not change while
  /// the tape is alive.
  Var param(Parameter& p) {
    Node n;
    n.ref = &p.value;
    n.requires_grad = p.trainable && grad_enabled_;
    if (n.requires_grad) n.param = &p;
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
  }

  const Mat& value(Var v) const { return nodes_[v.id].val(); }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Gradient of a node after backward; zeros if none flowed.
  Mat grad(Var v) const {
    const auto& n = nodes_[v.id];
    if (n.grad.size() == 0) return Mat::Zero(n.val().rows(), n.val().cols());
    return n.grad;
  }

  using BackwardFn = std::function<void(Tape&, int)>;

  Var push(Mat value, bool requires_grad, BackwardFn fn = {}) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
  }

  /// Gradient buffer of node `id`, allocated on first use.
  Mat& grad_ref(int id) {
    auto& n = nodes_[id];
    if (n.grad.size() == 0) n.grad = Mat::Zero(n.val().rows(), n.val().cols());
    return n.grad;
  }
  const Mat& grad_of(int id) const { return nodes_[id].grad; }
  bool has_grad(int id) const { return nodes_[id].grad.size() != 0; }
  bool needs(int id) const { return nodes_[id].requires_grad; }

  /// Seeds d(out)/d(out) = 1 for a scalar and propagates. Parameter gradients
  /// are accumulated into `Parameter::grad`.
  void backward(Var out) {
    require(grad_enabled_, ErrorKind::InvalidArgument, "backward on a no-grad tape");
    require(value(out).size() == 1, ErrorKind::InvalidArgument, "backward needs a scalar output");
    if (!nodes_[out.id].requires_grad) return;
    grad_ref(out.id).setOnes();
    for (int i = out.id; i >= 0; --i) {
      auto& n = nodes_[i];
      if (!n.requires_grad || n.grad.size() == 0) continue;
      if (n.backward) n.backward(*this, i);
      if (n.param) n.param->grad += n.grad;
    }
  }

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    const Mat* ref = nullptr;
    Mat grad;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;

    const Mat& val() const { return ref ? *ref : value; }
  };
  std::vector<Node> nodes_;
  bool grad_enabled_;
};

inline const Mat& Var::value() const { return tape->value(*this); }

namespace ops {

inline bool any_grad(std::initializer_list<Var> vs) {
  for (auto v : vs)
    if (v.tape->requires_grad(v)) return true;
  return false;
}

inline Var matmul(Var a, Var b) {
  Tape& t = *a.tape;
  require(a.cols() == b.rows(), ErrorKind::WidthMismatch,
          "matmul " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " * " +
              std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  Mat out = a.value() * b.value();
  const int ia = a.id, ib = b.id;
  return t.push(std::move(out), t.grad_enabled() && any_grad({a, b}), [ia, ib](Tape& t, int self) {
    const Mat& g = t.grad_of(self);
    if (t.needs(ia)) t.grad_ref(ia).noalias() += g * t.value(Var{&t, ib}).transpose();
    if (t.needs(ib)) t.grad_ref(ib).noalias() += t.value(Var{&t, ia}).transpose() * g;
  });
}

inline Var add(Var a, Var b) {
  Tape& t = *a.tape;
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::WidthMismatch, "add shape mismatch");
  Mat out = a.value() + b.value();
  const int ia = a.id, ib = b.id;
  return t.push(std::move(out), t.grad_enabled() && any_grad({a, b}), [ia, ib](Tape& t, int self) {
    const Mat& g = t.grad_of(self);
    if (t.needs(ia)) t.grad_ref(ia) += g;
    if (t.needs(ib)) t.grad_ref(ib) += g;
  });
}

/// x (T x d) + row (1 x d) broadcast over rows.
inline Var add_row(Var x, Var row) {
  Tape& t = *x.tape;
  require(row.rows() == 1 && row.cols() == x.cols(), ErrorKind::WidthMismatch, "add_row shape mismatch");
  Mat out = x.value().rowwise() + row.value().row(0);
  const int ix = x.id, ir = row.id;
  return t.push(std::move(out), t.grad_enabled() && any_grad({x, row}), [ix, ir](Tape& t, int self) {
    const Mat& g = t.grad_of(self);
    if (t.needs(ix)) t.grad_ref(ix) += g;
    if (t.needs(ir)) t.grad_ref(ir) += g.colwise().sum();
  });
}

inline Var scale(Var x, float s) {
  Tape& t = *x.tape;
  Mat out = x.value() * s;
  const int ix = x.id;
  return t.push(std::move(out), t.grad_enabled() && any_grad({x}), [ix, s](Tape& t, int self) {
    t.grad_ref(ix) += t.grad_of(self) * s;
  });
}

/// Tanh-approximated GELU.
inline Var gelu(Var x) {
  Tape& t = *x.tape;
  constexpr float k = 0.7978845608028654f;  // sqrt(2/pi)
  const Mat& xv = x.value();
  Mat out = xv.unaryExpr([](float v) { return 0.5f * v * (1.0f + std::tanh(k * (v + 0.044715f * v * v * v))); });
  const int ix = x.id;
  return t.push(std::move(out), t.grad_enabled() && any_grad({x}), [ix](Tape& t, int self) {
    const Mat& g = t.grad_of(self);
    const Mat& xv = t.value(Var{&t, ix});
    Mat d = xv.unaryExpr([](float v) {
      const float u = k * (v + 0.044715f * v * v * v);
      const float th = std::tanh(u);
      return 0.5f * (1.0f + th) + 0.5f * v * (1.0f - th * th) * k * (1.0f + 3.0f * 0.044715f * v * v);
    });
    t.grad_ref(ix).array() += g.array() * d.array();
  });
}

/// Row-wise layer normalization with affine (1 x d) gain and bias.
inline Var layer_norm(Var x, Var gain, Var bias, float eps = 1e-5f) {
  Tape& t = *x.tape;
  const Mat& xv = x.value();
  const auto d = static_cast<float>(xv.cols());
  Mat xhat(xv.rows(), xv.cols());
  Eigen::VectorXf inv_std(xv.rows());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    const float mean = xv.row(r).mean();
    const float var = (xv.row(r).array() - mean).square().sum() / d;
    inv_std(r) = 1.0f / std::sqrt(var + eps);
    xhat.row(r) = (xv.row(r).array() - mean) * inv_std(r);
  }
  Mat out = (xhat.array().rowwise() * gain.value().row(0).array()).rowwise() + bias.value().row(0).array();
  const int ix = x.id, ig = gain.id, ib = bias.id;
  const bool needs = t.grad_enabled() && any_grad({x, gain, bias});
  if (!needs) return t.push(std::move(out), false);
  return t.push(std::move(out), true,
                [ix, ig, ib, xhat = std::move(xhat), inv_std = std::move(inv_std), d](Tape& t, int self) {
                  const Mat& g = t.grad_of(self);
                  if (t.needs(ig)) t.grad_ref(ig) += (g.array() * xhat.array()).colwise().sum().matrix();
                  if (t.needs(ib)) t.grad_ref(ib) += g.colwise().sum();
                  if (t.needs(ix)) {
                    const auto& gv = t.value(Var{&t, ig});
                    Mat gx = g.array().rowwise() * gv.row(0).array();
                    Mat& out = t.grad_ref(ix);
                    for (Eigen::Index r = 0; r < gx.rows(); ++r) {
                      const float m1 = gx.row(r).mean();
                      const float m2 = (gx.row(r).array() * xhat.row(r).array()).sum() / d;
                      out.row(r).array() += inv_std(r) * (gx.row(r).array() - m1 - xhat.row(r).array() * m2);
                    }
                  }
                });
}

/// Gathers rows `ids` of `table` (vocab x d).
inline Var embedding(Var table, std::span<const std::int32_t> ids) {
  Tape& t = *table.tape;
  const Mat& tv = table.value();
  Mat out(static_cast<Eigen::Index>(ids.size()), tv.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && ids[i] < tv.rows(), ErrorKind::IndexOutOfRange,
            "embedding id " + std::to_string(ids[i]) + " outside table of " + std::to_string(tv.rows()));
    out.row(static_cast<Eigen::Index>(i)) = tv.row(ids[i]);
  }
  const int it = table.id;
  std::vector<std::int32_t> idv(ids.begin(), ids.end());
  return t.push(std::move(out), t.grad_enabled() && any_grad({table}), [it, idv = std::move(idv)](Tape& t, int self) {
    const Mat& g = t.grad_of(self);
    Mat& gt = t.grad_ref(it);
    for (std::size_t i = 0; i < idv.size(); ++i) gt.row(idv[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

inline Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), ErrorKind::InvalidArgument, "concat_rows of nothing");
  Tape& t = *parts[0].tape;
  Eigen::Index rows = 0;
  const auto cols = parts[0].cols();
  bool needs = false;
  for (auto p : parts) {
    require(p.cols() == cols, ErrorKind::WidthMismatch, "concat_rows width mismatch");
    rows += p.rows();
    needs = needs || t.requires_grad(p);
  }
  Mat out(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> spans;
  Eigen::Index r = 0;
  for (auto p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    spans.emplace_back(p.id, r);
    r += p.rows();
  }
  return t.push(std::move(out), t.grad_enabled() && needs, [spans = std::move(spans)](Tape& t, int self) {
    const Mat& g = t.grad_of(self);
    for (auto [id, at] : spans) {
      if (!t.needs(id)) continue;
      Mat& gi = t.grad_ref(id);
      gi += g.middleRows(at, gi.rows());
    }
  });
}

/// Selects rows by index (duplicates allowed).
inline Var gather_rows(Var x, std::span<const std::int64_t> rows) {
  Tape& t = *x.tape;
  const Mat& xv = x.value();
  Mat out(static_cast<Eigen::Index>(rows.size()), xv.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] >= 0 && rows[i] < xv.rows(), ErrorKind::IndexOutOfRange,
            "row " + std::to_string(rows[i]) + " outside " + std::to_string(xv.rows()));
    out.row(static_cast<Eigen::Index>(i)) = xv.row(rows[i]);
  }
  const int ix = x.id;
  std::vector<std::int64_t> rv(rows.begin(), rows.end());
  return t.push(std::move(out), t.grad_enabled() && any_grad({x}), [ix, rv = std::move(rv)](Tape& t, int self) {
    const Mat& g = t.grad_of(self);
    Mat& gx = t.grad_ref(ix);
    for (std::size_t i = 0; i < rv.size(); ++i) gx.row(rv[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

inline Var slice_rows(Var x, Eigen::Index begin, Eigen::Index count) {
  Tape& t = *x.tape;
  require(begin >= 0 && count >= 0 && begin + count <= x.rows(), ErrorKind::IndexOutOfRange, "slice_rows out of range");
  Mat out = x.value().middleRows(begin, count);
  const int ix = x.id;
  return t.push(std::move(out), t.grad_enabled() && any_grad({x}), [ix, begin](Tape& t, int self) {
    const Mat& g = t.grad_of(self);
    t.grad_ref(ix).middleRows(begin, g.rows()) += g;
  });
}

/// Inverted dropout; identity when p == 0 or gradients are disabled.
inline Var dropout(Var x, float p, std::mt19937_64& rng) {
  Tape& t = *x.tape;
  if (p <= 0.0f || !t.grad_enabled()) return x;
  std::bernoulli_distribution keep(1.0 - p);
  const float s = 1.0f / (1.0f - p);
  Mat mask(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? s : 0.0f;
  Mat out = x.value().cwiseProduct(mask);
  const int ix = x.id;
  return t.push(std::move(out), any_grad({x}), [ix, mask = std::move(mask)](Tape& t, int self) {
    t.grad_ref(ix) += t.grad_of(self).cwiseProduct(mask);
  });
}

/// Multi-head causal self-attention over already-projected q, k, v (T x d).
/// Without gradients the scores are computed in query blocks so long contexts
/// never materialize a full T x T matrix.
inline Var causal_attention(Var q, Var k, Var v, int heads) {
  Tape& t = *q.tape;
  const Eigen::Index T = q.rows(), d = q.cols();
  require(k.rows() == T && v.rows() == T && k.cols() == d && v.cols() == d, ErrorKind::WidthMismatch,
          "attention q/k/v shape mismatch");
  require(heads >= 1 && d % heads == 0, ErrorKind::InvalidArgument, "width not divisible by heads");
  const Eigen::Index dh = d / heads;
  const float sc = 1.0f / std::sqrt(static_cast<float>(dh));
  const Mat& Q = q.value();
  const Mat& K = k.value();
  const Mat& V = v.value();
  Mat out = Mat::Zero(T, d);
  const bool needs = t.grad_enabled() && any_grad({q, k, v});

  if (!needs) {
    constexpr Eigen::Index kBlock = 256;
    Mat S;
    for (int h = 0; h < heads; ++h) {
      const auto Kh = K.middleCols(h * dh, dh);
      const auto Vh = V.middleCols(h * dh, dh);
      for (Eigen::Index r0 = 0; r0 < T; r0 += kBlock) {
        const Eigen::Index nb = std::min(kBlock, T - r0);
        const Eigen::Index span = r0 + nb;  // keys visible to the last row of the block
        S.noalias() = (Q.block(r0, h * dh, nb, dh) * Kh.topRows(span).transpose()) * sc;
        for (Eigen::Index i = 0; i < nb; ++i) {
          const Eigen::Index visible = r0 + i + 1;
          auto row = S.row(i);
          const float mx = row.head(visible).maxCoeff();
          row.head(visible) = (row.head(visible).array() - mx).exp();
          row.head(visible) /= row.head(visible).sum();
          row.tail(span - visible).setZero();
        }
        out.block(r0, h * dh, nb, dh).noalias() = S * Vh.topRows(span);
      }
    }
    return t.push(std::move(out), false);
  }

  std::vector<Mat> probs(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    Mat S = (Q.middleCols(h * dh, dh) * K.middleCols(h * dh, dh).transpose()) * sc;
    for (Eigen::Index i = 0; i < T; ++i) {
      auto row = S.row(i);
      const Eigen::Index visible = i + 1;
      const float mx = row.head(visible).maxCoeff();
      row.head(visible) = (row.head(visible).array() - mx).exp();
      row.head(visible) /= row.head(visible).sum();
      row.tail(T - visible).setZero();
    }
    out.middleCols(h * dh, dh).noalias() = S * V.middleCols(h * dh, dh);
    probs[static_cast<std::size_t>(h)] = std::move(S);
  }
  const int iq = q.id, ik = k.id, iv = v.id;
  return t.push(std::move(out), true, [iq, ik, iv, heads, dh, sc, probs = std::move(probs)](Tape& t, int self) {
    const Mat& g = t.grad_of(self);
    const Mat& Q = t.value(Var{&t, iq});
    const Mat& K = t.value(Var{&t, ik});
    const Mat& V = t.value(Var{&t, iv});
    for (int h = 0; h < heads; ++h) {
      const Mat& P = probs[static_cast<std::size_t>(h)];
      const auto gh = g.middleCols(h * dh, dh);
      if (t.needs(iv)) t.grad_ref(iv).middleCols(h * dh, dh).noalias() += P.transpose() * gh;
      if (!t.needs(iq) && !t.needs(ik)) continue;
      Mat dP = gh * V.middleCols(h * dh, dh).transpose();
      const Eigen::VectorXf rs = (dP.array() * P.array()).rowwise().sum();
      Mat dS = (P.array() * (dP.array().colwise() - rs.array())).matrix() * sc;
      if (t.needs(iq)) t.grad_ref(iq).middleCols(h * dh, dh).noalias() += dS * K.middleCols(h * dh, dh);
      if (t.needs(ik)) t.grad_ref(ik).middleCols(h * dh, dh).noalias() += dS.transpose() * Q.middleCols(h * dh, dh);
    }
  });
}

/// Mean negative log-likelihood of `targets` under row-wise softmax(logits).
/// Returns a 1x1 node.
inline Var cross_entropy(Var logits, std::span<const std::int32_t> targets) {
  Tape& t = *logits.tape;
  const Mat& L = logits.value();
  require(static_cast<Eigen::Index>(targets.size()) == L.rows(), ErrorKind::LengthMismatch,
          "cross_entropy: one target per logits row required");
  require(L.rows() > 0, ErrorKind::EmptyMask, "cross_entropy over zero positions");
  Mat P(L.rows(), L.cols());
  double total = 0.0;
  for (Eigen::Index r = 0; r < L.rows(); ++r) {
    const auto tr = targets[static_cast<std::size_t>(r)];
    require(tr >= 0 && tr < L.cols(), ErrorKind::IndexOutOfRange, "target id outside logits width");
    const float mx = L.row(r).maxCoeff();
    P.row(r) = (L.row(r).array() - mx).exp();
    const float z = P.row(r).sum();
    P.row(r) /= z;
    total += -(static_cast<double>(L(r, tr)) - mx - std::log(static_cast<double>(z)));
  }
  Mat out(1, 1);
  out(0, 0) = static_cast<float>(total / static_cast<double>(L.rows()));
  const int il = logits.id;
  std::vector<std::int32_t> tv(targets.begin(), targets.end());
  return t.push(std::move(out), t.grad_enabled() && any_grad({logits}),
                [il, P = std::move(P), tv = std::move(tv)](Tape& t, int self) {
                  const float g = t.grad_of(self)(0, 0) / static_cast<float>(P.rows());
                  Mat d = P;
                  for (std::size_t r = 0; r < tv.size(); ++r) d(static_cast<Eigen::Index>(r), tv[r]) -= 1.0f;
                  t.grad_ref(il) += d * g;
                });
}

}  // namespace ops

/// Numerically stable row-wise softmax (no tape).
inline Mat softmax_rows(const Mat& logits) {
  Mat p(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const float mx = logits.row(r).maxCoeff();
    p.row(r) = (logits.row(r).array() - mx).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

}  // namespace drift
