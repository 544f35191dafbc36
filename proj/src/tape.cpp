#include "pcf/tape.hpp"

#include <cmath>

namespace pcf {
namespace {

thread_local Tape* g_active = nullptr;

void axpy(std::vector<double>& dst, double c, std::span<const double> src) {
  const std::size_t n = src.size();
  for (std::size_t i = 0; i < n; ++i) dst[i] += c * src[i];
}

// Runs the elementwise forward op and records the node if the tape is live.
template <class Fwd, class Mk>
Value record_unary(const Value& a, const char* name, Fwd&& fwd, Mk&& mk_backward) {
  std::vector<double> out(static_cast<std::size_t>(a.data.size()));
  fwd(a.data.span(), out);
  Tensor t(a.data.shape(), std::move(out));
  ensure_finite(t, name);
  Tape* tp = Tape::active();
  if (!tp || !a.traced()) return {std::move(t), -1};
  Tape::Backward bw = mk_backward(t);
  int id = tp->add_node(t, std::move(bw));
  return {std::move(t), id};
}

}  // namespace

Tape::Scope::Scope(Tape& t) {
  if (g_active != nullptr) {
    throw ValidationError("tape scopes may not nest on one thread");
  }
  g_active = &t;
}

Tape::Scope::~Scope() { g_active = nullptr; }

Tape* Tape::active() { return g_active; }

GradMap Tape::gradients(const Value& loss) {
  if (!loss.traced()) return GradMap{};  // loss touches no traced value
  require(loss.data.size() == 1, "grad: loss must be scalar");
  grads_.assign(nodes_.size(), {});
  grad_buf(loss.node)[0] = 1.0;
  for (int id = loss.node; id >= 0; --id) {
    const auto& node = nodes_[static_cast<std::size_t>(id)];
    if (!grads_[static_cast<std::size_t>(id)].empty() && node.backward) {
      node.backward(*this, id);
    }
  }
  return GradMap{std::move(grads_)};
}

Value watch(const Tensor& t) {
  Tape* tp = Tape::active();
  require(tp != nullptr, "watch: no active tape");
  int id = tp->add_node(t, nullptr);
  return {t, id};
}

Value add(const Value& a, const Value& b) {
  require(a.data.same_shape(b.data),
          "add: shape mismatch " + a.data.shape_str() + " vs " + b.data.shape_str());
  std::vector<double> out(static_cast<std::size_t>(a.data.size()));
  const double* pa = a.data.data();
  const double* pb = b.data.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] + pb[i];
  Tensor t(a.data.shape(), std::move(out));
  ensure_finite(t, "add");
  Tape* tp = Tape::active();
  if (!tp || (!a.traced() && !b.traced())) return {std::move(t), -1};
  const int ia = a.node, ib = b.node;
  int id = tp->add_node(t, [ia, ib](Tape& T, int self) {
    const auto& g = T.grad(self);
    if (ia >= 0) axpy(T.grad_buf(ia), 1.0, g);
    if (ib >= 0) axpy(T.grad_buf(ib), 1.0, g);
  });
  return {std::move(t), id};
}

Value sub(const Value& a, const Value& b) {
  require(a.data.same_shape(b.data),
          "sub: shape mismatch " + a.data.shape_str() + " vs " + b.data.shape_str());
  std::vector<double> out(static_cast<std::size_t>(a.data.size()));
  const double* pa = a.data.data();
  const double* pb = b.data.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] - pb[i];
  Tensor t(a.data.shape(), std::move(out));
  ensure_finite(t, "sub");
  Tape* tp = Tape::active();
  if (!tp || (!a.traced() && !b.traced())) return {std::move(t), -1};
  const int ia = a.node, ib = b.node;
  int id = tp->add_node(t, [ia, ib](Tape& T, int self) {
    const auto& g = T.grad(self);
    if (ia >= 0) axpy(T.grad_buf(ia), 1.0, g);
    if (ib >= 0) axpy(T.grad_buf(ib), -1.0, g);
  });
  return {std::move(t), id};
}

Value mul(const Value& a, const Value& b) {
  require(a.data.same_shape(b.data),
          "mul: shape mismatch " + a.data.shape_str() + " vs " + b.data.shape_str());
  std::vector<double> out(static_cast<std::size_t>(a.data.size()));
  const double* pa = a.data.data();
  const double* pb = b.data.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] * pb[i];
  Tensor t(a.data.shape(), std::move(out));
  ensure_finite(t, "mul");
  Tape* tp = Tape::active();
  if (!tp || (!a.traced() && !b.traced())) return {std::move(t), -1};
  const int ia = a.node, ib = b.node;
  const Tensor ta = a.data, tb = b.data;
  int id = tp->add_node(t, [ia, ib, ta, tb](Tape& T, int self) {
    const auto& g = T.grad(self);
    if (ia >= 0) {
      auto& da = T.grad_buf(ia);
      const double* pb2 = tb.data();
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * pb2[i];
    }
    if (ib >= 0) {
      auto& db = T.grad_buf(ib);
      const double* pa2 = ta.data();
      for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * pa2[i];
    }
  });
  return {std::move(t), id};
}

Value scale(const Value& a, double c) {
  return record_unary(
      a, "scale",
      [c](std::span<const double> x, std::vector<double>& y) {
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = c * x[i];
      },
      [c, ia = a.node](const Tensor&) -> Tape::Backward {
        return [c, ia](Tape& T, int self) {
          axpy(T.grad_buf(ia), c, T.grad(self));
        };
      });
}

Value lincomb(const Value& base, double h, std::span<const double> coefs,
              std::span<const Value> ks) {
  require(coefs.size() == ks.size(), "lincomb: coefs/terms length mismatch");
  std::vector<double> out = base.data.to_vector();
  for (std::size_t j = 0; j < ks.size(); ++j) {
    if (coefs[j] == 0.0) continue;
    require(ks[j].data.same_shape(base.data), "lincomb: term shape mismatch");
    const double c = h * coefs[j];
    const double* pk = ks[j].data.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += c * pk[i];
  }
  Tensor t(base.data.shape(), std::move(out));
  ensure_finite(t, "lincomb");
  Tape* tp = Tape::active();
  bool traced = base.traced();
  for (const auto& k : ks) traced = traced || k.traced();
  if (!tp || !traced) return {std::move(t), -1};
  std::vector<std::pair<int, double>> terms;  // (node, h*coef) for traced ks
  for (std::size_t j = 0; j < ks.size(); ++j) {
    if (coefs[j] != 0.0 && ks[j].traced()) terms.emplace_back(ks[j].node, h * coefs[j]);
  }
  const int ib = base.node;
  int id = tp->add_node(t, [ib, terms = std::move(terms)](Tape& T, int self) {
    const auto& g = T.grad(self);
    if (ib >= 0) axpy(T.grad_buf(ib), 1.0, g);
    for (const auto& [nk, c] : terms) axpy(T.grad_buf(nk), c, g);
  });
  return {std::move(t), id};
}

Value matvec(const Value& W, const Value& x) {
  require(W.data.rank() == 2, "matvec: W must be rank 2");
  require(x.data.rank() == 1, "matvec: x must be rank 1");
  const std::int64_t m = W.data.dim(0), n = W.data.dim(1);
  require(x.data.dim(0) == n, "matvec: inner dimension mismatch");
  std::vector<double> out(static_cast<std::size_t>(m));
  const double* pw = W.data.data();
  const double* px = x.data.data();
  for (std::int64_t i = 0; i < m; ++i) {
    const double* row = pw + i * n;
    double acc = 0.0;
    for (std::int64_t j = 0; j < n; ++j) acc += row[j] * px[j];
    out[static_cast<std::size_t>(i)] = acc;
  }
  Tensor t({m}, std::move(out));
  ensure_finite(t, "matvec");
  Tape* tp = Tape::active();
  if (!tp || (!W.traced() && !x.traced())) return {std::move(t), -1};
  const int iw = W.node, ix = x.node;
  const Tensor tw = W.data, tx = x.data;
  int id = tp->add_node(t, [iw, ix, tw, tx, m, n](Tape& T, int self) {
    const auto& g = T.grad(self);
    if (iw >= 0) {
      auto& dw = T.grad_buf(iw);
      const double* px2 = tx.data();
      for (std::int64_t i = 0; i < m; ++i) {
        const double gi = g[static_cast<std::size_t>(i)];
        if (gi == 0.0) continue;
        double* drow = dw.data() + i * n;
        for (std::int64_t j = 0; j < n; ++j) drow[j] += gi * px2[j];
      }
    }
    if (ix >= 0) {
      auto& dx = T.grad_buf(ix);
      const double* pw2 = tw.data();
      for (std::int64_t i = 0; i < m; ++i) {
        const double gi = g[static_cast<std::size_t>(i)];
        if (gi == 0.0) continue;
        const double* row = pw2 + i * n;
        for (std::int64_t j = 0; j < n; ++j) dx[static_cast<std::size_t>(j)] += gi * row[j];
      }
    }
  });
  return {std::move(t), id};
}

Value tanh_v(const Value& a) {
  return record_unary(
      a, "tanh",
      [](std::span<const double> x, std::vector<double>& y) {
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(x[i]);
      },
      [ia = a.node](const Tensor& y) -> Tape::Backward {
        return [ia, y](Tape& T, int self) {
          const auto& g = T.grad(self);
          auto& da = T.grad_buf(ia);
          const double* py = y.data();
          for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * (1.0 - py[i] * py[i]);
        };
      });
}

Value relu_v(const Value& a) {
  const Tensor in = a.data;
  return record_unary(
      a, "relu",
      [](std::span<const double> x, std::vector<double>& y) {
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
      },
      [ia = a.node, in](const Tensor&) -> Tape::Backward {
        return [ia, in](Tape& T, int self) {
          const auto& g = T.grad(self);
          auto& da = T.grad_buf(ia);
          const double* px = in.data();
          for (std::size_t i = 0; i < g.size(); ++i) {
            if (px[i] > 0.0) da[i] += g[i];
          }
        };
      });
}

Value sum_all(const Value& a) {
  double acc = 0.0;
  for (double x : a.data.span()) acc += x;
  Tensor t = Tensor::scalar(acc);
  ensure_finite(t, "sum");
  Tape* tp = Tape::active();
  if (!tp || !a.traced()) return {std::move(t), -1};
  const int ia = a.node;
  int id = tp->add_node(t, [ia](Tape& T, int self) {
    const double g = T.grad(self)[0];
    auto& da = T.grad_buf(ia);
    for (auto& d : da) d += g;
  });
  return {std::move(t), id};
}

Value mean_all(const Value& a) {
  require(a.data.size() > 0, "mean: empty tensor");
  return scale(sum_all(a), 1.0 / static_cast<double>(a.data.size()));
}

Value reshape(const Value& a, std::vector<std::int64_t> shape) {
  Tensor t = a.data.reshaped(std::move(shape));
  Tape* tp = Tape::active();
  if (!tp || !a.traced()) return {std::move(t), -1};
  const int ia = a.node;
  int id = tp->add_node(t, [ia](Tape& T, int self) {
    axpy(T.grad_buf(ia), 1.0, T.grad(self));
  });
  return {std::move(t), id};
}

Value mse_loss(const Value& a, const Value& b) {
  Value d = sub(a, b);
  return mean_all(mul(d, d));
}

double mse_loss(const Tensor& a, const Tensor& b) {
  require(a.same_shape(b), "mse: shape mismatch");
  require(a.size() > 0, "mse: empty tensor");
  const double* pa = a.data();
  const double* pb = b.data();
  double acc = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    const double d = pa[i] - pb[i];
    acc += d * d;
  }
  const double out = acc / static_cast<double>(a.size());
  if (!std::isfinite(out)) throw NumericError("non-finite value in mse");
  return out;
}

}  // namespace pcf
