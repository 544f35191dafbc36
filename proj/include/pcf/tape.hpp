#pragma once

#include <functional>
#include <span>
#include <vector>

#include "pcf/tensor.hpp"

namespace pcf {

class Tape;

// Tensor plus its position on the recording tape. node < 0 means the value is
// a constant (or no tape was active when it was produced); such values take
// part in arithmetic but receive no gradient.
struct Value {
  Tensor data;
  int node = -1;

  bool traced() const { return node >= 0; }
  double scalar() const { return data[0]; }
};

// Gradients of one scalar loss, keyed by tape node. Values that never
// received a gradient (constants, parameters the loss does not depend on)
// read back as zeros of their own shape.
class GradMap {
 public:
  GradMap() = default;
  explicit GradMap(std::vector<std::vector<double>> g) : g_(std::move(g)) {}

  Tensor at(const Value& v) const {
    if (v.node >= 0 && static_cast<std::size_t>(v.node) < g_.size() &&
        !g_[static_cast<std::size_t>(v.node)].empty()) {
      return Tensor(v.data.shape(), g_[static_cast<std::size_t>(v.node)]);
    }
    return Tensor::zeros(v.data.shape());
  }

 private:
  std::vector<std::vector<double>> g_;
};

// Wengert list for reverse-mode differentiation. Ops executed while a tape is
// active append one node each; gradients() replays the list backward, visiting
// every node after all of its consumers, so each backward rule runs exactly
// once. One tape per thread: activation is thread-local, and batch members are
// differentiated on separate tapes.
class Tape {
 public:
  // backward(tape, self): read grad(self), accumulate into parent buffers.
  using Backward = std::function<void(Tape&, int)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // RAII activation for the current thread. Scopes may not nest.
  class Scope {
   public:
    explicit Scope(Tape& t);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;
  };

  static Tape* active();

  int add_node(Tensor value, Backward backward) {
    nodes_.push_back(Node{std::move(value), std::move(backward)});
    return static_cast<int>(nodes_.size()) - 1;
  }

  std::size_t size() const { return nodes_.size(); }

  // Gradient accumulator for a node, zero-initialised on first access.
  std::vector<double>& grad_buf(int id) {
    auto& g = grads_[static_cast<std::size_t>(id)];
    if (g.empty()) g.assign(static_cast<std::size_t>(nodes_[static_cast<std::size_t>(id)].value.size()), 0.0);
    return g;
  }

  const std::vector<double>& grad(int id) const { return grads_[static_cast<std::size_t>(id)]; }

  // d(loss)/d(node) for every node the scalar loss depends on.
  GradMap gradients(const Value& loss);

 private:
  struct Node {
    Tensor value;
    Backward backward;  // null for leaves
  };

  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
};

// Leaf registration: parameters must be watched on the active tape before use
// so their gradients accumulate in one place.
Value watch(const Tensor& t);

inline Value constant(Tensor t) { return Value{std::move(t), -1}; }

// Elementwise; operands must have identical shapes.
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
Value scale(const Value& a, double c);

// base + h * sum_i coefs[i] * ks[i]; the workhorse of Runge-Kutta stages,
// recorded as a single node. Zero coefficients are skipped.
Value lincomb(const Value& base, double h, std::span<const double> coefs,
              std::span<const Value> ks);

// W: [m,n], x: [n] -> [m].
Value matvec(const Value& W, const Value& x);

Value tanh_v(const Value& a);
Value relu_v(const Value& a);
Value sum_all(const Value& a);   // -> scalar
Value mean_all(const Value& a);  // -> scalar
Value reshape(const Value& a, std::vector<std::int64_t> shape);

// Mean over all elements of (a-b)^2, composed from the primitives above.
Value mse_loss(const Value& a, const Value& b);
double mse_loss(const Tensor& a, const Tensor& b);

}  // namespace pcf
