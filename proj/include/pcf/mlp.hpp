#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pcf/rng.hpp"
#include "pcf/tape.hpp"
#include "pcf/tensor.hpp"

namespace pcf {

enum class Activation { tanh_act, relu_act, identity };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// Fully connected network. The activation applies to hidden layers only; the
// output layer is affine.
struct MlpLayer {
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]
};

struct MlpParams {
  std::vector<MlpLayer> layers;
  Activation act = Activation::tanh_act;

  std::int64_t in_dim() const { return layers.front().weight.dim(1); }
  std::int64_t out_dim() const { return layers.back().weight.dim(0); }
  std::vector<std::int64_t> sizes() const;
};

// Layer sizes for the FC(width)_depth shorthand: `depth` hidden layers of
// `width` units between `in` and `out`.
std::vector<std::int64_t> fc_sizes(std::int64_t in, std::int64_t width,
                                   int depth, std::int64_t out);

// Weights and biases drawn from U(-sqrt(1/fan_in), sqrt(1/fan_in)).
MlpParams make_mlp(std::span<const std::int64_t> sizes, Activation act,
                   Rng& rng);

// Network with its parameters registered on the active tape, so one gradient
// pass accumulates into a single buffer per layer however often the network
// is applied.
struct TracedMlp {
  std::vector<std::pair<Value, Value>> layers;  // (weight, bias)
  Activation act = Activation::tanh_act;
};

TracedMlp watch_mlp(const MlpParams& p);

// Same arithmetic with the parameters as constants (no gradient).
TracedMlp const_mlp(const MlpParams& p);

Value mlp_apply(const TracedMlp& m, const Value& x);

// Plain forward pass. Records onto the active tape (watching the parameters)
// when one is open; otherwise pure evaluation. Bit-identical either way.
Tensor mlp_forward(const MlpParams& p, const Tensor& x);

// Flat views used by the optimizer and the gradient collector. Order is
// layer-major: weight, bias, weight, bias, ...
std::vector<Tensor*> mlp_param_ptrs(MlpParams& p);
std::vector<Tensor> mlp_grads(const GradMap& g, const TracedMlp& m);

}  // namespace pcf
