#include "pcf/mlp.hpp"

#include <cmath>

namespace pcf {

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::tanh_act: return "tanh";
    case Activation::relu_act: return "relu";
    case Activation::identity: return "identity";
  }
  return "tanh";
}

Activation activation_from_name(const std::string& name) {
  if (name == "tanh") return Activation::tanh_act;
  if (name == "relu") return Activation::relu_act;
  if (name == "identity") return Activation::identity;
  throw ValidationError("unknown activation '" + name + "'");
}

std::vector<std::int64_t> MlpParams::sizes() const {
  std::vector<std::int64_t> s;
  s.push_back(in_dim());
  for (const auto& l : layers) s.push_back(l.weight.dim(0));
  return s;
}

std::vector<std::int64_t> fc_sizes(std::int64_t in, std::int64_t width,
                                   int depth, std::int64_t out) {
  require(depth >= 0, "fc_sizes: negative depth");
  std::vector<std::int64_t> s;
  s.push_back(in);
  for (int i = 0; i < depth; ++i) s.push_back(width);
  s.push_back(out);
  return s;
}

MlpParams make_mlp(std::span<const std::int64_t> sizes, Activation act,
                   Rng& rng) {
  require(sizes.size() >= 2, "make_mlp: need at least input and output sizes");
  MlpParams p;
  p.act = act;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const std::int64_t fan_in = sizes[l], fan_out = sizes[l + 1];
    require(fan_in > 0 && fan_out > 0, "make_mlp: non-positive layer size");
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    std::vector<double> w(static_cast<std::size_t>(fan_in * fan_out));
    for (auto& x : w) x = rng.uniform(-bound, bound);
    std::vector<double> b(static_cast<std::size_t>(fan_out));
    for (auto& x : b) x = rng.uniform(-bound, bound);
    p.layers.push_back(MlpLayer{Tensor({fan_out, fan_in}, std::move(w)),
                                Tensor({fan_out}, std::move(b))});
  }
  return p;
}

TracedMlp watch_mlp(const MlpParams& p) {
  TracedMlp m;
  m.act = p.act;
  for (const auto& l : p.layers) {
    m.layers.emplace_back(watch(l.weight), watch(l.bias));
  }
  return m;
}

TracedMlp const_mlp(const MlpParams& p) {
  TracedMlp m;
  m.act = p.act;
  for (const auto& l : p.layers) {
    m.layers.emplace_back(constant(l.weight), constant(l.bias));
  }
  return m;
}

Value mlp_apply(const TracedMlp& m, const Value& x) {
  require(!m.layers.empty(), "mlp_apply: empty network");
  Value h = x;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    h = add(matvec(m.layers[l].first, h), m.layers[l].second);
    if (l + 1 < m.layers.size()) {
      switch (m.act) {
        case Activation::tanh_act: h = tanh_v(h); break;
        case Activation::relu_act: h = relu_v(h); break;
        case Activation::identity: break;
      }
    }
  }
  return h;
}

Tensor mlp_forward(const MlpParams& p, const Tensor& x) {
  if (Tape::active() != nullptr) {
    return mlp_apply(watch_mlp(p), constant(x)).data;
  }
  return mlp_apply(const_mlp(p), constant(x)).data;
}

std::vector<Tensor*> mlp_param_ptrs(MlpParams& p) {
  std::vector<Tensor*> out;
  for (auto& l : p.layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<Tensor> mlp_grads(const GradMap& g, const TracedMlp& m) {
  std::vector<Tensor> out;
  for (const auto& l : m.layers) {
    out.push_back(g.at(l.first));
    out.push_back(g.at(l.second));
  }
  return out;
}

}  // namespace pcf
