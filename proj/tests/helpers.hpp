#pragma once

// Glue between the library types and the plain-vector oracles.

#include <functional>
#include <vector>

#include "oracles.hpp"
#include "pcf/mlp.hpp"
#include "pcf/tensor.hpp"

namespace testutil {

inline std::vector<oracle::FlatLayer> flat_layers(const pcf::MlpParams& p) {
  std::vector<oracle::FlatLayer> out;
  for (const auto& l : p.layers) {
    oracle::FlatLayer f;
    f.w = l.weight.to_vector();
    f.b = l.bias.to_vector();
    f.out = static_cast<std::size_t>(l.weight.dim(0));
    f.in = static_cast<std::size_t>(l.weight.dim(1));
    out.push_back(std::move(f));
  }
  return out;
}

inline int act_code(pcf::Activation a) {
  switch (a) {
    case pcf::Activation::tanh_act: return 0;
    case pcf::Activation::relu_act: return 1;
    case pcf::Activation::identity: return 2;
  }
  return 2;
}

// Central finite difference of `loss` with respect to one coordinate of a
// parameter tensor owned by a model. Restores the original value afterward.
inline double fd_coord(pcf::Tensor* p, std::int64_t i, double h,
                       const std::function<double()>& loss) {
  const std::vector<double> orig = p->to_vector();
  std::vector<double> v = orig;
  v[static_cast<std::size_t>(i)] = orig[static_cast<std::size_t>(i)] + h;
  *p = pcf::Tensor(p->shape(), v);
  const double up = loss();
  v[static_cast<std::size_t>(i)] = orig[static_cast<std::size_t>(i)] - h;
  *p = pcf::Tensor(p->shape(), v);
  const double dn = loss();
  *p = pcf::Tensor(p->shape(), orig);
  return (up - dn) / (2.0 * h);
}

// Largest relative mismatch between an analytic gradient tensor and finite
// differences over every coordinate of `p`.
inline double max_grad_mismatch(pcf::Tensor* p, const pcf::Tensor& grad,
                                double h, const std::function<double()>& loss) {
  double worst = 0.0;
  for (std::int64_t i = 0; i < p->size(); ++i) {
    const double fd = fd_coord(p, i, h, loss);
    const double g = grad[i];
    const double scale = std::max({1.0, std::abs(fd), std::abs(g)});
    worst = std::max(worst, std::abs(fd - g) / scale);
  }
  return worst;
}

}  // namespace testutil
