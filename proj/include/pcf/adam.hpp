#pragma once

#include <cstdint>
#include <vector>

#include "pcf/tensor.hpp"

namespace pcf {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment estimates, one tensor per parameter, in the same order
// as the parameter list the state was created for.
struct AdamState {
  AdamConfig cfg;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::int64_t step = 0;
};

AdamState make_adam_state(const std::vector<Tensor*>& params, AdamConfig cfg);

// One update with bias-corrected moments:
//   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
//   p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
// Parameters are replaced in place; grads must match the state's layout.
void adam_step(const std::vector<Tensor*>& params,
               const std::vector<Tensor>& grads, AdamState& state);

}  // namespace pcf
