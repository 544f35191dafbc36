#include "pcf/adam.hpp"

#include <cmath>

#include "pcf/errors.hpp"

namespace pcf {

AdamState make_adam_state(const std::vector<Tensor*>& params, AdamConfig cfg) {
  require(cfg.lr > 0.0, "adam: lr must be positive");
  require(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0, "adam: beta1 out of range");
  require(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0, "adam: beta2 out of range");
  AdamState st;
  st.cfg = cfg;
  for (const Tensor* p : params) {
    st.m.push_back(Tensor::zeros(p->shape()));
    st.v.push_back(Tensor::zeros(p->shape()));
  }
  return st;
}

void adam_step(const std::vector<Tensor*>& params,
               const std::vector<Tensor>& grads, AdamState& state) {
  require(params.size() == state.m.size() && params.size() == grads.size(),
          "adam: parameter/gradient/state layout mismatch");
  state.step += 1;
  const auto& c = state.cfg;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    const Tensor& g = grads[k];
    require(p.same_shape(g) && p.same_shape(state.m[k]),
            "adam: shape mismatch at parameter " + std::to_string(k));
    const std::size_t n = static_cast<std::size_t>(p.size());
    std::vector<double> pm = state.m[k].to_vector();
    std::vector<double> pv = state.v[k].to_vector();
    std::vector<double> pp = p.to_vector();
    const double* pg = g.data();
    for (std::size_t i = 0; i < n; ++i) {
      pm[i] = c.beta1 * pm[i] + (1.0 - c.beta1) * pg[i];
      pv[i] = c.beta2 * pv[i] + (1.0 - c.beta2) * pg[i] * pg[i];
      const double mhat = pm[i] / bc1;
      const double vhat = pv[i] / bc2;
      pp[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
    state.m[k] = Tensor(p.shape(), std::move(pm));
    state.v[k] = Tensor(p.shape(), std::move(pv));
    Tensor next(p.shape(), std::move(pp));
    ensure_finite(next, "adam_step");
    p = std::move(next);
  }
}

}  // namespace pcf
