#include "pcf/ode.hpp"

#include <algorithm>
#include <cmath>

namespace pcf {
namespace {

ButcherTableau make_euler() {
  ButcherTableau t;
  t.method = SolverMethod::euler;
  t.name = "euler";
  t.stages = 1;
  t.c = {0.0};
  t.a = {{}};
  t.b = {1.0};
  t.order = 1;
  t.embedded_order = 0;
  t.fsal = false;
  return t;
}

ButcherTableau make_heun() {
  ButcherTableau t;
  t.method = SolverMethod::heun;
  t.name = "heun";
  t.stages = 2;
  t.c = {0.0, 1.0};
  t.a = {{}, {1.0}};
  t.b = {0.5, 0.5};
  t.b_hat = {1.0, 0.0};
  t.order = 2;
  t.embedded_order = 1;
  t.fsal = false;
  return t;
}

ButcherTableau make_dopri5() {
  ButcherTableau t;
  t.method = SolverMethod::dopri5;
  t.name = "dopri5";
  t.stages = 7;
  t.c = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
  t.a = {{},
         {1.0 / 5},
         {3.0 / 40, 9.0 / 40},
         {44.0 / 45, -56.0 / 15, 32.0 / 9},
         {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
         {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176,
          -5103.0 / 18656},
         {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784,
          11.0 / 84}};
  t.b = {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784,
         11.0 / 84, 0.0};
  t.b_hat = {5179.0 / 57600, 0.0,           7571.0 / 16695, 393.0 / 640,
             -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};
  t.order = 5;
  t.embedded_order = 4;
  t.fsal = true;
  return t;
}

ButcherTableau make_tsit5() {
  ButcherTableau t;
  t.method = SolverMethod::tsit5;
  t.name = "tsit5";
  t.stages = 7;
  t.c = {0.0, 0.161, 0.327, 0.9, 0.9800255409045097, 1.0, 1.0};
  t.a = {{},
         {0.161},
         {-0.008480655492356989, 0.335480655492357},
         {2.8971530571054935, -6.359448489975075, 4.3622954328695815},
         {5.325864828439257, -11.748883564062828, 7.4955393428898365,
          -0.09249506636175525},
         {5.86145544294642, -12.92096931784711, 8.159367898576159,
          -0.071584973281401, -0.028269050394068383},
         {0.09646076681806523, 0.01, 0.4798896504144996, 1.379008574103742,
          -3.290069515436081, 2.324710524099774}};
  t.b = {0.09646076681806523, 0.01, 0.4798896504144996, 1.379008574103742,
         -3.290069515436081, 2.324710524099774, 0.0};
  // b - b_hat from the reference coefficients; recover b_hat so all embedded
  // methods store their weights the same way.
  const std::vector<double> b_minus_bhat = {
      -0.00178001105222577714, -0.0008164344596567469, 0.007880878010261995,
      -0.1447110071732629,     0.5823571654525552,     -0.45808210592918697,
      0.015151515151515152};
  t.b_hat.resize(7);
  for (int i = 0; i < 7; ++i) t.b_hat[static_cast<std::size_t>(i)] = t.b[static_cast<std::size_t>(i)] - b_minus_bhat[static_cast<std::size_t>(i)];
  t.order = 5;
  t.embedded_order = 4;
  t.fsal = true;
  return t;
}

}  // namespace

std::string solver_name(SolverMethod m) {
  switch (m) {
    case SolverMethod::euler: return "euler";
    case SolverMethod::heun: return "heun";
    case SolverMethod::dopri5: return "dopri5";
    case SolverMethod::tsit5: return "tsit5";
  }
  return "tsit5";
}

SolverMethod solver_from_name(const std::string& name) {
  if (name == "euler") return SolverMethod::euler;
  if (name == "heun") return SolverMethod::heun;
  if (name == "dopri5") return SolverMethod::dopri5;
  if (name == "tsit5") return SolverMethod::tsit5;
  throw ValidationError("unknown solver '" + name + "'");
}

const ButcherTableau& tableau(SolverMethod m) {
  static const ButcherTableau euler = make_euler();
  static const ButcherTableau heun = make_heun();
  static const ButcherTableau dopri5 = make_dopri5();
  static const ButcherTableau tsit5 = make_tsit5();
  switch (m) {
    case SolverMethod::euler: return euler;
    case SolverMethod::heun: return heun;
    case SolverMethod::dopri5: return dopri5;
    case SolverMethod::tsit5: return tsit5;
  }
  return tsit5;
}

PidDecision pid_next_step(const StepController& ctrl, PidState& state,
                          double error_norm, double h, int embedded_order) {
  require(error_norm >= 0.0, "pid_next_step: negative error norm");
  if (ctrl.fixed_step) {
    return {true, h};
  }
  const double inv_order = 1.0 / std::max(1, embedded_order);
  const double b1 = ctrl.gain_p >= 0.0 ? ctrl.gain_p : 0.49 * inv_order;
  const double b2 = ctrl.gain_i >= 0.0 ? ctrl.gain_i : 0.34 * inv_order;
  const double b3 = ctrl.gain_d >= 0.0 ? ctrl.gain_d : 0.10 * inv_order;
  double factor;
  if (error_norm == 0.0) {
    factor = ctrl.max_factor;
  } else {
    factor = ctrl.safety * std::pow(error_norm, -b1) *
             std::pow(state.e1, -b2) * std::pow(state.e2, -b3);
    factor = std::clamp(factor, ctrl.min_factor, ctrl.max_factor);
  }
  state.e2 = state.e1;
  state.e1 = std::max(error_norm, 1e-10);
  PidDecision d;
  d.accept = error_norm <= 1.0;
  d.next_h = std::min(h * factor, ctrl.max_step);
  // A rejected step must shrink even when the error history pushes the
  // filter factor above one, or the retry loop could stall.
  if (!d.accept) d.next_h = std::min(d.next_h, ctrl.safety * h);
  return d;
}

double error_norm(const Tensor& est, const Tensor& y0, const Tensor& y1,
                  double rtol, double atol) {
  require(est.same_shape(y0) && est.same_shape(y1),
          "error_norm: shape mismatch");
  const std::int64_t n = est.size();
  require(n > 0, "error_norm: empty state");
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double scale =
        atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double r = est[i] / scale;
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(n));
}

namespace {

// Shared stage computation. k1, when supplied, is the FSAL carry-over from
// the previous accepted step. Returns the stage derivatives through `ks`.
Value run_stages(const ButcherTableau& tb, const FieldFn& f, double t,
                 const Value& y, double h, std::vector<Value>& ks, long& nfe) {
  const int s = tb.stages;
  ks.resize(static_cast<std::size_t>(s));
  if (!ks[0].data.size()) {
    ks[0] = f(t, y);
    ++nfe;
  }
  for (int i = 1; i < s; ++i) {
    const auto& row = tb.a[static_cast<std::size_t>(i)];
    Value yi = lincomb(y, h, std::span<const double>(row.data(), row.size()),
                       std::span<const Value>(ks.data(), row.size()));
    ks[static_cast<std::size_t>(i)] = f(t + tb.c[static_cast<std::size_t>(i)] * h, yi);
    ++nfe;
  }
  return lincomb(y, h, std::span<const double>(tb.b.data(), tb.b.size()),
                 std::span<const Value>(ks.data(), ks.size()));
}

Tensor raw_error_estimate(const ButcherTableau& tb, double h,
                          const std::vector<Value>& ks) {
  if (tb.b_hat.empty()) return Tensor({0}, {});
  std::vector<double> est(static_cast<std::size_t>(ks[0].data.size()), 0.0);
  for (int i = 0; i < tb.stages; ++i) {
    const double c = h * (tb.b[static_cast<std::size_t>(i)] - tb.b_hat[static_cast<std::size_t>(i)]);
    if (c == 0.0) continue;
    const double* pk = ks[static_cast<std::size_t>(i)].data.data();
    for (std::size_t j = 0; j < est.size(); ++j) est[j] += c * pk[j];
  }
  return Tensor(ks[0].data.shape(), std::move(est));
}

}  // namespace

RkStepResult rk_step(const ButcherTableau& tb, const FieldFn& f, double t,
                     const Value& y, double h) {
  require(h > 0.0, "rk_step: step must be positive");
  std::vector<Value> ks;
  long nfe = 0;
  Value y_next = run_stages(tb, f, t, y, h, ks, nfe);
  ensure_finite(y_next.data, "rk_step");
  return RkStepResult{std::move(y_next), raw_error_estimate(tb, h, ks)};
}

SolveResult integrate_adaptive(const ButcherTableau& tb,
                               const StepController& ctrl, const FieldFn& f,
                               const Value& y0,
                               std::span<const double> eval_times) {
  require(!eval_times.empty(), "integrate: eval_times is empty");
  for (std::size_t i = 1; i < eval_times.size(); ++i) {
    require(eval_times[i] > eval_times[i - 1],
            "integrate: eval_times must be strictly increasing");
  }
  require(ctrl.h0 > 0.0, "integrate: h0 must be positive");
  require(ctrl.rtol > 0.0 && ctrl.atol > 0.0,
          "integrate: tolerances must be positive");
  require(y0.data.size() > 0, "integrate: empty state");
  const bool fixed = ctrl.fixed_step || tb.b_hat.empty();

  SolveResult res;
  res.states.reserve(eval_times.size());
  res.states.push_back(y0);

  Value y = y0;
  double t = eval_times[0];
  double h = std::min(ctrl.h0, ctrl.max_step);
  PidState pid;
  std::vector<Value> ks;
  Value fsal_k1;  // f(t, y) for the current (t, y) when available

  const long max_attempts = 50'000'000;
  long attempts = 0;

  for (std::size_t ti = 1; ti < eval_times.size(); ++ti) {
    const double target = eval_times[ti];
    while (true) {
      const double remaining = target - t;
      if (remaining <= 1e-14 * std::max(1.0, std::abs(target))) break;
      bool landing = false;
      double h_try = fixed ? ctrl.h0 : h;
      if (h_try >= remaining * (1.0 - 1e-12)) {
        h_try = remaining;
        landing = true;
      }
      if (!fixed && !landing && h_try < ctrl.min_step) {
        throw NumericError("integrate: step underflow at t=" +
                           std::to_string(t));
      }
      if (++attempts > max_attempts) {
        throw NumericError("integrate: step limit exceeded");
      }

      ks.assign(static_cast<std::size_t>(tb.stages), Value{});
      if (tb.fsal && fsal_k1.data.size()) ks[0] = fsal_k1;
      Value y_next = run_stages(tb, f, t, y, h_try, ks, res.nfe);
      ensure_finite(y_next.data, "integrate");
      if (tb.fsal) fsal_k1 = ks[0];  // valid for retries at the same (t, y)

      double err = 0.0;
      if (!fixed) {
        const Tensor est = raw_error_estimate(tb, h_try, ks);
        err = error_norm(est, y.data, y_next.data, ctrl.rtol, ctrl.atol);
      }
      const double h_cruise = h;
      PidDecision dec = pid_next_step(ctrl, pid, err, h_try, tb.embedded_order);
      if (!fixed) h = dec.next_h;
      if (dec.accept) {
        res.steps.push_back(StepRecord{t, h_try});
        ++res.accepted;
        t = landing ? target : t + h_try;
        y = y_next;
        if (tb.fsal) fsal_k1 = ks[static_cast<std::size_t>(tb.stages - 1)];
        // A step clipped to land on an eval time says nothing about the
        // sustainable step size; keep the cruising step instead of
        // rebuilding it from the clipped value.
        if (!fixed && landing) h = std::max(h, h_cruise);
      } else {
        ++res.rejected;
      }
    }
    res.states.push_back(y);
  }
  return res;
}

}  // namespace pcf
