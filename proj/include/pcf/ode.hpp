#pragma once

#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pcf/tape.hpp"
#include "pcf/tensor.hpp"

namespace pcf {

enum class SolverMethod { euler, heun, dopri5, tsit5 };

std::string solver_name(SolverMethod m);
SolverMethod solver_from_name(const std::string& name);

// Explicit Runge-Kutta coefficients. b_hat is empty for methods without an
// embedded error estimate (Euler), which forces fixed-step integration.
// For FSAL methods the last stage equals the next step's first stage, so a
// step attempt costs stages-1 evaluations once the solve is warm.
struct ButcherTableau {
  SolverMethod method;
  std::string name;
  int stages = 0;
  std::vector<double> c;
  std::vector<std::vector<double>> a;  // strictly lower triangular rows
  std::vector<double> b;
  std::vector<double> b_hat;  // embedded weights; empty if none
  int order = 0;
  int embedded_order = 0;
  bool fsal = false;
};

const ButcherTableau& tableau(SolverMethod m);

// Step-size policy. Acceptance uses the mixed-tolerance RMS error norm; the
// next step scales by a three-term digital filter over the last error norms:
//   factor = safety * err_n^-b1 * err_{n-1}^-b2 * err_{n-2}^-b3
// clamped to [min_factor, max_factor]. Gains < 0 mean "use the defaults
// (0.49, 0.34, 0.10) divided by the embedded order".
struct StepController {
  double rtol = 1e-3;
  double atol = 1e-6;
  double h0 = 1e-3;
  double min_step = 1e-12;
  double max_step = std::numeric_limits<double>::infinity();
  double safety = 0.9;
  double min_factor = 0.1;
  double max_factor = 10.0;
  double gain_p = -1.0, gain_i = -1.0, gain_d = -1.0;
  bool fixed_step = false;  // accept every step of size h0
};

struct PidState {
  double e1 = 1.0;  // previous error norm
  double e2 = 1.0;  // the one before
};

struct PidDecision {
  bool accept = false;
  double next_h = 0.0;
};

// One controller update. error_norm <= 1 accepts. Exposed for unit tests;
// integrate_adaptive uses exactly this.
PidDecision pid_next_step(const StepController& ctrl, PidState& state,
                          double error_norm, double h, int embedded_order);

// sqrt(mean_i (est_i / (atol + rtol*max(|y0_i|,|y1_i|)))^2)
double error_norm(const Tensor& est, const Tensor& y0, const Tensor& y1,
                  double rtol, double atol);

using FieldFn = std::function<Value(double, const Value&)>;

struct RkStepResult {
  Value y_next;
  Tensor error_estimate;  // h * sum (b-b_hat)_i k_i; zero-length if no b_hat
};

// Single explicit step of size h. Records onto the active tape via the
// Value ops, so reverse-mode gradients follow the discrete solver steps.
RkStepResult rk_step(const ButcherTableau& tb, const FieldFn& f, double t,
                     const Value& y, double h);

struct StepRecord {
  double t = 0.0;  // start of the accepted step
  double h = 0.0;
};

struct SolveResult {
  std::vector<Value> states;  // one per eval time; states[0] == y0
  long nfe = 0;
  long accepted = 0;
  long rejected = 0;
  std::vector<StepRecord> steps;
};

// Integrates y' = f(t, y) from eval_times[0], landing exactly on every eval
// time (the step is clipped, never interpolated). eval_times must be strictly
// increasing. Throws NumericError on blowup or step underflow.
SolveResult integrate_adaptive(const ButcherTableau& tb,
                               const StepController& ctrl, const FieldFn& f,
                               const Value& y0,
                               std::span<const double> eval_times);

// Solver selection as stored in configs and checkpoints.
struct SolverConfig {
  SolverMethod method = SolverMethod::tsit5;
  double rtol = 1e-3;
  double atol = 1e-6;
  double h0 = 1e-3;
  bool fixed_step = false;

  StepController controller() const {
    StepController c;
    c.rtol = rtol;
    c.atol = atol;
    c.h0 = h0;
    c.fixed_step = fixed_step;
    return c;
  }
};

}  // namespace pcf
