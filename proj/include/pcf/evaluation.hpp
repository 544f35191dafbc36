#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "pcf/tensor.hpp"

namespace pcf {

// Cumulative MSE from timestep 0 up to `cutoff` inclusive, averaged over
// timesteps and features (and trajectories in the vector form).
double cumulative_mse(const Tensor& pred, const Tensor& truth,
                      std::int64_t cutoff);
double cumulative_mse(const std::vector<Tensor>& preds,
                      const std::vector<Tensor>& truths, std::int64_t cutoff);

// 100 * (without - with) / without; negative when the correction hurts.
double reduction_percent(double mse_without, double mse_with);

// Largest cutoff on the (increasing) grid whose reduction meets the
// threshold; 0 when none does.
std::int64_t extrapolation_horizon(
    const std::vector<std::pair<std::int64_t, double>>& reduction_curve,
    double threshold_percent = 3.0);

double mae(const Tensor& pred, const Tensor& truth);
double mae(const std::vector<Tensor>& preds, const std::vector<Tensor>& truths);

struct ParetoPoint {
  double nfe = 0.0;
  double horizon = 0.0;
  std::size_t tag = 0;  // caller's run index, carried through
};

// Subset not dominated under (lower NFE, higher horizon). Ties survive:
// a point is removed only if some other point is at least as good in both
// coordinates and strictly better in one.
std::vector<ParetoPoint> pareto_points(const std::vector<ParetoPoint>& runs);

struct StressCurve {
  std::vector<std::int64_t> cutoffs;
  std::vector<double> log_mse_corrected;
  std::vector<double> log_mse_uncorrected;
};

// Log cumulative MSE per cutoff for both variants. Zero MSE is floored at
// 1e-300 before the log so curves stay finite.
StressCurve stress_curve(const std::vector<Tensor>& corrected,
                         const std::vector<Tensor>& uncorrected,
                         const std::vector<Tensor>& truth,
                         const std::vector<std::int64_t>& cutoffs);

struct EvalRow {
  std::int64_t cutoff = 0;
  double mse_without = 0.0;
  double mse_with = 0.0;
  double reduction = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::int64_t horizon = 0;
  double threshold = 3.0;
  double mae_without = 0.0;
  double mae_with = 0.0;
};

// Scans cutoffs on a grid (default every 5 steps, final index always
// included) and fills the report.
EvalReport evaluate_correction(const std::vector<Tensor>& truth,
                               const std::vector<Tensor>& forecast,
                               const std::vector<Tensor>& corrected,
                               std::int64_t grid_step = 5,
                               double threshold_percent = 3.0);

void write_report_csv(const std::filesystem::path& file,
                      const EvalReport& report);

}  // namespace pcf
