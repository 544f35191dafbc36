#include "pcf/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "pcf/dyn_systems.hpp"
#include "pcf/errors.hpp"

namespace pcf {

namespace {

void check_pair(const Tensor& pred, const Tensor& truth, std::int64_t cutoff) {
  require(pred.rank() == 2 && truth.rank() == 2, "metric: expected [T, D]");
  require(pred.same_shape(truth), "metric: shape mismatch");
  require(cutoff >= 0 && cutoff < pred.dim(0), "metric: cutoff out of range");
}

double sq_sum_to(const Tensor& pred, const Tensor& truth, std::int64_t cutoff) {
  const std::int64_t D = pred.dim(1);
  double acc = 0.0;
  for (std::int64_t i = 0; i <= cutoff; ++i) {
    for (std::int64_t d = 0; d < D; ++d) {
      const double diff = pred.at(i, d) - truth.at(i, d);
      acc += diff * diff;
    }
  }
  return acc;
}

}  // namespace

double cumulative_mse(const Tensor& pred, const Tensor& truth,
                      std::int64_t cutoff) {
  check_pair(pred, truth, cutoff);
  return sq_sum_to(pred, truth, cutoff) /
         static_cast<double>((cutoff + 1) * pred.dim(1));
}

double cumulative_mse(const std::vector<Tensor>& preds,
                      const std::vector<Tensor>& truths, std::int64_t cutoff) {
  require(!preds.empty() && preds.size() == truths.size(),
          "metric: trajectory count mismatch");
  double acc = 0.0;
  for (std::size_t n = 0; n < preds.size(); ++n) {
    check_pair(preds[n], truths[n], cutoff);
    acc += sq_sum_to(preds[n], truths[n], cutoff) /
           static_cast<double>((cutoff + 1) * preds[n].dim(1));
  }
  return acc / static_cast<double>(preds.size());
}

double reduction_percent(double mse_without, double mse_with) {
  require(mse_without > 0.0, "reduction: baseline MSE must be positive");
  return 100.0 * (mse_without - mse_with) / mse_without;
}

std::int64_t extrapolation_horizon(
    const std::vector<std::pair<std::int64_t, double>>& reduction_curve,
    double threshold_percent) {
  require(!reduction_curve.empty(), "horizon: empty reduction curve");
  std::int64_t horizon = 0;
  std::int64_t prev = std::numeric_limits<std::int64_t>::min();
  for (const auto& [cutoff, reduction] : reduction_curve) {
    require(cutoff > prev, "horizon: cutoffs must increase");
    prev = cutoff;
    if (reduction >= threshold_percent) horizon = cutoff;
  }
  return horizon;
}

double mae(const Tensor& pred, const Tensor& truth) {
  require(pred.same_shape(truth), "mae: shape mismatch");
  const std::int64_t n = pred.size();
  require(n > 0, "mae: empty input");
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) acc += std::abs(pred[i] - truth[i]);
  return acc / static_cast<double>(n);
}

double mae(const std::vector<Tensor>& preds,
           const std::vector<Tensor>& truths) {
  require(!preds.empty() && preds.size() == truths.size(),
          "mae: trajectory count mismatch");
  double acc = 0.0;
  for (std::size_t n = 0; n < preds.size(); ++n) {
    acc += mae(preds[n], truths[n]);
  }
  return acc / static_cast<double>(preds.size());
}

std::vector<ParetoPoint> pareto_points(const std::vector<ParetoPoint>& runs) {
  require(!runs.empty(), "pareto: no runs");
  std::vector<ParetoPoint> out;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < runs.size() && !dominated; ++j) {
      if (i == j) continue;
      const bool as_good = runs[j].nfe <= runs[i].nfe &&
                           runs[j].horizon >= runs[i].horizon;
      const bool better = runs[j].nfe < runs[i].nfe ||
                          runs[j].horizon > runs[i].horizon;
      dominated = as_good && better;
    }
    if (!dominated) out.push_back(runs[i]);
  }
  return out;
}

StressCurve stress_curve(const std::vector<Tensor>& corrected,
                         const std::vector<Tensor>& uncorrected,
                         const std::vector<Tensor>& truth,
                         const std::vector<std::int64_t>& cutoffs) {
  require(!cutoffs.empty(), "stress: no cutoffs");
  StressCurve curve;
  curve.cutoffs = cutoffs;
  for (std::int64_t c : cutoffs) {
    const double mw = std::max(cumulative_mse(corrected, truth, c), 1e-300);
    const double mo = std::max(cumulative_mse(uncorrected, truth, c), 1e-300);
    curve.log_mse_corrected.push_back(std::log(mw));
    curve.log_mse_uncorrected.push_back(std::log(mo));
  }
  return curve;
}

EvalReport evaluate_correction(const std::vector<Tensor>& truth,
                               const std::vector<Tensor>& forecast,
                               const std::vector<Tensor>& corrected,
                               std::int64_t grid_step,
                               double threshold_percent) {
  require(grid_step >= 1, "evaluate: grid step must be positive");
  require(!truth.empty(), "evaluate: no trajectories");
  require(truth.size() == forecast.size() && truth.size() == corrected.size(),
          "evaluate: trajectory count mismatch");
  const std::int64_t T = truth.front().dim(0);
  require(T >= 2, "evaluate: trajectories too short");

  EvalReport report;
  report.threshold = threshold_percent;
  std::vector<std::int64_t> cutoffs;
  for (std::int64_t c = grid_step; c < T; c += grid_step) cutoffs.push_back(c);
  if (cutoffs.empty() || cutoffs.back() != T - 1) cutoffs.push_back(T - 1);

  std::vector<std::pair<std::int64_t, double>> curve;
  for (std::int64_t c : cutoffs) {
    EvalRow row;
    row.cutoff = c;
    row.mse_without = cumulative_mse(forecast, truth, c);
    row.mse_with = cumulative_mse(corrected, truth, c);
    row.reduction = row.mse_without > 0.0
                        ? reduction_percent(row.mse_without, row.mse_with)
                        : 0.0;
    curve.emplace_back(c, row.reduction);
    report.rows.push_back(row);
  }
  report.horizon = extrapolation_horizon(curve, threshold_percent);
  report.mae_without = mae(forecast, truth);
  report.mae_with = mae(corrected, truth);
  return report;
}

void write_report_csv(const std::filesystem::path& file,
                      const EvalReport& report) {
  if (file.has_parent_path()) {
    std::filesystem::create_directories(file.parent_path());
  }
  std::ofstream out(file);
  require(out.good(), "report: cannot open " + file.string());
  out << "cutoff,mse_without,mse_with,reduction_percent\n";
  for (const auto& row : report.rows) {
    out << row.cutoff << ',' << format_double(row.mse_without) << ','
        << format_double(row.mse_with) << ',' << format_double(row.reduction)
        << '\n';
  }
  require(out.good(), "report: write failed for " + file.string());
}

}  // namespace pcf
