#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "pcf/control_path.hpp"
#include "pcf/mlp.hpp"
#include "pcf/ode.hpp"
#include "pcf/predictors.hpp"
#include "pcf/rng.hpp"
#include "pcf/training.hpp"

namespace pcf {

// The corrector rides along the forecast: the forecast (plus time) becomes a
// control path X, a hidden state follows dz = f(z) dX from z(t0) = zeta(X(t0)),
// and a decoder reads the predicted error at each forecast time. The first
// point anchors the path and is never corrected.
struct CorrectorConfig {
  int latent = 11;  // hidden width C
  int zeta_width = 50;
  int zeta_depth = 1;
  int field_width = 400;
  int field_depth = 4;
  int decoder_width = 400;
  int decoder_depth = 4;
  PathScheme interpolation = PathScheme::hermite;
  SolverConfig solver;
};

struct CorrectorModel {
  CorrectorConfig cfg;
  std::int64_t dim = 0;  // observed dimension D
  MlpParams zeta;        // (D+1) -> C, tanh
  MlpParams field;       // C -> C*(D+1), tanh
  MlpParams decoder;     // C -> D, relu hidden layers
};

CorrectorModel make_corrector(std::int64_t dim, const CorrectorConfig& cfg,
                              std::uint64_t seed);

// z0 = zeta((x0, t0)).
Tensor init_hidden(const CorrectorModel& model, const Tensor& x0, double t0);

// Hidden states at eval_times; z starts from zeta(X(t_begin)). eval_times must
// be strictly increasing, start at the path begin, and stay inside the domain.
std::vector<Tensor> cde_integrate(const CorrectorModel& model,
                                  const ControlPath& path,
                                  std::span<const double> eval_times,
                                  long* nfe = nullptr);

// Pointwise decode; row 0 is zero by definition (the forecast anchor is
// never corrected). hiddens.size() rows, D columns.
Tensor decode_errors(const CorrectorModel& model,
                     const std::vector<Tensor>& hiddens);

// Full inference pass: fit path, integrate, decode. forecast is [T, D], T >= 2.
// No subsampling happens here; regularization applies during training only.
Tensor corrector_forward(const CorrectorModel& model,
                         std::span<const double> times, const Tensor& forecast,
                         long* nfe = nullptr);

// Elementwise forecast + errors; with the true errors this reproduces the
// ground truth exactly.
Tensor correct(const Tensor& forecast, const Tensor& errors);

struct RegularizationConfig {
  int eta = 0;         // tail-drop bound, k ~ Uniform{0..eta}, needs eta <= T-4
  double kappa = 1.0;  // fraction of control-path knots retained, in (0, 1]
};

// k ~ Uniform{0..eta}, drawn fresh each forward pass.
int sample_tail_drop(int eta, Rng& rng);

// Sorted retained indices for a sparse pass: ceil(kappa * len) of them,
// index 0 always kept. Requires at least 4 survivors.
std::vector<std::size_t> sparsify_path(std::size_t len, double kappa, Rng& rng);

struct CorrectorHyper {
  int batch = 256;
  double lr = 1e-3;
  int max_epochs = 100;
  int patience = 20;
  double val_fraction = 0.1;
  int train_horizon = 50;          // forecast points per bundle used in training
  double observed_fraction = 1.0;  // simulated sparsity matching the data regime
  std::uint64_t seed = 0;
};

// Incremental trainer so the alternating mode can interleave updates.
// One step() consumes one batch of bundles; epochs advance automatically.
class CorrectorTrainer {
 public:
  CorrectorTrainer(CorrectorModel& model, std::vector<ForecastBundle> bundles,
                   const RegularizationConfig& reg, const CorrectorHyper& hyper);

  double step();
  int steps_per_epoch() const;
  long take_nfe() { return std::exchange(nfe_, 0); }

  // Swaps in fresh bundles (after the predictor moved) without resetting the
  // optimizer state.
  void set_bundles(std::vector<ForecastBundle> bundles);

 private:
  void reshuffle();

  CorrectorModel& model_;
  std::vector<ForecastBundle> bundles_;
  RegularizationConfig reg_;
  CorrectorHyper hyper_;
  AdamState adam_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::uint64_t epoch_ = 0;
  std::uint64_t pass_ = 0;  // distinct RNG stream per batch
  long nfe_ = 0;
};

std::pair<CorrectorModel, TrainLog> train_corrector(
    const std::vector<ForecastBundle>& bundles, std::int64_t dim,
    const CorrectorConfig& cfg, const RegularizationConfig& reg,
    const CorrectorHyper& hyper);

// Pointwise baseline: a feedforward map (x_i, t_i) -> e_i with no coupling
// across time.
struct MlpCorrectorModel {
  MlpParams net;  // (D+1) -> D
};

MlpCorrectorModel make_mlp_corrector(std::int64_t dim, int width, int depth,
                                     std::uint64_t seed);

// Single-point application, no zeroing; rows are independent.
Tensor mlp_correct_point(const MlpCorrectorModel& model, const Tensor& x,
                         double t);

// [T, D] errors with row 0 zeroed, matching the corrector convention.
Tensor apply_mlp_corrector(const MlpCorrectorModel& model,
                           std::span<const double> times,
                           const Tensor& forecast);

std::pair<MlpCorrectorModel, TrainLog> train_mlp_corrector(
    const std::vector<ForecastBundle>& bundles, std::int64_t dim, int width,
    int depth, const CorrectorHyper& hyper);

struct AlternatingHyper {
  int rounds = 10;
  int predictor_steps = 1;  // m; 0 freezes the predictor
  int corrector_steps = 1;  // n; 0 skips correction
  NodeHyper node;
  RegularizationConfig reg;
  CorrectorHyper corr;
};

struct AlternatingLog {
  std::vector<double> predictor_loss;  // per round (NaN when m == 0)
  std::vector<double> corrector_loss;  // per round (NaN when n == 0)
  long nfe = 0;
};

// Interleaves m predictor batches and n corrector batches per round,
// regenerating forecast bundles after each predictor phase. Both models are
// updated in place.
AlternatingLog train_alternating(NodeModel& node, CorrectorModel& corrector,
                                 const Dataset& train,
                                 const AlternatingHyper& hyper);

void save_corrector(const std::filesystem::path& file,
                    const CorrectorModel& model);
CorrectorModel load_corrector(const std::filesystem::path& file);

}  // namespace pcf
