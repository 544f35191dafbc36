#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "pcf/adam.hpp"
#include "pcf/dyn_systems.hpp"
#include "pcf/mlp.hpp"
#include "pcf/ode.hpp"
#include "pcf/training.hpp"

namespace pcf {

// --- neural ODE --------------------------------------------------------------

// dx/dt = f(x) with f a tanh MLP; forecasts integrate the learned field from
// the first observation.
struct NodeModel {
  MlpParams field;
  SolverConfig solver;
};

struct NodeHyper {
  int width = 100;
  int depth = 2;
  int batch = 16;
  double lr = 1e-3;
  int max_epochs = 100;
  int patience = 20;
  int horizon = 40;                // training uses the first `horizon` points
  double observed_fraction = 1.0;  // < 1 simulates irregular sampling
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
  SolverConfig solver;
};

NodeModel make_node(int dim, int width, int depth, std::uint64_t seed,
                    const SolverConfig& solver);

// States at `times` (times[0] carries x0). Records onto the active tape when
// one is open. nfe, when given, accumulates function evaluations.
Tensor node_forecast(const NodeModel& model, const Tensor& x0,
                     std::span<const double> times, long* nfe = nullptr);

// --- moving-average decomposition + linear heads (DLinear) -------------------

struct LinearMap {
  Tensor weight;  // [horizon, lookback]
  Tensor bias;    // [horizon]
};

struct DLinearModel {
  std::int64_t lookback = 0;
  std::int64_t horizon = 0;
  int kernel = 25;  // moving-average window, odd
  bool channel_shared = true;
  std::vector<LinearMap> trend;     // size 1 if shared, else one per channel
  std::vector<LinearMap> seasonal;
};

struct DLinearHyper {
  int kernel = 25;
  bool channel_shared = true;
  int batch = 32;
  double lr = 1e-3;
  int max_epochs = 200;
  int patience = 20;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
};

DLinearModel make_dlinear(std::int64_t lookback, std::int64_t horizon,
                          int kernel, bool channel_shared, std::int64_t dim,
                          std::uint64_t seed);

// Moving average with replicate padding; trend + seasonal == window exactly.
std::pair<Tensor, Tensor> decompose_window(const Tensor& window, int kernel);

// window: [lookback, D] -> [horizon, D].
Tensor dlinear_forecast(const DLinearModel& model, const Tensor& window);

// --- free-running RNN ---------------------------------------------------------

// h' = tanh(W_ih x + W_hh h + b_h), y = W_ho h' + b_o. Trained teacher-forced,
// evaluated free-running on its own outputs.
struct RnnModel {
  int hidden = 64;
  Tensor w_ih, w_hh, b_h, w_ho, b_o;
};

struct RnnHyper {
  int hidden = 64;
  int batch = 16;
  double lr = 1e-3;
  int max_epochs = 100;
  int patience = 20;
  int horizon = 40;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
};

RnnModel make_rnn(int dim, int hidden, std::uint64_t seed);

// steps rows starting from x0 (row 0 is x0 itself).
Tensor rnn_forecast(const RnnModel& model, const Tensor& x0,
                    std::int64_t steps);

// --- forecasts handed to the corrector ---------------------------------------

// Truth is stored as forecast + error, so the residual identity
// truth == correct(forecast, errors) holds bit-exactly; the stored truth can
// differ from the raw data by at most one rounding of the subtraction.
struct ForecastBundle {
  std::vector<double> times;
  Tensor truth;     // [T, D]
  Tensor forecast;  // [T, D]
  Tensor errors;    // [T, D], truth - forecast
};

ForecastBundle make_bundle(std::vector<double> times, const Tensor& truth,
                           const Tensor& forecast);

using Predictor = std::variant<NodeModel, DLinearModel, RnnModel>;

std::string predictor_kind(const Predictor& p);

// NODE/RNN: forecast the first `horizon` points of each trajectory from its
// initial state. DLinear: each trajectory must be a lookback+horizon window;
// the bundle covers the horizon part.
std::vector<ForecastBundle> extract_forecast_bundles(const Predictor& p,
                                                     const Dataset& data,
                                                     int horizon);

// --- training -----------------------------------------------------------------

// Incremental trainer driving single batch updates, so alternating schedules
// can interleave predictor and corrector updates. One batch update: average
// the per-trajectory gradients (deterministic index order) and take one Adam
// step.
class NodeTrainer {
 public:
  NodeTrainer(NodeModel& model, const Dataset& train, const NodeHyper& hyper);
  double step();  // returns mean member loss of the batch
  long take_nfe() { long n = nfe_; nfe_ = 0; return n; }
  int steps_per_epoch() const;

 private:
  NodeModel& model_;
  const Dataset& data_;
  NodeHyper hyper_;
  AdamState adam_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::uint64_t epoch_ = 0;
  long nfe_ = 0;

  void reshuffle();
};

std::pair<NodeModel, TrainLog> train_node(const Dataset& train,
                                          const NodeHyper& hyper);

std::pair<DLinearModel, TrainLog> train_dlinear(const Dataset& windows,
                                                std::int64_t lookback,
                                                std::int64_t horizon,
                                                const DLinearHyper& hyper);

std::pair<RnnModel, TrainLog> train_rnn(const Dataset& train,
                                        const RnnHyper& hyper);

// --- checkpoints ---------------------------------------------------------------

void save_predictor(const std::filesystem::path& file, const Predictor& p);
Predictor load_predictor(const std::filesystem::path& file);

}  // namespace pcf
