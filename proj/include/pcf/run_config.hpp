#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pcf/ode.hpp"

namespace pcf {

// Resolved settings for one command invocation. Assembly order: struct
// defaults, then a named preset, then the --config file, then explicit flags;
// resolve_config validates the merged result before any computation starts.
struct RunConfig {
  // data
  std::string system = "fhn";
  int trajectories = -1;  // -1 picks the system preset value
  int timesteps = -1;
  double dt = -1.0;
  double split = 0.8;
  std::string csv;  // long-format CSV source for window mode
  std::int64_t lookback = 50;

  // run locations
  std::uint64_t seed = 0;
  std::string out = "out";
  std::string data;  // dataset directory (manifest.json inside)
  std::string predictor_checkpoint;  // default <out>/predictor.json
  std::string corrector_checkpoint;  // default <out>/corrector.json

  // predictor
  std::string predictor = "node";  // node | dlinear | rnn
  int horizon = 40;
  int batch = -1;  // -1 picks the per-model default
  double lr = 1e-3;
  int max_epochs = 100;
  int patience = 20;
  double val_fraction = 0.1;
  int hidden = 64;  // rnn
  int kernel = 25;  // dlinear moving-average window
  bool channel_shared = true;
  double observed_fraction = 1.0;
  double mask_fraction = 0.0;  // fraction of points with half features masked

  // corrector
  std::string corrector = "cde";  // cde | mlp
  double kappa = 1.0;
  int eta = 0;
  int train_horizon = 50;
  int latent = 11;
  std::string decoder = "400_4";  // width_depth
  std::string mlp_net = "100_2";  // pointwise baseline architecture
  std::string interpolation = "hermite";
  std::string solver = "tsit5";
  double rtol = 1e-3;
  double atol = 1e-6;
  double h0 = 1e-3;
  bool fixed_step = false;

  // alternating mode (train-corrector)
  int alternate_rounds = 0;  // 0 = two-stage training
  int predictor_steps = 1;
  int corrector_steps = 1;

  // evaluation
  int grid_step = 5;
  double threshold = 3.0;
  int stress = 0;        // max stress cutoff; 0 disables the curves
  int eval_horizon = 0;  // 0 = full trajectory length

  // ablation
  std::string sweep;
  std::string values;  // "lo:hi:step" or comma list; empty = per-key default
};

// Known presets: "<system>-<observed%>" rows of the synthetic hyperparameter
// table and "<linearN>-<mask%>" rows of the ODE-order study.
nlohmann::json preset_json(const std::string& name);
std::vector<std::string> preset_names();

RunConfig resolve_config(const nlohmann::json& merged);
nlohmann::json config_to_json(const RunConfig& cfg);

// "400_4" -> {400, 4}.
std::pair<int, int> parse_net_spec(const std::string& s);

// "0.5:1.0:0.1" (inclusive endpoints) or "a,b,c".
std::vector<double> parse_value_list(const std::string& s);

// Comma-separated tokens; rejects empty entries.
std::vector<std::string> split_csv_names(const std::string& s);

SolverConfig solver_config_from(const RunConfig& cfg);

}  // namespace pcf
