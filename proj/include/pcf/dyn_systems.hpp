#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pcf/rng.hpp"
#include "pcf/tensor.hpp"

namespace pcf {

// One regularly or irregularly sampled trajectory. When a mask is present,
// mask[t*D+d] == 1 means feature d was observed at point t; masked entries in
// `states` hold the imputed (last observed) value, except at the first point
// where no history exists and 0 is used.
struct Trajectory {
  std::vector<double> times;
  Tensor states;  // [T, D]
  std::optional<std::vector<std::uint8_t>> mask;  // [T*D], 1 = observed

  std::int64_t length() const { return states.dim(0); }
  std::int64_t dim() const { return states.dim(1); }
};

struct Dataset {
  std::vector<Trajectory> trajectories;
  std::string system;  // provenance tag for manifests/reports
  double dt = 0.0;
  std::string split = "all";  // all | train | test
};

enum class SystemName {
  lorenz,
  lotka_volterra,
  fhn,
  glycolytic,
  linear2,
  linear3,
  linear4,
};

std::string system_str(SystemName s);
SystemName system_from_str(const std::string& name);

struct SystemSpec {
  SystemName name = SystemName::fhn;
  int dim = 2;
  double dt = 0.5;
  int timesteps = 400;
  int trajectories = 350;
  // Per-dimension inclusive initial-condition box.
  std::vector<std::pair<double, double>> ic_box;
};

// Reference configuration for each system: dimension, sampling interval,
// horizon length, trajectory count, initial-condition box.
SystemSpec system_preset(SystemName name);

// Fixed-parameter vector fields; state dimension is checked.
Tensor system_field(SystemName name, const Tensor& state);

// Parameter values, exported into manifests for provenance.
std::map<std::string, double> system_params(SystemName name);

// Integrates `trajectories` initial conditions drawn uniformly from the IC
// box on the regular grid {0, dt, ..., (T-1) dt}. Generation runs at
// data-grade tolerances (Dopri5, rtol 1e-6, atol 1e-9) so the datasets are
// effectively exact relative to model error. Trajectory i uses RNG stream
// (seed, i); results do not depend on thread count.
Dataset generate_dataset(const SystemSpec& spec, std::uint64_t seed);

// Shuffled split; floor(ratio * N) trajectories go to train.
std::pair<Dataset, Dataset> split_train_test(const Dataset& data, double ratio,
                                             std::uint64_t seed);

// Keeps ceil(fraction * T) points per trajectory, always including the first,
// at uniformly random positions. Fresh randomness per trajectory.
Trajectory subsample_irregular(const Trajectory& traj, double fraction,
                               Rng& rng);

// Marks floor(D/2) features unobserved at round(point_fraction * T) randomly
// chosen time points and imputes them with the feature's last observed value
// (0 when masked at the very first point).
Trajectory mask_features(const Trajectory& traj, double point_fraction,
                         Rng& rng);

// --- file formats -----------------------------------------------------------

// Header: t,x0,...,x{D-1}[,m0,...,m{D-1}]. Doubles are written with
// shortest-round-trip formatting, so identical data gives identical bytes.
void save_trajectory_csv(const std::filesystem::path& file,
                         const Trajectory& traj);
Trajectory load_trajectory_csv(const std::filesystem::path& file);

// manifest.json alongside one CSV per trajectory; the split is materialized
// at generation time so every downstream command sees the same partition.
void save_dataset(const std::filesystem::path& dir, const Dataset& data,
                  double split_ratio, std::uint64_t seed);
Dataset load_dataset(const std::filesystem::path& manifest,
                     const std::string& split = "all");

// --- long-format CSV windows (LTSF benchmarks) ------------------------------

// (lookback + horizon)-length windows with stride 1 from a [T, D] series;
// times are window-relative integer row offsets 0..lookback+horizon-1.
std::vector<Trajectory> make_windows(const Tensor& series,
                                     std::int64_t lookback,
                                     std::int64_t horizon);

struct WindowDataset {
  Dataset train;
  Dataset test;
  Tensor mean;  // per-feature, from the train region
  Tensor std;
  std::int64_t lookback = 0;
  std::int64_t horizon = 0;
};

// Long-format CSV (date/time column first, one numeric column per feature).
// The first train_ratio of rows is the train region; features are
// standard-normalized with train-region statistics; windows are tagged by the
// region that fully contains them.
WindowDataset load_csv_dataset(const std::filesystem::path& file,
                               std::int64_t lookback, std::int64_t horizon,
                               double train_ratio = 0.8);

// Shortest-round-trip double formatting used in every numeric file.
std::string format_double(double v);

}  // namespace pcf
