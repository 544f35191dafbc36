#include "pcf/dyn_systems.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string_view>

#include <json.hpp>

#include "pcf/ode.hpp"
#include "pcf/parallel.hpp"

namespace pcf {

using nlohmann::json;

std::string system_str(SystemName s) {
  switch (s) {
    case SystemName::lorenz: return "lorenz";
    case SystemName::lotka_volterra: return "lotka_volterra";
    case SystemName::fhn: return "fhn";
    case SystemName::glycolytic: return "glycolytic";
    case SystemName::linear2: return "linear2";
    case SystemName::linear3: return "linear3";
    case SystemName::linear4: return "linear4";
  }
  return "fhn";
}

SystemName system_from_str(const std::string& name) {
  if (name == "lorenz") return SystemName::lorenz;
  if (name == "lotka_volterra") return SystemName::lotka_volterra;
  if (name == "fhn") return SystemName::fhn;
  if (name == "glycolytic") return SystemName::glycolytic;
  if (name == "linear2") return SystemName::linear2;
  if (name == "linear3") return SystemName::linear3;
  if (name == "linear4") return SystemName::linear4;
  throw ValidationError("unknown system '" + name + "'");
}

SystemSpec system_preset(SystemName name) {
  SystemSpec s;
  s.name = name;
  switch (name) {
    case SystemName::lorenz:
      s.dim = 3;
      s.dt = 0.01;
      s.timesteps = 300;
      s.trajectories = 1000;
      s.ic_box = {{-20, 20}, {-20, 20}, {0, 50}};
      break;
    case SystemName::lotka_volterra:
      s.dim = 2;
      s.dt = 0.1;
      s.timesteps = 300;
      s.trajectories = 500;
      s.ic_box = {{5, 20}, {5, 10}};
      break;
    case SystemName::fhn:
      s.dim = 2;
      s.dt = 0.5;
      s.timesteps = 400;
      s.trajectories = 350;
      s.ic_box = {{-1.5, 1.5}, {-1.5, 1.5}};
      break;
    case SystemName::glycolytic:
      s.dim = 7;
      s.dt = 0.01;
      s.timesteps = 400;
      s.trajectories = 750;
      s.ic_box = {{0.15, 1.60}, {0.19, 2.16}, {0.04, 0.20}, {0.10, 0.35},
                  {0.08, 0.30}, {0.14, 2.67}, {0.05, 0.10}};
      break;
    case SystemName::linear2:
    case SystemName::linear3:
    case SystemName::linear4: {
      const int d = name == SystemName::linear2 ? 2
                    : name == SystemName::linear3 ? 3 : 4;
      s.dim = d;
      s.dt = 0.1;
      s.timesteps = 300;
      s.trajectories = 150;
      s.ic_box.assign(static_cast<std::size_t>(d), {-2.0, 2.0});
      break;
    }
  }
  return s;
}

std::map<std::string, double> system_params(SystemName name) {
  switch (name) {
    case SystemName::lorenz:
      return {{"sigma", 10.0}, {"rho", 28.0}, {"beta", 8.0 / 3.0}};
    case SystemName::lotka_volterra:
      return {{"alpha", 1.1}, {"beta", 0.4}, {"gamma", 0.4}, {"delta", 0.1}};
    case SystemName::fhn:
      return {{"a", 0.7}, {"b", 0.8}, {"eps", 0.08}, {"I", 0.5}};
    case SystemName::glycolytic:
      return {{"J0", 2.5},  {"k1", 100.0}, {"k2", 6.0},  {"k3", 16.0},
              {"k4", 100.0}, {"k5", 1.28},  {"k6", 12.0}, {"k", 1.8},
              {"kappa", 13.0}, {"q", 4.0},  {"K1", 0.52}, {"psi", 0.1},
              {"N", 1.0},    {"A", 4.0}};
    case SystemName::linear2:
      return {{"c0", 1.0}, {"c1", 0.3}};
    case SystemName::linear3:
      return {{"c0", 1.0}, {"c1", 0.3}, {"c2", 0.4}};
    case SystemName::linear4:
      return {{"c0", 1.0}, {"c1", 0.3}, {"c2", 0.5}, {"c3", 0.3}};
  }
  return {};
}

Tensor system_field(SystemName name, const Tensor& state) {
  const auto need = [&](int d) {
    require(state.rank() == 1 && state.dim(0) == d,
            system_str(name) + ": state must have dimension " +
                std::to_string(d));
  };
  switch (name) {
    case SystemName::lorenz: {
      need(3);
      const double x = state[0], y = state[1], z = state[2];
      return Tensor::row({10.0 * (y - x), x * (28.0 - z) - y,
                          x * y - (8.0 / 3.0) * z});
    }
    case SystemName::lotka_volterra: {
      need(2);
      const double x = state[0], y = state[1];
      return Tensor::row({1.1 * x - 0.4 * x * y, 0.1 * x * y - 0.4 * y});
    }
    case SystemName::fhn: {
      need(2);
      const double v = state[0], w = state[1];
      return Tensor::row(
          {v - v * v * v / 3.0 - w + 0.5, 0.08 * (v + 0.7 - 0.8 * w)});
    }
    case SystemName::glycolytic: {
      need(7);
      const double J0 = 2.5, k1 = 100.0, k2 = 6.0, k3 = 16.0, k4 = 100.0,
                   k5 = 1.28, k6 = 12.0, k = 1.8, kap = 13.0, q = 4.0,
                   K1 = 0.52, psi = 0.1, N = 1.0, A = 4.0;
      const double s1 = state[0], s2 = state[1], s3 = state[2], s4 = state[3],
                   s5 = state[4], s6 = state[5], s7 = state[6];
      const double frac = 1.0 + std::pow(s6 / K1, q);
      const double v1 = k1 * s1 * s6 / frac;
      return Tensor::row({
          J0 - v1,
          2.0 * v1 - k2 * s2 * (N - s5) - k6 * s2 * s5,
          k2 * s2 * (N - s5) - k3 * s3 * (A - s6),
          k3 * s3 * (A - s6) - k4 * s4 * s5 - kap * (s4 - s7),
          k2 * s2 * (N - s5) - k4 * s4 * s5 - k6 * s2 * s5,
          -2.0 * v1 + 2.0 * k3 * s3 * (A - s6) - k5 * s6,
          psi * kap * (s4 - s7) - k * s7,
      });
    }
    case SystemName::linear2: {
      need(2);
      return Tensor::row({state[1], -1.0 * state[0] - 0.3 * state[1]});
    }
    case SystemName::linear3: {
      need(3);
      return Tensor::row({state[1], state[2],
                          -1.0 * state[0] - 0.3 * state[1] - 0.4 * state[2]});
    }
    case SystemName::linear4: {
      need(4);
      return Tensor::row({state[1], state[2], state[3],
                          -1.0 * state[0] - 0.3 * state[1] - 0.5 * state[2] -
                              0.3 * state[3]});
    }
  }
  throw ValidationError("unknown system");
}

Dataset generate_dataset(const SystemSpec& spec, std::uint64_t seed) {
  require(spec.timesteps >= 2, "generate: need at least 2 timesteps");
  require(spec.trajectories >= 1, "generate: need at least 1 trajectory");
  require(spec.dt > 0.0, "generate: dt must be positive");
  require(static_cast<int>(spec.ic_box.size()) == spec.dim,
          "generate: initial-condition box does not match dimension");

  std::vector<double> times(static_cast<std::size_t>(spec.timesteps));
  for (int j = 0; j < spec.timesteps; ++j) times[static_cast<std::size_t>(j)] = spec.dt * j;

  SolverConfig data_grade;
  data_grade.method = SolverMethod::dopri5;
  data_grade.rtol = 1e-6;
  data_grade.atol = 1e-9;
  data_grade.h0 = 1e-3;

  Dataset out;
  out.system = system_str(spec.name);
  out.dt = spec.dt;
  out.trajectories.assign(static_cast<std::size_t>(spec.trajectories), {});

  const FieldFn field = [&spec](double, const Value& y) {
    return constant(system_field(spec.name, y.data));
  };
  const auto& tb = tableau(data_grade.method);
  const StepController ctrl = data_grade.controller();

  std::string failure;
  par::parallel_for(spec.trajectories, [&](std::int64_t i) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(i));
    std::vector<double> ic(static_cast<std::size_t>(spec.dim));
    for (int d = 0; d < spec.dim; ++d) {
      ic[static_cast<std::size_t>(d)] =
          rng.uniform(spec.ic_box[static_cast<std::size_t>(d)].first,
                      spec.ic_box[static_cast<std::size_t>(d)].second);
    }
    try {
      SolveResult sol = integrate_adaptive(tb, ctrl, field,
                                           constant(Tensor::row(ic)), times);
      std::vector<double> flat;
      flat.reserve(static_cast<std::size_t>(spec.timesteps * spec.dim));
      for (const auto& st : sol.states) {
        const auto sp = st.data.span();
        flat.insert(flat.end(), sp.begin(), sp.end());
      }
      Trajectory traj;
      traj.times = times;
      traj.states = Tensor({spec.timesteps, spec.dim}, std::move(flat));
      out.trajectories[static_cast<std::size_t>(i)] = std::move(traj);
    } catch (const std::exception& e) {
      // Surfaced after the loop; OpenMP regions must not throw across.
      std::ostringstream os;
      os << "trajectory " << i << " (ic";
      for (double v : ic) os << ' ' << v;
      os << "): " << e.what();
#ifdef _OPENMP
#pragma omp critical
#endif
      failure = os.str();
    }
  });
  if (!failure.empty()) throw NumericError("generate: " + failure);
  return out;
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& data, double ratio,
                                             std::uint64_t seed) {
  require(ratio > 0.0 && ratio < 1.0, "split: ratio must be in (0, 1)");
  const std::size_t n = data.trajectories.size();
  require(n >= 2, "split: need at least 2 trajectories");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng = Rng::stream(seed, 0x51u, 0);
  rng.shuffle(idx);
  const std::size_t n_train =
      static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
  Dataset train, test;
  train.system = test.system = data.system;
  train.dt = test.dt = data.dt;
  train.split = "train";
  test.split = "test";
  for (std::size_t i = 0; i < n; ++i) {
    (i < n_train ? train : test).trajectories.push_back(data.trajectories[idx[i]]);
  }
  require(!train.trajectories.empty() && !test.trajectories.empty(),
          "split: a side is empty; adjust ratio");
  return {std::move(train), std::move(test)};
}

Trajectory subsample_irregular(const Trajectory& traj, double fraction,
                               Rng& rng) {
  require(fraction > 0.0 && fraction <= 1.0,
          "subsample: fraction must be in (0, 1]");
  const std::size_t T = traj.times.size();
  const std::size_t keep =
      static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(T)));
  require(keep >= 2, "subsample: fraction keeps fewer than 2 points");
  if (keep == T) return traj;
  // Point 0 is always retained; the rest are drawn from {1..T-1}.
  std::vector<std::size_t> rest = rng.sample_without_replacement(T - 1, keep - 1);
  std::vector<std::size_t> sel;
  sel.reserve(keep);
  sel.push_back(0);
  for (auto r : rest) sel.push_back(r + 1);

  const std::int64_t D = traj.dim();
  std::vector<double> times(keep);
  std::vector<double> flat(keep * static_cast<std::size_t>(D));
  std::vector<std::uint8_t> mask;
  if (traj.mask) mask.resize(keep * static_cast<std::size_t>(D));
  for (std::size_t j = 0; j < keep; ++j) {
    times[j] = traj.times[sel[j]];
    for (std::int64_t d = 0; d < D; ++d) {
      flat[j * static_cast<std::size_t>(D) + static_cast<std::size_t>(d)] =
          traj.states.at(static_cast<std::int64_t>(sel[j]), d);
      if (traj.mask) {
        mask[j * static_cast<std::size_t>(D) + static_cast<std::size_t>(d)] =
            (*traj.mask)[sel[j] * static_cast<std::size_t>(D) + static_cast<std::size_t>(d)];
      }
    }
  }
  Trajectory out;
  out.times = std::move(times);
  out.states = Tensor({static_cast<std::int64_t>(keep), D}, std::move(flat));
  if (traj.mask) out.mask = std::move(mask);
  return out;
}

Trajectory mask_features(const Trajectory& traj, double point_fraction,
                         Rng& rng) {
  require(point_fraction >= 0.0 && point_fraction <= 1.0,
          "mask: point_fraction must be in [0, 1]");
  const std::int64_t D = traj.dim();
  require(D >= 2, "mask: need at least 2 features to mask half of them");
  const std::size_t T = traj.times.size();
  const std::size_t n_points = static_cast<std::size_t>(
      std::floor(point_fraction * static_cast<double>(T) + 0.5));
  const std::size_t per_point = static_cast<std::size_t>(D / 2);

  std::vector<std::uint8_t> mask(T * static_cast<std::size_t>(D), 1);
  std::vector<std::size_t> pts = rng.sample_without_replacement(T, n_points);
  for (auto p : pts) {
    auto feats = rng.sample_without_replacement(static_cast<std::size_t>(D), per_point);
    for (auto f : feats) mask[p * static_cast<std::size_t>(D) + f] = 0;
  }

  // Forward-fill imputation on the masked entries.
  std::vector<double> flat = traj.states.to_vector();
  std::vector<double> last(static_cast<std::size_t>(D), 0.0);
  std::vector<bool> seen(static_cast<std::size_t>(D), false);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::int64_t d = 0; d < D; ++d) {
      auto& v = flat[t * static_cast<std::size_t>(D) + static_cast<std::size_t>(d)];
      if (mask[t * static_cast<std::size_t>(D) + static_cast<std::size_t>(d)]) {
        last[static_cast<std::size_t>(d)] = v;
        seen[static_cast<std::size_t>(d)] = true;
      } else {
        v = seen[static_cast<std::size_t>(d)] ? last[static_cast<std::size_t>(d)] : 0.0;
      }
    }
  }
  Trajectory out;
  out.times = traj.times;
  out.states = Tensor(traj.states.shape(), std::move(flat));
  out.mask = std::move(mask);
  return out;
}

std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  require(ec == std::errc(), "format_double failed");
  return std::string(buf, p);
}

namespace {

double parse_double(std::string_view s) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  auto [p, ec] = std::from_chars(b, e, v);
  require(ec == std::errc() && p == e,
          "csv: cannot parse number '" + std::string(s) + "'");
  return v;
}

std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

}  // namespace

void save_trajectory_csv(const std::filesystem::path& file,
                         const Trajectory& traj) {
  std::ofstream os(file);
  require(os.good(), "cannot open " + file.string() + " for writing");
  const std::int64_t D = traj.dim();
  os << 't';
  for (std::int64_t d = 0; d < D; ++d) os << ",x" << d;
  if (traj.mask) {
    for (std::int64_t d = 0; d < D; ++d) os << ",m" << d;
  }
  os << '\n';
  for (std::size_t t = 0; t < traj.times.size(); ++t) {
    os << format_double(traj.times[t]);
    for (std::int64_t d = 0; d < D; ++d) {
      os << ',' << format_double(traj.states.at(static_cast<std::int64_t>(t), d));
    }
    if (traj.mask) {
      for (std::int64_t d = 0; d < D; ++d) {
        os << ',' << int((*traj.mask)[t * static_cast<std::size_t>(D) + static_cast<std::size_t>(d)]);
      }
    }
    os << '\n';
  }
  require(os.good(), "write failed for " + file.string());
}

Trajectory load_trajectory_csv(const std::filesystem::path& file) {
  std::ifstream is(file);
  require(is.good(), "cannot open " + file.string());
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), "empty csv " + file.string());
  auto header = split_line(line);
  require(!header.empty() && header[0] == "t",
          file.string() + ": first column must be 't'");
  std::int64_t D = 0;
  bool has_mask = false;
  for (std::size_t i = 1; i < header.size(); ++i) {
    if (header[i].substr(0, 1) == "x") {
      ++D;
    } else if (header[i].substr(0, 1) == "m") {
      has_mask = true;
    } else {
      throw ValidationError(file.string() + ": unexpected column '" +
                            std::string(header[i]) + "'");
    }
  }
  require(D >= 1, file.string() + ": no state columns");
  const std::size_t expect = 1 + static_cast<std::size_t>(D) * (has_mask ? 2 : 1);

  Trajectory traj;
  std::vector<double> flat;
  std::vector<std::uint8_t> mask;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto cells = split_line(line);
    require(cells.size() == expect, file.string() + ": ragged row");
    traj.times.push_back(parse_double(cells[0]));
    for (std::int64_t d = 0; d < D; ++d) {
      flat.push_back(parse_double(cells[1 + static_cast<std::size_t>(d)]));
    }
    if (has_mask) {
      for (std::int64_t d = 0; d < D; ++d) {
        mask.push_back(static_cast<std::uint8_t>(
            parse_double(cells[1 + static_cast<std::size_t>(D + d)]) != 0.0));
      }
    }
  }
  require(traj.times.size() >= 2, file.string() + ": fewer than 2 rows");
  traj.states = Tensor({static_cast<std::int64_t>(traj.times.size()), D},
                       std::move(flat));
  if (has_mask) traj.mask = std::move(mask);
  return traj;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& data,
                  double split_ratio, std::uint64_t seed) {
  require(!data.trajectories.empty(), "save_dataset: empty dataset");
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["system"] = data.system;
  manifest["dim"] = data.trajectories.front().dim();
  manifest["dt"] = data.dt;
  manifest["timesteps"] = data.trajectories.front().length();
  manifest["trajectories"] = data.trajectories.size();
  manifest["seed"] = seed;
  try {
    manifest["params"] = system_params(system_from_str(data.system));
  } catch (const ValidationError&) {
    // external data; no generator parameters to echo
  }

  std::vector<std::string> files;
  for (std::size_t i = 0; i < data.trajectories.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "traj_%05zu.csv", i);
    save_trajectory_csv(dir / name, data.trajectories[i]);
    files.emplace_back(name);
  }
  manifest["files"] = files;

  // Materialized split, same policy as split_train_test.
  std::vector<std::size_t> idx(data.trajectories.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng = Rng::stream(seed, 0x51u, 0);
  rng.shuffle(idx);
  const std::size_t n_train = static_cast<std::size_t>(
      std::floor(split_ratio * static_cast<double>(idx.size()) + 1e-9));
  manifest["split"] = {
      {"ratio", split_ratio},
      {"train", std::vector<std::size_t>(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train))},
      {"test", std::vector<std::size_t>(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end())},
  };

  std::ofstream os(dir / "manifest.json");
  require(os.good(), "cannot write manifest in " + dir.string());
  os << manifest.dump(2) << '\n';
  require(os.good(), "manifest write failed in " + dir.string());
}

Dataset load_dataset(const std::filesystem::path& manifest,
                     const std::string& split) {
  std::ifstream is(manifest);
  require(is.good(), "cannot open manifest " + manifest.string());
  json m;
  try {
    is >> m;
  } catch (const json::exception& e) {
    throw ValidationError(manifest.string() + ": bad json: " + e.what());
  }
  require(m.contains("files") && m["files"].is_array(),
          manifest.string() + ": missing 'files'");
  const auto dir = manifest.parent_path();

  std::vector<std::size_t> wanted;
  if (split == "all") {
    for (std::size_t i = 0; i < m["files"].size(); ++i) wanted.push_back(i);
  } else {
    require(split == "train" || split == "test",
            "split must be all, train or test");
    require(m.contains("split"), manifest.string() + ": missing 'split'");
    wanted = m["split"][split].get<std::vector<std::size_t>>();
  }

  Dataset out;
  out.system = m.value("system", std::string("unknown"));
  out.dt = m.value("dt", 0.0);
  out.split = split;
  for (auto i : wanted) {
    require(i < m["files"].size(), manifest.string() + ": split index out of range");
    out.trajectories.push_back(
        load_trajectory_csv(dir / m["files"][i].get<std::string>()));
  }
  require(!out.trajectories.empty(), manifest.string() + ": empty split");
  return out;
}

std::vector<Trajectory> make_windows(const Tensor& series,
                                     std::int64_t lookback,
                                     std::int64_t horizon) {
  require(series.rank() == 2, "windows: series must be [T, D]");
  require(lookback >= 1 && horizon >= 1, "windows: lookback/horizon must be >= 1");
  const std::int64_t T = series.dim(0), D = series.dim(1);
  const std::int64_t W = lookback + horizon;
  require(T >= W, "windows: series shorter than lookback+horizon");
  std::vector<Trajectory> out;
  for (std::int64_t s = 0; s + W <= T; ++s) {
    std::vector<double> times(static_cast<std::size_t>(W));
    std::vector<double> flat(static_cast<std::size_t>(W * D));
    for (std::int64_t j = 0; j < W; ++j) {
      times[static_cast<std::size_t>(j)] = static_cast<double>(j);
      for (std::int64_t d = 0; d < D; ++d) {
        flat[static_cast<std::size_t>(j * D + d)] = series.at(s + j, d);
      }
    }
    Trajectory w;
    w.times = std::move(times);
    w.states = Tensor({W, D}, std::move(flat));
    out.push_back(std::move(w));
  }
  return out;
}

WindowDataset load_csv_dataset(const std::filesystem::path& file,
                               std::int64_t lookback, std::int64_t horizon,
                               double train_ratio) {
  require(train_ratio > 0.0 && train_ratio < 1.0,
          "csv dataset: train_ratio must be in (0, 1)");
  std::ifstream is(file);
  require(is.good(), "cannot open " + file.string());
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), "empty csv " + file.string());
  const std::int64_t D = static_cast<std::int64_t>(split_line(line).size()) - 1;
  require(D >= 1, file.string() + ": need a time column plus features");

  std::vector<double> flat;
  std::int64_t T = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto cells = split_line(line);
    require(static_cast<std::int64_t>(cells.size()) == D + 1,
            file.string() + ": ragged row");
    for (std::int64_t d = 0; d < D; ++d) {
      flat.push_back(parse_double(cells[static_cast<std::size_t>(d + 1)]));
    }
    ++T;
  }
  require(T >= lookback + horizon, file.string() + ": series too short");

  const std::int64_t n_train_rows =
      static_cast<std::int64_t>(std::floor(train_ratio * static_cast<double>(T)));
  require(n_train_rows >= lookback + horizon,
          file.string() + ": train region shorter than one window");

  // Standard-normalize with train-region statistics.
  std::vector<double> mean(static_cast<std::size_t>(D), 0.0);
  std::vector<double> sd(static_cast<std::size_t>(D), 0.0);
  for (std::int64_t t = 0; t < n_train_rows; ++t) {
    for (std::int64_t d = 0; d < D; ++d) {
      mean[static_cast<std::size_t>(d)] += flat[static_cast<std::size_t>(t * D + d)];
    }
  }
  for (auto& v : mean) v /= static_cast<double>(n_train_rows);
  for (std::int64_t t = 0; t < n_train_rows; ++t) {
    for (std::int64_t d = 0; d < D; ++d) {
      const double r = flat[static_cast<std::size_t>(t * D + d)] - mean[static_cast<std::size_t>(d)];
      sd[static_cast<std::size_t>(d)] += r * r;
    }
  }
  for (auto& v : sd) {
    v = std::sqrt(v / static_cast<double>(n_train_rows));
    if (v == 0.0) v = 1.0;
  }
  for (std::int64_t t = 0; t < T; ++t) {
    for (std::int64_t d = 0; d < D; ++d) {
      auto& v = flat[static_cast<std::size_t>(t * D + d)];
      v = (v - mean[static_cast<std::size_t>(d)]) / sd[static_cast<std::size_t>(d)];
    }
  }
  Tensor series({T, D}, std::move(flat));

  WindowDataset out;
  out.lookback = lookback;
  out.horizon = horizon;
  out.mean = Tensor({D}, std::move(mean));
  out.std = Tensor({D}, std::move(sd));
  out.train.system = out.test.system = file.stem().string();
  out.train.split = "train";
  out.test.split = "test";

  auto all = make_windows(series, lookback, horizon);
  for (std::size_t s = 0; s < all.size(); ++s) {
    const std::int64_t end = static_cast<std::int64_t>(s) + lookback + horizon;
    if (end <= n_train_rows) {
      out.train.trajectories.push_back(std::move(all[s]));
    } else if (static_cast<std::int64_t>(s) >= n_train_rows) {
      out.test.trajectories.push_back(std::move(all[s]));
    }
    // windows straddling the boundary are dropped
  }
  require(!out.train.trajectories.empty(), file.string() + ": no train windows");
  return out;
}

}  // namespace pcf
