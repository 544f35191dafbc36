#include "pcf/run_config.hpp"

#include <cmath>
#include <set>

#include "pcf/control_path.hpp"
#include "pcf/dyn_systems.hpp"
#include "pcf/errors.hpp"

namespace pcf {

using nlohmann::json;

namespace {

// Rows of the synthetic kappa/eta table, keyed by observed percentage.
struct PresetRow {
  const char* system;
  int observed;
  double kappa;
};

constexpr PresetRow kSyntheticRows[] = {
    {"lorenz", 20, 1.0},          {"lorenz", 50, 0.8},
    {"lorenz", 80, 1.0},          {"lorenz", 100, 1.0},
    {"lotka_volterra", 20, 1.0},  {"lotka_volterra", 50, 0.5},
    {"lotka_volterra", 80, 1.0},  {"lotka_volterra", 100, 0.6},
    {"fhn", 20, 1.0},             {"fhn", 50, 0.4},
    {"fhn", 80, 0.7},             {"fhn", 100, 0.6},
    {"glycolytic", 20, 1.0},      {"glycolytic", 50, 1.0},
    {"glycolytic", 80, 0.5},      {"glycolytic", 100, 0.5},
};

constexpr int kLinearMasks[] = {0, 30, 60};

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& row : kSyntheticRows) {
    names.push_back(std::string(row.system) + "-" + std::to_string(row.observed));
  }
  for (const char* sys : {"linear2", "linear3", "linear4"}) {
    for (int m : kLinearMasks) {
      names.push_back(std::string(sys) + "-mask" + std::to_string(m));
    }
  }
  return names;
}

json preset_json(const std::string& name) {
  for (const auto& row : kSyntheticRows) {
    if (name == std::string(row.system) + "-" + std::to_string(row.observed)) {
      return {{"system", row.system},
              {"observed_fraction", row.observed / 100.0},
              {"kappa", row.kappa},
              {"eta", 0}};
    }
  }
  for (const char* sys : {"linear2", "linear3", "linear4"}) {
    for (int m : kLinearMasks) {
      if (name == std::string(sys) + "-mask" + std::to_string(m)) {
        return {{"system", sys},
                {"mask_fraction", m / 100.0},
                {"kappa", 1.0},
                {"eta", 0}};
      }
    }
  }
  std::string known;
  for (const auto& n : preset_names()) known += " " + n;
  throw ValidationError("unknown preset '" + name + "'; known:" + known);
}

namespace {

template <class T>
void read_key(const json& j, const char* key, T& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("config: key '") + key +
                          "' has the wrong type");
  }
}

void check(bool ok, const char* key, const std::string& what) {
  if (!ok) {
    throw ValidationError(std::string("config: key '") + key + "' " + what);
  }
}

// Sweep values are validated eagerly so bad lists fail before any training.
void validate_sweep_values(const RunConfig& c) {
  if (c.sweep == "solver") {
    for (const auto& v : split_csv_names(c.values)) solver_from_name(v);
  } else if (c.sweep == "interpolation") {
    for (const auto& v : split_csv_names(c.values)) path_scheme_from_name(v);
  } else if (c.sweep == "decoder") {
    for (const auto& v : split_csv_names(c.values)) parse_net_spec(v);
  } else {
    parse_value_list(c.values);
  }
}

}  // namespace

RunConfig resolve_config(const json& merged) {
  static const std::set<std::string> known = {
      "system", "trajectories", "timesteps", "dt", "split", "csv", "lookback",
      "seed", "out", "data", "predictor_checkpoint", "corrector_checkpoint",
      "predictor", "horizon", "batch", "lr", "max_epochs", "patience",
      "val_fraction", "hidden", "kernel", "channel_shared",
      "observed_fraction", "mask_fraction", "corrector", "kappa", "eta",
      "train_horizon", "latent", "decoder", "mlp_net", "interpolation",
      "solver", "rtol", "atol", "h0", "fixed_step", "alternate_rounds",
      "predictor_steps", "corrector_steps", "grid_step", "threshold", "stress",
      "eval_horizon", "sweep", "values"};
  require(merged.is_object(), "config: expected a JSON object");
  for (const auto& [key, _] : merged.items()) {
    if (!known.count(key)) {
      throw ValidationError("config: unknown key '" + key + "'");
    }
  }

  RunConfig c;
  read_key(merged, "system", c.system);
  read_key(merged, "trajectories", c.trajectories);
  read_key(merged, "timesteps", c.timesteps);
  read_key(merged, "dt", c.dt);
  read_key(merged, "split", c.split);
  read_key(merged, "csv", c.csv);
  read_key(merged, "lookback", c.lookback);
  read_key(merged, "seed", c.seed);
  read_key(merged, "out", c.out);
  read_key(merged, "data", c.data);
  read_key(merged, "predictor_checkpoint", c.predictor_checkpoint);
  read_key(merged, "corrector_checkpoint", c.corrector_checkpoint);
  read_key(merged, "predictor", c.predictor);
  read_key(merged, "horizon", c.horizon);
  read_key(merged, "batch", c.batch);
  read_key(merged, "lr", c.lr);
  read_key(merged, "max_epochs", c.max_epochs);
  read_key(merged, "patience", c.patience);
  read_key(merged, "val_fraction", c.val_fraction);
  read_key(merged, "hidden", c.hidden);
  read_key(merged, "kernel", c.kernel);
  read_key(merged, "channel_shared", c.channel_shared);
  read_key(merged, "observed_fraction", c.observed_fraction);
  read_key(merged, "mask_fraction", c.mask_fraction);
  read_key(merged, "corrector", c.corrector);
  read_key(merged, "kappa", c.kappa);
  read_key(merged, "eta", c.eta);
  read_key(merged, "train_horizon", c.train_horizon);
  read_key(merged, "latent", c.latent);
  read_key(merged, "decoder", c.decoder);
  read_key(merged, "mlp_net", c.mlp_net);
  read_key(merged, "interpolation", c.interpolation);
  read_key(merged, "solver", c.solver);
  read_key(merged, "rtol", c.rtol);
  read_key(merged, "atol", c.atol);
  read_key(merged, "h0", c.h0);
  read_key(merged, "fixed_step", c.fixed_step);
  read_key(merged, "alternate_rounds", c.alternate_rounds);
  read_key(merged, "predictor_steps", c.predictor_steps);
  read_key(merged, "corrector_steps", c.corrector_steps);
  read_key(merged, "grid_step", c.grid_step);
  read_key(merged, "threshold", c.threshold);
  read_key(merged, "stress", c.stress);
  read_key(merged, "eval_horizon", c.eval_horizon);
  read_key(merged, "sweep", c.sweep);
  read_key(merged, "values", c.values);

  system_from_str(c.system);  // throws on unknown names
  check(c.trajectories == -1 || c.trajectories >= 1, "trajectories",
        "must be -1 or >= 1");
  check(c.timesteps == -1 || c.timesteps >= 2, "timesteps",
        "must be -1 or >= 2");
  check(c.dt == -1.0 || c.dt > 0.0, "dt", "must be -1 or positive");
  check(c.split > 0.0 && c.split < 1.0, "split", "must be in (0, 1)");
  check(c.lookback >= 1, "lookback", "must be >= 1");
  check(!c.out.empty(), "out", "must not be empty");
  check(c.predictor == "node" || c.predictor == "dlinear" ||
            c.predictor == "rnn",
        "predictor", "must be node, dlinear, or rnn");
  check(c.horizon >= 2, "horizon", "must be >= 2");
  check(c.batch == -1 || c.batch >= 1, "batch", "must be -1 or >= 1");
  check(c.lr > 0.0, "lr", "must be positive");
  check(c.max_epochs >= 1, "max_epochs", "must be >= 1");
  check(c.patience >= 1, "patience", "must be >= 1");
  check(c.val_fraction >= 0.0 && c.val_fraction < 1.0, "val_fraction",
        "must be in [0, 1)");
  check(c.hidden >= 1, "hidden", "must be >= 1");
  check(c.kernel >= 1 && c.kernel % 2 == 1, "kernel", "must be odd and >= 1");
  check(c.observed_fraction > 0.0 && c.observed_fraction <= 1.0,
        "observed_fraction", "must be in (0, 1]");
  check(c.mask_fraction >= 0.0 && c.mask_fraction < 1.0, "mask_fraction",
        "must be in [0, 1)");
  check(c.corrector == "cde" || c.corrector == "mlp", "corrector",
        "must be cde or mlp");
  check(c.kappa > 0.0 && c.kappa <= 1.0, "kappa", "must be in (0, 1]");
  check(c.eta >= 0, "eta", "must be >= 0");
  check(c.eta <= c.train_horizon - 4, "eta",
        "must be at most train_horizon - 4");
  check(c.train_horizon >= 4, "train_horizon", "must be >= 4");
  check(c.latent >= 1, "latent", "must be >= 1");
  parse_net_spec(c.decoder);
  parse_net_spec(c.mlp_net);
  path_scheme_from_name(c.interpolation);  // throws on unknown names
  solver_from_name(c.solver);
  check(c.rtol > 0.0, "rtol", "must be positive");
  check(c.atol > 0.0, "atol", "must be positive");
  check(c.h0 > 0.0, "h0", "must be positive");
  check(c.alternate_rounds >= 0, "alternate_rounds", "must be >= 0");
  check(c.predictor_steps >= 0, "predictor_steps", "must be >= 0");
  check(c.corrector_steps >= 0, "corrector_steps", "must be >= 0");
  check(c.grid_step >= 1, "grid_step", "must be >= 1");
  check(c.stress >= 0, "stress", "must be >= 0");
  check(c.eval_horizon == 0 || c.eval_horizon >= 2, "eval_horizon",
        "must be 0 or >= 2");
  if (!c.sweep.empty()) {
    static const std::set<std::string> sweeps = {
        "kappa", "eta", "solver", "interpolation", "decoder",
        "train_horizon", "observed_fraction"};
    check(sweeps.count(c.sweep) > 0, "sweep", "names an unknown sweep key");
  }
  if (!c.values.empty()) validate_sweep_values(c);
  return c;
}

json config_to_json(const RunConfig& c) {
  return {{"system", c.system},
          {"trajectories", c.trajectories},
          {"timesteps", c.timesteps},
          {"dt", c.dt},
          {"split", c.split},
          {"csv", c.csv},
          {"lookback", c.lookback},
          {"seed", c.seed},
          {"out", c.out},
          {"data", c.data},
          {"predictor_checkpoint", c.predictor_checkpoint},
          {"corrector_checkpoint", c.corrector_checkpoint},
          {"predictor", c.predictor},
          {"horizon", c.horizon},
          {"batch", c.batch},
          {"lr", c.lr},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"val_fraction", c.val_fraction},
          {"hidden", c.hidden},
          {"kernel", c.kernel},
          {"channel_shared", c.channel_shared},
          {"observed_fraction", c.observed_fraction},
          {"mask_fraction", c.mask_fraction},
          {"corrector", c.corrector},
          {"kappa", c.kappa},
          {"eta", c.eta},
          {"train_horizon", c.train_horizon},
          {"latent", c.latent},
          {"decoder", c.decoder},
          {"mlp_net", c.mlp_net},
          {"interpolation", c.interpolation},
          {"solver", c.solver},
          {"rtol", c.rtol},
          {"atol", c.atol},
          {"h0", c.h0},
          {"fixed_step", c.fixed_step},
          {"alternate_rounds", c.alternate_rounds},
          {"predictor_steps", c.predictor_steps},
          {"corrector_steps", c.corrector_steps},
          {"grid_step", c.grid_step},
          {"threshold", c.threshold},
          {"stress", c.stress},
          {"eval_horizon", c.eval_horizon},
          {"sweep", c.sweep},
          {"values", c.values}};
}

std::pair<int, int> parse_net_spec(const std::string& s) {
  const auto sep = s.find('_');
  require(sep != std::string::npos && sep > 0 && sep + 1 < s.size(),
          "net spec '" + s + "' must look like width_depth, e.g. 400_4");
  int width = 0, depth = 0;
  try {
    std::size_t used = 0;
    width = std::stoi(s.substr(0, sep), &used);
    require(used == sep, "net spec width");
    depth = std::stoi(s.substr(sep + 1), &used);
    require(used == s.size() - sep - 1, "net spec depth");
  } catch (const std::exception&) {
    throw ValidationError("net spec '" + s + "' must look like width_depth");
  }
  require(width >= 1 && depth >= 1,
          "net spec '" + s + "' needs positive width and depth");
  return {width, depth};
}

std::vector<std::string> split_csv_names(const std::string& s) {
  require(!s.empty(), "values: empty list");
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto end = comma == std::string::npos ? s.size() : comma;
    require(end > start, "values: empty entry in list");
    out.push_back(s.substr(start, end - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<double> parse_value_list(const std::string& s) {
  require(!s.empty(), "values: empty list");
  auto to_double = [](const std::string& t) {
    try {
      std::size_t used = 0;
      const double v = std::stod(t, &used);
      require(used == t.size(), "values");
      return v;
    } catch (const std::exception&) {
      throw ValidationError("values: '" + t + "' is not a number");
    }
  };
  if (s.find(':') != std::string::npos) {
    const auto a = s.find(':');
    const auto b = s.find(':', a + 1);
    require(b != std::string::npos && s.find(':', b + 1) == std::string::npos,
            "values: range must be lo:hi:step");
    const double lo = to_double(s.substr(0, a));
    const double hi = to_double(s.substr(a + 1, b - a - 1));
    const double step = to_double(s.substr(b + 1));
    require(step > 0.0 && hi >= lo, "values: range must be lo:hi:step with "
                                    "positive step and hi >= lo");
    std::vector<double> out;
    for (double v = lo; v <= hi + 1e-9 * step; v += step) out.push_back(v);
    return out;
  }
  std::vector<double> out;
  for (const auto& t : split_csv_names(s)) out.push_back(to_double(t));
  return out;
}

SolverConfig solver_config_from(const RunConfig& cfg) {
  SolverConfig sc;
  sc.method = solver_from_name(cfg.solver);
  sc.rtol = cfg.rtol;
  sc.atol = cfg.atol;
  sc.h0 = cfg.h0;
  sc.fixed_step = cfg.fixed_step;
  return sc;
}

}  // namespace pcf
