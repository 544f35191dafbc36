#include "pcf/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <variant>

#include "pcf/corrector.hpp"
#include "pcf/dyn_systems.hpp"
#include "pcf/evaluation.hpp"
#include "pcf/parallel.hpp"
#include "pcf/predictors.hpp"
#include "pcf/serialize.hpp"
#include "pcf/svg.hpp"

namespace pcf {

using nlohmann::json;

namespace {

std::filesystem::path out_path(const RunConfig& cfg, const std::string& name) {
  return std::filesystem::path(cfg.out) / name;
}

Dataset load_split(const RunConfig& cfg, const std::string& split) {
  require(!cfg.data.empty(),
          "config: key 'data' must point to a dataset directory");
  return load_dataset(std::filesystem::path(cfg.data) / "manifest.json", split);
}

// Feature masking simulates partially observed training data. The stream
// depends only on (seed, trajectory index), so the predictor and the
// corrector commands see identical masks for the same seed.
void apply_masking(Dataset& data, const RunConfig& cfg) {
  if (cfg.mask_fraction <= 0.0) return;
  for (std::size_t i = 0; i < data.trajectories.size(); ++i) {
    Rng rng = Rng::stream(cfg.seed, 0x3a5cu, i);
    data.trajectories[i] =
        mask_features(data.trajectories[i], cfg.mask_fraction, rng);
  }
}

// Files are prefixed by role so predictor and corrector runs can share an
// output directory without clobbering each other.
void write_train_log(const RunConfig& cfg, const TrainLog& log,
                     const std::string& prefix) {
  std::filesystem::create_directories(cfg.out);
  {
    std::ofstream out(out_path(cfg, prefix + "_train_log.csv"));
    require(out.good(), "cannot open " + prefix + "_train_log.csv");
    out << "epoch,train_loss,val_loss,nfe\n";
    for (int e = 0; e < log.epochs_run; ++e) {
      out << e << ',' << format_double(log.train_loss[e]) << ','
          << format_double(log.val_loss[e]) << ',' << log.nfe[e] << '\n';
    }
    require(out.good(), "write failed for " + prefix + "_train_log.csv");
  }
  json summary = {{"best_epoch", log.best_epoch},
                  {"epochs_run", log.epochs_run}};
  if (log.epochs_run > 0) {
    summary["final_train_loss"] = log.train_loss.back();
    summary["final_val_loss"] = log.val_loss.back();
    summary["best_val_loss"] =
        log.val_loss[static_cast<std::size_t>(log.best_epoch)];
  }
  save_json_file(out_path(cfg, prefix + "_summary.json"), summary);
  // Wall-clock lives apart from the deterministic outputs.
  double total = 0.0;
  for (double w : log.wall_ms) total += w;
  save_json_file(out_path(cfg, prefix + "_timing.json"),
                 {{"wall_ms", log.wall_ms}, {"total_s", total / 1000.0}});
}

std::filesystem::path predictor_ckpt_path(const RunConfig& cfg) {
  return cfg.predictor_checkpoint.empty() ? out_path(cfg, "predictor.json")
             : std::filesystem::path(cfg.predictor_checkpoint);
}

std::filesystem::path corrector_ckpt_path(const RunConfig& cfg) {
  return cfg.corrector_checkpoint.empty() ? out_path(cfg, "corrector.json")
             : std::filesystem::path(cfg.corrector_checkpoint);
}

// Window datasets for the DLinear path: stride-1 windows from every source
// trajectory, or from the CSV when one is configured.
Dataset dlinear_windows(const RunConfig& cfg, const std::string& split,
                        std::int64_t lookback, std::int64_t horizon) {
  if (!cfg.csv.empty()) {
    WindowDataset wd = load_csv_dataset(cfg.csv, lookback, horizon, cfg.split);
    return split == "train" ? wd.train : wd.test;
  }
  Dataset src = load_split(cfg, split);
  Dataset windows;
  windows.system = src.system;
  windows.dt = src.dt;
  windows.split = split;
  for (const auto& traj : src.trajectories) {
    require(traj.length() >= lookback + horizon,
            "dlinear: trajectories shorter than lookback + horizon");
    auto w = make_windows(traj.states, lookback, horizon);
    for (auto& t : w) windows.trajectories.push_back(std::move(t));
  }
  return windows;
}

double median(std::vector<double> v) {
  require(!v.empty(), "median of empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double median_nfe(const TrainLog& log) {
  std::vector<double> v;
  for (long n : log.nfe) v.push_back(static_cast<double>(n));
  return median(std::move(v));
}

using AnyCorrector = std::variant<CorrectorModel, MlpCorrectorModel>;

AnyCorrector load_any_corrector(const std::filesystem::path& file) {
  const json j = load_json_file(file);
  if (j.contains("kind") && j.at("kind") == "mlp") {
    MlpCorrectorModel m;
    m.net = mlp_from_json(j.at("net"));
    require(m.net.out_dim() + 1 == m.net.in_dim(),
            "mlp corrector checkpoint: expected (D+1) -> D shape");
    return m;
  }
  return load_corrector(file);
}

Tensor predicted_errors(const AnyCorrector& corr, std::span<const double> times,
                        const Tensor& forecast, long* nfe) {
  if (const auto* cde = std::get_if<CorrectorModel>(&corr)) {
    return corrector_forward(*cde, times, forecast, nfe);
  }
  return apply_mlp_corrector(std::get<MlpCorrectorModel>(corr), times, forecast);
}

struct EvalArrays {
  std::vector<Tensor> truth, forecast, corrected;
  long nfe = 0;
};

// Forecast + correction for every test trajectory (or window). K is the
// evaluation length; correction always covers the full forecast.
EvalArrays build_eval_arrays(const RunConfig& cfg, const Predictor& pred,
                             const AnyCorrector& corr, const Dataset& test) {
  require(!test.trajectories.empty(), "evaluate: empty test split");
  EvalArrays arrays;
  const std::size_t n = test.trajectories.size();
  arrays.truth.resize(n);
  arrays.forecast.resize(n);
  arrays.corrected.resize(n);
  std::vector<long> nfes(n, 0);

  const bool windowed = std::holds_alternative<DLinearModel>(pred);
  par::parallel_for(static_cast<std::int64_t>(n), [&](std::int64_t i) {
    const Trajectory& traj = test.trajectories[static_cast<std::size_t>(i)];
    long nfe = 0;
    std::vector<double> times;
    Tensor truth, fc;
    if (windowed) {
      const auto& dl = std::get<DLinearModel>(pred);
      const std::int64_t L = dl.lookback, H = dl.horizon, D = traj.dim();
      require(traj.length() == L + H, "evaluate: window length mismatch");
      Tensor window({L, D}, std::vector<double>(
          traj.states.data(), traj.states.data() + L * D));
      fc = dlinear_forecast(dl, window);
      truth = Tensor({H, D}, std::vector<double>(
          traj.states.data() + L * D, traj.states.data() + (L + H) * D));
      times.assign(traj.times.begin() + static_cast<std::ptrdiff_t>(L),
                   traj.times.end());
    } else {
      std::int64_t K = traj.length();
      if (cfg.eval_horizon > 0) K = std::min<std::int64_t>(K, cfg.eval_horizon);
      require(K >= 2, "evaluate: evaluation horizon too short");
      times.assign(traj.times.begin(),
                   traj.times.begin() + static_cast<std::ptrdiff_t>(K));
      const std::int64_t D = traj.dim();
      std::vector<double> x0(static_cast<std::size_t>(D));
      for (std::int64_t d = 0; d < D; ++d) x0[static_cast<std::size_t>(d)] = traj.states.at(0, d);
      if (const auto* node = std::get_if<NodeModel>(&pred)) {
        fc = node_forecast(*node, Tensor({D}, std::move(x0)), times, &nfe);
      } else {
        fc = rnn_forecast(std::get<RnnModel>(pred), Tensor({D}, std::move(x0)), K);
      }
      truth = Tensor({K, D}, std::vector<double>(
          traj.states.data(), traj.states.data() + K * D));
    }
    Tensor e_hat = predicted_errors(corr, times, fc, &nfe);
    arrays.truth[static_cast<std::size_t>(i)] = truth;
    arrays.corrected[static_cast<std::size_t>(i)] = correct(fc, e_hat);
    arrays.forecast[static_cast<std::size_t>(i)] = std::move(fc);
    nfes[static_cast<std::size_t>(i)] = nfe;
  });
  for (long v : nfes) arrays.nfe += v;
  return arrays;
}

json report_to_json(const EvalReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"cutoff", r.cutoff},
                    {"mse_without", r.mse_without},
                    {"mse_with", r.mse_with},
                    {"reduction_percent", r.reduction}});
  }
  return {{"rows", std::move(rows)},
          {"extrapolation_horizon", report.horizon},
          {"threshold_percent", report.threshold},
          {"mae_without", report.mae_without},
          {"mae_with", report.mae_with}};
}

// Reduction at the interpolation cutoff (the corrector's training horizon),
// falling back to the last row when the grid misses it.
double interp_reduction(const EvalReport& report, std::int64_t cutoff) {
  for (const auto& r : report.rows) {
    if (r.cutoff == cutoff) return r.reduction;
  }
  return report.rows.back().reduction;
}

CorrectorConfig corrector_config_from(const RunConfig& cfg) {
  CorrectorConfig cc;
  cc.latent = cfg.latent;
  const auto [dw, dd] = parse_net_spec(cfg.decoder);
  cc.decoder_width = dw;
  cc.decoder_depth = dd;
  cc.interpolation = path_scheme_from_name(cfg.interpolation);
  cc.solver = solver_config_from(cfg);
  return cc;
}

CorrectorHyper corrector_hyper_from(const RunConfig& cfg) {
  CorrectorHyper h;
  h.batch = cfg.batch == -1 ? 256 : cfg.batch;
  h.lr = cfg.lr;
  h.max_epochs = cfg.max_epochs;
  h.patience = cfg.patience;
  h.val_fraction = cfg.val_fraction;
  h.train_horizon = cfg.train_horizon;
  h.observed_fraction = cfg.observed_fraction;
  h.seed = cfg.seed;
  return h;
}

std::vector<ForecastBundle> bundles_for(const RunConfig& cfg,
                                        const Predictor& pred,
                                        int train_horizon) {
  if (std::holds_alternative<DLinearModel>(pred)) {
    const auto& dl = std::get<DLinearModel>(pred);
    Dataset windows = dlinear_windows(cfg, "train", dl.lookback, dl.horizon);
    apply_masking(windows, cfg);
    return extract_forecast_bundles(pred, windows, train_horizon);
  }
  Dataset train = load_split(cfg, "train");
  apply_masking(train, cfg);
  return extract_forecast_bundles(pred, train, train_horizon);
}

}  // namespace

void cmd_generate(const RunConfig& cfg) {
  SystemSpec spec = system_preset(system_from_str(cfg.system));
  if (cfg.trajectories > 0) spec.trajectories = cfg.trajectories;
  if (cfg.timesteps > 0) spec.timesteps = cfg.timesteps;
  if (cfg.dt > 0) spec.dt = cfg.dt;
  Dataset data = generate_dataset(spec, cfg.seed);
  save_dataset(cfg.out, data, cfg.split, cfg.seed);
  std::cout << "generated " << data.trajectories.size() << " " << cfg.system
            << " trajectories (" << spec.timesteps << " steps, dt=" << spec.dt
            << ", dim=" << spec.dim << ") in " << cfg.out << "\n";
}

void cmd_train_predictor(const RunConfig& cfg) {
  TrainLog log;
  if (cfg.predictor == "dlinear") {
    Dataset windows = dlinear_windows(cfg, "train", cfg.lookback, cfg.horizon);
    apply_masking(windows, cfg);
    DLinearHyper h;
    h.kernel = cfg.kernel;
    h.channel_shared = cfg.channel_shared;
    h.batch = cfg.batch == -1 ? 32 : cfg.batch;
    h.lr = cfg.lr;
    h.max_epochs = cfg.max_epochs;
    h.patience = cfg.patience;
    h.val_fraction = cfg.val_fraction;
    h.seed = cfg.seed;
    auto [model, l] = train_dlinear(windows, cfg.lookback, cfg.horizon, h);
    log = std::move(l);
    save_predictor(predictor_ckpt_path(cfg), Predictor{std::move(model)});
  } else {
    Dataset train = load_split(cfg, "train");
    apply_masking(train, cfg);
    require(!train.trajectories.empty(), "train: empty train split");
    require(cfg.horizon <= train.trajectories.front().length(),
            "config: key 'horizon' exceeds the trajectory length");
    if (cfg.predictor == "node") {
      NodeHyper h;
      h.batch = cfg.batch == -1 ? 16 : cfg.batch;
      h.lr = cfg.lr;
      h.max_epochs = cfg.max_epochs;
      h.patience = cfg.patience;
      h.horizon = cfg.horizon;
      h.observed_fraction = cfg.observed_fraction;
      h.val_fraction = cfg.val_fraction;
      h.seed = cfg.seed;
      h.solver = solver_config_from(cfg);
      auto [model, l] = train_node(train, h);
      log = std::move(l);
      save_predictor(predictor_ckpt_path(cfg), Predictor{std::move(model)});
    } else {
      RnnHyper h;
      h.hidden = cfg.hidden;
      h.batch = cfg.batch == -1 ? 16 : cfg.batch;
      h.lr = cfg.lr;
      h.max_epochs = cfg.max_epochs;
      h.patience = cfg.patience;
      h.horizon = cfg.horizon;
      h.val_fraction = cfg.val_fraction;
      h.seed = cfg.seed;
      auto [model, l] = train_rnn(train, h);
      log = std::move(l);
      save_predictor(predictor_ckpt_path(cfg), Predictor{std::move(model)});
    }
  }
  write_train_log(cfg, log, "predictor");
  std::cout << "trained " << cfg.predictor << " predictor: " << log.epochs_run
            << " epochs, best " << log.best_epoch << ", final val loss "
            << (log.val_loss.empty() ? 0.0 : log.val_loss.back()) << "\n";
}

void cmd_train_corrector(const RunConfig& cfg) {
  Predictor pred = load_predictor(predictor_ckpt_path(cfg));
  const std::int64_t dim = std::holds_alternative<NodeModel>(pred)
      ? std::get<NodeModel>(pred).field.in_dim()
      : std::holds_alternative<RnnModel>(pred)
            ? std::get<RnnModel>(pred).w_ih.dim(1)
            : std::get<DLinearModel>(pred).channel_shared
                  ? -1
                  : static_cast<std::int64_t>(
                        std::get<DLinearModel>(pred).trend.size());

  if (cfg.alternate_rounds > 0) {
    require(cfg.predictor == "node" && cfg.corrector == "cde",
            "config: alternating mode needs predictor=node, corrector=cde");
    require(std::holds_alternative<NodeModel>(pred),
            "alternating: checkpoint is not a node predictor");
    Dataset train = load_split(cfg, "train");
    apply_masking(train, cfg);
    NodeModel node = std::get<NodeModel>(pred);
    CorrectorModel corr = make_corrector(node.field.in_dim(),
                                         corrector_config_from(cfg), cfg.seed);
    AlternatingHyper ah;
    ah.rounds = cfg.alternate_rounds;
    ah.predictor_steps = cfg.predictor_steps;
    ah.corrector_steps = cfg.corrector_steps;
    ah.node.batch = cfg.batch == -1 ? 16 : cfg.batch;
    ah.node.lr = cfg.lr;
    ah.node.horizon = cfg.horizon;
    ah.node.observed_fraction = cfg.observed_fraction;
    ah.node.seed = cfg.seed;
    ah.node.solver = node.solver;
    ah.reg = {cfg.eta, cfg.kappa};
    ah.corr = corrector_hyper_from(cfg);
    AlternatingLog alog = train_alternating(node, corr, train, ah);
    save_predictor(predictor_ckpt_path(cfg), Predictor{std::move(node)});
    save_corrector(corrector_ckpt_path(cfg), corr);
    std::filesystem::create_directories(cfg.out);
    std::ofstream out(out_path(cfg, "alternate_log.csv"));
    require(out.good(), "cannot open alternate_log.csv");
    out << "round,predictor_loss,corrector_loss\n";
    for (std::size_t r = 0; r < alog.predictor_loss.size(); ++r) {
      out << r << ',' << format_double(alog.predictor_loss[r]) << ','
          << format_double(alog.corrector_loss[r]) << '\n';
    }
    require(out.good(), "write failed for alternate_log.csv");
    std::cout << "alternated " << cfg.alternate_rounds << " rounds (m="
              << cfg.predictor_steps << ", n=" << cfg.corrector_steps
              << "), NFE " << alog.nfe << "\n";
    return;
  }

  auto bundles = bundles_for(cfg, pred, cfg.train_horizon);
  const std::int64_t bdim = bundles.front().forecast.dim(1);
  require(dim == -1 || dim == bdim, "corrector: predictor dimension mismatch");

  TrainLog log;
  if (cfg.corrector == "mlp") {
    const auto [w, d] = parse_net_spec(cfg.mlp_net);
    auto [model, l] =
        train_mlp_corrector(bundles, bdim, w, d, corrector_hyper_from(cfg));
    log = std::move(l);
    json j;
    j["kind"] = "mlp";
    j["net"] = mlp_to_json(model.net);
    save_json_file(corrector_ckpt_path(cfg), j);
  } else {
    RegularizationConfig reg{cfg.eta, cfg.kappa};
    auto [model, l] = train_corrector(bundles, bdim, corrector_config_from(cfg),
                                      reg, corrector_hyper_from(cfg));
    log = std::move(l);
    save_corrector(corrector_ckpt_path(cfg), model);
  }
  write_train_log(cfg, log, "corrector");
  std::cout << "trained " << cfg.corrector << " corrector on "
            << bundles.size() << " bundles: " << log.epochs_run
            << " epochs, best " << log.best_epoch << ", median NFE/epoch "
            << median_nfe(log) << "\n";
}

void cmd_evaluate(const RunConfig& cfg) {
  Predictor pred = load_predictor(predictor_ckpt_path(cfg));
  AnyCorrector corr = load_any_corrector(corrector_ckpt_path(cfg));
  Dataset test = std::holds_alternative<DLinearModel>(pred)
      ? dlinear_windows(cfg, "test", std::get<DLinearModel>(pred).lookback,
                        std::get<DLinearModel>(pred).horizon)
      : load_split(cfg, "test");

  EvalArrays arrays = build_eval_arrays(cfg, pred, corr, test);
  EvalReport report = evaluate_correction(arrays.truth, arrays.forecast,
                                          arrays.corrected, cfg.grid_step,
                                          cfg.threshold);
  std::filesystem::create_directories(cfg.out);
  write_report_csv(out_path(cfg, "report.csv"), report);
  json j = report_to_json(report);
  j["eval_nfe"] = arrays.nfe;
  j["config"] = config_to_json(cfg);
  save_json_file(out_path(cfg, "report.json"), j);

  if (cfg.stress > 0) {
    const std::int64_t T = arrays.truth.front().dim(0);
    const std::int64_t max_cut = std::min<std::int64_t>(cfg.stress, T - 1);
    std::vector<std::int64_t> cutoffs;
    for (std::int64_t c = cfg.grid_step; c <= max_cut; c += cfg.grid_step) {
      cutoffs.push_back(c);
    }
    require(!cutoffs.empty(), "stress: no cutoffs below the horizon");
    StressCurve curve = stress_curve(arrays.corrected, arrays.forecast,
                                     arrays.truth, cutoffs);
    std::ofstream out(out_path(cfg, "stress.csv"));
    require(out.good(), "cannot open stress.csv");
    out << "cutoff,log_mse_corrected,log_mse_uncorrected\n";
    for (std::size_t i = 0; i < cutoffs.size(); ++i) {
      out << cutoffs[i] << ',' << format_double(curve.log_mse_corrected[i])
          << ',' << format_double(curve.log_mse_uncorrected[i]) << '\n';
    }
    require(out.good(), "write failed for stress.csv");
    std::vector<double> xs(cutoffs.begin(), cutoffs.end());
    write_line_svg(out_path(cfg, "stress.svg"), "long-horizon stress",
                   "cutoff", "log MSE",
                   {{"corrected", xs, curve.log_mse_corrected},
                    {"uncorrected", xs, curve.log_mse_uncorrected}});
  }
  std::cout << "reduction at t=" << cfg.train_horizon << ": "
            << interp_reduction(report, cfg.train_horizon)
            << "%, extrapolation horizon " << report.horizon << " (threshold "
            << cfg.threshold << "%)\n";
}

void cmd_ablate(const RunConfig& cfg) {
  require(!cfg.sweep.empty(), "config: key 'sweep' is required for ablate");
  require(cfg.corrector == "cde", "config: ablate sweeps the cde corrector");
  Predictor pred = load_predictor(predictor_ckpt_path(cfg));

  std::vector<std::string> labels;
  if (cfg.sweep == "solver") {
    labels = split_csv_names(cfg.values.empty()
                                 ? "euler,heun,dopri5,tsit5"
                                 : cfg.values);
  } else if (cfg.sweep == "interpolation") {
    labels = split_csv_names(cfg.values.empty() ? "hermite,linear" : cfg.values);
  } else if (cfg.sweep == "decoder") {
    labels = split_csv_names(cfg.values.empty() ? "20_1,100_1,400_4"
                                                : cfg.values);
  } else {
    std::string defaults;
    if (cfg.sweep == "kappa") defaults = "0.5:1.0:0.1";
    if (cfg.sweep == "eta") defaults = "0,5,10";
    if (cfg.sweep == "train_horizon") defaults = "30,40,50";
    if (cfg.sweep == "observed_fraction") defaults = "0.2,0.5,0.8,1.0";
    for (double v : parse_value_list(cfg.values.empty() ? defaults
                                                        : cfg.values)) {
      if (cfg.sweep == "kappa" || cfg.sweep == "observed_fraction") {
        labels.push_back(format_double(v));
      } else {
        labels.push_back(std::to_string(static_cast<long>(std::llround(v))));
      }
    }
  }

  struct SweepRow {
    std::string label;
    double med_nfe = 0.0;
    double interp = 0.0;
    std::int64_t horizon = 0;
    int epochs = 0;
    double med_wall = 0.0;
  };
  std::vector<SweepRow> rows;
  std::vector<SvgSeries> nfe_series;

  for (const auto& label : labels) {
    RunConfig run = cfg;
    if (cfg.sweep == "kappa") run.kappa = std::stod(label);
    else if (cfg.sweep == "eta") run.eta = std::stoi(label);
    else if (cfg.sweep == "solver") run.solver = label;
    else if (cfg.sweep == "interpolation") run.interpolation = label;
    else if (cfg.sweep == "decoder") run.decoder = label;
    else if (cfg.sweep == "train_horizon") run.train_horizon = std::stoi(label);
    else if (cfg.sweep == "observed_fraction") run.observed_fraction = std::stod(label);
    require(run.eta <= run.train_horizon - 4,
            "config: key 'eta' must be at most train_horizon - 4");

    auto bundles = bundles_for(run, pred, run.train_horizon);
    const std::int64_t bdim = bundles.front().forecast.dim(1);
    RegularizationConfig reg{run.eta, run.kappa};
    auto [model, log] = train_corrector(bundles, bdim,
                                        corrector_config_from(run), reg,
                                        corrector_hyper_from(run));

    Dataset test = std::holds_alternative<DLinearModel>(pred)
        ? dlinear_windows(run, "test", std::get<DLinearModel>(pred).lookback,
                          std::get<DLinearModel>(pred).horizon)
        : load_split(run, "test");
    EvalArrays arrays = build_eval_arrays(run, pred, AnyCorrector{model}, test);
    EvalReport report = evaluate_correction(arrays.truth, arrays.forecast,
                                            arrays.corrected, run.grid_step,
                                            run.threshold);
    SweepRow row;
    row.label = label;
    row.med_nfe = median_nfe(log);
    row.interp = interp_reduction(report, run.train_horizon);
    row.horizon = report.horizon;
    row.epochs = log.epochs_run;
    row.med_wall = median(log.wall_ms);
    rows.push_back(row);

    SvgSeries series;
    series.label = cfg.sweep + "=" + label;
    for (int e = 0; e < log.epochs_run; ++e) {
      series.x.push_back(e);
      series.y.push_back(static_cast<double>(log.nfe[e]));
    }
    nfe_series.push_back(std::move(series));
    std::cout << cfg.sweep << "=" << label << ": median NFE/epoch "
              << row.med_nfe << ", interp reduction " << row.interp
              << "%, horizon " << row.horizon << "\n";
  }

  std::filesystem::create_directories(cfg.out);
  {
    std::ofstream out(out_path(cfg, "sweep.csv"));
    require(out.good(), "cannot open sweep.csv");
    out << "value,median_nfe,interp_reduction,horizon,epochs\n";
    for (const auto& r : rows) {
      out << r.label << ',' << format_double(r.med_nfe) << ','
          << format_double(r.interp) << ',' << r.horizon << ',' << r.epochs
          << '\n';
    }
    require(out.good(), "write failed for sweep.csv");
  }
  {
    std::vector<ParetoPoint> points;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      points.push_back({rows[i].med_nfe,
                        static_cast<double>(rows[i].horizon), i});
    }
    auto front = pareto_points(points);
    std::ofstream out(out_path(cfg, "pareto.csv"));
    require(out.good(), "cannot open pareto.csv");
    out << "value,median_nfe,horizon\n";
    for (const auto& p : front) {
      out << rows[p.tag].label << ',' << format_double(p.nfe) << ','
          << format_double(p.horizon) << '\n';
    }
    require(out.good(), "write failed for pareto.csv");
  }
  {
    json timing = json::object();
    for (const auto& r : rows) timing[r.label] = {{"median_wall_ms", r.med_wall}};
    save_json_file(out_path(cfg, "sweep_timing.json"), timing);
  }
  write_line_svg(out_path(cfg, "nfe_epoch.svg"), "NFE per epoch", "epoch",
                 "NFE", nfe_series);
  std::cout << "swept " << cfg.sweep << " over " << rows.size()
            << " values; wrote sweep.csv, pareto.csv\n";
}

}  // namespace pcf
