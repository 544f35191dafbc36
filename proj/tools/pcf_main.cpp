#include <functional>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "pcf/commands.hpp"
#include "pcf/errors.hpp"
#include "pcf/parallel.hpp"
#include "pcf/serialize.hpp"

namespace {

using nlohmann::json;

// Flags write into `overrides` only when actually passed, so the merge order
// stays: defaults < preset < --config file < explicit flags.
struct Cli {
  json overrides = json::object();
  std::string config_file;
  std::string preset;
  bool serial = false;
  std::function<void(const pcf::RunConfig&)> run;
};

void opt_i(CLI::App* sub, Cli& cli, const std::string& flag, const char* key,
           const std::string& desc) {
  sub->add_option_function<int>(
      flag, [&cli, key](const int& v) { cli.overrides[key] = v; }, desc);
}

void opt_d(CLI::App* sub, Cli& cli, const std::string& flag, const char* key,
           const std::string& desc) {
  sub->add_option_function<double>(
      flag, [&cli, key](const double& v) { cli.overrides[key] = v; }, desc);
}

void opt_s(CLI::App* sub, Cli& cli, const std::string& flag, const char* key,
           const std::string& desc) {
  sub->add_option_function<std::string>(
      flag, [&cli, key](const std::string& v) { cli.overrides[key] = v; },
      desc);
}

void opt_seed(CLI::App* sub, Cli& cli) {
  sub->add_option_function<std::uint64_t>(
      "--seed",
      [&cli](const std::uint64_t& v) { cli.overrides["seed"] = v; },
      "RNG seed (default 0)");
}

void add_common(CLI::App* sub, Cli& cli) {
  sub->add_option("--config", cli.config_file,
                  "JSON config file; explicit flags override its keys");
  sub->add_option("--preset", cli.preset,
                  "named preset, e.g. fhn-100 or linear2-mask30");
  sub->add_flag("--serial", cli.serial, "disable multithreading");
  opt_seed(sub, cli);
  opt_s(sub, cli, "--out", "out", "output directory (default out)");
}

void add_data_opts(CLI::App* sub, Cli& cli) {
  opt_s(sub, cli, "--data", "data", "dataset directory (from generate)");
  opt_s(sub, cli, "--csv", "csv", "long-format CSV source (window mode)");
  opt_d(sub, cli, "--split", "split", "train fraction (default 0.8)");
  opt_i(sub, cli, "--lookback", "lookback", "window lookback length");
  opt_d(sub, cli, "--mask-fraction", "mask_fraction",
        "fraction of points with half the features masked");
}

void add_solver_opts(CLI::App* sub, Cli& cli) {
  opt_s(sub, cli, "--solver", "solver", "euler | heun | dopri5 | tsit5");
  opt_d(sub, cli, "--rtol", "rtol", "relative tolerance");
  opt_d(sub, cli, "--atol", "atol", "absolute tolerance");
  opt_d(sub, cli, "--h0", "h0", "initial step size");
  sub->add_flag_function(
      "--fixed-step",
      [&cli](std::int64_t) { cli.overrides["fixed_step"] = true; },
      "disable adaptive step control");
}

void add_training_opts(CLI::App* sub, Cli& cli) {
  opt_i(sub, cli, "--batch", "batch", "batch size (-1 = model default)");
  opt_d(sub, cli, "--lr", "lr", "Adam learning rate");
  opt_i(sub, cli, "--max-epochs", "max_epochs", "epoch budget");
  opt_i(sub, cli, "--patience", "patience", "early-stopping patience");
  opt_d(sub, cli, "--val-fraction", "val_fraction", "validation carve-out");
  opt_d(sub, cli, "--observed-fraction", "observed_fraction",
        "simulated observation fraction in (0, 1]");
}

void add_corrector_opts(CLI::App* sub, Cli& cli) {
  opt_s(sub, cli, "--corrector", "corrector", "cde | mlp");
  opt_d(sub, cli, "--kappa", "kappa", "control-path retain fraction (0, 1]");
  opt_i(sub, cli, "--eta", "eta", "max tail drop, in {0..T-4}");
  opt_i(sub, cli, "--train-horizon", "train_horizon",
        "forecast points used for corrector training");
  opt_i(sub, cli, "--latent", "latent", "hidden state width");
  opt_s(sub, cli, "--decoder", "decoder", "decoder net, width_depth");
  opt_s(sub, cli, "--mlp-net", "mlp_net", "pointwise baseline net, width_depth");
  opt_s(sub, cli, "--interpolation", "interpolation", "hermite | linear");
}

void add_checkpoint_opts(CLI::App* sub, Cli& cli) {
  opt_s(sub, cli, "--predictor-checkpoint", "predictor_checkpoint",
        "predictor checkpoint path (default <out>/predictor.json)");
  opt_s(sub, cli, "--corrector-checkpoint", "corrector_checkpoint",
        "corrector checkpoint path (default <out>/corrector.json)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"predictor-corrector forecasting toolkit"};
  app.require_subcommand(1);
  Cli cli;

  CLI::App* gen = app.add_subcommand("generate", "simulate a synthetic system "
                                                 "and write CSV trajectories");
  add_common(gen, cli);
  opt_s(gen, cli, "--system", "system",
        "lorenz | lotka_volterra | fhn | glycolytic | linear2 | linear3 | "
        "linear4");
  opt_i(gen, cli, "--trajectories", "trajectories", "trajectory count");
  opt_i(gen, cli, "--timesteps", "timesteps", "points per trajectory");
  opt_d(gen, cli, "--dt", "dt", "sampling interval");
  opt_d(gen, cli, "--split", "split", "train fraction (default 0.8)");
  gen->callback([&cli] { cli.run = pcf::cmd_generate; });

  CLI::App* tp = app.add_subcommand("train-predictor",
                                    "train a forecasting model");
  add_common(tp, cli);
  add_data_opts(tp, cli);
  add_training_opts(tp, cli);
  add_solver_opts(tp, cli);
  opt_s(tp, cli, "--predictor", "predictor", "node | dlinear | rnn");
  opt_i(tp, cli, "--horizon", "horizon", "forecast/training horizon");
  opt_i(tp, cli, "--hidden", "hidden", "rnn hidden width");
  opt_i(tp, cli, "--kernel", "kernel", "dlinear moving-average window (odd)");
  tp->add_flag_function(
      "--per-channel",
      [&cli](std::int64_t) { cli.overrides["channel_shared"] = false; },
      "dlinear: separate linear maps per channel");
  opt_s(tp, cli, "--predictor-checkpoint", "predictor_checkpoint",
        "where to write the checkpoint (default <out>/predictor.json)");
  tp->callback([&cli] { cli.run = pcf::cmd_train_predictor; });

  CLI::App* tc = app.add_subcommand("train-corrector",
                                    "train the error-dynamics corrector on a "
                                    "predictor's forecasts");
  add_common(tc, cli);
  add_data_opts(tc, cli);
  add_training_opts(tc, cli);
  add_solver_opts(tc, cli);
  add_corrector_opts(tc, cli);
  add_checkpoint_opts(tc, cli);
  opt_s(tc, cli, "--predictor", "predictor", "predictor kind (alternating)");
  opt_i(tc, cli, "--horizon", "horizon", "predictor horizon (alternating)");
  opt_i(tc, cli, "--alternate-rounds", "alternate_rounds",
        "alternating rounds; 0 = two-stage training");
  opt_i(tc, cli, "--predictor-steps", "predictor_steps",
        "predictor batches per round");
  opt_i(tc, cli, "--corrector-steps", "corrector_steps",
        "corrector batches per round");
  tc->callback([&cli] { cli.run = pcf::cmd_train_corrector; });

  CLI::App* ev = app.add_subcommand("evaluate",
                                    "score corrected vs raw forecasts on the "
                                    "test split");
  add_common(ev, cli);
  add_data_opts(ev, cli);
  add_checkpoint_opts(ev, cli);
  opt_i(ev, cli, "--grid-step", "grid_step", "cutoff grid spacing");
  opt_d(ev, cli, "--threshold", "threshold", "horizon threshold in percent");
  opt_i(ev, cli, "--stress", "stress", "max stress cutoff; 0 disables");
  opt_i(ev, cli, "--eval-horizon", "eval_horizon",
        "evaluation length; 0 = full trajectory");
  opt_i(ev, cli, "--train-horizon", "train_horizon",
        "interpolation cutoff echoed in the summary");
  ev->callback([&cli] { cli.run = pcf::cmd_evaluate; });

  CLI::App* ab = app.add_subcommand("ablate",
                                    "sweep one corrector setting and report "
                                    "NFE/accuracy trade-offs");
  add_common(ab, cli);
  add_data_opts(ab, cli);
  add_training_opts(ab, cli);
  add_solver_opts(ab, cli);
  add_corrector_opts(ab, cli);
  add_checkpoint_opts(ab, cli);
  opt_s(ab, cli, "--sweep", "sweep",
        "kappa | eta | solver | interpolation | decoder | train_horizon | "
        "observed_fraction");
  opt_s(ab, cli, "--values", "values", "lo:hi:step or comma list");
  opt_i(ab, cli, "--grid-step", "grid_step", "cutoff grid spacing");
  opt_d(ab, cli, "--threshold", "threshold", "horizon threshold in percent");
  opt_i(ab, cli, "--eval-horizon", "eval_horizon",
        "evaluation length; 0 = full trajectory");
  ab->callback([&cli] { cli.run = pcf::cmd_ablate; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    json merged = json::object();
    if (!cli.preset.empty()) merged.update(pcf::preset_json(cli.preset));
    if (!cli.config_file.empty()) {
      merged.update(pcf::load_json_file(cli.config_file));
    }
    merged.update(cli.overrides);
    const pcf::RunConfig cfg = pcf::resolve_config(merged);
    if (cli.serial) pcf::par::set_serial(true);
    cli.run(cfg);
  } catch (const pcf::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const pcf::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
