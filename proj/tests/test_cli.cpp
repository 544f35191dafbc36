#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#ifdef __unix__
#include <sys/wait.h>
#endif

// Black-box tests for the pcf binary. Every case shells out to the real
// executable (path injected via PCF_CLI_BIN) inside a scratch directory, so
// these cover argument parsing, config merging, exit codes, and the files a
// run leaves behind rather than library internals.

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CmdResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

int exit_code(int status) {
#ifdef __unix__
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
#else
  return status;
#endif
}

// Scratch tree shared by all cases; wiped once when the binary starts.
const fs::path& scratch() {
  static const fs::path root = [] {
    fs::path p = fs::temp_directory_path() / "pcf_cli_scratch";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

CmdResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path out = scratch() / ("stdout_" + std::to_string(counter) + ".txt");
  const fs::path err = scratch() / ("stderr_" + std::to_string(counter) + ".txt");
  ++counter;
  const std::string cmd = std::string(PCF_CLI_BIN) + " " + args + " >\"" +
                          out.string() + "\" 2>\"" + err.string() + "\"";
  CmdResult r;
  r.code = exit_code(std::system(cmd.c_str()));
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

// Small linear2 dataset most cases share. Generated once, asserted once.
const fs::path& dataset() {
  static const fs::path dir = [] {
    fs::path d = scratch() / "data";
    CmdResult r = run_cli("generate --system linear2 --trajectories 8 "
                          "--timesteps 30 --dt 0.1 --seed 5 --out \"" +
                          d.string() + "\"");
    REQUIRE(r.code == 0);
    return d;
  }();
  return dir;
}

// Node predictor + cde corrector trained once into scratch()/base; the
// evaluate, ablate, and determinism cases all reuse these checkpoints.
const fs::path& baseline_run() {
  static const fs::path dir = [] {
    fs::path d = scratch() / "base";
    CmdResult p = run_cli("train-predictor --predictor node --data \"" +
                          dataset().string() +
                          "\" --horizon 10 --max-epochs 5 --patience 5 "
                          "--batch 4 --seed 5 --out \"" + d.string() + "\"");
    REQUIRE(p.code == 0);
    CmdResult c = run_cli("train-corrector --corrector cde --data \"" +
                          dataset().string() +
                          "\" --train-horizon 10 --max-epochs 5 --patience 5 "
                          "--batch 8 --latent 4 --kappa 0.8 --eta 2 --seed 5 "
                          "--out \"" + d.string() + "\"");
    REQUIRE(c.code == 0);
    return d;
  }();
  return dir;
}

std::string first_line(const std::string& s) {
  return s.substr(0, s.find('\n'));
}

std::vector<std::string> csv_lines(const fs::path& p) {
  std::vector<std::string> lines;
  std::ifstream is(p);
  std::string line;
  while (std::getline(is, line)) lines.push_back(line);
  return lines;
}

bool same_bytes(const fs::path& a, const fs::path& b) {
  return slurp(a) == slurp(b);
}

}  // namespace

TEST_CASE("generate writes a manifest and one csv per trajectory") {
  const fs::path& d = dataset();
  const json m = json::parse(slurp(d / "manifest.json"));
  CHECK(m.at("system") == "linear2");
  CHECK(m.at("trajectories") == 8);
  CHECK(m.at("timesteps") == 30);
  CHECK(m.at("dim") == 2);
  CHECK(m.at("dt") == 0.1);
  CHECK(m.at("seed") == 5);
  CHECK(m.at("files").size() == 8);
  for (const auto& f : m.at("files")) {
    CHECK(fs::exists(d / f.get<std::string>()));
  }

  // The split is materialized so later commands need no extra randomness.
  const auto& split = m.at("split");
  CHECK(split.at("train").size() + split.at("test").size() == 8);
  CHECK(split.at("ratio") == 0.8);

  // Trajectory files are plain csv with a time column plus one per feature.
  const auto lines = csv_lines(d / m.at("files")[0].get<std::string>());
  CHECK(lines.size() == 31);
  CHECK(lines[0] == "t,x0,x1");
}

TEST_CASE("training and evaluation pipeline runs end to end") {
  const fs::path& base = baseline_run();

  CHECK(fs::exists(base / "predictor.json"));
  CHECK(fs::exists(base / "corrector.json"));
  for (const std::string role : {"predictor", "corrector"}) {
    const auto log = csv_lines(base / (role + "_train_log.csv"));
    CHECK(log[0] == "epoch,train_loss,val_loss,nfe");
    CHECK(log.size() == 6);  // header + 5 epochs
    const json s = json::parse(slurp(base / (role + "_summary.json")));
    CHECK(s.at("epochs_run") == 5);
    CHECK(s.at("best_val_loss").get<double>() > 0.0);
    const json t = json::parse(slurp(base / (role + "_timing.json")));
    CHECK(t.at("wall_ms").size() == 5);
  }

  CmdResult e = run_cli("evaluate --data \"" + dataset().string() +
                        "\" --seed 5 --grid-step 5 --threshold 3 --stress 20 "
                        "--out \"" + base.string() + "\"");
  REQUIRE(e.code == 0);
  CHECK(e.out.find("reduction at t=") != std::string::npos);

  const auto report = csv_lines(base / "report.csv");
  CHECK(report[0] == "cutoff,mse_without,mse_with,reduction_percent");
  // 30-step trajectories, grid step 5, plus the forced endpoint T-1 = 29.
  CHECK(report.size() == 7);
  CHECK(report[1].substr(0, 2) == "5,");
  CHECK(report.back().substr(0, 3) == "29,");

  const json r = json::parse(slurp(base / "report.json"));
  CHECK(r.at("rows").size() == 6);
  CHECK(r.at("eval_nfe").get<long>() > 0);
  CHECK(r.at("threshold_percent") == 3.0);
  CHECK(r.at("mae_without").get<double>() > 0.0);
  CHECK(r.contains("extrapolation_horizon"));
  CHECK(r.at("config").at("seed") == 5);

  const auto stress = csv_lines(base / "stress.csv");
  CHECK(stress[0] == "cutoff,log_mse_corrected,log_mse_uncorrected");
  CHECK(stress.size() == 5);  // cutoffs 5,10,15,20
  const std::string svg = slurp(base / "stress.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("log MSE") != std::string::npos);
}

TEST_CASE("same seed reruns are byte-identical on numeric outputs") {
  baseline_run();
  const fs::path redo = scratch() / "redo";
  CmdResult p = run_cli("train-predictor --predictor node --data \"" +
                        dataset().string() +
                        "\" --horizon 10 --max-epochs 5 --patience 5 "
                        "--batch 4 --seed 5 --out \"" + redo.string() + "\"");
  REQUIRE(p.code == 0);
  CmdResult c = run_cli("train-corrector --corrector cde --data \"" +
                        dataset().string() +
                        "\" --train-horizon 10 --max-epochs 5 --patience 5 "
                        "--batch 8 --latent 4 --kappa 0.8 --eta 2 --seed 5 "
                        "--out \"" + redo.string() + "\"");
  REQUIRE(c.code == 0);
  for (const fs::path& out : {fs::path(baseline_run()), redo}) {
    CmdResult e = run_cli("evaluate --data \"" + dataset().string() +
                          "\" --seed 5 --grid-step 5 --threshold 3 "
                          "--stress 20 --out \"" + out.string() + "\"");
    REQUIRE(e.code == 0);
  }

  for (const std::string f : {"predictor_train_log.csv",
                              "corrector_train_log.csv", "predictor.json",
                              "corrector.json", "report.csv", "stress.csv"}) {
    CAPTURE(f);
    CHECK(same_bytes(baseline_run() / f, redo / f));
  }
  // Wall-clock lives only in the timing files, which may legitimately differ.
  CHECK(fs::exists(redo / "predictor_timing.json"));
  CHECK(fs::exists(redo / "corrector_timing.json"));
}

TEST_CASE("usage errors exit with code 2 and a diagnostic") {
  SUBCASE("unexpected flag") {
    CmdResult r = run_cli("train-predictor --no-such-flag");
    CHECK(r.code == 2);
    CHECK(r.err.find("--no-such-flag") != std::string::npos);
  }
  SUBCASE("missing subcommand") {
    CmdResult r = run_cli("");
    CHECK(r.code == 2);
    CHECK(r.err.find("subcommand is required") != std::string::npos);
  }
  SUBCASE("unknown preset") {
    CmdResult r = run_cli("train-predictor --preset nosuch --data \"" +
                          dataset().string() + "\" --out \"" +
                          (scratch() / "e1").string() + "\"");
    CHECK(r.code == 2);
    CHECK(first_line(r.err).find("error: unknown preset 'nosuch'") == 0);
    CHECK(r.err.find("fhn-100") != std::string::npos);  // lists known names
  }
  SUBCASE("unknown config key") {
    const fs::path cfg = scratch() / "bad_config.json";
    std::ofstream(cfg) << "{\"bogus_key\": 3}";
    CmdResult r = run_cli("train-predictor --config \"" + cfg.string() +
                          "\" --data \"" + dataset().string() + "\" --out \"" +
                          (scratch() / "e2").string() + "\"");
    CHECK(r.code == 2);
    CHECK(r.err.find("config: unknown key 'bogus_key'") != std::string::npos);
  }
  SUBCASE("missing dataset directory") {
    CmdResult r = run_cli("train-predictor --predictor node --data \"" +
                          (scratch() / "nowhere").string() +
                          "\" --horizon 5 --max-epochs 2 --out \"" +
                          (scratch() / "e3").string() + "\"");
    CHECK(r.code == 2);
    CHECK(r.err.find("cannot open manifest") != std::string::npos);
  }
  SUBCASE("horizon longer than the trajectories") {
    CmdResult r = run_cli("train-predictor --predictor node --data \"" +
                          dataset().string() +
                          "\" --horizon 500 --max-epochs 2 --out \"" +
                          (scratch() / "e4").string() + "\"");
    CHECK(r.code == 2);
    CHECK(r.err.find("'horizon' exceeds the trajectory length") !=
          std::string::npos);
  }
  SUBCASE("evaluate without checkpoints") {
    CmdResult r = run_cli("evaluate --data \"" + dataset().string() +
                          "\" --out \"" + (scratch() / "e5").string() + "\"");
    CHECK(r.code == 2);
    CHECK(first_line(r.err).find("error: cannot open") == 0);
  }
}

TEST_CASE("divergent optimization exits with code 3") {
  CmdResult r = run_cli("train-predictor --predictor node --data \"" +
                        dataset().string() +
                        "\" --horizon 10 --max-epochs 3 --batch 4 --lr 1e300 "
                        "--seed 5 --out \"" + (scratch() / "nf").string() + "\"");
  CHECK(r.code == 3);
  CHECK(first_line(r.err).find("numerical failure: ") == 0);
  CHECK(r.err.find("non-finite") != std::string::npos);
}

TEST_CASE("presets seed the config and later layers override it") {
  // fhn-100 pins the regularization for the fully observed fhn run.
  const fs::path p1 = scratch() / "preset1";
  CmdResult a = run_cli("evaluate --preset fhn-100 --data \"" +
                        dataset().string() + "\" --predictor-checkpoint \"" +
                        (baseline_run() / "predictor.json").string() +
                        "\" --corrector-checkpoint \"" +
                        (baseline_run() / "corrector.json").string() +
                        "\" --grid-step 5 --threshold 3 --out \"" +
                        p1.string() + "\"");
  REQUIRE(a.code == 0);
  const json c1 = json::parse(slurp(p1 / "report.json")).at("config");
  CHECK(c1.at("system") == "fhn");
  CHECK(c1.at("kappa") == 0.6);
  CHECK(c1.at("eta") == 0);
  CHECK(c1.at("observed_fraction") == 1.0);

  // Config file overrides the preset; explicit flags override the file.
  const fs::path cfg = scratch() / "override.json";
  std::ofstream(cfg) << "{\"kappa\": 0.9, \"grid_step\": 5}";
  const fs::path p2 = scratch() / "preset2";
  CmdResult b = run_cli("evaluate --preset fhn-100 --config \"" +
                        cfg.string() + "\" --grid-step 2 --data \"" +
                        dataset().string() + "\" --predictor-checkpoint \"" +
                        (baseline_run() / "predictor.json").string() +
                        "\" --corrector-checkpoint \"" +
                        (baseline_run() / "corrector.json").string() +
                        "\" --threshold 3 --out \"" + p2.string() + "\"");
  REQUIRE(b.code == 0);
  const json c2 = json::parse(slurp(p2 / "report.json")).at("config");
  CHECK(c2.at("kappa") == 0.9);
  CHECK(c2.at("grid_step") == 2);
  const auto report = csv_lines(p2 / "report.csv");
  CHECK(report[1].substr(0, 2) == "2,");
  CHECK(report[2].substr(0, 2) == "4,");
}

TEST_CASE("dlinear windows and the mlp corrector run through the cli") {
  const fs::path out = scratch() / "dl";
  CmdResult p = run_cli("train-predictor --predictor dlinear --data \"" +
                        dataset().string() +
                        "\" --lookback 6 --horizon 4 --kernel 3 "
                        "--max-epochs 5 --patience 5 --batch 8 --seed 5 "
                        "--out \"" + out.string() + "\"");
  REQUIRE(p.code == 0);
  CmdResult c = run_cli("train-corrector --corrector mlp --mlp-net 8_1 "
                        "--data \"" + dataset().string() +
                        "\" --train-horizon 4 --max-epochs 5 --patience 5 "
                        "--batch 16 --seed 5 --out \"" + out.string() + "\"");
  REQUIRE(c.code == 0);
  CHECK(json::parse(slurp(out / "corrector.json")).at("kind") == "mlp");

  CmdResult e = run_cli("evaluate --data \"" + dataset().string() +
                        "\" --seed 5 --grid-step 2 --threshold 3 --out \"" +
                        out.string() + "\"");
  REQUIRE(e.code == 0);
  // Windows are lookback+horizon rows; evaluation sees the 4-step horizon.
  const auto report = csv_lines(out / "report.csv");
  CHECK(report.size() == 3);  // header + cutoffs 2 and 3
  CHECK(report[1].substr(0, 2) == "2,");
  CHECK(report[2].substr(0, 2) == "3,");
}

TEST_CASE("alternating training writes a round log and both checkpoints") {
  const fs::path out = scratch() / "alt";
  fs::create_directories(out);
  fs::copy_file(baseline_run() / "predictor.json", out / "predictor.json",
                fs::copy_options::overwrite_existing);
  CmdResult r = run_cli("train-corrector --corrector cde --predictor node "
                        "--data \"" + dataset().string() +
                        "\" --train-horizon 10 --horizon 10 "
                        "--alternate-rounds 2 --predictor-steps 1 "
                        "--corrector-steps 1 --batch 4 --latent 4 --seed 5 "
                        "--out \"" + out.string() + "\"");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("alternated 2 rounds") != std::string::npos);

  const auto log = csv_lines(out / "alternate_log.csv");
  CHECK(log[0] == "round,predictor_loss,corrector_loss");
  CHECK(log.size() == 3);
  CHECK(log[1].substr(0, 2) == "0,");
  CHECK(log[2].substr(0, 2) == "1,");
  CHECK(fs::exists(out / "corrector.json"));
  // The predictor checkpoint is rewritten with the updated weights.
  CHECK_FALSE(same_bytes(out / "predictor.json",
                         baseline_run() / "predictor.json"));
}

TEST_CASE("ablate sweeps a knob and writes the pareto front") {
  const fs::path out = scratch() / "sweep";
  CmdResult r = run_cli("ablate --sweep kappa --values 0.6,1.0 --data \"" +
                        dataset().string() + "\" --predictor-checkpoint \"" +
                        (baseline_run() / "predictor.json").string() +
                        "\" --train-horizon 10 --max-epochs 4 --patience 4 "
                        "--batch 8 --latent 4 --grid-step 5 --threshold 3 "
                        "--seed 5 --out \"" + out.string() + "\"");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("kappa=0.6") != std::string::npos);
  CHECK(r.out.find("kappa=1") != std::string::npos);

  const auto sweep = csv_lines(out / "sweep.csv");
  CHECK(sweep[0] == "value,median_nfe,interp_reduction,horizon,epochs");
  REQUIRE(sweep.size() == 3);
  CHECK(sweep[1].substr(0, 4) == "0.6,");
  CHECK(sweep[2].substr(0, 2) == "1,");

  const auto pareto = csv_lines(out / "pareto.csv");
  CHECK(pareto[0] == "value,median_nfe,horizon");
  CHECK(pareto.size() >= 2);   // at least one survivor
  CHECK(pareto.size() <= 3);   // never more than the sweep itself

  const json timing = json::parse(slurp(out / "sweep_timing.json"));
  CHECK(timing.contains("0.6"));
  CHECK(timing.contains("1"));
  CHECK(slurp(out / "nfe_epoch.svg").find("<svg") != std::string::npos);
}

TEST_CASE("--serial reproduces the parallel evaluation bytes") {
  baseline_run();
  const fs::path par = scratch() / "evp";
  const fs::path ser = scratch() / "evs";
  for (const auto& [dir, flag] : {std::pair{par, std::string()},
                                  std::pair{ser, std::string("--serial ")}}) {
    CmdResult e = run_cli("evaluate " + flag + "--data \"" +
                          dataset().string() + "\" --predictor-checkpoint \"" +
                          (baseline_run() / "predictor.json").string() +
                          "\" --corrector-checkpoint \"" +
                          (baseline_run() / "corrector.json").string() +
                          "\" --seed 5 --grid-step 5 --threshold 3 "
                          "--stress 20 --out \"" + dir.string() + "\"");
    REQUIRE(e.code == 0);
  }
  CHECK(same_bytes(par / "report.csv", ser / "report.csv"));
  CHECK(same_bytes(par / "stress.csv", ser / "stress.csv"));
}
