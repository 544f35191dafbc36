#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "oracles.hpp"
#include "pcf/dyn_systems.hpp"
#include "pcf/predictors.hpp"

using namespace pcf;
namespace fs = std::filesystem;

namespace {

// Trajectories of a constant system: states never move. Channel 0 differs per
// trajectory so trainers see more than one fixed point.
Dataset constant_dataset(int n, int steps, double value) {
  Dataset d;
  d.system = "constant";
  d.dt = 0.1;
  for (int i = 0; i < n; ++i) {
    Trajectory t;
    std::vector<double> flat;
    for (int s = 0; s < steps; ++s) {
      t.times.push_back(0.1 * s);
      flat.push_back(value + 0.01 * i);
      flat.push_back(-value);
    }
    t.states = Tensor({steps, 2}, std::move(flat));
    d.trajectories.push_back(std::move(t));
  }
  return d;
}

NodeModel zero_field_node(int dim) {
  SolverConfig solver;
  NodeModel m = make_node(dim, 4, 1, 0, solver);
  for (auto& layer : m.field.layers) {
    layer.weight = Tensor::zeros(layer.weight.shape());
    layer.bias = Tensor::zeros(layer.bias.shape());
  }
  return m;
}

double best_val(const TrainLog& log) {
  REQUIRE(log.best_epoch >= 0);
  return log.val_loss[static_cast<std::size_t>(log.best_epoch)];
}

}  // namespace

TEST_CASE("node model has matching field dimensions") {
  SolverConfig solver;
  NodeModel m = make_node(3, 100, 2, 1, solver);
  CHECK(m.field.in_dim() == 3);
  CHECK(m.field.out_dim() == 3);
  CHECK(m.field.sizes() == std::vector<std::int64_t>{3, 100, 100, 3});
}

TEST_CASE("zero field forecasts a constant trajectory") {
  NodeModel m = zero_field_node(2);
  const std::vector<double> times{0.0, 0.5, 1.0, 2.0};
  Tensor fc = node_forecast(m, Tensor::row({1.5, -2.0}), times);
  REQUIRE(fc.dim(0) == 4);
  for (std::int64_t i = 0; i < 4; ++i) {
    CHECK(fc.at(i, 0) == 1.5);
    CHECK(fc.at(i, 1) == -2.0);
  }
}

TEST_CASE("forecast starts exactly at the initial state") {
  SolverConfig solver;
  NodeModel m = make_node(2, 8, 1, 3, solver);
  const std::vector<double> times{0.0, 0.1, 0.2};
  const Tensor x0 = Tensor::row({0.4, 0.7});
  Tensor fc = node_forecast(m, x0, times);
  CHECK(fc.at(0, 0) == x0[0]);
  CHECK(fc.at(0, 1) == x0[1]);
}

TEST_CASE("a field equal to the true dynamics reproduces the flow") {
  // The damped-oscillator field is affine, so a single-layer network holds
  // it exactly; the forecast must then match the analytic solution.
  NodeModel m;
  m.field.act = Activation::tanh_act;  // no hidden layers, so never applied
  m.field.layers.push_back(
      {Tensor({2, 2}, {0.0, 1.0, -1.0, -0.3}), Tensor::row({0.0, 0.0})});
  m.solver.rtol = 1e-9;
  m.solver.atol = 1e-12;

  std::vector<double> times;
  for (int i = 0; i < 30; ++i) times.push_back(0.1 * i);
  const Tensor x0 = Tensor::row({1.0, 0.5});
  long nfe = 0;
  Tensor fc = node_forecast(m, x0, times, &nfe);
  CHECK(nfe > 0);

  oracle::Oscillator sol(1.0, 0.5);
  for (std::int64_t i = 0; i < fc.dim(0); ++i) {
    const double t = times[static_cast<std::size_t>(i)];
    CHECK(std::abs(fc.at(i, 0) - sol.z1(t)) < 1e-6);
    CHECK(std::abs(fc.at(i, 1) - sol.z2(t)) < 1e-6);
  }
}

TEST_CASE("training on a constant system drives the field toward zero") {
  Dataset data = constant_dataset(10, 10, 1.0);
  NodeHyper hyper;
  hyper.width = 8;
  hyper.depth = 1;
  hyper.batch = 5;
  hyper.max_epochs = 150;
  hyper.patience = 150;
  hyper.horizon = 10;
  hyper.lr = 5e-3;
  hyper.seed = 0;
  auto [model, log] = train_node(data, hyper);
  REQUIRE(log.epochs_run > 0);
  CHECK(best_val(log) < 1e-4);
  // The best checkpoint is the argmin of the validation curve.
  for (double v : log.val_loss) CHECK(best_val(log) <= v + 1e-15);
  CHECK(log.nfe.size() == log.val_loss.size());
  CHECK(log.wall_ms.size() == log.val_loss.size());
}

TEST_CASE("node training is deterministic for a fixed seed") {
  Dataset data = constant_dataset(5, 8, 0.5);
  NodeHyper hyper;
  hyper.width = 6;
  hyper.depth = 1;
  hyper.batch = 2;
  hyper.max_epochs = 3;
  hyper.patience = 10;
  hyper.horizon = 8;
  auto [m1, l1] = train_node(data, hyper);
  auto [m2, l2] = train_node(data, hyper);
  REQUIRE(l1.train_loss.size() == l2.train_loss.size());
  for (std::size_t i = 0; i < l1.train_loss.size(); ++i) {
    CHECK(l1.train_loss[i] == l2.train_loss[i]);
    CHECK(l1.nfe[i] == l2.nfe[i]);
  }
  for (std::size_t k = 0; k < m1.field.layers.size(); ++k) {
    const Tensor& a = m1.field.layers[k].weight;
    const Tensor& b = m2.field.layers[k].weight;
    for (std::int64_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  }
}

TEST_CASE("moving-average decomposition identities") {
  const Tensor window({4, 1}, {1.0, 2.0, 3.0, 4.0});
  auto [trend, seasonal] = decompose_window(window, 3);
  // Replicate padding: ends average with their own copies.
  CHECK(trend.at(0, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  CHECK(trend.at(1, 0) == doctest::Approx(2.0));
  CHECK(trend.at(2, 0) == doctest::Approx(3.0));
  CHECK(trend.at(3, 0) == doctest::Approx(11.0 / 3.0).epsilon(1e-15));
  for (std::int64_t i = 0; i < 4; ++i) {
    CHECK(trend.at(i, 0) + seasonal.at(i, 0) == window.at(i, 0));
  }

  auto [t1, s1] = decompose_window(window, 1);
  for (std::int64_t i = 0; i < 4; ++i) {
    CHECK(t1.at(i, 0) == window.at(i, 0));
    CHECK(s1.at(i, 0) == 0.0);
  }

  const Tensor constant({5, 2}, std::vector<double>(10, 3.25));
  auto [tc, sc] = decompose_window(constant, 3);
  for (std::int64_t i = 0; i < tc.size(); ++i) {
    CHECK(tc[i] == doctest::Approx(3.25).epsilon(1e-15));
    CHECK(sc[i] == doctest::Approx(0.0));
  }

  CHECK_THROWS_AS(decompose_window(window, 2), ValidationError);
}

TEST_CASE("dlinear forecast equals the two-branch formula oracle") {
  DLinearModel m = make_dlinear(6, 3, 3, true, 2, 42);
  REQUIRE(m.trend.size() == 1);

  Rng rng(3);
  std::vector<double> flat;
  for (int i = 0; i < 12; ++i) flat.push_back(rng.uniform(-2, 2));
  const Tensor window({6, 2}, std::move(flat));
  const Tensor got = dlinear_forecast(m, window);
  REQUIRE(got.dim(0) == 3);

  auto [trend, seasonal] = decompose_window(window, 3);
  for (std::int64_t d = 0; d < 2; ++d) {
    for (std::int64_t h = 0; h < 3; ++h) {
      double acc = m.trend[0].bias[h] + m.seasonal[0].bias[h];
      for (std::int64_t l = 0; l < 6; ++l) {
        acc += m.trend[0].weight.at(h, l) * trend.at(l, d);
        acc += m.seasonal[0].weight.at(h, l) * seasonal.at(l, d);
      }
      CHECK(got.at(h, d) == doctest::Approx(acc).epsilon(1e-12));
    }
  }
}

TEST_CASE("per-channel dlinear keeps one map per feature") {
  DLinearModel m = make_dlinear(4, 2, 3, false, 3, 1);
  CHECK(m.trend.size() == 3);
  CHECK(m.seasonal.size() == 3);
  CHECK(m.trend[0].weight.dim(0) == 2);
  CHECK(m.trend[0].weight.dim(1) == 4);
}

TEST_CASE("dlinear learns to extrapolate an exact linear trend") {
  std::vector<double> flat;
  for (int i = 0; i < 60; ++i) flat.push_back(0.05 * i + 1.0);
  Tensor series({60, 1}, std::move(flat));
  Dataset windows;
  windows.trajectories = make_windows(series, 8, 4);
  windows.system = "synthetic";

  DLinearHyper hyper;
  hyper.kernel = 3;
  hyper.batch = 16;
  hyper.lr = 5e-3;
  hyper.max_epochs = 600;
  hyper.patience = 600;
  auto [model, log] = train_dlinear(windows, 8, 4, hyper);
  CHECK(best_val(log) < 1e-3);

  CHECK_THROWS_AS(train_dlinear(windows, 9, 4, hyper), ValidationError);
}

TEST_CASE("rnn with zero weights rolls out the output bias") {
  RnnModel m = make_rnn(2, 4, 0);
  m.w_ih = Tensor::zeros(m.w_ih.shape());
  m.w_hh = Tensor::zeros(m.w_hh.shape());
  m.b_h = Tensor::zeros(m.b_h.shape());
  m.w_ho = Tensor::zeros(m.w_ho.shape());
  m.b_o = Tensor::row({0.25, -0.75});
  Tensor fc = rnn_forecast(m, Tensor::row({5.0, 5.0}), 4);
  CHECK(fc.at(0, 0) == 5.0);  // row 0 is the seed state
  for (std::int64_t i = 1; i < 4; ++i) {
    CHECK(fc.at(i, 0) == 0.25);
    CHECK(fc.at(i, 1) == -0.75);
  }
}

TEST_CASE("a single rollout step equals one cell application") {
  RnnModel m = make_rnn(2, 3, 7);
  const Tensor x0 = Tensor::row({0.3, -0.6});
  Tensor fc = rnn_forecast(m, x0, 2);

  // Manual cell: h' = tanh(W_ih x + b_h) from h = 0, y = W_ho h' + b_o.
  std::vector<double> h(3, 0.0);
  for (std::int64_t i = 0; i < 3; ++i) {
    double acc = m.b_h[i];
    for (std::int64_t j = 0; j < 2; ++j) acc += m.w_ih.at(i, j) * x0[j];
    h[static_cast<std::size_t>(i)] = std::tanh(acc);
  }
  for (std::int64_t d = 0; d < 2; ++d) {
    double acc = m.b_o[d];
    for (std::int64_t i = 0; i < 3; ++i) {
      acc += m.w_ho.at(d, i) * h[static_cast<std::size_t>(i)];
    }
    CHECK(fc.at(1, d) == doctest::Approx(acc).epsilon(1e-14));
  }
}

TEST_CASE("rnn training fits a constant system") {
  Dataset data = constant_dataset(10, 10, 0.8);
  RnnHyper hyper;
  hyper.hidden = 8;
  hyper.batch = 5;
  hyper.max_epochs = 400;
  hyper.patience = 400;
  hyper.horizon = 10;
  hyper.lr = 5e-3;
  auto [model, log] = train_rnn(data, hyper);
  CHECK(best_val(log) < 1e-3);
}

TEST_CASE("bundles preserve the residual identity bit-exactly") {
  Dataset data = constant_dataset(3, 8, 1.5);
  SolverConfig solver;
  Predictor p = make_node(2, 6, 1, 11, solver);
  auto bundles = extract_forecast_bundles(p, data, 8);
  REQUIRE(bundles.size() == 3);
  for (const auto& b : bundles) {
    REQUIRE(b.truth.same_shape(b.forecast));
    REQUIRE(b.errors.same_shape(b.forecast));
    for (std::int64_t i = 0; i < b.truth.size(); ++i) {
      CHECK(b.forecast[i] + b.errors[i] == b.truth[i]);
    }
  }
}

TEST_CASE("a perfect predictor yields all-zero errors") {
  Dataset data = constant_dataset(2, 6, 2.0);
  Predictor p = zero_field_node(2);  // constant forecast == constant data
  auto bundles = extract_forecast_bundles(p, data, 6);
  for (const auto& b : bundles) {
    for (std::int64_t i = 0; i < b.errors.size(); ++i) CHECK(b.errors[i] == 0.0);
  }
}

TEST_CASE("bundle horizon clamps to the trajectory length") {
  Dataset data = constant_dataset(1, 5, 1.0);
  Predictor p = zero_field_node(2);
  auto bundles = extract_forecast_bundles(p, data, 50);
  CHECK(bundles[0].truth.dim(0) == 5);
  CHECK(bundles[0].times.size() == 5);
}

TEST_CASE("dlinear bundles cover the horizon rows of each window") {
  std::vector<double> flat;
  for (int i = 0; i < 20; ++i) flat.push_back(static_cast<double>(i));
  Tensor series({20, 1}, std::move(flat));
  Dataset windows;
  windows.trajectories = make_windows(series, 6, 3);

  Predictor p = make_dlinear(6, 3, 3, true, 1, 2);
  auto bundles = extract_forecast_bundles(p, windows, 3);
  REQUIRE(bundles.size() == windows.trajectories.size());
  CHECK(bundles[0].truth.dim(0) == 3);
  CHECK(bundles[0].times[0] == 6.0);  // window-relative offset of row L
  CHECK(bundles[0].truth.at(0, 0) == 6.0);

  Dataset bad = constant_dataset(1, 5, 1.0);
  CHECK_THROWS_AS(extract_forecast_bundles(p, bad, 3), ValidationError);
}

TEST_CASE("predictor checkpoints round-trip for all three kinds") {
  fs::path dir = fs::temp_directory_path() / "pcf_pred_ckpt";
  fs::create_directories(dir);
  SolverConfig solver;
  solver.method = SolverMethod::dopri5;
  solver.rtol = 1e-4;

  std::vector<Predictor> models;
  models.push_back(make_node(2, 6, 1, 3, solver));
  models.push_back(make_dlinear(5, 2, 3, false, 2, 4));
  models.push_back(make_rnn(2, 4, 5));

  for (const auto& p : models) {
    const fs::path file = dir / (predictor_kind(p) + ".json");
    save_predictor(file, p);
    Predictor back = load_predictor(file);
    CHECK(predictor_kind(back) == predictor_kind(p));
    if (predictor_kind(p) == "dlinear") {
      std::vector<double> flat(28, 0.5);
      Dataset w;
      w.trajectories = make_windows(Tensor({14, 2}, std::move(flat)), 5, 2);
      auto a = extract_forecast_bundles(p, w, 2);
      auto b = extract_forecast_bundles(back, w, 2);
      for (std::int64_t i = 0; i < a[0].forecast.size(); ++i) {
        CHECK(a[0].forecast[i] == b[0].forecast[i]);
      }
    } else {
      const Dataset data = constant_dataset(1, 7, 0.3);
      auto a = extract_forecast_bundles(p, data, 7);
      auto b = extract_forecast_bundles(back, data, 7);
      for (std::int64_t i = 0; i < a[0].forecast.size(); ++i) {
        CHECK(a[0].forecast[i] == b[0].forecast[i]);
      }
    }
  }

  std::ofstream(dir / "broken.json") << "{\"kind\": \"espresso\"}";
  CHECK_THROWS_AS(load_predictor(dir / "broken.json"), ValidationError);
  CHECK_THROWS_AS(load_predictor(dir / "missing.json"), ValidationError);
}
