#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>
#include <vector>

#include "pcf/corrector.hpp"
#include "pcf/dyn_systems.hpp"
#include "pcf/parallel.hpp"
#include "pcf/predictors.hpp"

using namespace pcf;

namespace {

struct SerialGuard {
  bool prev;
  explicit SerialGuard(bool v) : prev(par::serial_mode()) { par::set_serial(v); }
  ~SerialGuard() { par::set_serial(prev); }
};

Dataset constant_dataset(int n, int steps) {
  Dataset d;
  d.system = "constant";
  d.dt = 0.1;
  for (int i = 0; i < n; ++i) {
    Trajectory t;
    std::vector<double> flat;
    for (int s = 0; s < steps; ++s) {
      t.times.push_back(0.1 * s);
      flat.push_back(1.0 + 0.01 * i);
      flat.push_back(-1.0);
    }
    t.states = Tensor({steps, 2}, std::move(flat));
    d.trajectories.push_back(std::move(t));
  }
  return d;
}

std::vector<double> flat_states(const Dataset& d) {
  std::vector<double> v;
  for (const auto& t : d.trajectories) {
    for (std::int64_t i = 0; i < t.states.size(); ++i) v.push_back(t.states[i]);
  }
  return v;
}

std::vector<double> flat_mlp(const MlpParams& p) {
  std::vector<double> v;
  for (const auto& l : p.layers) {
    for (std::int64_t i = 0; i < l.weight.size(); ++i) v.push_back(l.weight[i]);
    for (std::int64_t i = 0; i < l.bias.size(); ++i) v.push_back(l.bias[i]);
  }
  return v;
}

}  // namespace

TEST_CASE("serial mode flag flips both code paths") {
  SerialGuard guard(false);
  par::set_serial(true);
  CHECK(par::serial_mode());
  CHECK(par::max_threads() == 1);
  par::set_serial(false);
  CHECK_FALSE(par::serial_mode());
}

TEST_CASE("parallel_for visits every index exactly once") {
  for (bool serial : {false, true}) {
    SerialGuard guard(serial);
    std::vector<int> hits(1000, 0);
    par::parallel_for(1000, [&](std::int64_t i) {
      hits[static_cast<std::size_t>(i)] += 1;
    });
    for (int h : hits) CHECK(h == 1);

    bool ran = false;
    par::parallel_for(0, [&](std::int64_t) { ran = true; });
    CHECK_FALSE(ran);
  }
}

TEST_CASE("exceptions thrown inside the loop reach the caller") {
  for (bool serial : {false, true}) {
    SerialGuard guard(serial);
    CHECK_THROWS_AS(par::parallel_for(64,
                                      [&](std::int64_t i) {
                                        if (i == 13) {
                                          throw ValidationError("boom");
                                        }
                                      }),
                    ValidationError);
  }
}

TEST_CASE("chunked reduction folds strictly in index order") {
  for (bool serial : {false, true}) {
    SerialGuard guard(serial);
    std::vector<std::int64_t> fold_order;
    par::chunked_map_reduce<std::int64_t>(
        50, 7, [](std::int64_t i) { return i; },
        [&](std::int64_t i, std::int64_t& r) {
          CHECK(i == r);
          fold_order.push_back(i);
        });
    REQUIRE(fold_order.size() == 50);
    for (std::int64_t i = 0; i < 50; ++i) CHECK(fold_order[static_cast<std::size_t>(i)] == i);
  }
}

TEST_CASE("floating-point reductions are identical in both modes") {
  auto run = [](bool serial) {
    SerialGuard guard(serial);
    double acc = 0.0;
    par::chunked_map_reduce<double>(
        10000, 8,
        [](std::int64_t i) {
          const double x = static_cast<double>(i) + 1.0;
          return 1.0 / (x * x * x);
        },
        [&](std::int64_t, double& r) { acc += r; });
    return acc;
  };
  const double parallel = run(false);
  const double serial = run(true);
  CHECK(parallel == serial);

  // Same bits as the plain sequential loop, because the fold runs in order.
  double plain = 0.0;
  for (std::int64_t i = 0; i < 10000; ++i) {
    const double x = static_cast<double>(i) + 1.0;
    plain += 1.0 / (x * x * x);
  }
  CHECK(parallel == plain);
}

TEST_CASE("dataset generation does not depend on the execution mode") {
  SystemSpec spec = system_preset(SystemName::fhn);
  spec.trajectories = 6;
  spec.timesteps = 40;

  std::vector<double> a, b;
  {
    SerialGuard guard(false);
    a = flat_states(generate_dataset(spec, 3));
  }
  {
    SerialGuard guard(true);
    b = flat_states(generate_dataset(spec, 3));
  }
  REQUIRE(a.size() == b.size());
  CHECK(a == b);
}

TEST_CASE("one predictor training step is bit-identical in both modes") {
  Dataset data = constant_dataset(8, 8);
  NodeHyper hyper;
  hyper.width = 6;
  hyper.depth = 1;
  hyper.batch = 8;
  hyper.horizon = 8;
  SolverConfig solver;

  auto run = [&](bool serial) {
    SerialGuard guard(serial);
    NodeModel m = make_node(2, hyper.width, hyper.depth, 7, solver);
    NodeTrainer trainer(m, data, hyper);
    const double loss = trainer.step();
    return std::tuple{flat_mlp(m.field), loss, trainer.take_nfe()};
  };
  const auto [wp, lp, np] = run(false);
  const auto [ws, ls, ns] = run(true);
  CHECK(wp == ws);
  CHECK(lp == ls);
  CHECK(np == ns);
}

TEST_CASE("one corrector training step is bit-identical in both modes") {
  Dataset data = constant_dataset(6, 8);
  SolverConfig solver;
  Predictor p = make_node(2, 6, 1, 3, solver);
  auto bundles = extract_forecast_bundles(p, data, 8);

  CorrectorConfig cfg;
  cfg.latent = 2;
  cfg.zeta_width = 6;
  cfg.zeta_depth = 1;
  cfg.field_width = 6;
  cfg.field_depth = 1;
  cfg.decoder_width = 6;
  cfg.decoder_depth = 1;
  RegularizationConfig reg;
  reg.kappa = 0.8;
  reg.eta = 2;
  CorrectorHyper hyper;
  hyper.batch = 6;
  hyper.train_horizon = 8;

  auto run = [&](bool serial) {
    SerialGuard guard(serial);
    CorrectorModel m = make_corrector(2, cfg, 19);
    CorrectorTrainer trainer(m, bundles, reg, hyper);
    const double loss = trainer.step();
    std::vector<double> w = flat_mlp(m.zeta);
    for (double v : flat_mlp(m.field)) w.push_back(v);
    for (double v : flat_mlp(m.decoder)) w.push_back(v);
    return std::pair{std::move(w), loss};
  };
  const auto [wp, lp] = run(false);
  const auto [ws, ls] = run(true);
  CHECK(wp == ws);
  CHECK(lp == ls);
}

TEST_CASE("rng streams are deterministic and decorrelated") {
  Rng a = Rng::stream(5, 1);
  Rng b = Rng::stream(5, 1);
  Rng c = Rng::stream(5, 2);
  bool all_equal = true;
  bool any_equal_c = false;
  for (int i = 0; i < 100; ++i) {
    const double va = a.uniform(0, 1);
    const double vb = b.uniform(0, 1);
    const double vc = c.uniform(0, 1);
    if (va != vb) all_equal = false;
    if (va == vc) any_equal_c = true;
  }
  CHECK(all_equal);
  CHECK_FALSE(any_equal_c);
}

TEST_CASE("shuffle produces a seed-stable permutation") {
  std::vector<std::size_t> v(100);
  std::iota(v.begin(), v.end(), 0);
  Rng rng = Rng::stream(9, 4);
  rng.shuffle(v);

  std::vector<std::size_t> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);

  std::vector<std::size_t> w(100);
  std::iota(w.begin(), w.end(), 0);
  Rng rng2 = Rng::stream(9, 4);
  rng2.shuffle(w);
  CHECK(v == w);

  std::vector<std::size_t> u(100);
  std::iota(u.begin(), u.end(), 0);
  Rng rng3 = Rng::stream(10, 4);
  rng3.shuffle(u);
  CHECK(v != u);
}
