#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "oracles.hpp"
#include "pcf/dyn_systems.hpp"
#include "pcf/rng.hpp"

using namespace pcf;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* tag) {
  fs::path p = fs::temp_directory_path() / (std::string("pcf_dynsys_") + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("vector fields at hand-checked states") {
  Tensor fhn = system_field(SystemName::fhn, Tensor::row({0.0, 0.0}));
  CHECK(fhn[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(fhn[1] == doctest::Approx(0.056).epsilon(1e-12));

  Tensor lor = system_field(SystemName::lorenz, Tensor::row({1.0, 1.0, 1.0}));
  CHECK(lor[0] == doctest::Approx(0.0));
  CHECK(lor[1] == doctest::Approx(26.0));
  CHECK(lor[2] == doctest::Approx(1.0 - 8.0 / 3.0).epsilon(1e-15));

  Tensor lv = system_field(SystemName::lotka_volterra, Tensor::row({10.0, 5.0}));
  CHECK(lv[0] == doctest::Approx(-9.0));
  CHECK(lv[1] == doctest::Approx(3.0));

  CHECK_THROWS_AS(system_field(SystemName::lorenz, Tensor::row({1.0, 2.0})),
                  ValidationError);
}

TEST_CASE("system presets carry the reference shapes") {
  SystemSpec fhn = system_preset(SystemName::fhn);
  CHECK(fhn.dim == 2);
  CHECK(fhn.dt == 0.5);
  CHECK(fhn.timesteps == 400);
  CHECK(fhn.trajectories == 350);

  SystemSpec lv = system_preset(SystemName::lotka_volterra);
  CHECK(lv.dt == 0.1);
  CHECK(lv.timesteps == 300);
  CHECK(lv.trajectories == 500);

  SystemSpec lor = system_preset(SystemName::lorenz);
  CHECK(lor.dim == 3);
  CHECK(lor.dt == 0.01);
  CHECK(lor.trajectories == 1000);

  SystemSpec gly = system_preset(SystemName::glycolytic);
  CHECK(gly.dim == 7);
  CHECK(gly.timesteps == 400);
  CHECK(gly.trajectories == 750);

  CHECK(system_preset(SystemName::linear2).dim == 2);
  CHECK(system_preset(SystemName::linear3).dim == 3);
  CHECK(system_preset(SystemName::linear4).dim == 4);
}

TEST_CASE("generated linear2 trajectories match the analytic oscillator") {
  SystemSpec spec = system_preset(SystemName::linear2);
  spec.trajectories = 3;
  spec.timesteps = 200;
  Dataset data = generate_dataset(spec, 5);
  for (const Trajectory& traj : data.trajectories) {
    oracle::Oscillator sol(traj.states.at(0, 0), traj.states.at(0, 1));
    double worst = 0.0;
    for (std::int64_t i = 0; i < traj.length(); ++i) {
      const double t = traj.times[static_cast<std::size_t>(i)];
      worst = std::max(worst, std::abs(traj.states.at(i, 0) - sol.z1(t)));
      worst = std::max(worst, std::abs(traj.states.at(i, 1) - sol.z2(t)));
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("generation is deterministic per seed and varies across seeds") {
  SystemSpec spec = system_preset(SystemName::fhn);
  spec.trajectories = 4;
  spec.timesteps = 30;
  Dataset a = generate_dataset(spec, 9);
  Dataset b = generate_dataset(spec, 9);
  Dataset c = generate_dataset(spec, 10);
  REQUIRE(a.trajectories.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    const Tensor& sa = a.trajectories[i].states;
    const Tensor& sb = b.trajectories[i].states;
    REQUIRE(sa.size() == sb.size());
    for (std::int64_t k = 0; k < sa.size(); ++k) CHECK(sa[k] == sb[k]);
  }
  CHECK(a.trajectories[0].states[0] != c.trajectories[0].states[0]);
}

TEST_CASE("initial conditions stay inside the box") {
  SystemSpec spec = system_preset(SystemName::fhn);
  spec.trajectories = 50;
  spec.timesteps = 2;
  Dataset data = generate_dataset(spec, 3);
  for (const auto& traj : data.trajectories) {
    for (int d = 0; d < 2; ++d) {
      const double v = traj.states.at(0, d);
      CHECK(v >= spec.ic_box[static_cast<std::size_t>(d)].first);
      CHECK(v <= spec.ic_box[static_cast<std::size_t>(d)].second);
    }
  }
}

TEST_CASE("generated trajectories satisfy the ODE residual on the oscillator") {
  SystemSpec spec = system_preset(SystemName::linear2);
  spec.trajectories = 1;
  spec.timesteps = 50;
  Dataset data = generate_dataset(spec, 1);
  const Trajectory& traj = data.trajectories[0];
  // Central difference vs the field: O(dt^2) with dt = 0.1.
  for (std::int64_t i = 1; i + 1 < traj.length(); ++i) {
    Tensor f = system_field(SystemName::linear2,
                            Tensor::row({traj.states.at(i, 0), traj.states.at(i, 1)}));
    for (int d = 0; d < 2; ++d) {
      const double fd = (traj.states.at(i + 1, d) - traj.states.at(i - 1, d)) /
                        (2.0 * spec.dt);
      CHECK(std::abs(fd - f[d]) < 0.01);
    }
  }
}

TEST_CASE("train/test split partitions the dataset deterministically") {
  SystemSpec spec = system_preset(SystemName::linear2);
  spec.trajectories = 10;
  spec.timesteps = 5;
  Dataset data = generate_dataset(spec, 2);
  auto [train, test] = split_train_test(data, 0.8, 7);
  CHECK(train.trajectories.size() == 8);
  CHECK(test.trajectories.size() == 2);
  CHECK(train.split == "train");
  CHECK(test.split == "test");

  auto [train2, test2] = split_train_test(data, 0.8, 7);
  CHECK(train2.trajectories[0].states[0] == train.trajectories[0].states[0]);

  // Union = original: match on the first state value as a fingerprint.
  std::multiset<double> seen, expect;
  for (const auto& t : data.trajectories) expect.insert(t.states[0]);
  for (const auto& t : train.trajectories) seen.insert(t.states[0]);
  for (const auto& t : test.trajectories) seen.insert(t.states[0]);
  CHECK(seen == expect);

  CHECK_THROWS_AS(split_train_test(Dataset{}, 0.8, 1), ValidationError);
}

TEST_CASE("subsample keeps the requested count including the anchor point") {
  SystemSpec spec = system_preset(SystemName::linear2);
  spec.trajectories = 1;
  spec.timesteps = 40;
  Dataset data = generate_dataset(spec, 4);
  const Trajectory& traj = data.trajectories[0];

  Rng rng(5);
  Trajectory half = subsample_irregular(traj, 0.5, rng);
  CHECK(half.length() == 20);
  CHECK(half.times[0] == traj.times[0]);
  for (std::size_t i = 1; i < half.times.size(); ++i) {
    CHECK(half.times[i] > half.times[i - 1]);
  }

  Rng rng2(5);
  Trajectory full = subsample_irregular(traj, 1.0, rng2);
  CHECK(full.length() == traj.length());

  // Different seeds give different subsets with overwhelming probability.
  Rng ra(1), rb(2);
  Trajectory sa = subsample_irregular(traj, 0.5, ra);
  Trajectory sb = subsample_irregular(traj, 0.5, rb);
  CHECK(sa.times != sb.times);

  Rng rng3(9);
  CHECK_THROWS_AS(subsample_irregular(traj, 0.01, rng3), ValidationError);
}

TEST_CASE("mask_features marks half the features and forward-fills") {
  Trajectory traj;
  traj.times = {0.0, 1.0, 2.0, 3.0};
  traj.states = Tensor({4, 2}, {1, 10, 2, 20, 3, 30, 4, 40});

  Rng none(1);
  Trajectory clean = mask_features(traj, 0.0, none);
  REQUIRE(clean.mask.has_value());
  for (auto m : *clean.mask) CHECK(m == 1);

  Rng all(2);
  Trajectory masked = mask_features(traj, 1.0, all);
  REQUIRE(masked.mask.has_value());
  for (std::int64_t t = 0; t < 4; ++t) {
    int dropped = 0;
    for (std::int64_t d = 0; d < 2; ++d) {
      if (!(*masked.mask)[static_cast<std::size_t>(t * 2 + d)]) ++dropped;
    }
    CHECK(dropped == 1);  // floor(D/2) of D=2
  }
  // Imputation: masked entries repeat the last observed value of the
  // feature, or 0 when masked at the very first point.
  for (std::int64_t d = 0; d < 2; ++d) {
    double last = 0.0;
    bool seen = false;
    for (std::int64_t t = 0; t < 4; ++t) {
      const bool observed = (*masked.mask)[static_cast<std::size_t>(t * 2 + d)];
      if (observed) {
        last = traj.states.at(t, d);
        seen = true;
        CHECK(masked.states.at(t, d) == traj.states.at(t, d));
      } else {
        CHECK(masked.states.at(t, d) == (seen ? last : 0.0));
      }
    }
  }

  Trajectory narrow;
  narrow.times = {0.0};
  narrow.states = Tensor({1, 1}, {1.0});
  Rng r(3);
  CHECK_THROWS_AS(mask_features(narrow, 0.5, r), ValidationError);
}

TEST_CASE("trajectory CSV round-trips bit-exactly") {
  fs::path dir = temp_dir("csv");
  Trajectory traj;
  traj.times = {0.0, 0.1, 0.30000000000000004};
  traj.states = Tensor({3, 2}, {1.0 / 3.0, -2.5e-17, 0.1, 1e300, -0.0, 42.0});
  traj.mask = std::vector<std::uint8_t>{1, 0, 1, 1, 0, 1};

  save_trajectory_csv(dir / "t.csv", traj);
  Trajectory back = load_trajectory_csv(dir / "t.csv");
  REQUIRE(back.length() == 3);
  REQUIRE(back.mask.has_value());
  for (std::size_t i = 0; i < 3; ++i) CHECK(back.times[i] == traj.times[i]);
  for (std::int64_t i = 0; i < traj.states.size(); ++i) {
    CHECK(back.states[i] == traj.states[i]);
  }
  CHECK(*back.mask == *traj.mask);
}

TEST_CASE("dataset save/load materializes the split") {
  fs::path dir = temp_dir("ds");
  SystemSpec spec = system_preset(SystemName::linear2);
  spec.trajectories = 5;
  spec.timesteps = 8;
  Dataset data = generate_dataset(spec, 6);
  save_dataset(dir, data, 0.8, 6);

  Dataset train = load_dataset(dir / "manifest.json", "train");
  Dataset test = load_dataset(dir / "manifest.json", "test");
  Dataset all = load_dataset(dir / "manifest.json", "all");
  CHECK(train.trajectories.size() == 4);
  CHECK(test.trajectories.size() == 1);
  CHECK(all.trajectories.size() == 5);
  CHECK(train.system == "linear2");
  CHECK(train.dt == spec.dt);

  CHECK_THROWS_AS(load_dataset(dir / "nope.json"), ValidationError);
}

TEST_CASE("format_double round-trips through parsing") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 1e300, 0.0, -7.25,
                   3.141592653589793}) {
    const std::string s = format_double(v);
    CHECK(std::stod(s) == v);
  }
}

TEST_CASE("make_windows slides with stride one and integer times") {
  std::vector<double> flat;
  for (int i = 0; i < 10; ++i) {
    flat.push_back(i);
    flat.push_back(10 * i);
  }
  Tensor series({10, 2}, std::move(flat));
  auto windows = make_windows(series, 4, 2);
  REQUIRE(windows.size() == 5);  // 10 - 4 - 2 + 1
  for (std::size_t w = 0; w < windows.size(); ++w) {
    REQUIRE(windows[w].length() == 6);
    CHECK(windows[w].times[0] == 0.0);  // window-relative offsets
    CHECK(windows[w].times[5] == 5.0);
    CHECK(windows[w].states.at(0, 0) == static_cast<double>(w));
    CHECK(windows[w].states.at(5, 1) == static_cast<double>(10 * (w + 5)));
  }
}

TEST_CASE("long-format CSV ingestion normalizes with train statistics") {
  fs::path dir = temp_dir("ltsf");
  {
    std::ofstream out(dir / "series.csv");
    out << "date,a,b\n";
    for (int i = 0; i < 30; ++i) {
      out << "2020-01-" << (i + 1) << "," << i << "," << (5.0 - 0.5 * i) << "\n";
    }
  }
  WindowDataset ds = load_csv_dataset(dir / "series.csv", 4, 2, 0.8);
  CHECK(ds.lookback == 4);
  CHECK(ds.horizon == 2);
  REQUIRE(ds.mean.size() == 2);

  // Train region = first 24 rows; feature "a" there is 0..23.
  CHECK(ds.mean[0] == doctest::Approx(11.5));
  CHECK(ds.train.trajectories.size() > 0);
  CHECK(ds.test.trajectories.size() > 0);

  // De-normalizing the first train window reproduces the raw series 0..5.
  const Trajectory& w0 = ds.train.trajectories[0];
  for (std::int64_t i = 0; i < w0.length(); ++i) {
    const double raw = w0.states.at(i, 0) * ds.std[0] + ds.mean[0];
    CHECK(raw == doctest::Approx(static_cast<double>(i)).epsilon(1e-9));
  }

  std::ofstream(dir / "bad.csv") << "date,a\n2020,abc\n";
  CHECK_THROWS_AS(load_csv_dataset(dir / "bad.csv", 2, 1, 0.8), ValidationError);
}

TEST_CASE("system names round-trip") {
  for (auto s : {SystemName::lorenz, SystemName::lotka_volterra, SystemName::fhn,
                 SystemName::glycolytic, SystemName::linear2, SystemName::linear3,
                 SystemName::linear4}) {
    CHECK(system_from_str(system_str(s)) == s);
  }
  CHECK_THROWS_AS(system_from_str("rossler"), ValidationError);
}
