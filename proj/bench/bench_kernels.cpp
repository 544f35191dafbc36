// Compares the OpenMP work-sharing paths against the serial reference on the
// three hot kernels: dataset generation, batched gradient accumulation, and
// MLP inference. The reductions are index-ordered, so both modes must produce
// bit-identical numbers; the harness checks that while timing them.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include "pcf/corrector.hpp"
#include "pcf/dyn_systems.hpp"
#include "pcf/parallel.hpp"
#include "pcf/predictors.hpp"

using namespace pcf;

namespace {

double seconds(std::chrono::steady_clock::time_point a,
               std::chrono::steady_clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

template <class F>
double timed(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return seconds(t0, std::chrono::steady_clock::now());
}

bool same(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

Dataset small_fhn(std::uint64_t seed) {
  SystemSpec spec = system_preset(SystemName::fhn);
  spec.trajectories = 48;
  spec.timesteps = 120;
  return generate_dataset(spec, seed);
}

void report(const char* name, double serial_s, double parallel_s, bool equal) {
  std::printf("%-24s serial %8.3fs  parallel %8.3fs  speedup %5.2fx  %s\n",
              name, serial_s, parallel_s,
              parallel_s > 0 ? serial_s / parallel_s : 0.0,
              equal ? "identical" : "MISMATCH");
}

}  // namespace

int main() {
  std::printf("threads available: %d\n\n", par::max_threads());

  {
    Dataset serial_out, parallel_out;
    par::set_serial(true);
    const double ts = timed([&] { serial_out = small_fhn(7); });
    par::set_serial(false);
    const double tp = timed([&] { parallel_out = small_fhn(7); });
    bool equal = serial_out.trajectories.size() == parallel_out.trajectories.size();
    for (std::size_t i = 0; equal && i < serial_out.trajectories.size(); ++i) {
      equal = same(serial_out.trajectories[i].states,
                   parallel_out.trajectories[i].states);
    }
    report("dataset generation", ts, tp, equal);
  }

  {
    Dataset data = small_fhn(7);
    NodeHyper hyper;
    hyper.width = 32;
    hyper.depth = 2;
    hyper.batch = 16;
    hyper.horizon = 20;
    hyper.seed = 3;
    auto run = [&]() {
      NodeModel model = make_node(2, hyper.width, hyper.depth, 3,
                                  hyper.solver);
      NodeTrainer trainer(model, data, hyper);
      for (int s = 0; s < 3; ++s) trainer.step();
      return model.field.layers.front().weight;
    };
    par::set_serial(true);
    Tensor ws;
    const double ts = timed([&] { ws = run(); });
    par::set_serial(false);
    Tensor wp;
    const double tp = timed([&] { wp = run(); });
    report("node gradient batches", ts, tp, same(ws, wp));
  }

  {
    Rng rng(11);
    MlpParams net = make_mlp(fc_sizes(8, 256, 4, 8), Activation::tanh_act, rng);
    std::vector<Tensor> inputs;
    for (int i = 0; i < 4096; ++i) {
      std::vector<double> v(8);
      for (auto& x : v) x = rng.uniform(-1.0, 1.0);
      inputs.emplace_back(std::vector<std::int64_t>{8}, std::move(v));
    }
    auto run = [&]() {
      std::vector<double> sums(inputs.size());
      par::parallel_for(static_cast<std::int64_t>(inputs.size()),
                        [&](std::int64_t i) {
        TracedMlp tn = const_mlp(net);
        Tensor out = mlp_apply(tn, constant(inputs[static_cast<std::size_t>(i)])).data;
        double acc = 0.0;
        for (std::int64_t k = 0; k < out.size(); ++k) acc += out[k];
        sums[static_cast<std::size_t>(i)] = acc;
      });
      double total = 0.0;
      for (double s : sums) total += s;
      return total;
    };
    par::set_serial(true);
    double rs = 0.0;
    const double ts = timed([&] { rs = run(); });
    par::set_serial(false);
    double rp = 0.0;
    const double tp = timed([&] { rp = run(); });
    report("mlp inference sweep", ts, tp, rs == rp);
  }

  par::set_serial(false);
  return 0;
}
