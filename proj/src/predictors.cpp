#include "pcf/predictors.hpp"

#include <algorithm>
#include <cmath>

#include "pcf/parallel.hpp"
#include "pcf/serialize.hpp"

namespace pcf {

using nlohmann::json;

namespace {

Tensor row_of(const Tensor& m, std::int64_t i) {
  const std::int64_t D = m.dim(1);
  std::vector<double> r(static_cast<std::size_t>(D));
  for (std::int64_t d = 0; d < D; ++d) r[static_cast<std::size_t>(d)] = m.at(i, d);
  return Tensor({D}, std::move(r));
}

// Indices used for one training pass: the first `horizon` points, optionally
// subsampled to a fraction with point 0 always kept.
std::vector<std::size_t> training_points(std::int64_t length, int horizon,
                                         double observed_fraction, Rng& rng) {
  const std::size_t K = static_cast<std::size_t>(
      std::min<std::int64_t>(length, std::max(2, horizon)));
  std::vector<std::size_t> sel;
  if (observed_fraction >= 1.0) {
    sel.resize(K);
    for (std::size_t i = 0; i < K; ++i) sel[i] = i;
    return sel;
  }
  const std::size_t keep = static_cast<std::size_t>(
      std::ceil(observed_fraction * static_cast<double>(K)));
  require(keep >= 2, "training: observed_fraction keeps fewer than 2 points");
  auto rest = rng.sample_without_replacement(K - 1, keep - 1);
  sel.push_back(0);
  for (auto r : rest) sel.push_back(r + 1);
  return sel;
}

// Mean squared error over the selected points (skipping position 0, which the
// forecast matches by construction) against the trajectory rows; when a mask
// is present only observed entries contribute and the mean runs over them.
Value selected_mse(const std::vector<Value>& preds, const Trajectory& traj,
                   const std::vector<std::size_t>& sel) {
  const std::int64_t D = traj.dim();
  Value total = constant(Tensor::scalar(0.0));
  double count = 0.0;
  for (std::size_t j = 1; j < sel.size(); ++j) {
    const std::size_t t = sel[j];
    Value diff = sub(preds[j], constant(row_of(traj.states, static_cast<std::int64_t>(t))));
    if (traj.mask) {
      std::vector<double> w(static_cast<std::size_t>(D));
      for (std::int64_t d = 0; d < D; ++d) {
        w[static_cast<std::size_t>(d)] =
            (*traj.mask)[t * static_cast<std::size_t>(D) + static_cast<std::size_t>(d)] ? 1.0 : 0.0;
        count += w[static_cast<std::size_t>(d)];
      }
      diff = mul(diff, constant(Tensor({D}, std::move(w))));
    } else {
      count += static_cast<double>(D);
    }
    total = add(total, sum_all(mul(diff, diff)));
  }
  require(count > 0.0, "training: no observed entries in selection");
  return scale(total, 1.0 / count);
}

struct MemberResult {
  std::vector<Tensor> grads;
  double loss = 0.0;
  long nfe = 0;
};

constexpr std::int64_t kGradChunk = 8;  // members in flight during reduction

}  // namespace

NodeModel make_node(int dim, int width, int depth, std::uint64_t seed,
                    const SolverConfig& solver) {
  require(dim >= 1, "node: dimension must be positive");
  Rng rng = Rng::stream(seed, 0x0de1u);
  NodeModel m;
  m.field = make_mlp(fc_sizes(dim, width, depth, dim), Activation::tanh_act, rng);
  m.solver = solver;
  return m;
}

Tensor node_forecast(const NodeModel& model, const Tensor& x0,
                     std::span<const double> times, long* nfe) {
  require(x0.rank() == 1, "node_forecast: x0 must be a vector");
  require(x0.dim(0) == model.field.in_dim(), "node_forecast: dimension mismatch");
  TracedMlp f = const_mlp(model.field);
  const FieldFn fn = [&f](double, const Value& y) { return mlp_apply(f, y); };
  SolveResult sol = integrate_adaptive(tableau(model.solver.method),
                                       model.solver.controller(), fn,
                                       constant(x0), times);
  if (nfe) *nfe += sol.nfe;
  std::vector<double> flat;
  flat.reserve(times.size() * static_cast<std::size_t>(x0.dim(0)));
  for (const auto& st : sol.states) {
    const auto sp = st.data.span();
    flat.insert(flat.end(), sp.begin(), sp.end());
  }
  return Tensor({static_cast<std::int64_t>(times.size()), x0.dim(0)},
                std::move(flat));
}

NodeTrainer::NodeTrainer(NodeModel& model, const Dataset& train,
                         const NodeHyper& hyper)
    : model_(model), data_(train), hyper_(hyper) {
  require(!data_.trajectories.empty(), "node trainer: empty dataset");
  require(hyper_.batch >= 1, "node trainer: batch must be >= 1");
  auto ptrs = mlp_param_ptrs(model_.field);
  AdamConfig ac;
  ac.lr = hyper_.lr;
  adam_ = make_adam_state(ptrs, ac);
  reshuffle();
}

void NodeTrainer::reshuffle() {
  order_.resize(data_.trajectories.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  Rng rng = Rng::stream(hyper_.seed, 0xbadc0de, epoch_);
  rng.shuffle(order_);
  cursor_ = 0;
}

int NodeTrainer::steps_per_epoch() const {
  const auto n = data_.trajectories.size();
  return static_cast<int>((n + static_cast<std::size_t>(hyper_.batch) - 1) /
                          static_cast<std::size_t>(hyper_.batch));
}

double NodeTrainer::step() {
  const std::size_t n = data_.trajectories.size();
  if (cursor_ >= n) {
    ++epoch_;
    reshuffle();
  }
  const std::size_t lo = cursor_;
  const std::size_t hi = std::min(n, lo + static_cast<std::size_t>(hyper_.batch));
  cursor_ = hi;

  auto ptrs = mlp_param_ptrs(model_.field);
  GradAccum acc;
  acc.init(ptrs);
  const auto& tb = tableau(model_.solver.method);
  const StepController ctrl = model_.solver.controller();

  par::chunked_map_reduce<MemberResult>(
      static_cast<std::int64_t>(hi - lo), kGradChunk,
      [&](std::int64_t j) -> MemberResult {
        const std::size_t ti = order_[lo + static_cast<std::size_t>(j)];
        const Trajectory& traj = data_.trajectories[ti];
        Rng rng = Rng::stream(hyper_.seed, 0xA0000 + epoch_, ti);
        const auto sel = training_points(traj.length(), hyper_.horizon,
                                         hyper_.observed_fraction, rng);
        std::vector<double> times(sel.size());
        for (std::size_t k = 0; k < sel.size(); ++k) times[k] = traj.times[sel[k]];

        Tape tape;
        Tape::Scope scope(tape);
        TracedMlp f = watch_mlp(model_.field);
        const FieldFn fn = [&f](double, const Value& y) { return mlp_apply(f, y); };
        SolveResult sol = integrate_adaptive(
            tb, ctrl, fn, constant(row_of(traj.states, 0)), times);
        Value loss = selected_mse(sol.states, traj, sel);
        GradMap g = tape.gradients(loss);
        return MemberResult{mlp_grads(g, f), loss.scalar(), sol.nfe};
      },
      [&](std::int64_t, MemberResult& r) { acc.fold(r.grads, r.loss, r.nfe); });

  adam_step(ptrs, acc.means(ptrs), adam_);
  nfe_ += acc.nfe;
  return acc.mean_loss();
}

namespace {

// Plain validation loss: full-horizon forecast vs observations.
double node_val_loss(const NodeModel& model, const Dataset& val, int horizon,
                     long* nfe) {
  if (val.trajectories.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (const auto& traj : val.trajectories) {
    const std::size_t K = static_cast<std::size_t>(
        std::min<std::int64_t>(traj.length(), std::max(2, horizon)));
    std::vector<double> times(traj.times.begin(),
                              traj.times.begin() + static_cast<std::ptrdiff_t>(K));
    Tensor fc = node_forecast(model, row_of(traj.states, 0), times, nfe);
    double acc = 0.0;
    for (std::size_t t = 1; t < K; ++t) {
      for (std::int64_t d = 0; d < traj.dim(); ++d) {
        const double diff = fc.at(static_cast<std::int64_t>(t), d) -
                            traj.states.at(static_cast<std::int64_t>(t), d);
        acc += diff * diff;
      }
    }
    total += acc / static_cast<double>((K - 1) * static_cast<std::size_t>(traj.dim()));
  }
  return total / static_cast<double>(val.trajectories.size());
}

std::pair<Dataset, Dataset> carve_val(const Dataset& data, double val_fraction,
                                      std::uint64_t seed) {
  Dataset fit = data, val;
  val.system = data.system;
  val.dt = data.dt;
  val.split = "val";
  const std::size_t n = data.trajectories.size();
  const std::size_t n_val =
      static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(n)));
  if (n_val == 0 || n_val >= n) return {fit, val};
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng = Rng::stream(seed, 0x7a11u);
  rng.shuffle(idx);
  fit.trajectories.clear();
  for (std::size_t i = 0; i < n; ++i) {
    (i < n - n_val ? fit : val).trajectories.push_back(data.trajectories[idx[i]]);
  }
  return {fit, val};
}

}  // namespace

std::pair<NodeModel, TrainLog> train_node(const Dataset& train,
                                          const NodeHyper& hyper) {
  require(!train.trajectories.empty(), "train_node: empty dataset");
  const int dim = static_cast<int>(train.trajectories.front().dim());
  NodeModel model = make_node(dim, hyper.width, hyper.depth, hyper.seed,
                              hyper.solver);
  auto [fit, val] = carve_val(train, hyper.val_fraction, hyper.seed);
  NodeTrainer trainer(model, fit, hyper);
  EarlyStopper stopper(hyper.patience);
  MlpParams best = model.field;
  TrainLog log;

  for (int epoch = 0; epoch < hyper.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    double loss_sum = 0.0;
    const int steps = trainer.steps_per_epoch();
    for (int s = 0; s < steps; ++s) loss_sum += trainer.step();
    long nfe = trainer.take_nfe();
    const double vloss = val.trajectories.empty()
                             ? loss_sum / steps
                             : node_val_loss(model, val, hyper.horizon, &nfe);
    const auto t1 = std::chrono::steady_clock::now();
    log.train_loss.push_back(loss_sum / steps);
    log.val_loss.push_back(vloss);
    log.nfe.push_back(nfe);
    log.wall_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    log.epochs_run = epoch + 1;
    if (stopper.observe(vloss)) best = model.field;
    if (stopper.should_stop()) break;
  }
  model.field = best;
  log.best_epoch = stopper.best_epoch();
  return {std::move(model), std::move(log)};
}

// --- DLinear -----------------------------------------------------------------

DLinearModel make_dlinear(std::int64_t lookback, std::int64_t horizon,
                          int kernel, bool channel_shared, std::int64_t dim,
                          std::uint64_t seed) {
  require(lookback >= 1 && horizon >= 1, "dlinear: bad lookback/horizon");
  require(kernel >= 1 && kernel % 2 == 1, "dlinear: kernel must be odd");
  require(dim >= 1, "dlinear: bad dimension");
  DLinearModel m;
  m.lookback = lookback;
  m.horizon = horizon;
  m.kernel = kernel;
  m.channel_shared = channel_shared;
  Rng rng = Rng::stream(seed, 0xd11u);
  const double bound = std::sqrt(1.0 / static_cast<double>(lookback));
  const std::int64_t n_maps = channel_shared ? 1 : dim;
  auto fresh = [&]() {
    std::vector<double> w(static_cast<std::size_t>(horizon * lookback));
    for (auto& x : w) x = rng.uniform(-bound, bound);
    std::vector<double> b(static_cast<std::size_t>(horizon));
    for (auto& x : b) x = rng.uniform(-bound, bound);
    return LinearMap{Tensor({horizon, lookback}, std::move(w)),
                     Tensor({horizon}, std::move(b))};
  };
  for (std::int64_t k = 0; k < n_maps; ++k) m.trend.push_back(fresh());
  for (std::int64_t k = 0; k < n_maps; ++k) m.seasonal.push_back(fresh());
  return m;
}

std::pair<Tensor, Tensor> decompose_window(const Tensor& window, int kernel) {
  require(window.rank() == 2, "decompose: window must be [L, D]");
  require(kernel >= 1 && kernel % 2 == 1, "decompose: kernel must be odd");
  const std::int64_t L = window.dim(0), D = window.dim(1);
  const std::int64_t pad = (kernel - 1) / 2;
  std::vector<double> trend(static_cast<std::size_t>(L * D));
  for (std::int64_t d = 0; d < D; ++d) {
    for (std::int64_t t = 0; t < L; ++t) {
      double acc = 0.0;
      for (std::int64_t k = -pad; k <= pad; ++k) {
        const std::int64_t idx = std::clamp<std::int64_t>(t + k, 0, L - 1);
        acc += window.at(idx, d);
      }
      trend[static_cast<std::size_t>(t * D + d)] = acc / static_cast<double>(kernel);
    }
  }
  Tensor trend_t({L, D}, std::move(trend));
  std::vector<double> seasonal(static_cast<std::size_t>(L * D));
  for (std::int64_t i = 0; i < L * D; ++i) {
    seasonal[static_cast<std::size_t>(i)] = window[i] - trend_t[i];
  }
  return {std::move(trend_t), Tensor({L, D}, std::move(seasonal))};
}

namespace {

Tensor column_of(const Tensor& m, std::int64_t d) {
  const std::int64_t T = m.dim(0);
  std::vector<double> c(static_cast<std::size_t>(T));
  for (std::int64_t t = 0; t < T; ++t) c[static_cast<std::size_t>(t)] = m.at(t, d);
  return Tensor({T}, std::move(c));
}

struct TracedDLinear {
  std::vector<std::pair<Value, Value>> trend, seasonal;
};

TracedDLinear watch_dlinear(const DLinearModel& m) {
  TracedDLinear t;
  for (const auto& lm : m.trend) t.trend.emplace_back(watch(lm.weight), watch(lm.bias));
  for (const auto& lm : m.seasonal) t.seasonal.emplace_back(watch(lm.weight), watch(lm.bias));
  return t;
}

std::vector<Tensor*> dlinear_param_ptrs(DLinearModel& m) {
  std::vector<Tensor*> out;
  for (auto& lm : m.trend) {
    out.push_back(&lm.weight);
    out.push_back(&lm.bias);
  }
  for (auto& lm : m.seasonal) {
    out.push_back(&lm.weight);
    out.push_back(&lm.bias);
  }
  return out;
}

std::vector<Tensor> dlinear_grads(const GradMap& g, const TracedDLinear& t) {
  std::vector<Tensor> out;
  for (const auto& lm : t.trend) {
    out.push_back(g.at(lm.first));
    out.push_back(g.at(lm.second));
  }
  for (const auto& lm : t.seasonal) {
    out.push_back(g.at(lm.first));
    out.push_back(g.at(lm.second));
  }
  return out;
}

// Per-channel branch sums; shared models reuse map 0 for every channel.
Value dlinear_channel(const TracedDLinear& t, bool shared, std::int64_t d,
                      const Tensor& trend_col, const Tensor& seas_col) {
  const std::size_t k = shared ? 0 : static_cast<std::size_t>(d);
  Value th = add(matvec(t.trend[k].first, constant(trend_col)), t.trend[k].second);
  Value sh = add(matvec(t.seasonal[k].first, constant(seas_col)), t.seasonal[k].second);
  return add(th, sh);
}

}  // namespace

Tensor dlinear_forecast(const DLinearModel& model, const Tensor& window) {
  require(window.rank() == 2 && window.dim(0) == model.lookback,
          "dlinear_forecast: window must be [lookback, D]");
  const std::int64_t D = window.dim(1);
  if (!model.channel_shared) {
    require(static_cast<std::size_t>(D) == model.trend.size(),
            "dlinear_forecast: channel count mismatch");
  }
  auto [trend, seasonal] = decompose_window(window, model.kernel);
  const std::int64_t H = model.horizon;
  std::vector<double> out(static_cast<std::size_t>(H * D));
  for (std::int64_t d = 0; d < D; ++d) {
    const std::size_t k = model.channel_shared ? 0 : static_cast<std::size_t>(d);
    const Tensor tc = column_of(trend, d), sc = column_of(seasonal, d);
    const auto& tm = model.trend[k];
    const auto& sm = model.seasonal[k];
    for (std::int64_t h = 0; h < H; ++h) {
      double acc = tm.bias[h] + sm.bias[h];
      for (std::int64_t l = 0; l < model.lookback; ++l) {
        acc += tm.weight.at(h, l) * tc[l] + sm.weight.at(h, l) * sc[l];
      }
      out[static_cast<std::size_t>(h * D + d)] = acc;
    }
  }
  Tensor res({H, D}, std::move(out));
  ensure_finite(res, "dlinear_forecast");
  return res;
}

std::pair<DLinearModel, TrainLog> train_dlinear(const Dataset& windows,
                                                std::int64_t lookback,
                                                std::int64_t horizon,
                                                const DLinearHyper& hyper) {
  require(!windows.trajectories.empty(), "train_dlinear: no windows");
  const std::int64_t D = windows.trajectories.front().dim();
  for (const auto& w : windows.trajectories) {
    require(w.length() == lookback + horizon,
            "train_dlinear: window length must be lookback+horizon");
  }
  DLinearModel model = make_dlinear(lookback, horizon, hyper.kernel,
                                    hyper.channel_shared, D, hyper.seed);
  auto [fit, val] = carve_val(windows, hyper.val_fraction, hyper.seed);

  auto ptrs = dlinear_param_ptrs(model);
  AdamConfig ac;
  ac.lr = hyper.lr;
  AdamState adam = make_adam_state(ptrs, ac);

  auto window_loss = [&](const DLinearModel& m, const Trajectory& w) {
    Tensor in({lookback, D}, std::vector<double>(
        w.states.data(), w.states.data() + lookback * D));
    Tensor fc = dlinear_forecast(m, in);
    double acc = 0.0;
    for (std::int64_t h = 0; h < horizon; ++h) {
      for (std::int64_t d = 0; d < D; ++d) {
        const double diff = fc.at(h, d) - w.states.at(lookback + h, d);
        acc += diff * diff;
      }
    }
    return acc / static_cast<double>(horizon * D);
  };

  EarlyStopper stopper(hyper.patience);
  DLinearModel best = model;
  TrainLog log;
  std::vector<std::size_t> order(fit.trajectories.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < hyper.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng shuffle_rng = Rng::stream(hyper.seed, 0xd15u, static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    int steps = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += static_cast<std::size_t>(hyper.batch)) {
      const std::size_t hi = std::min(order.size(), lo + static_cast<std::size_t>(hyper.batch));
      GradAccum acc;
      acc.init(ptrs);
      par::chunked_map_reduce<MemberResult>(
          static_cast<std::int64_t>(hi - lo), kGradChunk,
          [&](std::int64_t j) -> MemberResult {
            const Trajectory& w = fit.trajectories[order[lo + static_cast<std::size_t>(j)]];
            Tensor in({lookback, D}, std::vector<double>(
                w.states.data(), w.states.data() + lookback * D));
            auto [trend, seasonal] = decompose_window(in, model.kernel);
            Tape tape;
            Tape::Scope scope(tape);
            TracedDLinear tm = watch_dlinear(model);
            Value total = constant(Tensor::scalar(0.0));
            for (std::int64_t d = 0; d < D; ++d) {
              Value pred = dlinear_channel(tm, model.channel_shared, d,
                                           column_of(trend, d),
                                           column_of(seasonal, d));
              std::vector<double> target(static_cast<std::size_t>(horizon));
              for (std::int64_t h = 0; h < horizon; ++h) {
                target[static_cast<std::size_t>(h)] = w.states.at(lookback + h, d);
              }
              Value diff = sub(pred, constant(Tensor({horizon}, std::move(target))));
              total = add(total, sum_all(mul(diff, diff)));
            }
            Value loss = scale(total, 1.0 / static_cast<double>(horizon * D));
            GradMap g = tape.gradients(loss);
            return MemberResult{dlinear_grads(g, tm), loss.scalar(), 0};
          },
          [&](std::int64_t, MemberResult& r) { acc.fold(r.grads, r.loss, r.nfe); });
      adam_step(ptrs, acc.means(ptrs), adam);
      loss_sum += acc.mean_loss();
      ++steps;
    }
    double vloss;
    if (val.trajectories.empty()) {
      vloss = loss_sum / steps;
    } else {
      vloss = 0.0;
      for (const auto& w : val.trajectories) vloss += window_loss(model, w);
      vloss /= static_cast<double>(val.trajectories.size());
    }
    const auto t1 = std::chrono::steady_clock::now();
    log.train_loss.push_back(loss_sum / steps);
    log.val_loss.push_back(vloss);
    log.nfe.push_back(0);
    log.wall_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    log.epochs_run = epoch + 1;
    if (stopper.observe(vloss)) best = model;
    if (stopper.should_stop()) break;
  }
  model = best;
  log.best_epoch = stopper.best_epoch();
  return {std::move(model), std::move(log)};
}

// --- RNN ---------------------------------------------------------------------

RnnModel make_rnn(int dim, int hidden, std::uint64_t seed) {
  require(dim >= 1 && hidden >= 1, "rnn: bad sizes");
  Rng rng = Rng::stream(seed, 0x4aa4u);
  const double bound = std::sqrt(1.0 / static_cast<double>(hidden));
  auto fill = [&](std::vector<std::int64_t> shape) {
    std::int64_t total = 1;
    for (auto s : shape) total *= s;
    std::vector<double> v(static_cast<std::size_t>(total));
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return Tensor(std::move(shape), std::move(v));
  };
  RnnModel m;
  m.hidden = hidden;
  m.w_ih = fill({hidden, dim});
  m.w_hh = fill({hidden, hidden});
  m.b_h = fill({hidden});
  m.w_ho = fill({dim, hidden});
  m.b_o = fill({dim});
  return m;
}

Tensor rnn_forecast(const RnnModel& model, const Tensor& x0,
                    std::int64_t steps) {
  require(x0.rank() == 1 && x0.dim(0) == model.w_ih.dim(1),
          "rnn_forecast: dimension mismatch");
  require(steps >= 1, "rnn_forecast: steps must be >= 1");
  const std::int64_t D = x0.dim(0);
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(steps * D));
  Value h = constant(Tensor::zeros({model.hidden}));
  Value x = constant(x0);
  const auto sp0 = x0.span();
  flat.insert(flat.end(), sp0.begin(), sp0.end());
  for (std::int64_t s = 1; s < steps; ++s) {
    h = tanh_v(add(add(matvec(constant(model.w_ih), x),
                       matvec(constant(model.w_hh), h)),
                   constant(model.b_h)));
    x = add(matvec(constant(model.w_ho), h), constant(model.b_o));
    const auto sp = x.data.span();
    flat.insert(flat.end(), sp.begin(), sp.end());
  }
  return Tensor({steps, D}, std::move(flat));
}

namespace {

struct TracedRnn {
  Value w_ih, w_hh, b_h, w_ho, b_o;
};

std::vector<Tensor*> rnn_param_ptrs(RnnModel& m) {
  return {&m.w_ih, &m.w_hh, &m.b_h, &m.w_ho, &m.b_o};
}

}  // namespace

std::pair<RnnModel, TrainLog> train_rnn(const Dataset& train,
                                        const RnnHyper& hyper) {
  require(!train.trajectories.empty(), "train_rnn: empty dataset");
  const std::int64_t D = train.trajectories.front().dim();
  RnnModel model = make_rnn(static_cast<int>(D), hyper.hidden, hyper.seed);
  auto [fit, val] = carve_val(train, hyper.val_fraction, hyper.seed);

  auto ptrs = rnn_param_ptrs(model);
  AdamConfig ac;
  ac.lr = hyper.lr;
  AdamState adam = make_adam_state(ptrs, ac);

  // Free-running validation error over the horizon.
  auto val_loss_fn = [&](const RnnModel& m) {
    double total = 0.0;
    for (const auto& traj : val.trajectories) {
      const std::int64_t K = std::min<std::int64_t>(traj.length(), hyper.horizon);
      Tensor fc = rnn_forecast(m, row_of(traj.states, 0), K);
      double acc = 0.0;
      for (std::int64_t t = 1; t < K; ++t) {
        for (std::int64_t d = 0; d < D; ++d) {
          const double diff = fc.at(t, d) - traj.states.at(t, d);
          acc += diff * diff;
        }
      }
      total += acc / static_cast<double>((K - 1) * D);
    }
    return total / static_cast<double>(val.trajectories.size());
  };

  EarlyStopper stopper(hyper.patience);
  RnnModel best = model;
  TrainLog log;
  std::vector<std::size_t> order(fit.trajectories.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < hyper.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng shuffle_rng = Rng::stream(hyper.seed, 0x4115u, static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    int steps = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += static_cast<std::size_t>(hyper.batch)) {
      const std::size_t hi = std::min(order.size(), lo + static_cast<std::size_t>(hyper.batch));
      GradAccum acc;
      acc.init(ptrs);
      par::chunked_map_reduce<MemberResult>(
          static_cast<std::int64_t>(hi - lo), kGradChunk,
          [&](std::int64_t j) -> MemberResult {
            const Trajectory& traj = fit.trajectories[order[lo + static_cast<std::size_t>(j)]];
            const std::int64_t K = std::min<std::int64_t>(traj.length(), hyper.horizon);
            Tape tape;
            Tape::Scope scope(tape);
            TracedRnn tm{watch(model.w_ih), watch(model.w_hh), watch(model.b_h),
                         watch(model.w_ho), watch(model.b_o)};
            Value h = constant(Tensor::zeros({model.hidden}));
            Value total = constant(Tensor::scalar(0.0));
            // Teacher forcing: the observed state is the input at every step.
            for (std::int64_t t = 0; t + 1 < K; ++t) {
              Value x = constant(row_of(traj.states, t));
              h = tanh_v(add(add(matvec(tm.w_ih, x), matvec(tm.w_hh, h)), tm.b_h));
              Value pred = add(matvec(tm.w_ho, h), tm.b_o);
              Value diff = sub(pred, constant(row_of(traj.states, t + 1)));
              total = add(total, sum_all(mul(diff, diff)));
            }
            Value loss = scale(total, 1.0 / static_cast<double>((K - 1) * D));
            GradMap g = tape.gradients(loss);
            std::vector<Tensor> grads = {g.at(tm.w_ih), g.at(tm.w_hh),
                                         g.at(tm.b_h), g.at(tm.w_ho),
                                         g.at(tm.b_o)};
            return MemberResult{std::move(grads), loss.scalar(), 0};
          },
          [&](std::int64_t, MemberResult& r) { acc.fold(r.grads, r.loss, r.nfe); });
      adam_step(ptrs, acc.means(ptrs), adam);
      loss_sum += acc.mean_loss();
      ++steps;
    }
    const double vloss = val.trajectories.empty() ? loss_sum / steps
                                                  : val_loss_fn(model);
    const auto t1 = std::chrono::steady_clock::now();
    log.train_loss.push_back(loss_sum / steps);
    log.val_loss.push_back(vloss);
    log.nfe.push_back(0);
    log.wall_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    log.epochs_run = epoch + 1;
    if (stopper.observe(vloss)) best = model;
    if (stopper.should_stop()) break;
  }
  model = best;
  log.best_epoch = stopper.best_epoch();
  return {std::move(model), std::move(log)};
}

// --- bundles -------------------------------------------------------------------

ForecastBundle make_bundle(std::vector<double> times, const Tensor& truth,
                           const Tensor& forecast) {
  require(truth.same_shape(forecast), "bundle: truth/forecast shape mismatch");
  require(truth.rank() == 2, "bundle: expected [T, D]");
  require(static_cast<std::size_t>(truth.dim(0)) == times.size(),
          "bundle: times length mismatch");
  const std::int64_t n = truth.size();
  std::vector<double> err(static_cast<std::size_t>(n));
  std::vector<double> snap(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    err[static_cast<std::size_t>(i)] = truth[i] - forecast[i];
    snap[static_cast<std::size_t>(i)] = forecast[i] + err[static_cast<std::size_t>(i)];
  }
  ForecastBundle b;
  b.times = std::move(times);
  b.forecast = forecast;
  b.errors = Tensor(truth.shape(), std::move(err));
  b.truth = Tensor(truth.shape(), std::move(snap));
  ensure_finite(b.errors, "bundle errors");
  return b;
}

std::string predictor_kind(const Predictor& p) {
  if (std::holds_alternative<NodeModel>(p)) return "node";
  if (std::holds_alternative<DLinearModel>(p)) return "dlinear";
  return "rnn";
}

std::vector<ForecastBundle> extract_forecast_bundles(const Predictor& p,
                                                     const Dataset& data,
                                                     int horizon) {
  require(!data.trajectories.empty(), "bundles: empty dataset");
  std::vector<ForecastBundle> out(data.trajectories.size());
  par::parallel_for(static_cast<std::int64_t>(data.trajectories.size()),
                    [&](std::int64_t i) {
    const Trajectory& traj = data.trajectories[static_cast<std::size_t>(i)];
    if (const auto* node = std::get_if<NodeModel>(&p)) {
      const std::int64_t K = std::min<std::int64_t>(traj.length(), horizon);
      require(K >= 2, "bundles: horizon too short");
      std::vector<double> times(traj.times.begin(),
                                traj.times.begin() + static_cast<std::ptrdiff_t>(K));
      Tensor fc = node_forecast(*node, row_of(traj.states, 0), times);
      const std::int64_t D = traj.dim();
      Tensor truth({K, D}, std::vector<double>(
          traj.states.data(), traj.states.data() + K * D));
      out[static_cast<std::size_t>(i)] = make_bundle(std::move(times), truth, fc);
    } else if (const auto* dl = std::get_if<DLinearModel>(&p)) {
      const std::int64_t L = dl->lookback, H = dl->horizon;
      require(traj.length() == L + H,
              "bundles: dlinear needs lookback+horizon windows");
      const std::int64_t D = traj.dim();
      Tensor window({L, D}, std::vector<double>(
          traj.states.data(), traj.states.data() + L * D));
      Tensor fc = dlinear_forecast(*dl, window);
      Tensor truth({H, D}, std::vector<double>(
          traj.states.data() + L * D, traj.states.data() + (L + H) * D));
      std::vector<double> times(traj.times.begin() + static_cast<std::ptrdiff_t>(L),
                                traj.times.end());
      out[static_cast<std::size_t>(i)] = make_bundle(std::move(times), truth, fc);
    } else {
      const auto& rnn = std::get<RnnModel>(p);
      const std::int64_t K = std::min<std::int64_t>(traj.length(), horizon);
      require(K >= 2, "bundles: horizon too short");
      Tensor fc = rnn_forecast(rnn, row_of(traj.states, 0), K);
      const std::int64_t D = traj.dim();
      Tensor truth({K, D}, std::vector<double>(
          traj.states.data(), traj.states.data() + K * D));
      std::vector<double> times(traj.times.begin(),
                                traj.times.begin() + static_cast<std::ptrdiff_t>(K));
      out[static_cast<std::size_t>(i)] = make_bundle(std::move(times), truth, fc);
    }
  });
  return out;
}

// --- checkpoints -----------------------------------------------------------------

namespace {

json linear_map_to_json(const LinearMap& m) {
  return {{"weight", m.weight.to_vector()}, {"bias", m.bias.to_vector()}};
}

LinearMap linear_map_from_json(const json& j, std::int64_t horizon,
                               std::int64_t lookback) {
  auto w = j.at("weight").get<std::vector<double>>();
  auto b = j.at("bias").get<std::vector<double>>();
  require(static_cast<std::int64_t>(w.size()) == horizon * lookback,
          "checkpoint: linear map weight size mismatch");
  require(static_cast<std::int64_t>(b.size()) == horizon,
          "checkpoint: linear map bias size mismatch");
  return LinearMap{Tensor({horizon, lookback}, std::move(w)),
                   Tensor({horizon}, std::move(b))};
}

}  // namespace

void save_predictor(const std::filesystem::path& file, const Predictor& p) {
  json j;
  j["kind"] = predictor_kind(p);
  if (const auto* node = std::get_if<NodeModel>(&p)) {
    j["solver"] = solver_to_json(node->solver);
    j["field"] = mlp_to_json(node->field);
  } else if (const auto* dl = std::get_if<DLinearModel>(&p)) {
    j["lookback"] = dl->lookback;
    j["horizon"] = dl->horizon;
    j["kernel"] = dl->kernel;
    j["channel_shared"] = dl->channel_shared;
    json t = json::array(), s = json::array();
    for (const auto& m : dl->trend) t.push_back(linear_map_to_json(m));
    for (const auto& m : dl->seasonal) s.push_back(linear_map_to_json(m));
    j["trend"] = std::move(t);
    j["seasonal"] = std::move(s);
  } else {
    const auto& rnn = std::get<RnnModel>(p);
    j["hidden"] = rnn.hidden;
    j["dim"] = rnn.w_ih.dim(1);
    j["w_ih"] = rnn.w_ih.to_vector();
    j["w_hh"] = rnn.w_hh.to_vector();
    j["b_h"] = rnn.b_h.to_vector();
    j["w_ho"] = rnn.w_ho.to_vector();
    j["b_o"] = rnn.b_o.to_vector();
  }
  save_json_file(file, j);
}

Predictor load_predictor(const std::filesystem::path& file) {
  const json j = load_json_file(file);
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "node") {
      NodeModel m;
      m.solver = solver_from_json(j.at("solver"));
      m.field = mlp_from_json(j.at("field"));
      return m;
    }
    if (kind == "dlinear") {
      DLinearModel m;
      m.lookback = j.at("lookback").get<std::int64_t>();
      m.horizon = j.at("horizon").get<std::int64_t>();
      m.kernel = j.at("kernel").get<int>();
      m.channel_shared = j.at("channel_shared").get<bool>();
      for (const auto& e : j.at("trend")) {
        m.trend.push_back(linear_map_from_json(e, m.horizon, m.lookback));
      }
      for (const auto& e : j.at("seasonal")) {
        m.seasonal.push_back(linear_map_from_json(e, m.horizon, m.lookback));
      }
      require(!m.trend.empty() && m.trend.size() == m.seasonal.size(),
              "checkpoint: dlinear branch maps missing");
      return m;
    }
    if (kind == "rnn") {
      RnnModel m;
      m.hidden = j.at("hidden").get<int>();
      const auto dim = j.at("dim").get<std::int64_t>();
      auto grab = [&](const char* key, std::vector<std::int64_t> shape) {
        auto v = j.at(key).get<std::vector<double>>();
        std::int64_t total = 1;
        for (auto s : shape) total *= s;
        require(static_cast<std::int64_t>(v.size()) == total,
                std::string("checkpoint: size mismatch for ") + key);
        return Tensor(std::move(shape), std::move(v));
      };
      m.w_ih = grab("w_ih", {m.hidden, dim});
      m.w_hh = grab("w_hh", {m.hidden, m.hidden});
      m.b_h = grab("b_h", {m.hidden});
      m.w_ho = grab("w_ho", {dim, m.hidden});
      m.b_o = grab("b_o", {dim});
      return m;
    }
    throw ValidationError(file.string() + ": unknown predictor kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw ValidationError(file.string() + ": malformed checkpoint: " + e.what());
  }
}

}  // namespace pcf
