#include "pcf/corrector.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "pcf/parallel.hpp"
#include "pcf/serialize.hpp"
#include "pcf/tape.hpp"

namespace pcf {

using nlohmann::json;

namespace {

struct TracedCorrector {
  TracedMlp zeta, field, decoder;
};

TracedCorrector trace(const CorrectorModel& m, bool watched) {
  if (watched) {
    return {watch_mlp(m.zeta), watch_mlp(m.field), watch_mlp(m.decoder)};
  }
  return {const_mlp(m.zeta), const_mlp(m.field), const_mlp(m.decoder)};
}

// dz/ds = reshape(field(z), [C, D+1]) * dX/ds. The path is data, so its
// derivative enters as a constant.
FieldFn cde_field(const TracedCorrector& tc, const ControlPath& path,
                  std::int64_t latent) {
  const std::int64_t chans = path.channels();
  return [&tc, &path, latent, chans](double t, const Value& z) {
    Value mat = reshape(mlp_apply(tc.field, z), {latent, chans});
    return matvec(mat, constant(path.derivative(t)));
  };
}

std::vector<Value> integrate_hidden(const CorrectorModel& model,
                                    const TracedCorrector& tc,
                                    const ControlPath& path,
                                    std::span<const double> times, long* nfe) {
  require(!times.empty(), "cde: no evaluation times");
  require(std::abs(times.front() - path.t_begin()) <=
              1e-12 * std::max(1.0, std::abs(path.t_begin())),
          "cde: first evaluation time must match the path start");
  Value z0 = mlp_apply(tc.zeta, constant(path.eval(times.front())));
  SolveResult sol = integrate_adaptive(
      tableau(model.cfg.solver.method), model.cfg.solver.controller(),
      cde_field(tc, path, model.cfg.latent), z0, times);
  if (nfe) *nfe += sol.nfe;
  return std::move(sol.states);
}

std::vector<Tensor*> corrector_param_ptrs(CorrectorModel& m) {
  std::vector<Tensor*> out;
  for (auto* p : mlp_param_ptrs(m.zeta)) out.push_back(p);
  for (auto* p : mlp_param_ptrs(m.field)) out.push_back(p);
  for (auto* p : mlp_param_ptrs(m.decoder)) out.push_back(p);
  return out;
}

std::vector<Tensor> corrector_grads(const GradMap& g, const TracedCorrector& tc) {
  std::vector<Tensor> out;
  for (auto& t : mlp_grads(g, tc.zeta)) out.push_back(std::move(t));
  for (auto& t : mlp_grads(g, tc.field)) out.push_back(std::move(t));
  for (auto& t : mlp_grads(g, tc.decoder)) out.push_back(std::move(t));
  return out;
}

Tensor bundle_row(const Tensor& m, std::size_t i) {
  const std::int64_t D = m.dim(1);
  std::vector<double> r(static_cast<std::size_t>(D));
  for (std::int64_t d = 0; d < D; ++d) {
    r[static_cast<std::size_t>(d)] = m.at(static_cast<std::int64_t>(i), d);
  }
  return Tensor({D}, std::move(r));
}

Tensor gather_rows(const Tensor& m, const std::vector<std::size_t>& idx) {
  const std::int64_t D = m.dim(1);
  std::vector<double> flat;
  flat.reserve(idx.size() * static_cast<std::size_t>(D));
  for (std::size_t i : idx) {
    for (std::int64_t d = 0; d < D; ++d) {
      flat.push_back(m.at(static_cast<std::int64_t>(i), d));
    }
  }
  return Tensor({static_cast<std::int64_t>(idx.size()), D}, std::move(flat));
}

struct MemberResult {
  std::vector<Tensor> grads;
  double loss = 0.0;
  long nfe = 0;
};

constexpr std::int64_t kGradChunk = 8;

}  // namespace

CorrectorModel make_corrector(std::int64_t dim, const CorrectorConfig& cfg,
                              std::uint64_t seed) {
  require(dim >= 1, "corrector: dimension must be positive");
  require(cfg.latent >= 1, "corrector: latent width must be positive");
  CorrectorModel m;
  m.cfg = cfg;
  m.dim = dim;
  const int in = static_cast<int>(dim) + 1;
  const int C = cfg.latent;
  Rng rz = Rng::stream(seed, 0x2e7au);
  m.zeta = make_mlp(fc_sizes(in, cfg.zeta_width, cfg.zeta_depth, C),
                    Activation::tanh_act, rz);
  Rng rf = Rng::stream(seed, 0xf1e1du);
  m.field = make_mlp(fc_sizes(C, cfg.field_width, cfg.field_depth, C * in),
                     Activation::tanh_act, rf);
  Rng rd = Rng::stream(seed, 0xdec0deu);
  m.decoder = make_mlp(fc_sizes(C, cfg.decoder_width, cfg.decoder_depth,
                                static_cast<int>(dim)),
                       Activation::relu_act, rd);
  return m;
}

Tensor init_hidden(const CorrectorModel& model, const Tensor& x0, double t0) {
  require(x0.rank() == 1 && x0.dim(0) == model.dim,
          "init_hidden: state dimension mismatch");
  std::vector<double> in(x0.data(), x0.data() + x0.size());
  in.push_back(t0);
  TracedMlp z = const_mlp(model.zeta);
  return mlp_apply(z, constant(Tensor({model.dim + 1}, std::move(in)))).data;
}

std::vector<Tensor> cde_integrate(const CorrectorModel& model,
                                  const ControlPath& path,
                                  std::span<const double> eval_times,
                                  long* nfe) {
  require(path.channels() == model.dim + 1,
          "cde_integrate: path channel count mismatch");
  TracedCorrector tc = trace(model, false);
  auto states = integrate_hidden(model, tc, path, eval_times, nfe);
  std::vector<Tensor> out;
  out.reserve(states.size());
  for (auto& v : states) out.push_back(std::move(v.data));
  return out;
}

Tensor decode_errors(const CorrectorModel& model,
                     const std::vector<Tensor>& hiddens) {
  require(!hiddens.empty(), "decode_errors: no hidden states");
  const std::int64_t T = static_cast<std::int64_t>(hiddens.size());
  const std::int64_t D = model.dim;
  TracedMlp dec = const_mlp(model.decoder);
  std::vector<double> flat(static_cast<std::size_t>(T * D), 0.0);
  for (std::int64_t i = 1; i < T; ++i) {
    const Tensor& z = hiddens[static_cast<std::size_t>(i)];
    require(z.rank() == 1 && z.dim(0) == model.cfg.latent,
            "decode_errors: hidden width mismatch");
    Tensor e = mlp_apply(dec, constant(z)).data;
    for (std::int64_t d = 0; d < D; ++d) {
      flat[static_cast<std::size_t>(i * D + d)] = e[d];
    }
  }
  return Tensor({T, D}, std::move(flat));
}

Tensor corrector_forward(const CorrectorModel& model,
                         std::span<const double> times, const Tensor& forecast,
                         long* nfe) {
  require(forecast.rank() == 2 && forecast.dim(1) == model.dim,
          "corrector_forward: forecast must be [T, D]");
  require(forecast.dim(0) >= 2, "corrector_forward: need at least 2 points");
  require(static_cast<std::int64_t>(times.size()) == forecast.dim(0),
          "corrector_forward: times length mismatch");
  ControlPath path = fit_path(times, forecast, model.cfg.interpolation);
  auto hiddens = cde_integrate(model, path, times, nfe);
  return decode_errors(model, hiddens);
}

Tensor correct(const Tensor& forecast, const Tensor& errors) {
  require(forecast.same_shape(errors), "correct: shape mismatch");
  const std::int64_t n = forecast.size();
  std::vector<double> out(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = forecast[i] + errors[i];
  }
  return Tensor(forecast.shape(), std::move(out));
}

int sample_tail_drop(int eta, Rng& rng) {
  require(eta >= 0, "tail drop: eta must be non-negative");
  if (eta == 0) return 0;
  return static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(eta) + 1));
}

std::vector<std::size_t> sparsify_path(std::size_t len, double kappa,
                                       Rng& rng) {
  require(kappa > 0.0 && kappa <= 1.0, "sparsify: kappa must be in (0, 1]");
  const std::size_t keep = static_cast<std::size_t>(
      std::ceil(kappa * static_cast<double>(len)));
  require(keep >= 4, "sparsify: fewer than 4 control points would remain");
  if (keep >= len) {
    std::vector<std::size_t> all(len);
    for (std::size_t i = 0; i < len; ++i) all[i] = i;
    return all;
  }
  auto rest = rng.sample_without_replacement(len - 1, keep - 1);
  std::vector<std::size_t> out;
  out.reserve(keep);
  out.push_back(0);
  for (auto r : rest) out.push_back(r + 1);
  return out;
}

CorrectorTrainer::CorrectorTrainer(CorrectorModel& model,
                                   std::vector<ForecastBundle> bundles,
                                   const RegularizationConfig& reg,
                                   const CorrectorHyper& hyper)
    : model_(model), bundles_(std::move(bundles)), reg_(reg), hyper_(hyper) {
  require(!bundles_.empty(), "corrector trainer: no bundles");
  require(hyper_.batch >= 1, "corrector trainer: batch must be >= 1");
  require(hyper_.train_horizon >= 4,
          "corrector trainer: train_horizon must be >= 4");
  require(hyper_.observed_fraction > 0.0 && hyper_.observed_fraction <= 1.0,
          "corrector trainer: observed_fraction must be in (0, 1]");
  require(reg_.kappa > 0.0 && reg_.kappa <= 1.0,
          "corrector trainer: kappa must be in (0, 1]");
  for (const auto& b : bundles_) {
    const auto T0 = std::min<std::int64_t>(
        static_cast<std::int64_t>(b.times.size()), hyper_.train_horizon);
    require(T0 >= 4, "corrector trainer: bundle shorter than 4 points");
    require(reg_.eta >= 0 && reg_.eta <= static_cast<int>(T0) - 4,
            "corrector trainer: eta must be in {0..T-4}");
  }
  auto ptrs = corrector_param_ptrs(model_);
  AdamConfig ac;
  ac.lr = hyper_.lr;
  adam_ = make_adam_state(ptrs, ac);
  reshuffle();
}

void CorrectorTrainer::set_bundles(std::vector<ForecastBundle> bundles) {
  require(bundles.size() == bundles_.size(),
          "corrector trainer: bundle count changed");
  bundles_ = std::move(bundles);
}

void CorrectorTrainer::reshuffle() {
  order_.resize(bundles_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  Rng rng = Rng::stream(hyper_.seed, 0xc0ffee, epoch_);
  rng.shuffle(order_);
  cursor_ = 0;
}

int CorrectorTrainer::steps_per_epoch() const {
  const auto n = bundles_.size();
  return static_cast<int>((n + static_cast<std::size_t>(hyper_.batch) - 1) /
                          static_cast<std::size_t>(hyper_.batch));
}

double CorrectorTrainer::step() {
  const std::size_t n = bundles_.size();
  if (cursor_ >= n) {
    ++epoch_;
    reshuffle();
  }
  const std::size_t lo = cursor_;
  const std::size_t hi = std::min(n, lo + static_cast<std::size_t>(hyper_.batch));
  cursor_ = hi;
  const std::uint64_t pass = pass_++;

  auto ptrs = corrector_param_ptrs(model_);
  GradAccum acc;
  acc.init(ptrs);

  par::chunked_map_reduce<MemberResult>(
      static_cast<std::int64_t>(hi - lo), kGradChunk,
      [&](std::int64_t j) -> MemberResult {
        const std::size_t bi = order_[lo + static_cast<std::size_t>(j)];
        const ForecastBundle& b = bundles_[bi];
        const std::size_t T0 = std::min<std::size_t>(
            b.times.size(), static_cast<std::size_t>(hyper_.train_horizon));
        Rng rng = Rng::stream(hyper_.seed, 0xced00000u + pass, bi);

        // Retained knots: simulated sparsity first, then the kappa subset,
        // then the tail drop by original index. All three are fresh draws
        // each time the bundle is visited.
        std::vector<std::size_t> idx(T0);
        for (std::size_t i = 0; i < T0; ++i) idx[i] = i;
        if (hyper_.observed_fraction < 1.0) {
          idx = sparsify_path(T0, hyper_.observed_fraction, rng);
        }
        if (reg_.kappa < 1.0) {
          auto sub = sparsify_path(idx.size(), reg_.kappa, rng);
          std::vector<std::size_t> composed;
          composed.reserve(sub.size());
          for (auto s : sub) composed.push_back(idx[s]);
          idx = std::move(composed);
        }
        if (reg_.eta > 0) {
          const std::size_t cutoff =
              T0 - 1 - static_cast<std::size_t>(sample_tail_drop(reg_.eta, rng));
          while (!idx.empty() && idx.back() > cutoff) idx.pop_back();
          require(idx.size() >= 4,
                  "corrector trainer: tail drop left fewer than 4 knots");
        }

        std::vector<double> times(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) times[k] = b.times[idx[k]];
        ControlPath path =
            fit_path(times, gather_rows(b.forecast, idx), model_.cfg.interpolation);

        Tape tape;
        Tape::Scope scope(tape);
        TracedCorrector tc = trace(model_, true);
        long nfe = 0;
        auto hiddens = integrate_hidden(model_, tc, path, times, &nfe);
        Value total = constant(Tensor::scalar(0.0));
        for (std::size_t i = 1; i < idx.size(); ++i) {
          Value e_hat = mlp_apply(tc.decoder, hiddens[i]);
          Value diff = sub(e_hat, constant(bundle_row(b.errors, idx[i])));
          total = add(total, sum_all(mul(diff, diff)));
        }
        Value loss = scale(total, 1.0 / static_cast<double>(
                                      (idx.size() - 1) *
                                      static_cast<std::size_t>(model_.dim)));
        GradMap g = tape.gradients(loss);
        return MemberResult{corrector_grads(g, tc), loss.scalar(), nfe};
      },
      [&](std::int64_t, MemberResult& r) { acc.fold(r.grads, r.loss, r.nfe); });

  adam_step(ptrs, acc.means(ptrs), adam_);
  nfe_ += acc.nfe;
  return acc.mean_loss();
}

namespace {

// Deterministic validation: full forward pass on the training horizon, no
// subsampling.
double corrector_val_loss(const CorrectorModel& model,
                          const std::vector<ForecastBundle>& val,
                          int train_horizon, long* nfe) {
  double total = 0.0;
  for (const auto& b : val) {
    const std::size_t T0 = std::min<std::size_t>(
        b.times.size(), static_cast<std::size_t>(train_horizon));
    std::vector<std::size_t> idx(T0);
    for (std::size_t i = 0; i < T0; ++i) idx[i] = i;
    std::vector<double> times(b.times.begin(),
                              b.times.begin() + static_cast<std::ptrdiff_t>(T0));
    Tensor fc = gather_rows(b.forecast, idx);
    Tensor e_hat = corrector_forward(model, times, fc, nfe);
    double acc = 0.0;
    const std::int64_t D = model.dim;
    for (std::size_t i = 1; i < T0; ++i) {
      for (std::int64_t d = 0; d < D; ++d) {
        const double diff = e_hat.at(static_cast<std::int64_t>(i), d) -
                            b.errors.at(static_cast<std::int64_t>(i), d);
        acc += diff * diff;
      }
    }
    total += acc / static_cast<double>((T0 - 1) * static_cast<std::size_t>(D));
  }
  return total / static_cast<double>(val.size());
}

}  // namespace

std::pair<CorrectorModel, TrainLog> train_corrector(
    const std::vector<ForecastBundle>& bundles, std::int64_t dim,
    const CorrectorConfig& cfg, const RegularizationConfig& reg,
    const CorrectorHyper& hyper) {
  require(!bundles.empty(), "train_corrector: no bundles");
  CorrectorModel model = make_corrector(dim, cfg, hyper.seed);

  std::vector<std::size_t> idx(bundles.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng = Rng::stream(hyper.seed, 0xc7a1u);
  rng.shuffle(idx);
  const std::size_t n_val = static_cast<std::size_t>(
      std::floor(hyper.val_fraction * static_cast<double>(bundles.size())));
  std::vector<ForecastBundle> fit, val;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    ((n_val > 0 && n_val < idx.size() && i >= idx.size() - n_val) ? val : fit)
        .push_back(bundles[idx[i]]);
  }

  CorrectorTrainer trainer(model, fit, reg, hyper);
  EarlyStopper stopper(hyper.patience);
  MlpParams best_zeta = model.zeta, best_field = model.field,
            best_decoder = model.decoder;
  TrainLog log;

  for (int epoch = 0; epoch < hyper.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    double loss_sum = 0.0;
    const int steps = trainer.steps_per_epoch();
    for (int s = 0; s < steps; ++s) loss_sum += trainer.step();
    long nfe = trainer.take_nfe();
    const double vloss =
        val.empty() ? loss_sum / steps
                    : corrector_val_loss(model, val, hyper.train_horizon, &nfe);
    const auto t1 = std::chrono::steady_clock::now();
    log.train_loss.push_back(loss_sum / steps);
    log.val_loss.push_back(vloss);
    log.nfe.push_back(nfe);
    log.wall_ms.push_back(
        std::chrono::duration<double, std::milli>(t1 - t0).count());
    log.epochs_run = epoch + 1;
    if (stopper.observe(vloss)) {
      best_zeta = model.zeta;
      best_field = model.field;
      best_decoder = model.decoder;
    }
    if (stopper.should_stop()) break;
  }
  model.zeta = best_zeta;
  model.field = best_field;
  model.decoder = best_decoder;
  log.best_epoch = stopper.best_epoch();
  return {std::move(model), std::move(log)};
}

// --- pointwise baseline --------------------------------------------------------

MlpCorrectorModel make_mlp_corrector(std::int64_t dim, int width, int depth,
                                     std::uint64_t seed) {
  require(dim >= 1, "mlp corrector: dimension must be positive");
  Rng rng = Rng::stream(seed, 0x331fu);
  return {make_mlp(fc_sizes(static_cast<int>(dim) + 1, width, depth,
                            static_cast<int>(dim)),
                   Activation::tanh_act, rng)};
}

Tensor mlp_correct_point(const MlpCorrectorModel& model, const Tensor& x,
                         double t) {
  require(x.rank() == 1 && x.dim(0) + 1 == model.net.in_dim(),
          "mlp corrector: dimension mismatch");
  std::vector<double> in(x.data(), x.data() + x.size());
  in.push_back(t);
  TracedMlp net = const_mlp(model.net);
  return mlp_apply(net, constant(Tensor({x.dim(0) + 1}, std::move(in)))).data;
}

Tensor apply_mlp_corrector(const MlpCorrectorModel& model,
                           std::span<const double> times,
                           const Tensor& forecast) {
  require(forecast.rank() == 2, "mlp corrector: forecast must be [T, D]");
  require(static_cast<std::int64_t>(times.size()) == forecast.dim(0),
          "mlp corrector: times length mismatch");
  const std::int64_t T = forecast.dim(0), D = forecast.dim(1);
  std::vector<double> flat(static_cast<std::size_t>(T * D), 0.0);
  for (std::int64_t i = 1; i < T; ++i) {
    Tensor e = mlp_correct_point(model, bundle_row(forecast, static_cast<std::size_t>(i)),
                                 times[static_cast<std::size_t>(i)]);
    for (std::int64_t d = 0; d < D; ++d) {
      flat[static_cast<std::size_t>(i * D + d)] = e[d];
    }
  }
  return Tensor({T, D}, std::move(flat));
}

std::pair<MlpCorrectorModel, TrainLog> train_mlp_corrector(
    const std::vector<ForecastBundle>& bundles, std::int64_t dim, int width,
    int depth, const CorrectorHyper& hyper) {
  require(!bundles.empty(), "train_mlp_corrector: no bundles");
  MlpCorrectorModel model = make_mlp_corrector(dim, width, depth, hyper.seed);

  // Pointwise examples: (forecast value, time) -> error, skipping the anchor.
  struct Example {
    std::vector<double> in;
    std::vector<double> out;
  };
  std::vector<Example> fit_ex, val_ex;
  {
    std::vector<std::size_t> idx(bundles.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng = Rng::stream(hyper.seed, 0xc7a1u);
    rng.shuffle(idx);
    const std::size_t n_val = static_cast<std::size_t>(
        std::floor(hyper.val_fraction * static_cast<double>(bundles.size())));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const ForecastBundle& b = bundles[idx[i]];
      const std::size_t T0 = std::min<std::size_t>(
          b.times.size(), static_cast<std::size_t>(hyper.train_horizon));
      auto& dst = (n_val > 0 && n_val < idx.size() && i >= idx.size() - n_val)
                      ? val_ex
                      : fit_ex;
      for (std::size_t t = 1; t < T0; ++t) {
        Example ex;
        for (std::int64_t d = 0; d < dim; ++d) {
          ex.in.push_back(b.forecast.at(static_cast<std::int64_t>(t), d));
        }
        ex.in.push_back(b.times[t]);
        for (std::int64_t d = 0; d < dim; ++d) {
          ex.out.push_back(b.errors.at(static_cast<std::int64_t>(t), d));
        }
        dst.push_back(std::move(ex));
      }
    }
  }
  require(!fit_ex.empty(), "train_mlp_corrector: no training points");

  auto ptrs = mlp_param_ptrs(model.net);
  AdamConfig ac;
  ac.lr = hyper.lr;
  AdamState adam = make_adam_state(ptrs, ac);
  EarlyStopper stopper(hyper.patience);
  MlpParams best = model.net;
  TrainLog log;
  std::vector<std::size_t> order(fit_ex.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  auto point_loss = [&](const MlpParams& net, const Example& ex) {
    TracedMlp tn = const_mlp(net);
    Tensor pred = mlp_apply(tn, constant(Tensor(
        {static_cast<std::int64_t>(ex.in.size())}, ex.in))).data;
    double acc = 0.0;
    for (std::size_t d = 0; d < ex.out.size(); ++d) {
      const double diff = pred[static_cast<std::int64_t>(d)] - ex.out[d];
      acc += diff * diff;
    }
    return acc / static_cast<double>(ex.out.size());
  };

  for (int epoch = 0; epoch < hyper.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng shuffle_rng = Rng::stream(hyper.seed, 0x331e5u,
                                  static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    int steps = 0;
    for (std::size_t lo = 0; lo < order.size();
         lo += static_cast<std::size_t>(hyper.batch)) {
      const std::size_t hi =
          std::min(order.size(), lo + static_cast<std::size_t>(hyper.batch));
      GradAccum acc;
      acc.init(ptrs);
      par::chunked_map_reduce<MemberResult>(
          static_cast<std::int64_t>(hi - lo), 64,
          [&](std::int64_t j) -> MemberResult {
            const Example& ex = fit_ex[order[lo + static_cast<std::size_t>(j)]];
            Tape tape;
            Tape::Scope scope(tape);
            TracedMlp tn = watch_mlp(model.net);
            Value pred = mlp_apply(tn, constant(Tensor(
                {static_cast<std::int64_t>(ex.in.size())}, ex.in)));
            Value diff = sub(pred, constant(Tensor(
                {static_cast<std::int64_t>(ex.out.size())}, ex.out)));
            Value loss = mean_all(mul(diff, diff));
            GradMap g = tape.gradients(loss);
            return MemberResult{mlp_grads(g, tn), loss.scalar(), 0};
          },
          [&](std::int64_t, MemberResult& r) { acc.fold(r.grads, r.loss, r.nfe); });
      adam_step(ptrs, acc.means(ptrs), adam);
      loss_sum += acc.mean_loss();
      ++steps;
    }
    double vloss;
    if (val_ex.empty()) {
      vloss = loss_sum / steps;
    } else {
      vloss = 0.0;
      for (const auto& ex : val_ex) vloss += point_loss(model.net, ex);
      vloss /= static_cast<double>(val_ex.size());
    }
    const auto t1 = std::chrono::steady_clock::now();
    log.train_loss.push_back(loss_sum / steps);
    log.val_loss.push_back(vloss);
    log.nfe.push_back(0);
    log.wall_ms.push_back(
        std::chrono::duration<double, std::milli>(t1 - t0).count());
    log.epochs_run = epoch + 1;
    if (stopper.observe(vloss)) best = model.net;
    if (stopper.should_stop()) break;
  }
  model.net = best;
  log.best_epoch = stopper.best_epoch();
  return {std::move(model), std::move(log)};
}

// --- alternating mode ------------------------------------------------------------

AlternatingLog train_alternating(NodeModel& node, CorrectorModel& corrector,
                                 const Dataset& train,
                                 const AlternatingHyper& hyper) {
  require(hyper.rounds >= 1, "alternating: rounds must be >= 1");
  require(hyper.predictor_steps >= 0 && hyper.corrector_steps >= 0,
          "alternating: step counts must be non-negative");
  NodeTrainer ntr(node, train, hyper.node);
  auto bundles = extract_forecast_bundles(Predictor{node}, train,
                                          hyper.corr.train_horizon);
  CorrectorTrainer ctr(corrector, bundles, hyper.reg, hyper.corr);

  AlternatingLog log;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int round = 0; round < hyper.rounds; ++round) {
    double ploss = nan;
    if (hyper.predictor_steps > 0) {
      double sum = 0.0;
      for (int s = 0; s < hyper.predictor_steps; ++s) sum += ntr.step();
      ploss = sum / hyper.predictor_steps;
      ctr.set_bundles(extract_forecast_bundles(Predictor{node}, train,
                                               hyper.corr.train_horizon));
    }
    double closs = nan;
    if (hyper.corrector_steps > 0) {
      double sum = 0.0;
      for (int s = 0; s < hyper.corrector_steps; ++s) sum += ctr.step();
      closs = sum / hyper.corrector_steps;
    }
    log.predictor_loss.push_back(ploss);
    log.corrector_loss.push_back(closs);
  }
  log.nfe = ntr.take_nfe() + ctr.take_nfe();
  return log;
}

// --- checkpoints ------------------------------------------------------------------

void save_corrector(const std::filesystem::path& file,
                    const CorrectorModel& model) {
  json j;
  j["latent"] = model.cfg.latent;
  j["dim"] = model.dim;
  j["interpolation"] = path_scheme_name(model.cfg.interpolation);
  j["solver"] = solver_to_json(model.cfg.solver);
  j["zeta"] = mlp_to_json(model.zeta);
  j["field"] = mlp_to_json(model.field);
  j["decoder"] = mlp_to_json(model.decoder);
  save_json_file(file, j);
}

CorrectorModel load_corrector(const std::filesystem::path& file) {
  const json j = load_json_file(file);
  try {
    CorrectorModel m;
    m.cfg.latent = j.at("latent").get<int>();
    m.dim = j.at("dim").get<std::int64_t>();
    m.cfg.interpolation =
        path_scheme_from_name(j.at("interpolation").get<std::string>());
    m.cfg.solver = solver_from_json(j.at("solver"));
    m.zeta = mlp_from_json(j.at("zeta"));
    m.field = mlp_from_json(j.at("field"));
    m.decoder = mlp_from_json(j.at("decoder"));
    require(m.zeta.in_dim() == m.dim + 1 && m.zeta.out_dim() == m.cfg.latent,
            "corrector checkpoint: zeta shape mismatch");
    require(m.field.in_dim() == m.cfg.latent &&
                m.field.out_dim() == m.cfg.latent * (m.dim + 1),
            "corrector checkpoint: field shape mismatch");
    require(m.decoder.in_dim() == m.cfg.latent && m.decoder.out_dim() == m.dim,
            "corrector checkpoint: decoder shape mismatch");
    const auto sz = m.zeta.sizes();
    m.cfg.zeta_width = sz.size() > 2 ? static_cast<int>(sz[1]) : 0;
    m.cfg.zeta_depth = static_cast<int>(sz.size()) - 2;
    const auto sf = m.field.sizes();
    m.cfg.field_width = sf.size() > 2 ? static_cast<int>(sf[1]) : 0;
    m.cfg.field_depth = static_cast<int>(sf.size()) - 2;
    const auto sd = m.decoder.sizes();
    m.cfg.decoder_width = sd.size() > 2 ? static_cast<int>(sd[1]) : 0;
    m.cfg.decoder_depth = static_cast<int>(sd.size()) - 2;
    return m;
  } catch (const json::exception& e) {
    throw ValidationError(file.string() + ": malformed checkpoint: " + e.what());
  }
}

}  // namespace pcf
