#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "pcf/tensor.hpp"

namespace pcf {

// Per-epoch history of one training run. wall_ms is measured and therefore
// not reproducible; everything else is deterministic for a fixed seed.
struct TrainLog {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<long> nfe;       // forward evaluations spent in the epoch
  std::vector<double> wall_ms;
  int best_epoch = -1;
  int epochs_run = 0;
};

// Early stopping on the validation loss: remembers the best epoch and stops
// after `patience` epochs without improvement.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}

  // Returns true if this epoch is the new best.
  bool observe(double val_loss) {
    ++epoch_;
    if (val_loss < best_) {
      best_ = val_loss;
      best_epoch_ = epoch_;
      return true;
    }
    return false;
  }

  bool should_stop() const { return epoch_ - best_epoch_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best() const { return best_; }

 private:
  int patience_;
  int epoch_ = -1;
  int best_epoch_ = -1;
  double best_ = std::numeric_limits<double>::infinity();
};

// Gradient accumulator with a deterministic, index-ordered reduction.
struct GradAccum {
  std::vector<std::vector<double>> sums;
  double loss = 0.0;
  long nfe = 0;
  long count = 0;

  void init(const std::vector<Tensor*>& params) {
    sums.clear();
    for (const Tensor* p : params) {
      sums.emplace_back(static_cast<std::size_t>(p->size()), 0.0);
    }
    loss = 0.0;
    nfe = 0;
    count = 0;
  }

  void fold(const std::vector<Tensor>& grads, double member_loss,
            long member_nfe) {
    for (std::size_t k = 0; k < sums.size(); ++k) {
      const double* g = grads[k].data();
      auto& s = sums[k];
      for (std::size_t i = 0; i < s.size(); ++i) s[i] += g[i];
    }
    loss += member_loss;
    nfe += member_nfe;
    ++count;
  }

  // Mean gradients shaped like the parameters.
  std::vector<Tensor> means(const std::vector<Tensor*>& params) const {
    std::vector<Tensor> out;
    const double inv = count > 0 ? 1.0 / static_cast<double>(count) : 0.0;
    for (std::size_t k = 0; k < sums.size(); ++k) {
      std::vector<double> m(sums[k]);
      for (auto& v : m) v *= inv;
      out.emplace_back(params[k]->shape(), std::move(m));
    }
    return out;
  }

  double mean_loss() const {
    return count > 0 ? loss / static_cast<double>(count) : 0.0;
  }
};

}  // namespace pcf
