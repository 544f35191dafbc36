#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pcf/errors.hpp"

namespace pcf {

// Dense row-major tensor of doubles. Immutable: ops return new tensors, and
// copies share storage. Every op checks its result for NaN/Inf and throws
// NumericError, so non-finite values surface where they appear instead of
// propagating into training loops.
class Tensor {
 public:
  Tensor() : shape_{0}, size_(0), data_(empty_store()) {}

  Tensor(std::vector<std::int64_t> shape, std::vector<double> values)
      : shape_(std::move(shape)),
        size_(count(shape_)),
        data_(std::make_shared<const std::vector<double>>(std::move(values))) {
    require(static_cast<std::int64_t>(data_->size()) == size_,
            "tensor: data length does not match shape");
  }

  static Tensor zeros(std::vector<std::int64_t> shape) {
    const auto n = count(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
  }

  static Tensor full(std::vector<std::int64_t> shape, double v) {
    const auto n = count(shape);
    return Tensor(std::move(shape), std::vector<double>(n, v));
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  static Tensor row(std::vector<double> values) {
    const auto n = static_cast<std::int64_t>(values.size());
    return Tensor({n}, std::move(values));
  }

  const std::vector<std::int64_t>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::int64_t size() const { return size_; }

  const double* data() const { return data_->data(); }
  std::span<const double> span() const { return {data_->data(), data_->size()}; }
  double operator[](std::int64_t i) const { return (*data_)[static_cast<std::size_t>(i)]; }

  // Element of a rank-2 tensor.
  double at(std::int64_t i, std::int64_t j) const {
    return (*data_)[static_cast<std::size_t>(i * shape_[1] + j)];
  }

  std::vector<double> to_vector() const { return *data_; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  Tensor reshaped(std::vector<std::int64_t> shape) const {
    require(count(shape) == size_, "reshape: element count mismatch");
    Tensor t = *this;
    t.shape_ = std::move(shape);
    return t;
  }

  std::string shape_str() const;

 private:
  static std::int64_t count(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (auto d : shape) {
      require(d >= 0, "tensor: negative dimension");
      n *= d;
    }
    return n;
  }

  static std::shared_ptr<const std::vector<double>> empty_store() {
    static const auto e = std::make_shared<const std::vector<double>>();
    return e;
  }

  std::vector<std::int64_t> shape_;
  std::int64_t size_;
  std::shared_ptr<const std::vector<double>> data_;
};

// Throws NumericError naming `where` if any element is NaN/Inf.
void ensure_finite(const Tensor& t, const char* where);
void ensure_finite(std::span<const double> v, const char* where);

}  // namespace pcf
