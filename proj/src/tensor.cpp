#include "pcf/tensor.hpp"

#include <cmath>
#include <sstream>

namespace pcf {

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << 'x';
    os << shape_[i];
  }
  os << ']';
  return os.str();
}

void ensure_finite(std::span<const double> v, const char* where) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericError(std::string("non-finite value in ") + where);
    }
  }
}

void ensure_finite(const Tensor& t, const char* where) {
  ensure_finite(t.span(), where);
}

}  // namespace pcf
