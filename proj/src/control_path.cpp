#include "pcf/control_path.hpp"

#include <algorithm>
#include <cmath>

namespace pcf {

std::string path_scheme_name(PathScheme s) {
  return s == PathScheme::hermite ? "hermite" : "linear";
}

PathScheme path_scheme_from_name(const std::string& name) {
  if (name == "hermite") return PathScheme::hermite;
  if (name == "linear") return PathScheme::linear;
  throw ValidationError("unknown interpolation '" + name + "'");
}

ControlPath ControlPath::fit(std::span<const double> times,
                             const Tensor& values, PathScheme scheme) {
  const std::size_t T = times.size();
  require(T >= 2, "control path: need at least 2 knots");
  require(values.rank() == 2, "control path: values must be [T, D]");
  require(static_cast<std::size_t>(values.dim(0)) == T,
          "control path: times/values length mismatch");
  for (std::size_t i = 1; i < T; ++i) {
    require(times[i] > times[i - 1],
            "control path: knot times must be strictly increasing");
  }
  ensure_finite(values, "control path knots");

  const std::int64_t D = values.dim(1);
  const std::int64_t C = D + 1;

  // Knot matrix with the time channel appended.
  std::vector<double> x(T * static_cast<std::size_t>(C));
  for (std::size_t i = 0; i < T; ++i) {
    for (std::int64_t d = 0; d < D; ++d) {
      x[i * static_cast<std::size_t>(C) + static_cast<std::size_t>(d)] =
          values.at(static_cast<std::int64_t>(i), d);
    }
    x[i * static_cast<std::size_t>(C) + static_cast<std::size_t>(D)] = times[i];
  }
  auto knot = [&](std::size_t i, std::int64_t ch) {
    return x[i * static_cast<std::size_t>(C) + static_cast<std::size_t>(ch)];
  };

  ControlPath p;
  p.scheme_ = scheme;
  p.times_.assign(times.begin(), times.end());
  p.channels_ = C;
  p.coef_.assign((T - 1) * static_cast<std::size_t>(C) * 4, 0.0);

  // Backward-difference slopes; slope 0 duplicates slope 1 so the first
  // segment needs no knot before the start.
  std::vector<double> m(T * static_cast<std::size_t>(C));
  if (scheme == PathScheme::hermite) {
    for (std::size_t i = 1; i < T; ++i) {
      const double dt = times[i] - times[i - 1];
      for (std::int64_t ch = 0; ch < C; ++ch) {
        m[i * static_cast<std::size_t>(C) + static_cast<std::size_t>(ch)] =
            (knot(i, ch) - knot(i - 1, ch)) / dt;
      }
    }
    for (std::int64_t ch = 0; ch < C; ++ch) {
      m[static_cast<std::size_t>(ch)] = m[static_cast<std::size_t>(C + ch)];
    }
  }

  for (std::size_t i = 0; i + 1 < T; ++i) {
    const double dt = times[i + 1] - times[i];
    for (std::int64_t ch = 0; ch < C; ++ch) {
      double* c = p.coef_.data() +
                  (i * static_cast<std::size_t>(C) + static_cast<std::size_t>(ch)) * 4;
      const double x0 = knot(i, ch), x1 = knot(i + 1, ch);
      if (scheme == PathScheme::linear) {
        c[0] = x0;
        c[1] = x1 - x0;
      } else {
        const double m0 = dt * m[i * static_cast<std::size_t>(C) + static_cast<std::size_t>(ch)];
        const double m1 = dt * m[(i + 1) * static_cast<std::size_t>(C) + static_cast<std::size_t>(ch)];
        c[0] = x0;
        c[1] = m0;
        c[2] = -3.0 * x0 + 3.0 * x1 - 2.0 * m0 - m1;
        c[3] = 2.0 * x0 - 2.0 * x1 + m0 + m1;
      }
    }
  }
  return p;
}

std::size_t ControlPath::segment_for(double s, bool /*derivative*/) const {
  const double lo = times_.front(), hi = times_.back();
  const double slack = 1e-12 * std::max({1.0, std::abs(lo), std::abs(hi)});
  require(s >= lo - slack && s <= hi + slack,
          "control path: query time outside [" + std::to_string(lo) + ", " +
              std::to_string(hi) + "]");
  // upper_bound picks the right segment at interior knots; the final knot
  // falls back onto the last (left) segment.
  auto it = std::upper_bound(times_.begin(), times_.end(), s);
  std::size_t i = it == times_.begin()
                      ? 0
                      : static_cast<std::size_t>(it - times_.begin()) - 1;
  if (i >= times_.size() - 1) i = times_.size() - 2;
  return i;
}

Tensor ControlPath::eval(double s) const {
  const std::size_t i = segment_for(s, false);
  const double dt = times_[i + 1] - times_[i];
  const double u = (s - times_[i]) / dt;
  std::vector<double> out(static_cast<std::size_t>(channels_));
  for (std::int64_t ch = 0; ch < channels_; ++ch) {
    const double* c = coef_.data() +
                      (i * static_cast<std::size_t>(channels_) + static_cast<std::size_t>(ch)) * 4;
    out[static_cast<std::size_t>(ch)] = c[0] + u * (c[1] + u * (c[2] + u * c[3]));
  }
  return Tensor({channels_}, std::move(out));
}

Tensor ControlPath::derivative(double s) const {
  const std::size_t i = segment_for(s, true);
  const double dt = times_[i + 1] - times_[i];
  const double u = (s - times_[i]) / dt;
  std::vector<double> out(static_cast<std::size_t>(channels_));
  for (std::int64_t ch = 0; ch < channels_; ++ch) {
    const double* c = coef_.data() +
                      (i * static_cast<std::size_t>(channels_) + static_cast<std::size_t>(ch)) * 4;
    out[static_cast<std::size_t>(ch)] = (c[1] + u * (2.0 * c[2] + u * 3.0 * c[3])) / dt;
  }
  return Tensor({channels_}, std::move(out));
}

ControlPath fit_path(std::span<const double> times, const Tensor& values,
                     PathScheme scheme) {
  return ControlPath::fit(times, values, scheme);
}

}  // namespace pcf
