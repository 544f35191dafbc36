#pragma once

#include <span>
#include <string>
#include <vector>

#include "pcf/tensor.hpp"

namespace pcf {

enum class PathScheme { hermite, linear };

std::string path_scheme_name(PathScheme s);
PathScheme path_scheme_from_name(const std::string& name);

// Piecewise-cubic interpolant through forecast knots, with the knot time
// appended as an extra channel so the integrator sees X(s) in R^{D+1} and
// the time channel reproduces s itself. The Hermite variant sets the slope
// at each knot to the backward difference (the slope at the first knot
// reuses the first segment's forward difference), so the path through knot i
// depends only on knots <= i+1. The linear variant is the piecewise-linear
// interpolant. Both are evaluable and differentiable everywhere on
// [t_0, t_last]; at interior knots the derivative takes the right segment,
// at the final knot the left one.
class ControlPath {
 public:
  // values: [T, D] states at strictly increasing times (T >= 2).
  static ControlPath fit(std::span<const double> times, const Tensor& values,
                         PathScheme scheme);

  Tensor eval(double s) const;        // [D+1], state channels then time
  Tensor derivative(double s) const;  // [D+1]

  double t_begin() const { return times_.front(); }
  double t_end() const { return times_.back(); }
  std::size_t knot_count() const { return times_.size(); }
  std::int64_t channels() const { return channels_; }
  PathScheme scheme() const { return scheme_; }

 private:
  std::size_t segment_for(double s, bool derivative) const;

  PathScheme scheme_ = PathScheme::hermite;
  std::vector<double> times_;
  std::int64_t channels_ = 0;  // D+1
  // Per segment, per channel cubic in the normalized offset u = (s-t_i)/dt_i:
  // value = c0 + c1 u + c2 u^2 + c3 u^3. Layout: [segment][channel][4].
  std::vector<double> coef_;
};

// Appends the time channel and fits the requested scheme.
ControlPath fit_path(std::span<const double> times, const Tensor& values,
                     PathScheme scheme);

}  // namespace pcf
