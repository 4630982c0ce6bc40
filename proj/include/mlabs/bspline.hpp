#pragma once

#include <cstddef>
#include <span>
#include <sstream>
#include <vector>

#include "mlabs/errors.hpp"

namespace mlabs {

/// Half-open interval [lower, upper).
struct Interval {
  double lower;
  double upper;

  bool contains(double x) const { return lower <= x && x < upper; }
  double length() const { return upper - lower; }
  bool operator==(const Interval&) const = default;
};

/// Knots of a single univariate B-spline of degree k: k+2 strictly ascending
/// values. Immutable once constructed.
class KnotSequence {
 public:
  KnotSequence(int degree, std::vector<double> knots)
      : degree_(degree), knots_(std::move(knots)) {
    if (degree_ < 0) {
      throw InputError("B-spline degree must be non-negative");
    }
    if (knots_.size() != static_cast<std::size_t>(degree_) + 2) {
      std::ostringstream msg;
      msg << "degree " << degree_ << " needs " << degree_ + 2 << " knots, got "
          << knots_.size();
      throw InputError(msg.str());
    }
    for (std::size_t i = 1; i < knots_.size(); ++i) {
      if (!(knots_[i - 1] < knots_[i])) {
        throw InputError("knot sequence must be strictly ascending");
      }
    }
  }

  int degree() const { return degree_; }
  const std::vector<double>& knots() const { return knots_; }
  double front() const { return knots_.front(); }
  double back() const { return knots_.back(); }

  bool operator==(const KnotSequence&) const = default;
  auto operator<=>(const KnotSequence&) const = default;

 private:
  int degree_;
  std::vector<double> knots_;
};

namespace detail {

// Cox-de Boor recursion on a contiguous run of knots; degree = size - 2.
inline double bspline_recursive(std::span<const double> xi, double x) {
  const std::size_t m = xi.size();
  if (m == 2) {
    return (xi[0] <= x && x < xi[1]) ? 1.0 : 0.0;
  }
  const double left = (x - xi[0]) / (xi[m - 2] - xi[0]);
  const double right = (xi[m - 1] - x) / (xi[m - 1] - xi[1]);
  return left * bspline_recursive(xi.first(m - 1), x) +
         right * bspline_recursive(xi.last(m - 1), x);
}

}  // namespace detail

/// Support of the basis function; the function vanishes outside it.
inline Interval bspline_support(const KnotSequence& kseq) {
  return {kseq.front(), kseq.back()};
}

/// B_k(x; xi). Zero outside [xi_1, xi_{k+2}), including the right endpoint.
inline double eval_bspline(const KnotSequence& kseq, double x) {
  if (!bspline_support(kseq).contains(x)) return 0.0;
  return detail::bspline_recursive(kseq.knots(), x);
}

}  // namespace mlabs
