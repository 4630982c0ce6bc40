#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "mlabs/bspline.hpp"
#include "mlabs/distributions.hpp"
#include "mlabs/errors.hpp"
#include "mlabs/hyperparams.hpp"

namespace mlabs {

/// Data-anchored knot proposals for one predictor column.
///
/// An anchor x_i is drawn uniformly from the column values lying strictly
/// inside the expanded range; the knots below the
/// anchor come from U[b1, x_i] and those above from U[x_i, b2], with
/// [b1, b2] the data range widened by E times its length on each side.
///   k=0: xi1 < x_i < xi2
///   k=1: xi2 = x_i
///   k=2: xi1 < xi2 < x_i < xi3 < xi4
///   k=3: xi3 = x_i
/// Densities marginalize over the anchor. Odd degrees place a knot exactly on
/// a data point, so their density is with respect to counting measure on that
/// knot and Lebesgue measure on the others.
class KnotProposal {
 public:
  static constexpr int kMaxTieRetries = 64;

  KnotProposal(std::span<const double> column, double expansion) {
    if (column.empty()) throw InputError("knot proposal needs a nonempty column");
    if (expansion < 0.0) throw ConfigError("expansion multiplier E must be >= 0");
    const auto [lo_it, hi_it] = std::minmax_element(column.begin(), column.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    bounds_ = {lo - expansion * (hi - lo), hi + expansion * (hi - lo)};
    // Anchors on the expanded boundary (only possible when E = 0) would give a
    // zero-width interval on one side; they are not used.
    for (double v : column) {
      if (bounds_.lower < v && v < bounds_.upper) anchors_.push_back(v);
    }
    std::sort(anchors_.begin(), anchors_.end());

    prefix_even_[0].assign(anchors_.size() + 1, 0.0);
    prefix_even_[1].assign(anchors_.size() + 1, 0.0);
    for (std::size_t i = 0; i < anchors_.size(); ++i) {
      const double below = anchors_[i] - bounds_.lower;
      const double above = bounds_.upper - anchors_[i];
      prefix_even_[0][i + 1] = prefix_even_[0][i] + 1.0 / (below * above);
      prefix_even_[1][i + 1] = prefix_even_[1][i] + 4.0 / (below * below * above * above);
    }
  }

  Interval bounds() const { return bounds_; }
  /// True when no anchor lies strictly inside the expanded range.
  bool degenerate() const { return anchors_.empty(); }
  int anchor_count() const { return static_cast<int>(anchors_.size()); }

  /// Draws a knot sequence; ties are redrawn with a fresh anchor.
  KnotSequence propose(int degree, Rng& rng) const {
    if (degenerate()) throw ProposalError("no usable anchor: constant column, or E = 0 with two distinct values");
    std::uniform_int_distribution<std::size_t> pick(0, anchors_.size() - 1);
    for (int attempt = 0; attempt < kMaxTieRetries; ++attempt) {
      auto knots = draw_around(degree, anchors_[pick(rng)], rng);
      if (strictly_ascending(knots)) return KnotSequence(degree, std::move(knots));
    }
    throw ProposalError("knot proposal kept producing ties");
  }

  /// Draws knots around a given anchor value. Ties are not resolved here.
  std::vector<double> draw_around(int degree, double anchor, Rng& rng) const {
    auto below = [&] { return draw_uniform_closed(rng, bounds_.lower, anchor); };
    auto above = [&] { return draw_uniform_closed(rng, anchor, bounds_.upper); };
    switch (degree) {
      case 0: {
        const double a = below();
        return {a, above()};
      }
      case 1: {
        const double a = below();
        return {a, anchor, above()};
      }
      case 2: {
        double a = below(), b = below();
        double c = above(), d = above();
        return {std::min(a, b), std::max(a, b), std::min(c, d), std::max(c, d)};
      }
      case 3: {
        double a = below(), b = below();
        double c = above(), d = above();
        return {std::min(a, b), std::max(a, b), anchor, std::min(c, d), std::max(c, d)};
      }
      default:
        throw ConfigError("knot proposals exist for degrees 0..3 only");
    }
  }

  /// log q(xi) marginalized over the anchor; -inf off the support.
  double log_density(const KnotSequence& kseq) const {
    const auto& xi = kseq.knots();
    if (degenerate() || xi.front() < bounds_.lower || xi.back() > bounds_.upper) return -INFINITY;
    const double n = static_cast<double>(anchors_.size());
    switch (kseq.degree()) {
      case 0:
        return std::log(anchor_mass(0, xi[0], xi[1]) / n);
      case 2:
        return std::log(anchor_mass(1, xi[1], xi[2]) / n);
      case 1:
      case 3: {
        const std::size_t mid = static_cast<std::size_t>(kseq.degree()) == 1 ? 1 : 2;
        const double a = xi[mid];
        const auto [lo, hi] = std::equal_range(anchors_.begin(), anchors_.end(), a);
        const double count = static_cast<double>(hi - lo);
        const double below = a - bounds_.lower;
        const double above = bounds_.upper - a;
        if (count == 0.0) return -INFINITY;
        if (kseq.degree() == 1) return std::log(count / n) - std::log(below) - std::log(above);
        return std::log(count / n) + 2.0 * std::log(2.0) - 2.0 * std::log(below) - 2.0 * std::log(above);
      }
      default:
        return -INFINITY;
    }
  }

  /// log prior density of a knot sequence under the configured knot prior.
  double log_prior(const KnotSequence& kseq, KnotPrior prior) const {
    if (prior == KnotPrior::kProposal || kseq.degree() % 2 == 1) return log_density(kseq);
    const auto& xi = kseq.knots();
    if (xi.front() < bounds_.lower || xi.back() > bounds_.upper) return -INFINITY;
    const double m = static_cast<double>(xi.size());
    return std::lgamma(m + 1.0) - m * std::log(bounds_.length());
  }

 private:
  static bool strictly_ascending(const std::vector<double>& v) {
    return std::adjacent_find(v.begin(), v.end(), std::greater_equal<double>()) == v.end();
  }

  static double draw_uniform_closed(Rng& rng, double lo, double hi) {
    return lo == hi ? lo : draw_uniform(rng, lo, hi);
  }

  // Sum of anchor weights over anchors inside [lo, hi].
  double anchor_mass(int which, double lo, double hi) const {
    const auto first = std::lower_bound(anchors_.begin(), anchors_.end(), lo) - anchors_.begin();
    const auto last = std::upper_bound(anchors_.begin(), anchors_.end(), hi) - anchors_.begin();
    const auto& prefix = prefix_even_[static_cast<std::size_t>(which)];
    return prefix[static_cast<std::size_t>(last)] - prefix[static_cast<std::size_t>(first)];
  }

  std::vector<double> anchors_;
  Interval bounds_{};
  // Cumulative anchor weights for degree 0 and degree 2.
  std::vector<double> prefix_even_[2];
};

/// One-shot proposal from a raw column.
inline KnotSequence propose_knots(int degree, std::span<const double> column, double expansion, Rng& rng) {
  return KnotProposal(column, expansion).propose(degree, rng);
}

}  // namespace mlabs
