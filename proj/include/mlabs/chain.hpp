#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "mlabs/distributions.hpp"
#include "mlabs/errors.hpp"
#include "mlabs/model.hpp"

namespace mlabs {

enum class MoveKind { kBirth = 0, kDeath = 1, kRelocate = 2 };

inline const char* to_string(MoveKind k) {
  switch (k) {
    case MoveKind::kBirth: return "birth";
    case MoveKind::kDeath: return "death";
    case MoveKind::kRelocate: return "relocate";
  }
  return "?";
}

struct MoveOutcome {
  MoveKind kind = MoveKind::kBirth;
  bool accepted = false;
  double log_accept_ratio = -INFINITY;
  int proposed_J = 0;
};

enum class Link { kIdentity, kProbit };

struct ChainDiagnostics {
  std::array<long, 3> proposed{0, 0, 0};
  std::array<long, 3> accepted{0, 0, 0};
  std::vector<int> J_trace;
  std::vector<double> sigma2_trace;
  std::vector<double> M_trace;

  double acceptance_rate(MoveKind k) const {
    const auto i = static_cast<std::size_t>(k);
    return proposed[i] == 0 ? 0.0 : static_cast<double>(accepted[i]) / static_cast<double>(proposed[i]);
  }
};

/// Retained post-burn-in states plus per-iteration traces.
struct Chain {
  Link link = Link::kIdentity;
  int p = 0;
  std::vector<ModelState> samples;
  ChainDiagnostics diagnostics;

  bool empty() const { return samples.empty(); }
};

/// Type-7 (linear interpolation) empirical quantile of unsorted values.
inline double empirical_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw StateError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

struct Prediction {
  Vector mean;
  Vector lower;  // 2.5% quantile
  Vector upper;  // 97.5% quantile
};

/// Draws of f(x*) for every retained sample: rows are samples.
inline Matrix posterior_draws(const Chain& chain, const Matrix& Xstar) {
  if (chain.empty()) throw StateError("cannot predict from an empty chain");
  if (chain.p != 0 && Xstar.cols() != chain.p) throw InputError("prediction matrix has the wrong number of columns");
  Matrix draws(static_cast<Eigen::Index>(chain.samples.size()), Xstar.rows());
  for (std::size_t s = 0; s < chain.samples.size(); ++s) {
    draws.row(static_cast<Eigen::Index>(s)) = mean_function(chain.samples[s], Xstar).transpose();
  }
  return draws;
}

namespace detail {

inline Prediction summarize_draws(const Matrix& draws) {
  const Eigen::Index m = draws.cols();
  Prediction out{Vector(m), Vector(m), Vector(m)};
  std::vector<double> col(static_cast<std::size_t>(draws.rows()));
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index s = 0; s < draws.rows(); ++s) col[static_cast<std::size_t>(s)] = draws(s, i);
    double sum = 0.0;
    for (double v : col) sum += v;
    out.mean[i] = sum / static_cast<double>(col.size());
    out.lower[i] = empirical_quantile(col, 0.025);
    out.upper[i] = empirical_quantile(col, 0.975);
  }
  return out;
}

}  // namespace detail

/// Posterior mean of f(x*) and its 95% equal-tailed interval. The interval is
/// for f; pass an rng to widen it by N(0, sigma2) draws per retained sample.
inline Prediction predict(const Chain& chain, const Matrix& Xstar, Rng* noise_rng = nullptr) {
  Matrix draws = posterior_draws(chain, Xstar);
  Prediction out = detail::summarize_draws(draws);
  if (noise_rng != nullptr) {
    for (Eigen::Index s = 0; s < draws.rows(); ++s) {
      const double sd = std::sqrt(chain.samples[static_cast<std::size_t>(s)].sigma2);
      for (Eigen::Index i = 0; i < draws.cols(); ++i) draws(s, i) += sd * draw_normal(*noise_rng);
    }
    const Prediction widened = detail::summarize_draws(draws);
    out.lower = widened.lower;
    out.upper = widened.upper;
  }
  return out;
}

/// Posterior mean of Phi(f(x*)).
inline Vector predict_prob(const Chain& chain, const Matrix& Xstar) {
  const Matrix draws = posterior_draws(chain, Xstar);
  Vector prob(draws.cols());
  for (Eigen::Index i = 0; i < draws.cols(); ++i) {
    double sum = 0.0;
    for (Eigen::Index s = 0; s < draws.rows(); ++s) sum += normal_cdf(draws(s, i));
    prob[i] = sum / static_cast<double>(draws.rows());
  }
  return prob;
}

}  // namespace mlabs
