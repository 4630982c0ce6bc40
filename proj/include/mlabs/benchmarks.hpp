#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlabs/dataset.hpp"
#include "mlabs/distributions.hpp"
#include "mlabs/errors.hpp"
#include "mlabs/hyperparams.hpp"

namespace mlabs::bench {

enum class TestFunction { kRadial, kComplex, kNonsmooth, kFriedman1, kFriedman2, kFriedman3 };
enum class Design { kGrid, kUniform };

inline std::string to_string(TestFunction f) {
  switch (f) {
    case TestFunction::kRadial: return "radial";
    case TestFunction::kComplex: return "complex";
    case TestFunction::kNonsmooth: return "nonsmooth";
    case TestFunction::kFriedman1: return "friedman1";
    case TestFunction::kFriedman2: return "friedman2";
    case TestFunction::kFriedman3: return "friedman3";
  }
  return "?";
}

inline TestFunction parse_test_function(const std::string& name) {
  for (auto f : {TestFunction::kRadial, TestFunction::kComplex, TestFunction::kNonsmooth,
                 TestFunction::kFriedman1, TestFunction::kFriedman2, TestFunction::kFriedman3}) {
    if (to_string(f) == name) return f;
  }
  throw ConfigError("unknown test function '" + name + "'");
}

inline bool is_surface(TestFunction f) {
  return f == TestFunction::kRadial || f == TestFunction::kComplex || f == TestFunction::kNonsmooth;
}

/// Per-variable domain [lo, hi]; Friedman 1 uses as many unit columns as asked.
inline std::vector<Interval> domain(TestFunction f, int p = 10) {
  using std::numbers::pi;
  switch (f) {
    case TestFunction::kRadial:
    case TestFunction::kComplex:
    case TestFunction::kNonsmooth:
      return {{0.0, 1.0}, {0.0, 1.0}};
    case TestFunction::kFriedman1:
      if (p < 5) throw ConfigError("friedman1 needs at least 5 predictors");
      return std::vector<Interval>(static_cast<std::size_t>(p), Interval{0.0, 1.0});
    case TestFunction::kFriedman2:
    case TestFunction::kFriedman3:
      return {{0.0, 100.0}, {40.0 * pi, 560.0 * pi}, {0.0, 1.0}, {1.0, 11.0}};
  }
  return {};
}

/// Exact test-function value. Domains are closed; points outside are rejected.
inline double eval_test_function(TestFunction f, std::span<const double> x) {
  const auto dom = domain(f, f == TestFunction::kFriedman1 ? std::max<int>(5, static_cast<int>(x.size())) : 10);
  if (x.size() != dom.size()) throw InputError("test function called with the wrong dimension");
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (!(dom[j].lower <= x[j] && x[j] <= dom[j].upper)) {
      throw InputError("test function input outside its domain");
    }
  }
  using std::numbers::pi;
  switch (f) {
    case TestFunction::kRadial: {
      const double r2 = (x[0] - 0.5) * (x[0] - 0.5) + (x[1] - 0.5) * (x[1] - 0.5);
      return 24.234 * (r2 * (0.75 - r2));
    }
    case TestFunction::kComplex:
      return 1.9 * (1.35 + std::exp(x[0]) * std::sin(13.0 * (x[0] - 0.6) * (x[0] - 0.6)) *
                               std::exp(-x[1]) * std::sin(7.0 * x[1]));
    case TestFunction::kNonsmooth: {
      // R1 = {x2 >= -0.6 x1 + 0.75}; R2 is its complement in the unit square.
      if (x[1] >= -0.6 * x[0] + 0.75) return 0.2 + x[0] * x[0] + 0.1 * x[1];
      return 0.7 + 0.01 * std::pow(std::abs(4.0 * x[0] + 10.0 * x[1] - 9.0), 1.5);
    }
    case TestFunction::kFriedman1:
      return 10.0 * std::sin(pi * x[0] * x[1]) + 20.0 * (x[2] - 0.5) * (x[2] - 0.5) + 10.0 * x[3] + 5.0 * x[4];
    case TestFunction::kFriedman2: {
      const double t = x[1] * x[2] - 1.0 / (x[1] * x[3]);
      return std::sqrt(x[0] * x[0] + t * t);
    }
    case TestFunction::kFriedman3:
      return std::atan((x[1] * x[2] - 1.0 / (x[1] * x[3])) / x[0]);
  }
  return 0.0;
}

/// sigma = sd(f) / rsnr with the sample (n - 1) standard deviation.
inline double rsnr_sigma(std::span<const double> f_values, double rsnr) {
  if (!(rsnr > 0.0)) throw InputError("rsnr must be positive");
  if (f_values.size() < 2) throw InputError("rsnr_sigma needs at least two signal values");
  double mean = 0.0;
  for (double v : f_values) mean += v;
  mean /= static_cast<double>(f_values.size());
  double ss = 0.0;
  for (double v : f_values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(f_values.size() - 1));
  if (!(sd > 0.0)) throw InputError("signal is constant: rsnr is undefined");
  return sd / rsnr;
}

struct SyntheticSpec {
  TestFunction function = TestFunction::kRadial;
  int n_train = 900;
  int n_test = 2500;
  double rsnr = 5.0;
  Design design = Design::kGrid;
  int grid_side = 30;
  int p = 10;  // Friedman 1 only
  std::uint64_t seed = 1;

  void validate() const {
    if (!(rsnr > 0.0)) throw ConfigError("rsnr must be positive");
    if (design == Design::kGrid && !is_surface(function)) {
      throw ConfigError("grid designs exist only for the two-dimensional surfaces");
    }
    if (design == Design::kGrid && grid_side < 2) throw ConfigError("grid side must be >= 2");
    if (design == Design::kUniform && n_train < 2) throw ConfigError("n_train must be >= 2");
    if (n_test < 1) throw ConfigError("n_test must be >= 1");
  }
};

/// The designs used for each function family: surfaces on a 30x30 grid with
/// 2500 uniform test points; Friedman functions with 250 / 1000 uniform draws.
inline SyntheticSpec standard_spec(TestFunction f, double rsnr, std::uint64_t seed) {
  SyntheticSpec s;
  s.function = f;
  s.rsnr = rsnr;
  s.seed = seed;
  if (is_surface(f)) {
    s.design = Design::kGrid;
    s.grid_side = 30;
    s.n_train = 900;
    s.n_test = 2500;
  } else {
    s.design = Design::kUniform;
    s.n_train = 250;
    s.n_test = 1000;
  }
  return s;
}

struct SyntheticData {
  Dataset train;  // noisy response
  Dataset test;   // noiseless f as response
  Vector train_signal;
  double sigma;
};

namespace detail {

inline Matrix uniform_design(const std::vector<Interval>& dom, int n, Rng& rng) {
  Matrix X(n, static_cast<Eigen::Index>(dom.size()));
  for (int i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dom.size(); ++j) {
      X(i, static_cast<Eigen::Index>(j)) = draw_uniform(rng, dom[j].lower, dom[j].upper);
    }
  }
  return X;
}

inline Vector evaluate_rows(TestFunction f, const Matrix& X) {
  Vector out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    out[i] = eval_test_function(f, {X.data() + i * X.cols(), static_cast<std::size_t>(X.cols())});
  }
  return out;
}

}  // namespace detail

/// Training set with Gaussian noise at the requested RSNR and a noiseless test
/// set. Deterministic given the seed; training and test points come from
/// separate stretches of one generator.
inline SyntheticData generate_dataset(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const auto dom = domain(spec.function, spec.p);
  Matrix Xtrain;
  if (spec.design == Design::kGrid) {
    const int m = spec.grid_side;
    Xtrain.resize(m * m, 2);
    for (int a = 0; a < m; ++a) {
      for (int b = 0; b < m; ++b) {
        Xtrain(a * m + b, 0) = static_cast<double>(a) / (m - 1);
        Xtrain(a * m + b, 1) = static_cast<double>(b) / (m - 1);
      }
    }
  } else {
    Xtrain = detail::uniform_design(dom, spec.n_train, rng);
  }
  const Matrix Xtest = detail::uniform_design(dom, spec.n_test, rng);

  Vector signal = detail::evaluate_rows(spec.function, Xtrain);
  const double sigma = rsnr_sigma({signal.data(), static_cast<std::size_t>(signal.size())}, spec.rsnr);
  Vector y = signal;
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += sigma * draw_normal(rng);

  Vector truth = detail::evaluate_rows(spec.function, Xtest);
  return {Dataset(Xtrain, std::move(y)), Dataset(Xtest, std::move(truth)), std::move(signal), sigma};
}

/// Hyperparameters tuned per function on replicates disjoint from the
/// acceptance seeds. Schedule, seed and the probit block come from `base`.
inline Hyperparams preset_hyper(TestFunction f, Hyperparams base = {}) {
  Hyperparams h = base;
  h.phi.reset();
  h.phi_rule = PhiRule::kVariance;
  h.birth_coefficient = BirthCoefficient::kPrior;
  h.knot_prior = KnotPrior::kProposal;
  h.p_birth = h.p_death = h.p_relocate = 1.0 / 3.0;
  h.k_max = 2;
  switch (f) {
    case TestFunction::kRadial:
    case TestFunction::kComplex:
      h.degrees = {2};
      h.expansion = 0.1;
      break;
    case TestFunction::kNonsmooth:
      h.degrees = {0, 1};
      h.expansion = 0.1;
      break;
    case TestFunction::kFriedman1:
    case TestFunction::kFriedman3:
      h.degrees = {3};
      h.expansion = 1.0;
      h.phi = 6.0;
      h.birth_coefficient = BirthCoefficient::kConditional;
      h.p_birth = h.p_death = 0.45;
      h.p_relocate = 0.1;
      break;
    case TestFunction::kFriedman2:
      h.degrees = {2};
      h.expansion = 2.0;
      h.phi_rule = PhiRule::kHalfRange;
      h.birth_coefficient = BirthCoefficient::kConditional;
      h.p_birth = h.p_death = 0.45;
      h.p_relocate = 0.1;
      break;
  }
  return h;
}

/// Two interleaving half circles with isotropic Gaussian noise; labels 0/1.
inline Dataset two_moons(int n, double noise_sd, std::uint64_t seed) {
  if (n < 2) throw ConfigError("two_moons needs n >= 2");
  using std::numbers::pi;
  Rng rng(seed);
  const int n_outer = n / 2;
  const int n_inner = n - n_outer;
  Matrix X(n, 2);
  Vector y(n);
  for (int i = 0; i < n_outer; ++i) {
    const double t = n_outer > 1 ? pi * i / (n_outer - 1) : 0.0;
    X(i, 0) = std::cos(t);
    X(i, 1) = std::sin(t);
    y[i] = 0.0;
  }
  for (int i = 0; i < n_inner; ++i) {
    const double t = n_inner > 1 ? pi * i / (n_inner - 1) : 0.0;
    X(n_outer + i, 0) = 1.0 - std::cos(t);
    X(n_outer + i, 1) = 0.5 - std::sin(t);
    y[n_outer + i] = 1.0;
  }
  for (int i = 0; i < n; ++i) {
    X(i, 0) += noise_sd * draw_normal(rng);
    X(i, 1) += noise_sd * draw_normal(rng);
  }
  return Dataset(std::move(X), std::move(y));
}

// ---------------------------------------------------------------------------
// Metrics

inline double rmse(const Vector& truth, const Vector& estimate) {
  if (truth.size() != estimate.size()) throw InputError("rmse: length mismatch");
  if (truth.size() < 1) throw InputError("rmse: empty input");
  return std::sqrt((truth - estimate).squaredNorm() / static_cast<double>(truth.size()));
}

/// Mann-Whitney AUC: fraction of (positive, negative) pairs ranked correctly,
/// ties counting one half. O(n log n) via midranks.
inline double auc(const Vector& labels, const Vector& scores) {
  if (labels.size() != scores.size()) throw InputError("auc: length mismatch");
  const auto n = static_cast<std::size_t>(labels.size());
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[static_cast<Eigen::Index>(a)] < scores[static_cast<Eigen::Index>(b)];
  });
  double rank_sum_pos = 0.0;
  double n_pos = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[static_cast<Eigen::Index>(order[j])] == scores[static_cast<Eigen::Index>(order[i])]) ++j;
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k) {
      const double label = labels[static_cast<Eigen::Index>(order[k])];
      if (label != 0.0 && label != 1.0) throw InputError("auc: labels must be 0/1");
      if (label == 1.0) {
        rank_sum_pos += midrank;
        n_pos += 1.0;
      }
    }
    i = j;
  }
  const double n_neg = static_cast<double>(n) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) throw InputError("auc needs both classes present");
  return (rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

}  // namespace mlabs::bench
