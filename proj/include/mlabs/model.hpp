#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "mlabs/dataset.hpp"
#include "mlabs/distributions.hpp"
#include "mlabs/errors.hpp"
#include "mlabs/hyperparams.hpp"
#include "mlabs/knots.hpp"
#include "mlabs/tensor_basis.hpp"

namespace mlabs {

/// Full parameter point of the chain.
struct ModelState {
  double intercept = 0.0;  // beta_0, fixed
  std::vector<BasisAtom> atoms;
  double sigma2 = 1.0;
  double levy_mass = 1.0;  // M
  // Coefficient precision; present only for the probit model, where it
  // replaces the fixed phi and sigma2 is pinned at 1.
  std::optional<double> tau;

  int J() const { return static_cast<int>(atoms.size()); }
  bool operator==(const ModelState&) const = default;
};

/// f(x) = beta_0 + sum_j beta_j B_j(x).
inline double mean_function(const ModelState& state, std::span<const double> x) {
  double f = state.intercept;
  for (const auto& atom : state.atoms) {
    f += atom.coefficient * eval_atom(atom, x);
  }
  return f;
}

inline Vector mean_function(const ModelState& state, const Matrix& X) {
  Vector f = Vector::Constant(X.rows(), state.intercept);
  for (const auto& atom : state.atoms) {
    f += atom.coefficient * design_column(atom, X);
  }
  return f;
}

inline double log_likelihood(const ModelState& state, const Dataset& data) {
  const Vector resid = data.y() - mean_function(state, data.X());
  const double n = data.n();
  return -0.5 * n * (kLogTwoPi + std::log(state.sigma2)) - 0.5 * resid.squaredNorm() / state.sigma2;
}

/// Intercept and coefficient scale derived from the response.
struct FitDefaults {
  double intercept;
  double phi;
};

/// beta_0 = mean(y); phi per rule (population variance, or half the range).
inline FitDefaults fit_defaults(const Vector& y, const Hyperparams& hyper) {
  if (y.size() < 2) throw InputError("fit_defaults needs at least two observations");
  const double mean = y.mean();
  if (hyper.phi) return {mean, *hyper.phi};
  double phi = 0.0;
  if (hyper.phi_rule == PhiRule::kVariance) {
    phi = (y.array() - mean).square().mean();
  } else {
    phi = 0.5 * (y.maxCoeff() - y.minCoeff());
  }
  if (!(phi > 0.0)) throw ConfigError("response is constant: coefficient scale phi would be 0");
  return {mean, phi};
}

inline FitDefaults fit_defaults(const Dataset& data, const Hyperparams& hyper) {
  return fit_defaults(data.y(), hyper);
}

/// Data-dependent pieces of the prior: per-column knot proposals and phi.
class PriorContext {
 public:
  PriorContext(const Dataset& data, const Hyperparams& hyper, double phi)
      : hyper_(hyper), phi_(phi), p_(data.p()) {
    knots_.reserve(static_cast<std::size_t>(p_));
    std::vector<double> column(static_cast<std::size_t>(data.n()));
    for (int j = 0; j < p_; ++j) {
      for (int i = 0; i < data.n(); ++i) column[static_cast<std::size_t>(i)] = data.X()(i, j);
      knots_.emplace_back(column, hyper.expansion);
    }
  }

  const Hyperparams& hyper() const { return hyper_; }
  double phi() const { return phi_; }
  int p() const { return p_; }
  const KnotProposal& knots(int variable) const { return knots_.at(static_cast<std::size_t>(variable)); }

  /// Largest feasible interaction order; K is uniform on {1..max_order()}.
  int max_order() const { return std::min(hyper_.k_max, p_); }

  bool degree_allowed(int d) const {
    return std::find(hyper_.degrees.begin(), hyper_.degrees.end(), d) != hyper_.degrees.end();
  }

  /// log pi(K, nu, c, xi) for one atom.
  double log_structure_prior(const AtomStructure& s) const {
    const int K = s.interaction_order();
    if (K < 1 || K > hyper_.k_max || K > p_ || s.max_variable() >= p_) return -INFINITY;
    double lp = -std::log(static_cast<double>(max_order())) - log_binomial(p_, K);
    const double log_s = std::log(static_cast<double>(hyper_.degrees.size()));
    for (const auto& f : s.factors()) {
      if (!degree_allowed(f.degree())) return -INFINITY;
      lp += -log_s + knots(f.variable).log_prior(f.knots, hyper_.knot_prior);
    }
    return lp;
  }

  /// log density of the structure proposal (prior for K, nu, c; the anchor
  /// scheme for the knots).
  double log_structure_proposal(const AtomStructure& s) const {
    const int K = s.interaction_order();
    if (K < 1 || K > hyper_.k_max || K > p_ || s.max_variable() >= p_) return -INFINITY;
    double lq = -std::log(static_cast<double>(max_order())) - log_binomial(p_, K);
    const double log_s = std::log(static_cast<double>(hyper_.degrees.size()));
    for (const auto& f : s.factors()) {
      if (!degree_allowed(f.degree())) return -INFINITY;
      lq += -log_s + knots(f.variable).log_density(f.knots);
    }
    return lq;
  }

 private:
  Hyperparams hyper_;
  double phi_;
  int p_;
  std::vector<KnotProposal> knots_;
};

/// Sum of the log prior densities/masses of every random component.
inline double log_prior(const ModelState& state, const PriorContext& ctx) {
  const auto& h = ctx.hyper();
  const int J = state.J();
  double lp = log_poisson_pmf(J, state.levy_mass) + log_gamma_pdf(state.levy_mass, h.a_gamma, h.b_gamma);
  double coef_var = ctx.phi() * ctx.phi();
  if (state.tau) {
    coef_var = 1.0 / *state.tau;
    lp += log_gamma_pdf(*state.tau, h.a_tau, h.b_tau);
  } else {
    lp += log_inv_gamma_pdf(state.sigma2, 0.5 * h.r, 0.5 * h.r * h.R);
  }
  for (const auto& atom : state.atoms) {
    lp += log_normal_pdf(atom.coefficient, 0.0, coef_var);
    lp += ctx.log_structure_prior(atom.structure);
  }
  return lp;
}

inline double log_prior(const ModelState& state, const Hyperparams& hyper, const Dataset& data) {
  return log_prior(state, PriorContext(data, hyper, fit_defaults(data, hyper).phi));
}

}  // namespace mlabs
