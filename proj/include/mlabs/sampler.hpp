#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include <Eigen/Cholesky>

#include "mlabs/chain.hpp"
#include "mlabs/dataset.hpp"
#include "mlabs/distributions.hpp"
#include "mlabs/errors.hpp"
#include "mlabs/hyperparams.hpp"
#include "mlabs/knots.hpp"
#include "mlabs/model.hpp"
#include "mlabs/tensor_basis.hpp"

namespace mlabs {

/// How the shared sampler core treats noise and coefficient scale.
struct SamplerSetup {
  double intercept = 0.0;
  double phi = 1.0;
  // Regression estimates sigma2; probit pins it at 1.
  std::optional<double> fixed_sigma2;
  // Probit: coefficient precision tau ~ Ga(a_tau, b_tau) replaces phi.
  bool tau_scale = false;
  // Probit: resample latent utilities every iteration.
  bool latent_probit = false;
  // Starting values; defaults are derived from the data and hyperparameters.
  std::optional<double> initial_sigma2;
  std::optional<Vector> initial_response;
};

/// A proposed structural move, not yet accepted.
struct MoveProposal {
  MoveKind kind = MoveKind::kBirth;
  bool feasible = false;  // false: the move is skipped and counted as rejected
  int index = -1;         // atom removed or relocated
  BasisAtom atom;         // new atom (birth) or new structure (relocate)
  Vector column;          // design column of `atom`
  double log_ratio = -INFINITY;
  int proposed_J = 0;
};

/// Reversible-jump sampler over tensor-product B-spline atoms.
///
/// One instance owns one chain: its state, its RNG, and the design caches
/// (columns, Gram matrix X'X, X'(y - beta_0), residuals), which are updated
/// incrementally by every accepted move and can be rebuilt from scratch.
class Sampler {
 public:
  Sampler(const Dataset& data, const Hyperparams& hyper, SamplerSetup setup)
      : data_(data),
        hyper_(hyper),
        setup_(std::move(setup)),
        prior_(data, hyper, setup_.phi),
        rng_(hyper.seed) {
    hyper_.validate();
    response_ = setup_.initial_response ? *setup_.initial_response : data.y();
    if (response_.size() != data.y().size()) throw InputError("initial response has the wrong length");
    state_.intercept = setup_.intercept;
    state_.levy_mass = hyper_.a_gamma / hyper_.b_gamma;
    if (setup_.fixed_sigma2) {
      state_.sigma2 = *setup_.fixed_sigma2;
    } else if (setup_.initial_sigma2) {
      state_.sigma2 = *setup_.initial_sigma2;
    } else {
      const double var = (response_.array() - response_.mean()).square().mean();
      state_.sigma2 = var > 0.0 ? var : 1.0;
    }
    if (setup_.tau_scale) state_.tau = hyper_.a_tau / hyper_.b_tau;
    rebuild_caches();
  }

  const ModelState& state() const { return state_; }
  const Dataset& data() const { return data_; }
  const Hyperparams& hyper() const { return hyper_; }
  const PriorContext& prior() const { return prior_; }
  const Vector& response() const { return response_; }
  const Vector& residuals() const { return resid_; }
  const std::vector<Vector>& columns() const { return columns_; }
  const Eigen::MatrixXd& gram() const { return gram_; }
  const Vector& cross() const { return xty_; }
  Rng& rng() { return rng_; }

  double sse() const { return resid_.squaredNorm(); }

  /// Current coefficient variance (phi^2, or 1/tau for probit).
  double coef_variance() const { return state_.tau ? 1.0 / *state_.tau : setup_.phi * setup_.phi; }

  /// Replaces the working response (probit latent utilities) and refreshes
  /// the caches that depend on it.
  void set_response(Vector y) {
    if (y.size() != response_.size()) throw InputError("response length mismatch");
    response_ = std::move(y);
    refresh_response_caches();
  }

  /// Replaces the chain state (intercept included) and rebuilds the caches.
  void set_state(ModelState state) {
    for (const auto& atom : state.atoms) {
      if (atom.structure.max_variable() >= data_.p()) throw InputError("atom references a missing predictor");
    }
    if (setup_.tau_scale != state.tau.has_value()) throw InputError("tau must be set exactly for tau-scaled chains");
    state_ = std::move(state);
    rebuild_caches();
  }

  /// Recomputes every cache from the current state.
  void rebuild_caches() {
    const int J = state_.J();
    columns_.clear();
    for (const auto& atom : state_.atoms) columns_.push_back(design_column(atom, data_.X()));
    gram_.resize(J, J);
    for (int a = 0; a < J; ++a) {
      for (int b = a; b < J; ++b) {
        gram_(a, b) = gram_(b, a) = columns_[static_cast<std::size_t>(a)].dot(columns_[static_cast<std::size_t>(b)]);
      }
    }
    refresh_response_caches();
  }

  // -------------------------------------------------------------------------
  // Proposals

  /// Structure (K, nu, c, xi) drawn from the structural proposal.
  AtomStructure propose_structure() {
    const int p = data_.p();
    std::uniform_int_distribution<int> pick_k(1, prior_.max_order());
    const int K = pick_k(rng_);
    std::vector<int> all(static_cast<std::size_t>(p));
    std::iota(all.begin(), all.end(), 0);
    std::vector<int> vars;
    vars.reserve(static_cast<std::size_t>(K));
    std::sample(all.begin(), all.end(), std::back_inserter(vars), K, rng_);
    std::uniform_int_distribution<std::size_t> pick_degree(0, hyper_.degrees.size() - 1);
    std::vector<AtomFactor> factors;
    factors.reserve(vars.size());
    for (int v : vars) {
      const int degree = hyper_.degrees[pick_degree(rng_)];
      factors.push_back({v, prior_.knots(v).propose(degree, rng_)});
    }
    return AtomStructure(std::move(factors));
  }

  /// A full atom: structure from the proposal and coefficient from N(0, phi^2).
  BasisAtom propose_atom() {
    AtomStructure s = propose_structure();
    const double beta = std::sqrt(coef_variance()) * draw_normal(rng_);
    return {std::move(s), beta};
  }

  MoveProposal propose_birth() {
    MoveProposal prop;
    prop.kind = MoveKind::kBirth;
    prop.proposed_J = state_.J() + 1;
    AtomStructure s;
    try {
      s = propose_structure();
    } catch (const ProposalError&) {
      return prop;
    }
    prop.column = design_column(s, data_.X());
    const double cc = prop.column.squaredNorm();
    const double cr = prop.column.dot(resid_);

    double beta = 0.0;
    double log_beta_term = 0.0;
    if (hyper_.birth_coefficient == BirthCoefficient::kConditional && !hyper_.likelihood_off) {
      const auto [mean, var] = conditional_coefficient(cc, cr);
      beta = mean + std::sqrt(var) * draw_normal(rng_);
      log_beta_term = log_normal_pdf(beta, 0.0, coef_variance()) - log_normal_pdf(beta, mean, var);
    } else {
      beta = std::sqrt(coef_variance()) * draw_normal(rng_);
    }
    prop.atom = {std::move(s), beta};

    const double delta_sse = -2.0 * beta * cr + beta * beta * cc;
    prop.log_ratio = log_likelihood_change(delta_sse) + std::log(state_.levy_mass) -
                     std::log(static_cast<double>(state_.J() + 1)) + std::log(hyper_.p_death) -
                     std::log(hyper_.p_birth) + knot_term(prop.atom.structure) + log_beta_term;
    prop.feasible = true;
    return prop;
  }

  MoveProposal propose_death() {
    MoveProposal prop;
    prop.kind = MoveKind::kDeath;
    const int J = state_.J();
    prop.proposed_J = std::max(J - 1, 0);
    if (J == 0) return prop;
    std::uniform_int_distribution<int> pick(0, J - 1);
    prop.index = pick(rng_);
    const auto j = static_cast<std::size_t>(prop.index);
    const BasisAtom& atom = state_.atoms[j];
    const Vector& col = columns_[j];
    const double beta = atom.coefficient;
    const double cc = gram_(prop.index, prop.index);
    const double cr = col.dot(resid_);

    double log_beta_term = 0.0;
    if (hyper_.birth_coefficient == BirthCoefficient::kConditional && !hyper_.likelihood_off) {
      // Reverse birth draws beta from its conditional given the residual
      // without this atom.
      const auto [mean, var] = conditional_coefficient(cc, cr + beta * cc);
      log_beta_term = log_normal_pdf(beta, mean, var) - log_normal_pdf(beta, 0.0, coef_variance());
    }
    const double delta_sse = 2.0 * beta * cr + beta * beta * cc;
    prop.log_ratio = log_likelihood_change(delta_sse) + std::log(static_cast<double>(J)) -
                     std::log(state_.levy_mass) + std::log(hyper_.p_birth) - std::log(hyper_.p_death) -
                     knot_term(atom.structure) + log_beta_term;
    prop.feasible = true;
    return prop;
  }

  MoveProposal propose_relocate() {
    MoveProposal prop;
    prop.kind = MoveKind::kRelocate;
    const int J = state_.J();
    prop.proposed_J = J;
    if (J == 0) return prop;
    std::uniform_int_distribution<int> pick(0, J - 1);
    prop.index = pick(rng_);
    const auto j = static_cast<std::size_t>(prop.index);
    AtomStructure s;
    try {
      s = propose_structure();
    } catch (const ProposalError&) {
      return prop;
    }
    const BasisAtom& old = state_.atoms[j];
    prop.column = design_column(s, data_.X());
    prop.atom = {std::move(s), old.coefficient};
    // resid* = resid + beta (c_old - c_new)
    const Vector diff = columns_[j] - prop.column;
    const double beta = old.coefficient;
    const double delta_sse = 2.0 * beta * diff.dot(resid_) + beta * beta * diff.squaredNorm();
    prop.log_ratio = log_likelihood_change(delta_sse) + knot_term(prop.atom.structure) - knot_term(old.structure);
    prop.feasible = true;
    return prop;
  }

  /// The state that `prop` would produce if accepted.
  ModelState proposed_state(const MoveProposal& prop) const {
    ModelState next = state_;
    if (!prop.feasible) return next;
    switch (prop.kind) {
      case MoveKind::kBirth:
        next.atoms.push_back(prop.atom);
        break;
      case MoveKind::kDeath:
        next.atoms.erase(next.atoms.begin() + prop.index);
        break;
      case MoveKind::kRelocate:
        next.atoms[static_cast<std::size_t>(prop.index)] = prop.atom;
        break;
    }
    return next;
  }

  /// Metropolis-Hastings accept/reject of a proposal; commits on acceptance.
  MoveOutcome decide(MoveProposal prop) {
    MoveOutcome out{prop.kind, false, prop.log_ratio, prop.proposed_J};
    ++diagnostics_.proposed[static_cast<std::size_t>(prop.kind)];
    if (!prop.feasible || std::isnan(prop.log_ratio)) {
      out.log_accept_ratio = -INFINITY;
      return out;
    }
    const double u = draw_uniform(rng_, 0.0, 1.0);
    if (std::log(u) < prop.log_ratio) {
      commit(std::move(prop));
      out.accepted = true;
      ++diagnostics_.accepted[static_cast<std::size_t>(out.kind)];
    }
    return out;
  }

  MoveOutcome birth_move() { return decide(propose_birth()); }
  MoveOutcome death_move() { return decide(propose_death()); }
  MoveOutcome relocate_move() { return decide(propose_relocate()); }

  /// Chooses birth/death/relocate by (p_b, p_d, p_w) and runs it.
  MoveOutcome structural_move() {
    const double u = draw_uniform(rng_, 0.0, 1.0);
    if (u < hyper_.p_birth) return birth_move();
    if (u < hyper_.p_birth + hyper_.p_death) return death_move();
    return relocate_move();
  }

  // -------------------------------------------------------------------------
  // Conjugate updates

  /// Joint draw of all coefficients from their Gaussian full conditional.
  void gibbs_betas() {
    const int J = state_.J();
    if (J == 0) return;
    const double prior_prec = 1.0 / coef_variance();
    Vector draw(J);
    if (hyper_.likelihood_off) {
      for (int j = 0; j < J; ++j) draw[j] = draw_normal(rng_) / std::sqrt(prior_prec);
    } else {
      Eigen::MatrixXd Q = gram_ / state_.sigma2;
      Q.diagonal().array() += prior_prec;
      const Eigen::LLT<Eigen::MatrixXd> llt(Q);
      const Vector mean = llt.solve(xty_ / state_.sigma2);
      Vector z(J);
      for (int j = 0; j < J; ++j) z[j] = draw_normal(rng_);
      draw = mean + llt.matrixU().solve(z);
    }
    for (int j = 0; j < J; ++j) state_.atoms[static_cast<std::size_t>(j)].coefficient = draw[j];
    refresh_residuals();
  }

  /// sigma2 ~ IG((r + n)/2, (rR + SSE)/2); no-op when sigma2 is pinned.
  void gibbs_sigma2() {
    if (setup_.fixed_sigma2) return;
    double shape = 0.5 * hyper_.r;
    double scale = 0.5 * hyper_.r * hyper_.R;
    if (!hyper_.likelihood_off) {
      shape += 0.5 * data_.n();
      scale += 0.5 * sse();
    }
    state_.sigma2 = draw_inv_gamma(rng_, shape, scale);
  }

  /// M ~ Ga(a_gamma + J, b_gamma + 1).
  void gibbs_M() { state_.levy_mass = draw_gamma(rng_, hyper_.a_gamma + state_.J(), hyper_.b_gamma + 1.0); }

  /// tau ~ Ga(a_tau + J/2, b_tau + sum beta^2 / 2).
  void gibbs_tau() {
    if (!state_.tau) return;
    double ss = 0.0;
    for (const auto& a : state_.atoms) ss += a.coefficient * a.coefficient;
    state_.tau = draw_gamma(rng_, hyper_.a_tau + 0.5 * state_.J(), hyper_.b_tau + 0.5 * ss);
  }

  /// Probit latent step: z_i ~ N(f(x_i), 1) truncated to the side of y_i.
  void sample_latent() {
    const Vector f = response_ - resid_;
    Vector z(f.size());
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      z[i] = draw_signed_truncated_normal(rng_, f[i], data_.y()[i] > 0.5);
    }
    set_response(std::move(z));
  }

  /// One full iteration: latent step (probit), structural move, then the
  /// conjugate updates.
  MoveOutcome iterate() {
    if (setup_.latent_probit) sample_latent();
    MoveOutcome out = structural_move();
    gibbs_betas();
    gibbs_sigma2();
    gibbs_tau();
    gibbs_M();
    return out;
  }

  const ChainDiagnostics& diagnostics() const { return diagnostics_; }

  /// Runs the configured schedule and returns the retained samples.
  Chain run(Link link) {
    Chain chain;
    chain.link = link;
    chain.p = data_.p();
    const auto keep = static_cast<std::size_t>(hyper_.retained_samples());
    chain.samples.reserve(keep);
    diagnostics_.J_trace.reserve(static_cast<std::size_t>(hyper_.n_iter));
    diagnostics_.sigma2_trace.reserve(static_cast<std::size_t>(hyper_.n_iter));
    diagnostics_.M_trace.reserve(static_cast<std::size_t>(hyper_.n_iter));
    for (int t = 1; t <= hyper_.n_iter; ++t) {
      iterate();
      diagnostics_.J_trace.push_back(state_.J());
      diagnostics_.sigma2_trace.push_back(state_.sigma2);
      diagnostics_.M_trace.push_back(state_.levy_mass);
      if (t > hyper_.burn_in && (t - hyper_.burn_in) % hyper_.thin == 0 && chain.samples.size() < keep) {
        chain.samples.push_back(state_);
      }
    }
    chain.diagnostics = diagnostics_;
    return chain;
  }

 private:
  struct Conditional {
    double mean;
    double var;
  };

  // Conditional of a single coefficient with column norm cc and column-residual
  // product cr (residual excluding that coefficient's contribution).
  Conditional conditional_coefficient(double cc, double cr) const {
    const double prec = cc / state_.sigma2 + 1.0 / coef_variance();
    return {(cr / state_.sigma2) / prec, 1.0 / prec};
  }

  double log_likelihood_change(double delta_sse) const {
    return hyper_.likelihood_off ? 0.0 : -0.5 * delta_sse / state_.sigma2;
  }

  // sum over factors of log prior(xi) - log proposal(xi). Zero when the knot
  // prior is the proposal scheme itself.
  double knot_term(const AtomStructure& s) const {
    if (hyper_.knot_prior == KnotPrior::kProposal) return 0.0;
    double t = 0.0;
    for (const auto& f : s.factors()) {
      const auto& kp = prior_.knots(f.variable);
      t += kp.log_prior(f.knots, hyper_.knot_prior) - kp.log_density(f.knots);
    }
    return t;
  }

  void commit(MoveProposal prop) {
    const int J = state_.J();
    switch (prop.kind) {
      case MoveKind::kBirth: {
        Eigen::MatrixXd g(J + 1, J + 1);
        g.topLeftCorner(J, J) = gram_;
        for (int a = 0; a < J; ++a) {
          g(a, J) = g(J, a) = columns_[static_cast<std::size_t>(a)].dot(prop.column);
        }
        g(J, J) = prop.column.squaredNorm();
        gram_ = std::move(g);
        xty_.conservativeResize(J + 1);
        xty_[J] = prop.column.dot(centered_response());
        resid_ -= prop.atom.coefficient * prop.column;
        state_.atoms.push_back(std::move(prop.atom));
        columns_.push_back(std::move(prop.column));
        break;
      }
      case MoveKind::kDeath: {
        const int j = prop.index;
        const auto ju = static_cast<std::size_t>(j);
        resid_ += state_.atoms[ju].coefficient * columns_[ju];
        state_.atoms.erase(state_.atoms.begin() + j);
        columns_.erase(columns_.begin() + j);
        remove_index(j);
        break;
      }
      case MoveKind::kRelocate: {
        const int j = prop.index;
        const auto ju = static_cast<std::size_t>(j);
        resid_ += prop.atom.coefficient * (columns_[ju] - prop.column);
        for (int a = 0; a < J; ++a) {
          if (a == j) continue;
          gram_(a, j) = gram_(j, a) = columns_[static_cast<std::size_t>(a)].dot(prop.column);
        }
        gram_(j, j) = prop.column.squaredNorm();
        xty_[j] = prop.column.dot(centered_response());
        state_.atoms[ju] = std::move(prop.atom);
        columns_[ju] = std::move(prop.column);
        break;
      }
    }
  }

  void remove_index(int j) {
    const int J = static_cast<int>(gram_.rows());
    Eigen::MatrixXd g(J - 1, J - 1);
    Vector x(J - 1);
    for (int a = 0, ra = 0; a < J; ++a) {
      if (a == j) continue;
      x[ra] = xty_[a];
      for (int b = 0, rb = 0; b < J; ++b) {
        if (b == j) continue;
        g(ra, rb++) = gram_(a, b);
      }
      ++ra;
    }
    gram_ = std::move(g);
    xty_ = std::move(x);
  }

  Vector centered_response() const { return response_.array() - state_.intercept; }

  void refresh_response_caches() {
    const Vector yc = centered_response();
    xty_.resize(state_.J());
    for (int j = 0; j < state_.J(); ++j) xty_[j] = columns_[static_cast<std::size_t>(j)].dot(yc);
    refresh_residuals();
  }

  void refresh_residuals() {
    resid_ = centered_response();
    for (int j = 0; j < state_.J(); ++j) {
      resid_ -= state_.atoms[static_cast<std::size_t>(j)].coefficient * columns_[static_cast<std::size_t>(j)];
    }
  }

  const Dataset& data_;
  Hyperparams hyper_;
  SamplerSetup setup_;
  PriorContext prior_;
  Rng rng_;
  ModelState state_;
  Vector response_;
  std::vector<Vector> columns_;
  Eigen::MatrixXd gram_;
  Vector xty_;
  Vector resid_;
  ChainDiagnostics diagnostics_;
};

/// Regression chain: beta_0 = mean(y), phi per rule, sigma2 estimated.
inline Chain run_chain(const Dataset& data, const Hyperparams& hyper) {
  hyper.validate();
  const FitDefaults d = fit_defaults(data, hyper);
  SamplerSetup setup;
  setup.intercept = d.intercept;
  setup.phi = d.phi;
  Sampler sampler(data, hyper, std::move(setup));
  return sampler.run(Link::kIdentity);
}

}  // namespace mlabs
