#pragma once

#include <algorithm>
#include <cmath>

#include "mlabs/chain.hpp"
#include "mlabs/distributions.hpp"
#include "mlabs/errors.hpp"
#include "mlabs/sampler.hpp"

namespace mlabs {

inline void require_binary(const Vector& y) {
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) throw InputError("class labels must be exactly 0 or 1");
  }
}

/// z_i ~ TN(f_i, 1, 0, inf) if y_i = 1, TN(f_i, 1, -inf, 0) otherwise.
inline void sample_latent(Vector& z, const Vector& y, const Vector& f, Rng& rng) {
  if (z.size() != y.size() || f.size() != y.size()) throw InputError("latent update length mismatch");
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    z[i] = draw_signed_truncated_normal(rng, f[i], y[i] > 0.5);
  }
}

/// tau ~ Ga(a_tau + J/2, b_tau + sum beta_j^2 / 2).
inline double gibbs_tau(std::span<const double> betas, double a_tau, double b_tau, Rng& rng) {
  double ss = 0.0;
  for (double b : betas) ss += b * b;
  return draw_gamma(rng, a_tau + 0.5 * static_cast<double>(betas.size()), b_tau + 0.5 * ss);
}

/// Latent-scale intercept Phi^{-1}(mean(y)), with the class rate clamped to
/// [0.01, 0.99] so that single-class data stays finite.
inline double probit_intercept(const Vector& y) {
  const double rate = std::clamp(y.mean(), 0.01, 0.99);
  return normal_quantile(rate);
}

/// Sampler setup for the probit model. With `latent_updates` off the latent
/// utilities stay at their initial values.
inline SamplerSetup probit_setup(const Dataset& data, const Hyperparams& hyper, bool latent_updates = true) {
  require_binary(data.y());
  SamplerSetup setup;
  setup.intercept = probit_intercept(data.y());
  setup.phi = std::sqrt(hyper.b_tau / hyper.a_tau);
  setup.fixed_sigma2 = 1.0;
  setup.tau_scale = true;
  setup.latent_probit = latent_updates;
  // Start latent utilities at +-1 around zero on the side of each label.
  Vector z(data.n());
  for (int i = 0; i < data.n(); ++i) z[i] = data.y()[i] > 0.5 ? 1.0 : -1.0;
  setup.initial_response = std::move(z);
  return setup;
}

inline Chain run_probit_chain(const Dataset& data, const Hyperparams& hyper) {
  hyper.validate();
  Sampler sampler(data, hyper, probit_setup(data, hyper));
  return sampler.run(Link::kProbit);
}

}  // namespace mlabs
