#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mlabs/errors.hpp"

namespace mlabs {

/// How the coefficient prior scale phi is derived from the response.
enum class PhiRule { kVariance, kHalfRange };

/// Prior on knot sequences.
///  kProposal: knots follow the data-anchored proposal scheme itself, so the
///             knot term cancels from every acceptance ratio.
///  kUniform:  ordered-uniform on the expanded range for even degrees; for odd
///             degrees the middle knot sits on a data point (the only measure
///             the proposal can reach) and the outer knots are uniform given it.
enum class KnotPrior { kProposal, kUniform };

/// Where a birth move draws the new coefficient from.
///  kPrior:       N(0, phi^2).
///  kConditional: the Gaussian conditional of the new coefficient given the
///                current residuals and sigma^2.
enum class BirthCoefficient { kPrior, kConditional };

struct Hyperparams {
  std::vector<int> degrees{0, 1, 2, 3};  // S
  int k_max = 2;
  double expansion = 0.1;  // E

  double a_gamma = 5.0;
  double b_gamma = 1.0;
  double r = 0.01;
  double R = 0.01;

  PhiRule phi_rule = PhiRule::kVariance;
  std::optional<double> phi;  // explicit scale overrides the rule

  double p_birth = 1.0 / 3.0;
  double p_death = 1.0 / 3.0;
  double p_relocate = 1.0 / 3.0;

  int n_iter = 100000;
  int burn_in = 50000;
  int thin = 50;
  std::uint64_t seed = 1;

  KnotPrior knot_prior = KnotPrior::kProposal;
  BirthCoefficient birth_coefficient = BirthCoefficient::kPrior;

  // Probit coefficient precision prior tau ~ Ga(a_tau, b_tau).
  double a_tau = 1.0;
  double b_tau = 1.0;

  // Test mode: the likelihood is dropped from every update, so the chain
  // targets the prior.
  bool likelihood_off = false;

  int retained_samples() const { return (n_iter - burn_in) / thin; }

  void validate() const {
    if (degrees.empty()) throw ConfigError("degree set S must be nonempty");
    for (int d : degrees) {
      if (d < 0 || d > 3) throw ConfigError("degrees in S must lie in {0,1,2,3}");
    }
    auto sorted = degrees;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ConfigError("degree set S has duplicates");
    }
    if (k_max < 1) throw ConfigError("K_max must be >= 1");
    if (!(expansion >= 0.0)) throw ConfigError("expansion multiplier E must be >= 0");
    if (!(a_gamma > 0 && b_gamma > 0)) throw ConfigError("a_gamma and b_gamma must be positive");
    if (!(r > 0 && R > 0)) throw ConfigError("r and R must be positive");
    if (!(a_tau > 0 && b_tau > 0)) throw ConfigError("a_tau and b_tau must be positive");
    if (phi && !(*phi > 0)) throw ConfigError("phi must be positive");
    if (p_birth <= 0 || p_death <= 0 || p_relocate < 0) {
      throw ConfigError("move probabilities must be positive (relocation may be zero)");
    }
    if (std::abs(p_birth + p_death + p_relocate - 1.0) > 1e-9) {
      throw ConfigError("move probabilities must sum to 1");
    }
    if (n_iter < 1 || burn_in < 0 || thin < 1) throw ConfigError("invalid chain schedule");
    if (burn_in >= n_iter) throw ConfigError("burn_in must be smaller than n_iter");
  }
};

}  // namespace mlabs
