#include <cmath>
#include <random>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/inverse_gamma.hpp>
#include <boost/math/distributions/negative_binomial.hpp>
#include <gtest/gtest.h>

#include "mlabs/sampler.hpp"
#include "oracle.hpp"

using namespace mlabs;

namespace {

Dataset toy(int n = 20, int p = 2, std::uint64_t seed = 3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> e(0.0, 0.1);
  Matrix X(n, p);
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) X(i, j) = u(rng);
    y[i] = std::sin(4 * X(i, 0)) + (p > 1 ? X(i, 1) : 0.0) + e(rng);
  }
  return Dataset(X, y);
}

SamplerSetup regression_setup(const Dataset& d, const Hyperparams& h) {
  const auto fd = fit_defaults(d, h);
  SamplerSetup s;
  s.intercept = fd.intercept;
  s.phi = fd.phi;
  return s;
}

Hyperparams short_run(int n_iter, int burn_in, int thin) {
  Hyperparams h;
  h.n_iter = n_iter;
  h.burn_in = burn_in;
  h.thin = thin;
  return h;
}

void expect_caches_fresh(const Sampler& s, const Dataset& d, const Hyperparams& h, const SamplerSetup& setup) {
  Sampler fresh(d, h, setup);
  fresh.set_response(s.response());
  fresh.set_state(s.state());
  ASSERT_EQ(static_cast<int>(s.columns().size()), s.state().J());
  ASSERT_EQ(s.gram().rows(), s.state().J());
  ASSERT_EQ(s.cross().size(), s.state().J());
  if (s.state().J() > 0) {
    EXPECT_LE((s.gram() - fresh.gram()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((s.cross() - fresh.cross()).cwiseAbs().maxCoeff(), 1e-10);
  }
  EXPECT_LE((s.residuals() - fresh.residuals()).cwiseAbs().maxCoeff(), 1e-10);
}

void run_oracle(Hyperparams h, int moves) {
  const Dataset d = toy();
  const SamplerSetup setup = regression_setup(d, h);
  Sampler s(d, h, setup);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::mt19937_64 pick(11);
  int checked = 0;
  for (int t = 0; t < moves; ++t) {
    const double v = u(pick);
    MoveProposal prop = v < 0.4 ? s.propose_birth() : v < 0.7 ? s.propose_death() : s.propose_relocate();
    if (prop.feasible) {
      const ModelState next = s.proposed_state(prop);
      const double expected = oracle::log_ratio(s.state(), next, prop, s.response(), d, h, setup.phi);
      if (std::isinf(expected)) {
        EXPECT_EQ(prop.log_ratio, expected);
      } else {
        EXPECT_NEAR(prop.log_ratio, expected, 1e-8) << to_string(prop.kind) << " at move " << t;
      }
      ++checked;
    }
    s.decide(std::move(prop));
    s.gibbs_betas();
    // the sigma2 prior alone overflows; it cancels from every ratio anyway
    if (!h.likelihood_off) s.gibbs_sigma2();
    s.gibbs_M();
  }
  EXPECT_GT(checked, moves / 2);
}

}  // namespace

TEST(Sampler, OracleDefaults) { run_oracle(Hyperparams{}, 300); }

TEST(Sampler, OracleUniformKnotPrior) {
  Hyperparams h;
  h.knot_prior = KnotPrior::kUniform;
  h.expansion = 0.3;
  run_oracle(h, 300);
}

TEST(Sampler, OracleConditionalBirth) {
  Hyperparams h;
  h.birth_coefficient = BirthCoefficient::kConditional;
  h.p_birth = 0.45;
  h.p_death = 0.45;
  h.p_relocate = 0.1;
  h.degrees = {1, 3};
  run_oracle(h, 300);
}

TEST(Sampler, OracleLikelihoodOff) {
  Hyperparams h;
  h.likelihood_off = true;
  h.k_max = 3;  // truncated to p = 2
  run_oracle(h, 300);
}

TEST(Sampler, FlatLikelihoodBirthRatioIsDimensionRatio) {
  const Dataset d = toy();
  Hyperparams h;
  h.likelihood_off = true;
  Sampler s(d, h, regression_setup(d, h));
  for (double M : {0.5, 3.0, 12.0}) {
    ModelState st = s.state();
    st.levy_mass = M;
    s.set_state(st);
    for (int t = 0; t < 20; ++t) {
      const int J = s.state().J();
      const auto prop = s.propose_birth();
      ASSERT_TRUE(prop.feasible);
      EXPECT_NEAR(prop.log_ratio, std::log(M / (J + 1)), 1e-12);
      s.decide(prop);
    }
    for (int t = 0; t < 10 && s.state().J() > 0; ++t) {
      const int J = s.state().J();
      const auto prop = s.propose_death();
      EXPECT_NEAR(prop.log_ratio, std::log(J / M), 1e-12);
    }
  }
}

TEST(Sampler, ZeroColumnBirthHasUnitLikelihoodRatio) {
  // Points on the anti-diagonal: an interaction atom anchored at two
  // different points often covers no point at all.
  const int n = 10;
  Matrix X(n, 2);
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = i / (n - 1.0);
    X(i, 1) = 1.0 - X(i, 0);
    y[i] = std::cos(3.0 * i);
  }
  const Dataset d(X, y);
  Hyperparams h;
  h.degrees = {0};
  h.p_birth = 0.5;
  h.p_death = 0.3;
  h.p_relocate = 0.2;
  Sampler s(d, h, regression_setup(d, h));
  int found = 0;
  for (int t = 0; t < 2000 && found < 20; ++t) {
    const auto prop = s.propose_birth();
    ASSERT_TRUE(prop.feasible);
    if (prop.column.squaredNorm() != 0.0) continue;
    ++found;
    EXPECT_NEAR(prop.log_ratio, std::log(s.state().levy_mass / 1.0) + std::log(0.3 / 0.5), 1e-12);
  }
  EXPECT_GT(found, 0);
}

TEST(Sampler, DeathAtZeroAtomsIsRejected) {
  const Dataset d = toy();
  Hyperparams h;
  Sampler s(d, h, regression_setup(d, h));
  const ModelState before = s.state();
  const auto out = s.death_move();
  EXPECT_FALSE(out.accepted);
  EXPECT_EQ(s.state(), before);
  EXPECT_FALSE(s.relocate_move().accepted);
  EXPECT_EQ(s.state(), before);
}

TEST(Sampler, IdenticalRelocationHasZeroLogRatio) {
  // Single data point inside the range pins every degree-1 knot middle; with
  // E = 0 and a three-point column the outer knots are the column extremes.
  Matrix X(3, 1);
  X << 0.0, 0.5, 1.0;
  Vector y(3);
  y << 0.0, 1.0, 0.5;
  const Dataset d(X, y);
  Hyperparams h;
  h.degrees = {1};
  h.expansion = 0.0;
  Sampler s(d, h, regression_setup(d, h));
  ModelState st = s.state();
  st.atoms.push_back({AtomStructure({{0, KnotSequence(1, {0.2, 0.5, 0.9})}}), 0.7});
  s.set_state(st);
  // The proposal redraws outer knots continuously, so compare against the
  // oracle instead and check the identical-structure case through it.
  MoveProposal prop;
  prop.kind = MoveKind::kRelocate;
  prop.feasible = true;
  prop.index = 0;
  prop.atom = st.atoms[0];
  EXPECT_EQ(oracle::log_ratio(st, s.proposed_state(prop), prop, s.response(), d, h, 1.0), 0.0);
  for (int t = 0; t < 50; ++t) {
    auto p = s.propose_relocate();
    ASSERT_TRUE(p.feasible);
    EXPECT_NEAR(p.log_ratio,
                oracle::log_ratio(s.state(), s.proposed_state(p), p, s.response(), d, h,
                                  fit_defaults(d, h).phi),
                1e-9);
    EXPECT_EQ(s.state().J(), 1);
  }
}

TEST(Sampler, IncrementalCachesMatchRebuild) {
  const Dataset d = toy(30, 3);
  Hyperparams h;
  h.k_max = 3;
  const SamplerSetup setup = regression_setup(d, h);
  Sampler s(d, h, setup);
  for (int t = 0; t < 400; ++t) {
    const int J = s.state().J();
    const auto out = s.structural_move();
    if (out.accepted && out.kind == MoveKind::kBirth) EXPECT_EQ(s.state().J(), J + 1);
    if (out.accepted && out.kind == MoveKind::kDeath) EXPECT_EQ(s.state().J(), J - 1);
    if (!out.accepted || out.kind == MoveKind::kRelocate) EXPECT_EQ(s.state().J(), J);
    if (t % 20 == 0) expect_caches_fresh(s, d, h, setup);
    s.gibbs_betas();
    s.gibbs_sigma2();
    s.gibbs_M();
  }
  expect_caches_fresh(s, d, h, setup);
}

TEST(Sampler, SameSeedSameChain) {
  const Dataset d = toy();
  const Hyperparams h = short_run(600, 300, 3);
  const Chain a = run_chain(d, h);
  const Chain b = run_chain(d, h);
  ASSERT_EQ(a.samples.size(), 100u);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_EQ(a.diagnostics.J_trace, b.diagnostics.J_trace);
  Hyperparams other = h;
  other.seed = 2;
  EXPECT_NE(run_chain(d, other).diagnostics.J_trace, a.diagnostics.J_trace);
}

TEST(Sampler, RetainedSampleCount) {
  EXPECT_EQ(short_run(100000, 50000, 50).retained_samples(), 1000);
  const Chain c = run_chain(toy(), short_run(1000, 500, 5));
  EXPECT_EQ(c.samples.size(), 100u);
  EXPECT_EQ(c.diagnostics.J_trace.size(), 1000u);
}

TEST(Sampler, InvalidScheduleIsConfigError) {
  EXPECT_THROW(run_chain(toy(), short_run(100, 100, 1)), ConfigError);
  EXPECT_THROW(run_chain(toy(), short_run(100, 10, 0)), ConfigError);
  Hyperparams h;
  h.p_birth = 0.5;
  EXPECT_THROW(h.validate(), ConfigError);
}

TEST(Sampler, DetailedBalanceBetweenZeroAndOneAtom) {
  const Dataset d = toy();
  Hyperparams h;
  h.likelihood_off = true;
  h.a_gamma = 1.0;
  h.b_gamma = 1.0;
  Sampler s(d, h, regression_setup(d, h));
  // Birth from J=0 accepts with min(1, M); death from J=1 with min(1, 1/M).
  double birth_acc = 0, birth_expect = 0, birth_var = 0;
  double death_acc = 0, death_expect = 0, death_var = 0;
  for (int t = 0; t < 200000; ++t) {
    const int J = s.state().J();
    const double M = s.state().levy_mass;
    if (J == 0) {
      const double pr = std::min(1.0, M);
      birth_acc += s.birth_move().accepted ? 1 : 0;
      birth_expect += pr;
      birth_var += pr * (1 - pr);
    } else if (J == 1) {
      const double pr = std::min(1.0, 1.0 / M);
      death_acc += s.death_move().accepted ? 1 : 0;
      death_expect += pr;
      death_var += pr * (1 - pr);
    } else {
      s.death_move();
    }
    s.gibbs_M();
  }
  ASSERT_GT(birth_var, 100);
  ASSERT_GT(death_var, 100);
  EXPECT_NEAR(birth_acc, birth_expect, 4 * std::sqrt(birth_var));
  EXPECT_NEAR(death_acc, death_expect, 4 * std::sqrt(death_var));
}

TEST(Sampler, PriorRecoveryOfJ) {
  const Dataset d = toy();
  Hyperparams h = short_run(200000, 20000, 100);
  h.likelihood_off = true;
  const SamplerSetup setup = regression_setup(d, h);
  Sampler s(d, h, setup);
  const Chain c = s.run(Link::kIdentity);
  // J marginal is Gamma-Poisson: negative binomial with r = a, success prob b/(b+1).
  const boost::math::negative_binomial nb(h.a_gamma, h.b_gamma / (h.b_gamma + 1.0));
  const int bins = 13;  // J = 0..11 and the tail
  std::vector<double> observed(bins, 0.0);
  double sum_J = 0, sum_M = 0;
  for (const auto& st : c.samples) {
    observed[static_cast<std::size_t>(std::min(st.J(), bins - 1))] += 1;
    sum_J += st.J();
    sum_M += st.levy_mass;
  }
  const double n = static_cast<double>(c.samples.size());
  EXPECT_NEAR(sum_J / n, 5.0, 0.5);
  EXPECT_NEAR(sum_M / n, 5.0, 0.5);
  double chi2 = 0.0;
  for (int j = 0; j < bins; ++j) {
    const double pj = j < bins - 1 ? boost::math::pdf(nb, j) : boost::math::cdf(boost::math::complement(nb, j - 1));
    const double e = n * pj;
    chi2 += (observed[static_cast<std::size_t>(j)] - e) * (observed[static_cast<std::size_t>(j)] - e) / e;
  }
  const double pvalue = boost::math::cdf(boost::math::complement(boost::math::chi_squared(bins - 1), chi2));
  EXPECT_GT(pvalue, 1e-3) << "chi2 = " << chi2;
}

TEST(Sampler, GibbsSigma2PosteriorExample) {
  // n = 2, SSE = 2, r = R = 0.01 -> IG(1.005, 1.005)
  Matrix X(2, 1);
  X << 0.0, 1.0;
  Vector y(2);
  y << 1.0, -1.0;
  const Dataset d(X, y);
  Hyperparams h;
  SamplerSetup setup;
  setup.intercept = 0.0;
  Sampler s(d, h, setup);
  ASSERT_DOUBLE_EQ(s.sse(), 2.0);
  const boost::math::inverse_gamma ig(1.005, 1.005);
  const int draws = 50000;
  std::vector<int> below(3, 0);
  const double qs[3] = {0.25, 0.5, 0.75};
  for (int t = 0; t < draws; ++t) {
    s.gibbs_sigma2();
    for (int q = 0; q < 3; ++q) below[static_cast<std::size_t>(q)] += s.state().sigma2 <= boost::math::quantile(ig, qs[q]);
  }
  for (int q = 0; q < 3; ++q) {
    EXPECT_NEAR(below[static_cast<std::size_t>(q)] / double(draws), qs[q], 3 * std::sqrt(qs[q] * (1 - qs[q]) / draws));
  }
}

TEST(Sampler, GibbsMExamples) {
  const Dataset d = toy();
  Hyperparams h;
  Sampler s(d, h, regression_setup(d, h));
  const int draws = 50000;
  double sum = 0, sum2 = 0;
  for (int t = 0; t < draws; ++t) {
    s.gibbs_M();
    sum += s.state().levy_mass;
    sum2 += s.state().levy_mass * s.state().levy_mass;
  }
  // Ga(5, 2): mean 2.5, variance 1.25
  EXPECT_NEAR(sum / draws, 2.5, 3 * std::sqrt(1.25 / draws));
  EXPECT_NEAR(sum2 / draws - (sum / draws) * (sum / draws), 1.25, 0.05);

  ModelState st = s.state();
  for (int j = 0; j < 10; ++j) st.atoms.push_back({AtomStructure({{0, KnotSequence(0, {0.0, 0.5})}}), 0.0});
  s.set_state(st);
  sum = 0;
  for (int t = 0; t < draws; ++t) {
    s.gibbs_M();
    sum += s.state().levy_mass;
  }
  // Ga(15, 2): mean 7.5, variance 3.75
  EXPECT_NEAR(sum / draws, 7.5, 3 * std::sqrt(3.75 / draws));
}

TEST(Sampler, GibbsMConcentratesForLargeShape) {
  const Dataset d = toy();
  Hyperparams h;
  h.a_gamma = 1e6;
  h.b_gamma = 2e5;
  Sampler s(d, h, regression_setup(d, h));
  for (int t = 0; t < 100; ++t) {
    s.gibbs_M();
    EXPECT_NEAR(s.state().levy_mass, 5.0, 0.05);
  }
}

TEST(Sampler, GibbsBetasZeroColumnFollowsPrior) {
  const Dataset d = toy();
  Hyperparams h;
  SamplerSetup setup = regression_setup(d, h);
  setup.phi = 2.0;
  Sampler s(d, h, setup);
  ModelState st = s.state();
  // support [5, 6) lies outside the data
  st.atoms.push_back({AtomStructure({{0, KnotSequence(0, {5.0, 6.0})}}), 0.0});
  s.set_state(st);
  ASSERT_EQ(s.columns()[0].squaredNorm(), 0.0);
  const int draws = 50000;
  double sum = 0, sum2 = 0;
  for (int t = 0; t < draws; ++t) {
    s.gibbs_betas();
    const double b = s.state().atoms[0].coefficient;
    sum += b;
    sum2 += b * b;
  }
  EXPECT_NEAR(sum / draws, 0.0, 3 * 2.0 / std::sqrt(draws));
  EXPECT_NEAR(sum2 / draws, 4.0, 3 * 4.0 * std::sqrt(2.0 / draws));
}

TEST(Sampler, GibbsBetasFlatPriorGivesLeastSquares) {
  Matrix X(4, 1);
  X << 0.1, 0.3, 0.6, 0.8;
  Vector y(4);
  y << 1.0, 3.0, 0.0, 2.0;
  const Dataset d(X, y);
  Hyperparams h;
  SamplerSetup setup;
  setup.intercept = 0.0;
  setup.phi = 1e8;
  setup.fixed_sigma2 = 1e-10;
  Sampler s(d, h, setup);
  ModelState st = s.state();
  // indicator of [0.2, 0.4): the unit column e_2
  st.atoms.push_back({AtomStructure({{0, KnotSequence(0, {0.2, 0.4})}}), 0.0});
  s.set_state(st);
  s.gibbs_betas();
  EXPECT_NEAR(s.state().atoms[0].coefficient, 3.0, 1e-3);
}

TEST(Sampler, SetStateValidates) {
  const Dataset d = toy();
  Hyperparams h;
  Sampler s(d, h, regression_setup(d, h));
  ModelState st;
  st.atoms.push_back({AtomStructure({{5, KnotSequence(0, {0.0, 1.0})}}), 1.0});
  EXPECT_THROW(s.set_state(st), InputError);
  ModelState tau;
  tau.tau = 1.0;
  EXPECT_THROW(s.set_state(tau), InputError);
}
