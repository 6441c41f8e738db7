#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "permqmc/discrepancy.hpp"
#include "permqmc/samplers.hpp"

using namespace permqmc;

namespace {

// Squared discrepancy straight from its definition, with the kernel matrix
// assembled here and the constant term averaged over all of S_d.
double brute_squared_discrepancy(const std::vector<Permutation>& s, const std::vector<double>& w,
                                 const KernelSpec& spec) {
  const auto all = all_permutations(Dimension(s.front().dim()));
  double e = 0.0;
  for (const auto& q : all) e += spec(all.front(), q);
  e /= static_cast<double>(all.size());
  double cross = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    double ek = 0.0;
    for (const auto& q : all) ek += spec(s[i], q);
    cross += w[i] * ek / static_cast<double>(all.size());
    for (std::size_t j = 0; j < s.size(); ++j) quad += w[i] * w[j] * spec(s[i], s[j]);
  }
  return e - 2.0 * cross + quad;
}

}  // namespace

TEST(Discrepancy, FullGroupIsZero) {
  for (int d = 2; d <= 5; ++d) {
    const auto set = WeightedSampleSet::uniform(all_permutations(Dimension(d)));
    for (const auto& spec : {KernelSpec::kendall(), KernelSpec::mallows(), KernelSpec::spearman()}) {
      EXPECT_NEAR(discrepancy(set, spec), 0.0, 1e-6) << "d=" << d;
      EXPECT_NEAR(squared_discrepancy(set, spec), 0.0, 1e-10 * kernel_diagonal(spec, Dimension(d)));
    }
  }
}

TEST(Discrepancy, SinglePermutationKendallIsOne) {
  for (int d = 2; d <= 20; ++d) {
    const auto set = WeightedSampleSet::uniform({identity(Dimension(d))});
    EXPECT_NEAR(discrepancy(set, KernelSpec::kendall()), 1.0, 1e-14);
  }
}

TEST(Discrepancy, MatchesDefinitionWithExplicitConstantTerm) {
  std::mt19937_64 rng(12);
  for (int d = 3; d <= 6; ++d) {
    std::vector<Permutation> s;
    std::vector<double> w;
    std::uniform_real_distribution<double> u(-0.5, 1.0);
    for (int i = 0; i < 7; ++i) {
      s.push_back(random_permutation(Dimension(d), rng));
      w.push_back(u(rng));
    }
    WeightedSampleSet set;
    set.samples = s;
    set.weights = w;
    for (const auto& spec : {KernelSpec::kendall(), KernelSpec::mallows(2.0), KernelSpec::spearman()}) {
      const double brute = brute_squared_discrepancy(s, w, spec);
      EXPECT_NEAR(squared_discrepancy(set, spec), brute, 1e-10 * std::max(1.0, std::abs(brute)));
    }
  }
}

TEST(Discrepancy, RadicandClamp) {
  EXPECT_EQ(sqrt_radicand(-5e-11), 0.0);
  EXPECT_EQ(sqrt_radicand(0.0), 0.0);
  EXPECT_DOUBLE_EQ(sqrt_radicand(0.25), 0.5);
  try {
    sqrt_radicand(-1e-9);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::numerical_failure);
  }
  EXPECT_THROW(sqrt_radicand(std::nan("")), Error);
}

TEST(Discrepancy, RejectsMalformedSets) {
  WeightedSampleSet empty;
  EXPECT_THROW(discrepancy(empty, KernelSpec::mallows()), Error);
  WeightedSampleSet short_weights;
  short_weights.samples = {identity(Dimension(3))};
  EXPECT_THROW(discrepancy(short_weights, KernelSpec::mallows()), Error);
  WeightedSampleSet mixed = WeightedSampleSet::uniform({identity(Dimension(3)), identity(Dimension(4))});
  EXPECT_THROW(discrepancy(mixed, KernelSpec::mallows()), Error);
}

TEST(Discrepancy, SbqWeightsBeatUniformOnSameSamples) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SamplerConfig cfg;
    cfg.algorithm = Algorithm::sbq;
    cfg.n = 30;
    cfg.d = 7;
    cfg.seed = seed;
    const auto weighted = sbq(cfg);
    const auto uniform = WeightedSampleSet::uniform(weighted.samples);
    EXPECT_LE(discrepancy(weighted, cfg.kernel), discrepancy(uniform, cfg.kernel) + 1e-9);
  }
}

// D(P, 1/n)^2 - D(P + {p}, 1/(n+1))^2 depends on p only through the sum
// of K(tau, p) over P, so herding's minimum-similarity pick is also the
// pick that lowers the uniform-weight discrepancy the most.
TEST(Discrepancy, HerdingStepIdentity) {
  std::mt19937_64 rng(77);
  const auto spec = KernelSpec::mallows();
  for (int d = 4; d <= 10; ++d) {
    std::vector<Permutation> base;
    for (int i = 0; i < 15; ++i) base.push_back(random_permutation(Dimension(d), rng));
    const double n = static_cast<double>(base.size());
    const double e = expected_kernel_uniform(spec, Dimension(d));
    const double before = squared_discrepancy(WeightedSampleSet::uniform(base), spec);
    double s_n = 0.0;
    for (const auto& a : base) {
      for (const auto& b : base) s_n += spec(a, b);
    }
    for (int c = 0; c < 10; ++c) {
      const auto p = random_permutation(Dimension(d), rng);
      double sim = 0.0;
      for (const auto& t : base) sim += spec(t, p);
      auto ext = base;
      ext.push_back(p);
      const double after = squared_discrepancy(WeightedSampleSet::uniform(ext), spec);
      const double predicted = -e + (s_n + 2.0 * sim + 1.0) / ((n + 1) * (n + 1));
      EXPECT_NEAR(after, predicted, 1e-12);
      EXPECT_NEAR(before - after, (-e + s_n / (n * n)) - predicted, 1e-12);
    }
  }
}

TEST(Discrepancy, MonteCarloImprovesWithMoreSamples) {
  double d10 = 0.0, d100 = 0.0;
  for (int t = 0; t < 25; ++t) {
    SamplerConfig cfg;
    cfg.d = 10;
    cfg.seed = static_cast<std::uint64_t>(t);
    cfg.n = 10;
    d10 += discrepancy(monte_carlo(cfg), cfg.kernel);
    cfg.n = 100;
    d100 += discrepancy(monte_carlo(cfg), cfg.kernel);
  }
  EXPECT_LT(d100, d10);
}
