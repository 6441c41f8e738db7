#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "oracles.hpp"
#include "permqmc/discrepancy.hpp"
#include "permqmc/samplers.hpp"

using namespace permqmc;

namespace {

SamplerConfig config(Algorithm a, int n, int d, std::uint64_t seed = 0) {
  SamplerConfig c;
  c.algorithm = a;
  c.n = n;
  c.d = d;
  c.seed = seed;
  return c;
}

double mean_discrepancy(Algorithm a, int n, int d, int trials) {
  double s = 0.0;
  for (int t = 0; t < trials; ++t) {
    const auto cfg = config(a, n, d, static_cast<std::uint64_t>(t));
    s += discrepancy(generate(cfg), cfg.kernel);
  }
  return s / trials;
}

}  // namespace

TEST(Algorithm, NamesRoundTrip) {
  for (auto a : kAllAlgorithms) EXPECT_EQ(parse_algorithm(to_string(a)), a);
  EXPECT_EQ(parse_algorithm("mc_antithetic"), Algorithm::antithetic);
  EXPECT_EQ(parse_algorithm("kernel-herding"), Algorithm::herding);
  EXPECT_THROW(parse_algorithm("qmc"), Error);
}

TEST(SamplerConfig, Validation) {
  EXPECT_THROW(generate(config(Algorithm::monte_carlo, 0, 5)), Error);
  EXPECT_THROW(generate(config(Algorithm::monte_carlo, 5, 1)), Error);
  auto c = config(Algorithm::herding, 5, 5);
  c.pool_size = 0;
  EXPECT_THROW(generate(c), Error);
  c = config(Algorithm::herding, 5, 7);
  c.exhaustive_argmax = true;
  EXPECT_THROW(generate(c), Error);
}

TEST(AllSamplers, ShapeWeightsAndDeterminism) {
  for (auto a : kAllAlgorithms) {
    for (int d : {4, 7, 12}) {
      const auto cfg = config(a, 24, d, 3);
      const auto s = generate(cfg);
      ASSERT_EQ(s.size(), 24u) << to_string(a);
      EXPECT_EQ(s.dim(), d);
      EXPECT_EQ(s.meta.algorithm, to_string(a));
      EXPECT_NO_THROW(s.validate());
      for (double w : s.weights) EXPECT_TRUE(std::isfinite(w));
      if (has_uniform_weights(a)) {
        EXPECT_NEAR(std::accumulate(s.weights.begin(), s.weights.end(), 0.0), 1.0, 1e-12);
        for (double w : s.weights) EXPECT_EQ(w, 1.0 / 24);
      }
      const auto again = generate(cfg);
      EXPECT_EQ(again.samples, s.samples) << to_string(a);
      EXPECT_EQ(again.weights, s.weights);
    }
  }
}

TEST(MonteCarlo, TwoElementFrequencies) {
  const auto s = monte_carlo(config(Algorithm::monte_carlo, 10000, 2, 4));
  long ident = 0;
  for (const auto& p : s.samples) ident += p == identity(Dimension(2));
  EXPECT_NEAR(ident / 10000.0, 0.5, 0.02);
}

TEST(Antithetic, PairsWithReverse) {
  const auto s = antithetic(config(Algorithm::antithetic, 40, 9, 2));
  for (std::size_t i = 1; i < s.size(); i += 2) {
    EXPECT_EQ(s.samples[i], reverse(s.samples[i - 1]));
    EXPECT_DOUBLE_EQ(kendall(s.samples[i], s.samples[i - 1]), -1.0);
  }
  const auto small = antithetic(config(Algorithm::antithetic, 6, 3, 1));
  for (std::size_t i = 0; i < small.size(); i += 2) EXPECT_EQ(small.samples[i + 1], reverse(small.samples[i]));
  try {
    antithetic(config(Algorithm::antithetic, 7, 5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_arguments);
  }
}

TEST(Herding, ChoosesPoolMinimumOfSummedSimilarity) {
  auto cfg = config(Algorithm::herding, 40, 8, 6);
  std::vector<Permutation> chosen;
  int steps = 0;
  const auto set = kernel_herding(cfg, [&](std::span<const Permutation> pool, std::size_t best) {
    ASSERT_EQ(pool.size(), 25u);
    std::vector<double> score(pool.size(), 0.0);
    for (std::size_t c = 0; c < pool.size(); ++c) {
      for (const auto& q : chosen) score[c] += cfg.kernel(pool[c], q);
    }
    if (chosen.empty()) {
      EXPECT_EQ(best, 0u);
    }
    for (double s : score) EXPECT_LE(score[best], s);
    chosen.push_back(pool[best]);
    ++steps;
  });
  EXPECT_EQ(steps, 40);
  EXPECT_EQ(set.samples, chosen);
  EXPECT_EQ(set.meta.candidates_drawn, 40 * 25);
}

TEST(Herding, NoRepeatsWhilePoolAllows) {
  const auto s = kernel_herding(config(Algorithm::herding, 60, 6, 1));
  std::set<Permutation> distinct(s.samples.begin(), s.samples.end());
  EXPECT_EQ(distinct.size(), s.size());
}

TEST(Herding, ExhaustiveArgmaxCoversSmallGroup) {
  auto cfg = config(Algorithm::herding, 24, 4);
  cfg.exhaustive_argmax = true;
  const auto s = kernel_herding(cfg);
  std::set<Permutation> distinct(s.samples.begin(), s.samples.end());
  EXPECT_EQ(distinct.size(), 24u);
  EXPECT_NEAR(discrepancy(s, cfg.kernel), 0.0, 1e-6);
}

TEST(Herding, BeatsMonteCarloInPairedTrials) {
  int wins = 0;
  for (int t = 0; t < 25; ++t) {
    const auto h = config(Algorithm::herding, 100, 10, static_cast<std::uint64_t>(t));
    const auto m = config(Algorithm::monte_carlo, 100, 10, static_cast<std::uint64_t>(t));
    wins += discrepancy(generate(h), h.kernel) < discrepancy(generate(m), m.kernel);
  }
  EXPECT_GE(wins, 24);
}

TEST(Sbq, SingleSampleWeights) {
  for (int d : {3, 6, 10}) {
    const auto s = sbq(config(Algorithm::sbq, 1, d, 5));
    EXPECT_NEAR(s.weights[0], expected_kernel_uniform(KernelSpec::mallows(), Dimension(d)), 1e-14);
    auto k = config(Algorithm::sbq, 1, d, 5);
    k.kernel = KernelSpec::kendall();
    EXPECT_EQ(sbq(k).weights[0], 0.0);
  }
}

TEST(Sbq, WeightsSolveKernelSystem) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto cfg = config(Algorithm::sbq, 60, 9, seed);
    const auto s = sbq(cfg);
    const auto k = kernel_matrix(s.samples, cfg.kernel);
    const Eigen::Map<const Eigen::VectorXd> w(s.weights.data(), static_cast<Eigen::Index>(s.size()));
    const Eigen::VectorXd z =
        Eigen::VectorXd::Constant(w.size(), expected_kernel_uniform(cfg.kernel, Dimension(cfg.d)));
    EXPECT_LE((k * w - z).norm(), 1e-8 * z.norm());
  }
}

TEST(Sbq, MaximisesVarianceReductionOverPool) {
  const auto cfg = config(Algorithm::sbq, 20, 7, 9);
  const double e = expected_kernel_uniform(cfg.kernel, Dimension(cfg.d));
  std::vector<Permutation> chosen;
  sbq(cfg, [&](std::span<const Permutation> pool, std::size_t best) {
    // Posterior variance E[K] - z^T K^{-1} z after appending each candidate.
    auto variance_with = [&](const Permutation& c) {
      auto s = chosen;
      s.push_back(c);
      const auto k = kernel_matrix(s, cfg.kernel);
      const Eigen::VectorXd z = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(s.size()), e);
      return e - z.dot(k.ldlt().solve(z));
    };
    const double v_best = variance_with(pool[best]);
    for (const auto& c : pool) EXPECT_LE(v_best, variance_with(c) + 1e-9);
    chosen.push_back(pool[best]);
  });
  EXPECT_EQ(chosen.size(), 20u);
}

TEST(Sbq, RankDeficientKernelEitherFailsCleanlyOrStaysFinite) {
  // The Spearman feature space has dimension d, so beyond d samples the
  // Gram matrix is singular.
  auto cfg = config(Algorithm::sbq, 12, 5, 2);
  cfg.kernel = KernelSpec::spearman();
  try {
    const auto s = sbq(cfg);
    for (double w : s.weights) EXPECT_TRUE(std::isfinite(w));
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::numerical_failure);
  }
}

TEST(Orthogonal, BasisIsOrthonormal) {
  std::mt19937_64 rng(3);
  for (int dim : {2, 5, 49, 120}) {
    const auto q = random_orthonormal_basis(dim, rng);
    EXPECT_LT((q.transpose() * q - Eigen::MatrixXd::Identity(dim, dim)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Orthogonal, BlocksPairAntipodes) {
  const int d = 4;
  const auto s = orthogonal_codes(config(Algorithm::orthogonal, 6 * 5, d, 8));
  for (std::size_t i = 0; i < s.size(); i += 2) EXPECT_EQ(s.samples[i + 1], reverse(s.samples[i]));
  // Truncated final block keeps vector-then-antipode order.
  const auto t = orthogonal_codes(config(Algorithm::orthogonal, 9, d, 8));
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(t.samples[i], s.samples[i]);
  EXPECT_THROW(orthogonal_codes(config(Algorithm::orthogonal, 4, 2)), Error);
}

TEST(Orthogonal, NonAntipodalPairsAreNearlyUncorrelatedAtFifty) {
  const int d = 50, block = 2 * (d - 1);
  const auto s = orthogonal_codes(config(Algorithm::orthogonal, 3 * block, d, 21));
  double worst = 0.0;
  for (int b = 0; b < 3; ++b) {
    for (int i = 0; i < block; ++i) {
      for (int j = i + 1; j < block; ++j) {
        if (i / 2 == j / 2) continue;  // vector and its antipode
        worst = std::max(worst, std::abs(kendall(s.samples[b * block + i], s.samples[b * block + j])));
      }
    }
  }
  EXPECT_LE(worst, 0.6);
}

TEST(Sobol, UniformOverS4) {
  const auto s = sobol_permutations(config(Algorithm::sobol, 24000, 4, 77));
  std::vector<long> counts(24, 0);
  for (const auto& p : s.samples) ++counts[oracle::lex_index(p)];
  EXPECT_LT(oracle::chi_square_uniform(counts), oracle::kChi2Crit999Df23);
}

TEST(Sobol, DeterministicGivenShiftAndNeedsFourDimensions) {
  auto cfg = config(Algorithm::sobol, 50, 8, 1);
  cfg.sobol_shift = SobolSequence::Shift(6, 0x12345678u);
  auto a = sobol_permutations(cfg);
  cfg.seed = 999;  // ignored when a shift is given
  EXPECT_EQ(sobol_permutations(cfg).samples, a.samples);
  EXPECT_THROW(sobol_permutations(config(Algorithm::sobol, 5, 3)), Error);
}

TEST(SphereMc, UniformOverS4AndS3) {
  const auto s = sphere_mc(config(Algorithm::sphere_mc, 24000, 4, 13));
  std::vector<long> counts(24, 0);
  for (const auto& p : s.samples) ++counts[oracle::lex_index(p)];
  EXPECT_LT(oracle::chi_square_uniform(counts), oracle::kChi2Crit999Df23);

  const auto t = sphere_mc(config(Algorithm::sphere_mc, 6000, 3, 14));
  std::map<Permutation, int> freq;
  for (const auto& p : t.samples) ++freq[p];
  EXPECT_EQ(freq.size(), 6u);
  for (const auto& [p, c] : freq) EXPECT_NEAR(c / 6000.0, 1.0 / 6.0, 0.02);
}

TEST(Samplers, DiscrepancyRankingAtTen) {
  const int trials = 25;
  const double herding = mean_discrepancy(Algorithm::herding, 100, 10, trials);
  const double sbq_mean = mean_discrepancy(Algorithm::sbq, 100, 10, trials);
  const double anti = mean_discrepancy(Algorithm::antithetic, 100, 10, trials);
  const double orth = mean_discrepancy(Algorithm::orthogonal, 100, 10, trials);
  const double sobol = mean_discrepancy(Algorithm::sobol, 100, 10, trials);
  // Expected 25-trial means at d=10, n=100.
  EXPECT_NEAR(herding, 0.059, 0.006);
  EXPECT_NEAR(sbq_mean, 0.056, 0.006);
  EXPECT_NEAR(anti, 0.084, 0.006);
  EXPECT_NEAR(orth, 0.070, 0.006);
  EXPECT_NEAR(sobol, 0.069, 0.006);
  EXPECT_LE(sbq_mean, herding);
  EXPECT_LT(herding, std::min(orth, sobol));
  EXPECT_LT(std::max(orth, sobol), anti);
}
