#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "permqmc/estimators.hpp"
#include "permqmc/samplers.hpp"

using namespace permqmc;

namespace {

void expect_values_near(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "player " << i;
}

SamplerConfig config(Algorithm a, int n, int d, std::uint64_t seed) {
  SamplerConfig c;
  c.algorithm = a;
  c.n = n;
  c.d = d;
  c.seed = seed;
  return c;
}

std::unique_ptr<LinearGame> random_linear(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::vector<double> c(d);
  for (auto& v : c) v = normal(rng);
  return linear_game(c, normal(rng));
}

double grand_minus_empty(Game& g) {
  return g.value(Coalition::full(g.players())) - g.value(Coalition(g.players()));
}

}  // namespace

TEST(ExactShapley, GloveValues) {
  GloveGame g;
  const auto sub = exact_shapley_subsets(g);
  expect_values_near(sub.values, {1.0 / 6, 1.0 / 6, 2.0 / 3}, 1e-12);
  expect_values_near(exact_shapley_permutations(g).values, sub.values, 1e-10);
  expect_values_near(oracle::brute_force_shapley(g), sub.values, 1e-12);
}

TEST(ExactShapley, SubsetAndPermutationOraclesAgree) {
  std::mt19937_64 rng(2024);
  for (int k = 0; k < 20; ++k) {
    auto g = random_interaction_game(Dimension(6), 8, rng);
    const auto sub = exact_shapley_subsets(*g);
    expect_values_near(exact_shapley_permutations(*g).values, sub.values, 1e-10);
    expect_values_near(oracle::brute_force_shapley(*g), sub.values, 1e-10);
    // Each pair's strength splits evenly between its members.
    std::vector<double> split(6, 0.0);
    for (const auto& p : g->pairs()) {
      split[p.i] += p.strength / 2;
      split[p.j] += p.strength / 2;
    }
    expect_values_near(sub.values, split, 1e-10);
  }
  for (int k = 0; k < 10; ++k) {
    const int d = 2 + k % 7;
    auto g = random_linear(d, rng);
    const auto sub = exact_shapley_subsets(*g);
    expect_values_near(exact_shapley_permutations(*g).values, sub.values, 1e-10);
    expect_values_near(sub.values, {g->coefficients().begin(), g->coefficients().end()}, 1e-10);
  }
}

TEST(ExactShapley, EfficiencyAndDummy) {
  InteractionGame g(Dimension(5), {{0, 1, 1.0}});
  const auto sh = exact_shapley_subsets(g);
  expect_values_near(sh.values, {0.5, 0.5, 0.0, 0.0, 0.0}, 1e-12);
  LinearGame h({1.0, -2.0, 0.5}, 7.0);
  const auto e = exact_shapley_subsets(h);
  EXPECT_NEAR(std::accumulate(e.values.begin(), e.values.end(), 0.0), grand_minus_empty(h), 1e-10);
}

TEST(ExactShapley, CapsAndCallAccounting) {
  LinearGame big(std::vector<double>(21, 1.0), 0.0);
  EXPECT_THROW(exact_shapley_subsets(big), Error);
  LinearGame nine(std::vector<double>(9, 1.0), 0.0);
  EXPECT_THROW(exact_shapley_permutations(nine), Error);
  LinearGame six(std::vector<double>(6, 1.0), 0.0);
  const auto e = exact_shapley_subsets(six);
  EXPECT_EQ(e.v_evals, 64);
  EXPECT_EQ(six.evaluations(), 64);
  EXPECT_TRUE(six.caching());
}

TEST(ShapleyFromPermutations, FullEnumerationIsExact) {
  std::mt19937_64 rng(5);
  for (int d = 2; d <= 6; ++d) {
    auto g = random_interaction_game(Dimension(d), 2 * d, rng);
    const auto set = WeightedSampleSet::uniform(all_permutations(Dimension(d)));
    expect_values_near(shapley_from_permutations(*g, set).values, exact_shapley_subsets(*g).values, 1e-12);
  }
  GloveGame glove;
  expect_values_near(shapley_from_permutations(glove, WeightedSampleSet::uniform(all_permutations(Dimension(3))))
                         .values,
                     {1.0 / 6, 1.0 / 6, 2.0 / 3}, 1e-12);
}

TEST(ShapleyFromPermutations, SinglePermutationIsExactOnLinearGames) {
  LinearGame g({1.0, 2.0, 3.0}, 5.0);
  for (const auto& p : all_permutations(Dimension(3))) {
    expect_values_near(shapley_from_permutations(g, WeightedSampleSet::uniform({p})).values, {1.0, 2.0, 3.0}, 1e-15);
  }
}

TEST(ShapleyFromPermutations, WalkCostAndDimensionCheck) {
  LinearGame g({1.0, 2.0, 3.0, 4.0}, 0.0);
  CachingDisabled no_cache(g);
  const auto set = monte_carlo(config(Algorithm::monte_carlo, 10, 4, 1));
  const auto est = shapley_from_permutations(g, set);
  EXPECT_EQ(est.marginal_evals, 40);
  EXPECT_EQ(est.v_evals, 50);  // d + 1 per permutation
  const auto wrong = monte_carlo(config(Algorithm::monte_carlo, 3, 5, 1));
  EXPECT_THROW(shapley_from_permutations(g, wrong), Error);
}

TEST(ShapleyFromPermutations, TelescopingEfficiency) {
  std::mt19937_64 rng(99);
  const Algorithm uniform_algs[] = {Algorithm::monte_carlo, Algorithm::antithetic, Algorithm::herding,
                                    Algorithm::orthogonal,  Algorithm::sobol,      Algorithm::sphere_mc};
  std::uniform_int_distribution<int> dim(4, 12), count(1, 20), pick(0, 5);
  for (int k = 0; k < 100; ++k) {
    const int d = dim(rng);
    const int n = 2 * count(rng);
    const auto alg = uniform_algs[pick(rng)];
    auto g = random_interaction_game(Dimension(d), d, rng);
    const auto set = generate(config(alg, n, d, rng()));
    const auto est = shapley_from_permutations(*g, set);
    EXPECT_NEAR(std::accumulate(est.values.begin(), est.values.end(), 0.0), grand_minus_empty(*g), 1e-10)
        << to_string(alg) << " d=" << d << " n=" << n;
  }
}

TEST(ShapleyFromPermutations, SbqWeightedEfficiency) {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 10; ++k) {
    auto g = random_linear(8, rng);
    const auto set = sbq(config(Algorithm::sbq, 30, 8, static_cast<std::uint64_t>(k)));
    const auto est = shapley_from_permutations(*g, set);
    const double wsum = std::accumulate(set.weights.begin(), set.weights.end(), 0.0);
    EXPECT_NEAR(std::accumulate(est.values.begin(), est.values.end(), 0.0), wsum * grand_minus_empty(*g),
                1e-10);
  }
}

TEST(Owen, LinearGameIsExact) {
  LinearGame g({1.0, -2.0, 3.5, 0.25}, 1.0);
  std::mt19937_64 rng(1);
  for (bool anti : {false, true}) {
    const auto est = owen_multilinear(g, 6, 3, anti, rng);
    expect_values_near(est.values, {1.0, -2.0, 3.5, 0.25}, 1e-12);
  }
}

TEST(Owen, ZeroNodeUsesEmptyCoalition) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(detail::bernoulli_subset(5, i, 0.0, rng).size(), 0);
  EXPECT_EQ(detail::bernoulli_subset(5, 2, 1.0, rng).members(), (std::vector<int>{0, 1, 3, 4}));
  GloveGame g;
  EXPECT_EQ(detail::marginal(g, Coalition(3), 2), 0.0);
  EXPECT_EQ(detail::marginal(g, Coalition::full(3), 2), 0.0);
}

TEST(Owen, SinglePairWithinSamplingError) {
  std::mt19937_64 rng(11);
  const int trials = 200;
  std::vector<double> first(trials);
  for (int t = 0; t < trials; ++t) {
    InteractionGame g(Dimension(4), {{0, 1, 1.0}});
    const auto est = owen_multilinear(g, 20, 50, false, rng);
    EXPECT_EQ(est.marginal_evals, 4 * 21 * 50);
    first[t] = est.values[0];
    EXPECT_EQ(est.values[2], 0.0);
  }
  const auto s = summarize(first);
  EXPECT_NEAR(s.mean, 0.5, 3 * s.std / std::sqrt(double(trials)) + 1e-12);
}

TEST(Owen, HalvedPairsComplements) {
  // For a pairwise game the complement pairing makes each node exact.
  std::mt19937_64 rng(12);
  InteractionGame g(Dimension(5), {{0, 1, 1.0}, {2, 4, -1.0}});
  const auto est = owen_multilinear(g, 10, 2, true, rng);
  expect_values_near(est.values, {0.5, 0.5, -0.5, 0.0, -0.5}, 1e-12);
  EXPECT_EQ(est.marginal_evals, 5 * 11 * 2 * 2);
  EXPECT_THROW(owen_multilinear(g, 1, 2, false, rng), Error);
  EXPECT_THROW(owen_multilinear(g, 4, 0, false, rng), Error);
}

TEST(Stratified, LinearExactAndGloveWithinError) {
  std::mt19937_64 rng(3);
  LinearGame lin({2.0, -1.0, 0.5}, 3.0);
  expect_values_near(stratified_castro(lin, 18, rng).values, {2.0, -1.0, 0.5}, 1e-12);

  const int trials = 200;
  std::vector<std::vector<double>> vals(3, std::vector<double>(trials));
  for (int t = 0; t < trials; ++t) {
    GloveGame g;
    const auto est = stratified_castro(g, 1000, rng);
    EXPECT_EQ(est.marginal_evals, 9 * (1000 / 9));
    for (int i = 0; i < 3; ++i) vals[i][t] = est.values[i];
  }
  const double exact[] = {1.0 / 6, 1.0 / 6, 2.0 / 3};
  for (int i = 0; i < 3; ++i) {
    const auto s = summarize(vals[i]);
    EXPECT_NEAR(s.mean, exact[i], 3 * s.std / std::sqrt(double(trials)) + 1e-12);
  }
  GloveGame g;
  EXPECT_THROW(stratified_castro(g, 17, rng), Error);
  EXPECT_NO_THROW(stratified_castro(g, 18, rng));
}

TEST(Mse, ExamplesAndNaiveAgreement) {
  EXPECT_DOUBLE_EQ(mse(Eigen::MatrixXd::Zero(10, 3), Eigen::MatrixXd::Ones(10, 3)), 1.0);
  const Eigen::MatrixXd r = Eigen::MatrixXd::Random(4, 6);
  EXPECT_EQ(mse(r, r), 0.0);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd a(10, 5), b(10, 5);
  double naive = 0.0;
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 5; ++j) {
      a(i, j) = normal(rng);
      b(i, j) = normal(rng);
      naive += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
    }
  }
  EXPECT_NEAR(mse(a, b), naive / 50, 1e-14);
  const std::vector<double> x{1.0, 2.0}, y{2.0, 4.0};
  EXPECT_DOUBLE_EQ(mse(x, y), 2.5);
  EXPECT_THROW(mse(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 3)), Error);
  EXPECT_THROW(mse(std::vector<double>{}, std::vector<double>{}), Error);
}

TEST(Summary, MeanStdAndInterval) {
  const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  const auto s = summarize(xs);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_NEAR(s.std, std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_NEAR(s.ci95, 1.96 * std::sqrt(5.0 / 3.0) / 2.0, 1e-15);
  EXPECT_EQ(s.count, 4u);
  EXPECT_EQ(summarize(std::vector<double>{3.0}).std, 0.0);
}

TEST(Unbiasedness, SamplersAcrossSeeds) {
  std::mt19937_64 rng(31);
  auto inter = random_interaction_game(Dimension(6), 9, rng);
  GloveGame glove;
  const auto inter_exact = exact_shapley_subsets(*inter).values;
  const auto glove_exact = exact_shapley_subsets(glove).values;
  const int trials = 200;
  for (auto alg : {Algorithm::monte_carlo, Algorithm::antithetic, Algorithm::orthogonal, Algorithm::sphere_mc,
                   Algorithm::sobol}) {
    for (Game* g : {static_cast<Game*>(inter.get()), static_cast<Game*>(&glove)}) {
      const int d = g->players();
      if (alg == Algorithm::sobol && d < 4) continue;
      if (alg == Algorithm::orthogonal && d < 3) continue;
      const auto& exact = d == 6 ? inter_exact : glove_exact;
      std::vector<std::vector<double>> vals(d, std::vector<double>(trials));
      for (int t = 0; t < trials; ++t) {
        const auto est = shapley_from_permutations(*g, generate(config(alg, 4, d, 1000 + t)));
        for (int i = 0; i < d; ++i) vals[i][t] = est.values[i];
      }
      for (int i = 0; i < d; ++i) {
        const auto s = summarize(vals[i]);
        EXPECT_NEAR(s.mean, exact[i], 4 * s.std / std::sqrt(double(trials)) + 1e-12)
            << to_string(alg) << " d=" << d << " player " << i;
      }
    }
  }
}

TEST(Convergence, MonteCarloRmseSlope) {
  std::mt19937_64 game_rng(8);
  auto g = random_interaction_game(Dimension(8), 12, game_rng);
  const auto exact = exact_shapley_subsets(*g).values;
  std::vector<double> log_n, log_rmse;
  for (int n : {16, 64, 256, 1024}) {
    double total = 0.0;
    for (int t = 0; t < 25; ++t) {
      const auto est = shapley_from_permutations(*g, monte_carlo(config(Algorithm::monte_carlo, n, 8, t)));
      total += mse(exact, est.values);
    }
    log_n.push_back(std::log(double(n)));
    log_rmse.push_back(0.5 * std::log(total / 25));
  }
  const double mx = std::accumulate(log_n.begin(), log_n.end(), 0.0) / 4;
  const double my = std::accumulate(log_rmse.begin(), log_rmse.end(), 0.0) / 4;
  double sxy = 0.0, sxx = 0.0;
  for (int k = 0; k < 4; ++k) {
    sxy += (log_n[k] - mx) * (log_rmse[k] - my);
    sxx += (log_n[k] - mx) * (log_n[k] - mx);
  }
  const double slope = sxy / sxx;
  EXPECT_GE(slope, -0.65);
  EXPECT_LE(slope, -0.35);
}

TEST(Variance, AntitheticNoWorseThanMonteCarloOnGlove) {
  GloveGame g;
  const int trials = 25, n = 12;
  std::vector<std::vector<double>> mc(3, std::vector<double>(trials)), an(3, std::vector<double>(trials));
  for (int t = 0; t < trials; ++t) {
    const auto a = shapley_from_permutations(g, monte_carlo(config(Algorithm::monte_carlo, n, 3, t)));
    const auto b = shapley_from_permutations(g, antithetic(config(Algorithm::antithetic, n, 3, t)));
    for (int i = 0; i < 3; ++i) {
      mc[i][t] = a.values[i];
      an[i][t] = b.values[i];
    }
  }
  int violations = 0;
  for (int i = 0; i < 3; ++i) violations += summarize(an[i]).std > summarize(mc[i]).std;
  EXPECT_LE(violations, 1);
}
