#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "permqmc/discrepancy.hpp"
#include "permqmc/error.hpp"
#include "permqmc/games.hpp"
#include "permqmc/permutation.hpp"

namespace permqmc {

/// Attributions for each player plus what they cost.
///
/// `marginal_evals` counts marginal contributions v(S + i) - v(S): d per
/// sampled permutation, one per (feature, node, draw) for Owen sampling and
/// one per stratum draw for stratified sampling. `v_evals` counts calls to
/// the characteristic function.
struct ShapleyEstimate {
  std::vector<double> values;
  std::int64_t marginal_evals = 0;
  std::int64_t v_evals = 0;
  std::string method;
};

/// Walks each permutation once: v(empty), then one v call per added player
/// in ascending rank order, so d + 1 calls give all d marginals. Sample
/// weights multiply the marginals.
inline ShapleyEstimate shapley_from_permutations(Game& game, const WeightedSampleSet& set) {
  set.validate();
  const int d = game.players();
  if (set.dim() != d) {
    throw Error(Errc::invalid_arguments, "sample dimension " + std::to_string(set.dim()) +
                                             " does not match game with " + std::to_string(d) +
                                             " players");
  }
  ShapleyEstimate est;
  est.values.assign(d, 0.0);
  est.method = set.meta.algorithm;
  const auto calls0 = game.calls();
  for (std::size_t k = 0; k < set.size(); ++k) {
    const double w = set.weights[k];
    Coalition s(d);
    double prev = game.value(s);
    for (int player : set.samples[k].order()) {
      s.insert(player);
      const double cur = game.value(s);
      est.values[player] += w * (cur - prev);
      prev = cur;
    }
  }
  est.marginal_evals = static_cast<std::int64_t>(set.size()) * d;
  est.v_evals = game.calls() - calls0;
  return est;
}

inline constexpr int kExactSubsetCap = 20;
inline constexpr int kExactSubsetWarn = 15;
inline constexpr int kExactPermutationCap = 8;

/// Exact Shapley values from the subset formula; 2^d calls to v.
inline ShapleyEstimate exact_shapley_subsets(Game& game) {
  const int d = game.players();
  if (d > kExactSubsetCap) {
    throw Error(Errc::invalid_dimension, "exact subset enumeration is capped at d = " +
                                             std::to_string(kExactSubsetCap));
  }
  if (d > kExactSubsetWarn) {
    std::clog << "warning: exact Shapley enumeration over 2^" << d << " coalitions\n";
  }
  CachingDisabled no_cache(game);
  const auto calls0 = game.calls();
  const std::uint64_t count = std::uint64_t{1} << d;
  std::vector<double> v(count);
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    Coalition s(d);
    for (int i = 0; i < d; ++i) {
      if ((mask >> i) & 1u) s.insert(i);
    }
    v[mask] = game.value(s);
  }
  // |S|! (d - |S| - 1)! / d!
  std::vector<double> weight(d);
  for (int s = 0; s < d; ++s) {
    weight[s] = std::exp(std::lgamma(s + 1.0) + std::lgamma(double(d - s)) - std::lgamma(d + 1.0));
  }
  ShapleyEstimate est;
  est.values.assign(d, 0.0);
  est.method = "exact-subsets";
  for (int i = 0; i < d; ++i) {
    const std::uint64_t bit = std::uint64_t{1} << i;
    double acc = 0.0;
    for (std::uint64_t mask = 0; mask < count; ++mask) {
      if (mask & bit) continue;
      acc += weight[std::popcount(mask)] * (v[mask | bit] - v[mask]);
    }
    est.values[i] = acc;
  }
  est.marginal_evals = static_cast<std::int64_t>(d) * static_cast<std::int64_t>(count / 2);
  est.v_evals = game.calls() - calls0;
  return est;
}

/// Exact Shapley values as the average marginal over all d! orderings.
inline ShapleyEstimate exact_shapley_permutations(Game& game) {
  const int d = game.players();
  if (d > kExactPermutationCap) {
    throw Error(Errc::invalid_dimension, "exact permutation enumeration is capped at d = " +
                                             std::to_string(kExactPermutationCap));
  }
  auto set = WeightedSampleSet::uniform(all_permutations(Dimension(d)), "exact-permutations");
  auto est = shapley_from_permutations(game, set);
  est.method = "exact-permutations";
  return est;
}

namespace detail {

template <class URBG>
Coalition bernoulli_subset(int d, int excluded, double q, URBG& rng) {
  Coalition s(d);
  if (q <= 0.0) return s;
  std::bernoulli_distribution coin(q);
  for (int j = 0; j < d; ++j) {
    if (j != excluded && (q >= 1.0 || coin(rng))) s.insert(j);
  }
  return s;
}

inline double marginal(Game& game, Coalition s, int player) {
  const double without = game.value(s);
  s.insert(player);
  return game.value(s) - without;
}

}  // namespace detail

/// Owen's multilinear extension: Sh_i is the integral over q of
/// e_i(q) = E[v(E_q + i) - v(E_q)], where E_q includes each other player
/// independently with probability q. The integral uses the trapezoid rule
/// on `nodes` equal intervals; each node averages `draws` subsets.
///
/// With `antithetic`, the integrand is e_i(q) + e_i(1 - q) over [0, 1/2]
/// and each draw E is paired with its complement N \ (E + i).
template <class URBG>
ShapleyEstimate owen_multilinear(Game& game, int nodes, int draws, bool antithetic, URBG& rng) {
  if (nodes < 2) throw Error(Errc::invalid_arguments, "Owen sampling needs at least 2 nodes");
  if (draws < 1) throw Error(Errc::invalid_arguments, "Owen sampling needs at least 1 draw per node");
  const int d = game.players();
  const auto calls0 = game.calls();
  ShapleyEstimate est;
  est.values.assign(d, 0.0);
  est.method = antithetic ? "Owen-halved" : "Owen";
  const double upper = antithetic ? 0.5 : 1.0;
  const double h = upper / nodes;
  std::int64_t marginals = 0;
  for (int i = 0; i < d; ++i) {
    double integral = 0.0;
    for (int k = 0; k <= nodes; ++k) {
      const double q = k * h;
      double acc = 0.0;
      for (int s = 0; s < draws; ++s) {
        Coalition e = detail::bernoulli_subset(d, i, q, rng);
        acc += detail::marginal(game, e, i);
        ++marginals;
        if (antithetic) {
          Coalition comp(d);
          for (int j = 0; j < d; ++j) {
            if (j != i && !e.contains(j)) comp.insert(j);
          }
          acc += detail::marginal(game, comp, i);
          ++marginals;
        }
      }
      const double node_weight = (k == 0 || k == nodes) ? 0.5 * h : h;
      integral += node_weight * acc / draws;
    }
    est.values[i] = integral;
  }
  est.marginal_evals = marginals;
  est.v_evals = game.calls() - calls0;
  return est;
}

/// Stratified sampling with strata (i, l): player i joins at position l.
/// Each of the d^2 strata gets floor(budget / d^2) uniformly drawn
/// predecessor sets of size l - 1.
template <class URBG>
ShapleyEstimate stratified_castro(Game& game, std::int64_t budget, URBG& rng) {
  const int d = game.players();
  const std::int64_t d2 = static_cast<std::int64_t>(d) * d;
  if (budget < 2 * d2) {
    throw Error(Errc::invalid_arguments, "stratified sampling needs a budget of at least 2 d^2 = " +
                                             std::to_string(2 * d2));
  }
  const std::int64_t per_stratum = budget / d2;
  const auto calls0 = game.calls();
  ShapleyEstimate est;
  est.values.assign(d, 0.0);
  est.method = "Stratified";
  std::vector<int> others(d - 1);
  for (int i = 0; i < d; ++i) {
    double total = 0.0;
    for (int pos = 1; pos <= d; ++pos) {
      const int size = pos - 1;
      double acc = 0.0;
      for (std::int64_t r = 0; r < per_stratum; ++r) {
        int k = 0;
        for (int j = 0; j < d; ++j) {
          if (j != i) others[k++] = j;
        }
        // Partial Fisher-Yates: the first `size` entries form a uniform subset.
        Coalition s(d);
        for (int t = 0; t < size; ++t) {
          std::uniform_int_distribution<int> pick(t, d - 2);
          std::swap(others[t], others[pick(rng)]);
          s.insert(others[t]);
        }
        acc += detail::marginal(game, s, i);
      }
      total += acc / static_cast<double>(per_stratum);
    }
    est.values[i] = total / d;
  }
  est.marginal_evals = d2 * per_stratum;
  est.v_evals = game.calls() - calls0;
  return est;
}

/// Elementwise mean squared error between equally shaped matrices.
inline double mse(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& estimate) {
  if (reference.rows() != estimate.rows() || reference.cols() != estimate.cols()) {
    throw Error(Errc::invalid_arguments, "mse: shape mismatch");
  }
  if (reference.size() == 0) throw Error(Errc::invalid_arguments, "mse: empty matrices");
  return (reference - estimate).array().square().mean();
}

inline double mse(std::span<const double> reference, std::span<const double> estimate) {
  if (reference.size() != estimate.size()) throw Error(Errc::invalid_arguments, "mse: shape mismatch");
  Eigen::Map<const Eigen::VectorXd> a(reference.data(), static_cast<Eigen::Index>(reference.size()));
  Eigen::Map<const Eigen::VectorXd> b(estimate.data(), static_cast<Eigen::Index>(estimate.size()));
  return mse(Eigen::MatrixXd(a), Eigen::MatrixXd(b));
}

/// Mean with a normal-approximation 95% confidence half-width.
struct Summary {
  double mean = 0.0;
  double std = 0.0;
  double ci95 = 0.0;
  std::size_t count = 0;
};

inline Summary summarize(std::span<const double> xs) {
  Summary s;
  s.count = xs.size();
  if (xs.empty()) return s;
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    s.ci95 = 1.96 * s.std / std::sqrt(static_cast<double>(xs.size()));
  }
  return s;
}

}  // namespace permqmc
