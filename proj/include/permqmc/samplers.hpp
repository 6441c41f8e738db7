#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "permqmc/discrepancy.hpp"
#include "permqmc/error.hpp"
#include "permqmc/kernels.hpp"
#include "permqmc/permutation.hpp"
#include "permqmc/sobol.hpp"
#include "permqmc/sphere.hpp"

namespace permqmc {

enum class Algorithm { monte_carlo, antithetic, herding, sbq, orthogonal, sobol, sphere_mc };

inline constexpr Algorithm kAllAlgorithms[] = {
    Algorithm::monte_carlo, Algorithm::antithetic, Algorithm::herding,  Algorithm::sbq,
    Algorithm::orthogonal,  Algorithm::sobol,      Algorithm::sphere_mc};

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::monte_carlo: return "MC";
    case Algorithm::antithetic: return "MC-antithetic";
    case Algorithm::herding: return "Herding";
    case Algorithm::sbq: return "SBQ";
    case Algorithm::orthogonal: return "Orthogonal";
    case Algorithm::sobol: return "Sobol";
    case Algorithm::sphere_mc: return "Sphere-MC";
  }
  return "unknown";
}

inline Algorithm parse_algorithm(const std::string& name) {
  std::string s;
  for (char c : name) {
    if (c == '-' || c == '_' || c == ' ') continue;
    s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  if (s == "mc" || s == "montecarlo") return Algorithm::monte_carlo;
  if (s == "antithetic" || s == "mcantithetic") return Algorithm::antithetic;
  if (s == "herding" || s == "kernelherding") return Algorithm::herding;
  if (s == "sbq") return Algorithm::sbq;
  if (s == "orthogonal" || s == "orth") return Algorithm::orthogonal;
  if (s == "sobol") return Algorithm::sobol;
  if (s == "spheremc" || s == "sphere") return Algorithm::sphere_mc;
  throw Error(Errc::config_error, "unknown sampling algorithm '" + name + "'");
}

/// True for samplers whose weights are always 1/n.
inline bool has_uniform_weights(Algorithm a) { return a != Algorithm::sbq; }

struct SamplerConfig {
  Algorithm algorithm = Algorithm::monte_carlo;
  int n = 1;
  int d = 2;
  KernelSpec kernel = KernelSpec::mallows();
  int pool_size = 25;
  std::uint64_t seed = 0;
  // Digital shift for the Sobol sampler; drawn from `seed` when absent.
  std::optional<SobolSequence::Shift> sobol_shift;
  // Test mode: herding/SBQ search all of S_d instead of a random pool.
  bool exhaustive_argmax = false;

  void validate() const {
    if (n < 1) throw Error(Errc::invalid_arguments, "sample count n must be >= 1");
    if (pool_size < 1) throw Error(Errc::invalid_arguments, "pool size must be >= 1");
    Dimension{d};
    kernel.validate();
    if (exhaustive_argmax && d > 6) {
      throw Error(Errc::invalid_arguments, "exhaustive argmax is limited to d <= 6");
    }
  }
};

/// Called after each greedy step with the candidate pool and the index of
/// the chosen candidate.
using SelectionObserver =
    std::function<void(std::span<const Permutation> pool, std::size_t chosen)>;

namespace detail {

using Rng = std::mt19937_64;

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline WeightedSampleSet finish_uniform(std::vector<Permutation> samples, const SamplerConfig& cfg,
                                        const Stopwatch& clock) {
  auto set = WeightedSampleSet::uniform(std::move(samples), to_string(cfg.algorithm));
  set.meta.seed = cfg.seed;
  set.meta.seconds = clock.seconds();
  return set;
}

// Fresh candidates for a greedy step. Permutations already selected are
// redrawn up to 100 times each.
class CandidatePool {
 public:
  CandidatePool(const SamplerConfig& cfg, Rng& rng) : cfg_(cfg), rng_(rng) {
    if (cfg.exhaustive_argmax) all_ = all_permutations(Dimension(cfg.d));
  }

  std::vector<Permutation> draw(const std::unordered_set<Permutation, PermutationHash>& taken) {
    if (cfg_.exhaustive_argmax) {
      std::vector<Permutation> out;
      for (const auto& p : all_) {
        if (!taken.contains(p)) out.push_back(p);
      }
      if (out.empty()) out = all_;
      drawn_ += static_cast<std::int64_t>(out.size());
      return out;
    }
    std::vector<Permutation> out;
    out.reserve(cfg_.pool_size);
    const Dimension d(cfg_.d);
    for (int c = 0; c < cfg_.pool_size; ++c) {
      Permutation p = random_permutation(d, rng_);
      for (int retry = 0; retry < 100 && taken.contains(p); ++retry) p = random_permutation(d, rng_);
      out.push_back(std::move(p));
    }
    drawn_ += cfg_.pool_size;
    return out;
  }

  std::int64_t drawn() const noexcept { return drawn_; }

 private:
  const SamplerConfig& cfg_;
  Rng& rng_;
  std::vector<Permutation> all_;
  std::int64_t drawn_ = 0;
};

}  // namespace detail

inline WeightedSampleSet monte_carlo(const SamplerConfig& cfg) {
  cfg.validate();
  detail::Stopwatch clock;
  detail::Rng rng(cfg.seed);
  std::vector<Permutation> out;
  out.reserve(cfg.n);
  for (int i = 0; i < cfg.n; ++i) out.push_back(random_permutation(Dimension(cfg.d), rng));
  return detail::finish_uniform(std::move(out), cfg, clock);
}

/// Uniform permutations interleaved with their reverses.
inline WeightedSampleSet antithetic(const SamplerConfig& cfg) {
  cfg.validate();
  if (cfg.n % 2 != 0) throw Error(Errc::invalid_arguments, "antithetic sampling needs even n");
  detail::Stopwatch clock;
  detail::Rng rng(cfg.seed);
  std::vector<Permutation> out;
  out.reserve(cfg.n);
  for (int i = 0; i < cfg.n / 2; ++i) {
    Permutation p = random_permutation(Dimension(cfg.d), rng);
    Permutation r = reverse(p);
    out.push_back(std::move(p));
    out.push_back(std::move(r));
  }
  return detail::finish_uniform(std::move(out), cfg, clock);
}

/// Greedy kernel herding. Because E[K(p, .)] is the same for every p, each
/// step picks the pool member with the smallest summed similarity to the
/// samples chosen so far.
inline WeightedSampleSet kernel_herding(const SamplerConfig& cfg,
                                        const SelectionObserver& observer = {}) {
  cfg.validate();
  detail::Stopwatch clock;
  detail::Rng rng(cfg.seed);
  detail::CandidatePool pool(cfg, rng);
  std::vector<Permutation> chosen;
  chosen.reserve(cfg.n);
  std::unordered_set<Permutation, PermutationHash> taken;
  std::int64_t kernel_evals = 0;
  for (int step = 0; step < cfg.n; ++step) {
    auto candidates = pool.draw(taken);
    std::size_t best = 0;
    double best_score = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      double s = 0.0;
      for (const auto& q : chosen) s += cfg.kernel(candidates[c], q);
      kernel_evals += static_cast<std::int64_t>(chosen.size());
      if (s < best_score) {
        best_score = s;
        best = c;
      }
    }
    if (observer) observer(candidates, best);
    taken.insert(candidates[best]);
    chosen.push_back(std::move(candidates[best]));
  }
  auto set = detail::finish_uniform(std::move(chosen), cfg, clock);
  set.meta.kernel_evals = kernel_evals;
  set.meta.candidates_drawn = pool.drawn();
  return set;
}

inline constexpr double kSbqNugget = 1e-10;

/// Sequential Bayesian quadrature: greedily minimises the posterior variance
/// E[K] - z^T K^{-1} z over the candidate pool, keeping a Cholesky factor of
/// the kernel matrix that grows by one row per step. Returns the optimal
/// weights w = K^{-1} z.
inline WeightedSampleSet sbq(const SamplerConfig& cfg, const SelectionObserver& observer = {}) {
  cfg.validate();
  detail::Stopwatch clock;
  detail::Rng rng(cfg.seed);
  detail::CandidatePool pool(cfg, rng);
  const Dimension d(cfg.d);
  const double z = expected_kernel_uniform(cfg.kernel, d);
  const double diag = kernel_diagonal(cfg.kernel, d);
  const int n = cfg.n;

  Eigen::MatrixXd chol = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);  // chol^{-1} z
  std::vector<Permutation> chosen;
  chosen.reserve(n);
  std::unordered_set<Permutation, PermutationHash> taken;
  std::int64_t kernel_evals = 0;

  Eigen::VectorXd k_row(n), solved(n), best_solved(n);
  for (int step = 0; step < n; ++step) {
    auto candidates = pool.draw(taken);
    std::size_t best = candidates.size();
    double best_score = -1.0, best_pivot = 0.0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      for (int j = 0; j < step; ++j) k_row[j] = cfg.kernel(candidates[c], chosen[j]);
      kernel_evals += step;
      // Forward substitution: solved = chol^{-1} k_row.
      double sq = 0.0;
      for (int i = 0; i < step; ++i) {
        double acc = k_row[i];
        for (int j = 0; j < i; ++j) acc -= chol(i, j) * solved[j];
        solved[i] = acc / chol(i, i);
        sq += solved[i] * solved[i];
      }
      double pivot = diag - sq;
      if (!(pivot > 0.0)) pivot += kSbqNugget;
      if (!(pivot > 0.0)) continue;
      double proj = z;
      for (int i = 0; i < step; ++i) proj -= solved[i] * alpha[i];
      // Variance drops by proj^2 / pivot when this candidate is appended.
      const double score = proj * proj / pivot;
      if (score > best_score) {
        best_score = score;
        best = c;
        best_pivot = pivot;
        best_solved.head(step) = solved.head(step);
      }
    }
    if (best == candidates.size()) {
      throw Error(Errc::numerical_failure,
                  "SBQ Cholesky update failed at step " + std::to_string(step) +
                      " (kernel matrix not positive definite on the candidates)");
    }
    if (observer) observer(candidates, best);
    const double l = std::sqrt(best_pivot);
    chol.row(step).head(step) = best_solved.head(step).transpose();
    chol(step, step) = l;
    double proj = z;
    for (int i = 0; i < step; ++i) proj -= best_solved[i] * alpha[i];
    alpha[step] = proj / l;
    taken.insert(candidates[best]);
    chosen.push_back(std::move(candidates[best]));
  }

  // Back substitution: chol^T w = alpha.
  std::vector<double> w(n);
  for (int i = n - 1; i >= 0; --i) {
    double acc = alpha[i];
    for (int j = i + 1; j < n; ++j) acc -= chol(j, i) * w[j];
    w[i] = acc / chol(i, i);
  }

  WeightedSampleSet set;
  set.samples = std::move(chosen);
  set.weights = std::move(w);
  set.meta.algorithm = to_string(cfg.algorithm);
  set.meta.seed = cfg.seed;
  set.meta.seconds = clock.seconds();
  set.meta.kernel_evals = kernel_evals;
  set.meta.candidates_drawn = pool.drawn();
  return set;
}

/// Haar-random orthonormal basis of R^{dim} by Gram-Schmidt on Gaussian
/// columns (each vector orthogonalised twice).
template <class URBG>
Eigen::MatrixXd random_orthonormal_basis(int dim, URBG& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd q(dim, dim);
  for (int c = 0; c < dim; ++c) {
    for (int r = 0; r < dim; ++r) q(r, c) = normal(rng);
  }
  for (int c = 0; c < dim; ++c) {
    for (int pass = 0; pass < 2; ++pass) {
      for (int j = 0; j < c; ++j) q.col(c) -= q.col(j).dot(q.col(c)) * q.col(j);
    }
    const double norm = q.col(c).norm();
    if (norm == 0.0) throw Error(Errc::numerical_failure, "degenerate Gaussian draw in Gram-Schmidt");
    q.col(c) /= norm;
  }
  return q;
}

/// Blocks of 2(d-1) permutations from a random orthonormal basis of the
/// sphere's ambient space and the antipodes of its vectors. Each basis
/// vector is immediately followed by its antipode.
inline WeightedSampleSet orthogonal_codes(const SamplerConfig& cfg) {
  cfg.validate();
  if (cfg.d < 3) throw Error(Errc::invalid_dimension, "orthogonal codes need d >= 3");
  detail::Stopwatch clock;
  detail::Rng rng(cfg.seed);
  const Dimension d(cfg.d);
  const ProjectionMatrix u(d);
  std::vector<Permutation> out;
  out.reserve(cfg.n);
  while (static_cast<int>(out.size()) < cfg.n) {
    const Eigen::MatrixXd basis = random_orthonormal_basis(cfg.d - 1, rng);
    for (int c = 0; c < cfg.d - 1 && static_cast<int>(out.size()) < cfg.n; ++c) {
      const Eigen::VectorXd lifted = lift_to_hyperplane(basis.col(c), u);
      out.push_back(nearest_permutation(lifted));
      if (static_cast<int>(out.size()) < cfg.n) {
        out.push_back(nearest_permutation(Eigen::VectorXd(-lifted)));
      }
    }
  }
  return detail::finish_uniform(std::move(out), cfg, clock);
}

/// Shifted Sobol points mapped to the sphere by the inverse CDFs of the
/// polar angles, then lifted and rounded to permutations.
inline WeightedSampleSet sobol_permutations(const SamplerConfig& cfg) {
  cfg.validate();
  if (cfg.d < 4) throw Error(Errc::invalid_dimension, "Sobol permutations need d >= 4");
  detail::Stopwatch clock;
  detail::Rng rng(cfg.seed);
  const Dimension d(cfg.d);
  const int m = cfg.d - 2;
  SobolSequence::Shift shift =
      cfg.sobol_shift ? *cfg.sobol_shift : SobolSequence::random_shift(m, rng);
  SobolSequence seq(m, std::move(shift));
  const ProjectionMatrix u(d);
  std::vector<Permutation> out;
  out.reserve(cfg.n);
  std::vector<double> angles(m);
  for (int i = 0; i < cfg.n; ++i) {
    const std::vector<double> point = seq.next();
    for (int j = 0; j < m; ++j) angles[j] = polar_inverse_cdf(j + 1, point[j], d);
    out.push_back(nearest_permutation(lift_to_hyperplane(polar_to_cartesian(angles), u)));
  }
  return detail::finish_uniform(std::move(out), cfg, clock);
}

inline WeightedSampleSet sphere_mc(const SamplerConfig& cfg) {
  cfg.validate();
  if (cfg.d < 3) throw Error(Errc::invalid_dimension, "sphere sampling needs d >= 3");
  detail::Stopwatch clock;
  detail::Rng rng(cfg.seed);
  const Dimension d(cfg.d);
  const ProjectionMatrix u(d);
  std::vector<Permutation> out;
  out.reserve(cfg.n);
  for (int i = 0; i < cfg.n; ++i) {
    out.push_back(nearest_permutation(lift_to_hyperplane(uniform_sphere_point(d, rng), u)));
  }
  return detail::finish_uniform(std::move(out), cfg, clock);
}

inline WeightedSampleSet generate(const SamplerConfig& cfg) {
  switch (cfg.algorithm) {
    case Algorithm::monte_carlo: return monte_carlo(cfg);
    case Algorithm::antithetic: return antithetic(cfg);
    case Algorithm::herding: return kernel_herding(cfg);
    case Algorithm::sbq: return sbq(cfg);
    case Algorithm::orthogonal: return orthogonal_codes(cfg);
    case Algorithm::sobol: return sobol_permutations(cfg);
    case Algorithm::sphere_mc: return sphere_mc(cfg);
  }
  throw Error(Errc::config_error, "unhandled algorithm");
}

}  // namespace permqmc
