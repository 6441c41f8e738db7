#pragma once

#include <cctype>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "permqmc/error.hpp"
#include "permqmc/permutation.hpp"

namespace permqmc {

enum class KernelKind { kendall, mallows, spearman };

inline std::string to_string(KernelKind k) {
  switch (k) {
    case KernelKind::kendall: return "kendall";
    case KernelKind::mallows: return "mallows";
    case KernelKind::spearman: return "spearman";
  }
  return "unknown";
}

inline KernelKind parse_kernel_kind(const std::string& s) {
  std::string lower;
  for (char c : s) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "kendall") return KernelKind::kendall;
  if (lower == "mallows") return KernelKind::mallows;
  if (lower == "spearman") return KernelKind::spearman;
  throw Error(Errc::config_error, "unknown kernel '" + s + "'");
}

inline constexpr double kDefaultMallowsLambda = 4.0;

struct KernelSpec {
  KernelKind kind = KernelKind::mallows;
  double lambda = kDefaultMallowsLambda;

  static KernelSpec kendall() { return {KernelKind::kendall, kDefaultMallowsLambda}; }
  static KernelSpec spearman() { return {KernelKind::spearman, kDefaultMallowsLambda}; }
  static KernelSpec mallows(double lambda = kDefaultMallowsLambda) {
    KernelSpec s{KernelKind::mallows, lambda};
    s.validate();
    return s;
  }

  void validate() const {
    if (kind == KernelKind::mallows && !(lambda > 0.0 && std::isfinite(lambda))) {
      throw Error(Errc::invalid_arguments, "Mallows lambda must be positive");
    }
  }

  double operator()(const Permutation& p, const Permutation& q) const;
};

inline double kendall(const Permutation& p, const Permutation& q) {
  const auto dis = n_discordant(p, q);
  return 1.0 - 2.0 * static_cast<double>(dis) / static_cast<double>(n_pairs(p.dim()));
}

inline double mallows(const Permutation& p, const Permutation& q, double lambda) {
  if (!(lambda > 0.0)) throw Error(Errc::invalid_arguments, "Mallows lambda must be positive");
  const auto dis = n_discordant(p, q);
  return std::exp(-lambda * static_cast<double>(dis) / static_cast<double>(n_pairs(p.dim())));
}

inline double spearman(const Permutation& p, const Permutation& q) {
  detail::require_same_dim(p, q);
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += static_cast<double>(p[i]) * q[i];
  return s;
}

inline double KernelSpec::operator()(const Permutation& p, const Permutation& q) const {
  switch (kind) {
    case KernelKind::kendall: return permqmc::kendall(p, q);
    case KernelKind::mallows: return permqmc::mallows(p, q, lambda);
    case KernelKind::spearman: return permqmc::spearman(p, q);
  }
  return 0.0;
}

/// K(p, p), the same for every p.
inline double kernel_diagonal(const KernelSpec& spec, Dimension d) {
  if (spec.kind == KernelKind::spearman) {
    const double n = d.value();
    return n * (n + 1) * (2 * n + 1) / 6.0;
  }
  return 1.0;
}

/// E_{q ~ Uniform}[K(p, q)], independent of p.
///
/// The Mallows case evaluates the inversion-count moment generating function
/// at -lambda / binom(d, 2), accumulated in log space.
inline double expected_kernel_uniform(const KernelSpec& spec, Dimension d) {
  const double n = d.value();
  switch (spec.kind) {
    case KernelKind::kendall: return 0.0;
    case KernelKind::spearman: return n * (n + 1) * (n + 1) / 4.0;
    case KernelKind::mallows: {
      spec.validate();
      const double c = static_cast<double>(n_pairs(d.value()));
      const double step = spec.lambda / c;
      const double log_denom_unit = std::log(-std::expm1(-step));
      double log_sum = 0.0;
      for (int j = 1; j <= d.value(); ++j) {
        log_sum += std::log(-std::expm1(-step * j)) - std::log(static_cast<double>(j)) -
                   log_denom_unit;
      }
      return std::exp(log_sum);
    }
  }
  return 0.0;
}

using KernelMatrix = Eigen::MatrixXd;

inline KernelMatrix kernel_matrix(std::span<const Permutation> samples, const KernelSpec& spec) {
  if (samples.empty()) throw Error(Errc::invalid_arguments, "kernel_matrix of empty sample list");
  const auto n = static_cast<Eigen::Index>(samples.size());
  KernelMatrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m(i, i) = spec(samples[i], samples[i]);
    for (Eigen::Index j = 0; j < i; ++j) {
      m(i, j) = m(j, i) = spec(samples[i], samples[j]);
    }
  }
  return m;
}

}  // namespace permqmc
