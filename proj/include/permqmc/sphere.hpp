#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "permqmc/error.hpp"
#include "permqmc/permutation.hpp"

namespace permqmc {

/// (d-1) x d matrix with orthonormal rows spanning the hyperplane
/// orthogonal to (1, ..., 1). Row k is (1, ..., 1, -(k+1), 0, ..., 0)
/// normalised, with k+1 leading ones.
class ProjectionMatrix {
 public:
  explicit ProjectionMatrix(Dimension d) : rows_(d.value() - 1, d.value()) {
    if (d.value() < 3) throw Error(Errc::invalid_dimension, "sphere geometry needs d >= 3");
    rows_.setZero();
    for (int k = 0; k < d.value() - 1; ++k) {
      const double len = std::sqrt(static_cast<double>(k + 1) + double(k + 1) * (k + 1));
      for (int i = 0; i <= k; ++i) rows_(k, i) = 1.0 / len;
      rows_(k, k + 1) = -static_cast<double>(k + 1) / len;
    }
  }

  int dim() const noexcept { return static_cast<int>(rows_.cols()); }
  const Eigen::MatrixXd& matrix() const noexcept { return rows_; }

 private:
  Eigen::MatrixXd rows_;
};

inline ProjectionMatrix projection_matrix(Dimension d) { return ProjectionMatrix(d); }

/// Uniform point on S^{d-2}, i.e. a unit vector of length d - 1.
template <class URBG>
Eigen::VectorXd uniform_sphere_point(Dimension d, URBG& rng) {
  if (d.value() < 3) throw Error(Errc::invalid_dimension, "sphere sampling needs d >= 3");
  std::normal_distribution<double> normal;
  Eigen::VectorXd x(d.value() - 1);
  double norm = 0.0;
  do {
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = normal(rng);
    norm = x.norm();
  } while (norm == 0.0);
  return x / norm;
}

inline Eigen::VectorXd lift_to_hyperplane(const Eigen::VectorXd& x, const ProjectionMatrix& u) {
  if (x.size() != u.matrix().rows()) {
    throw Error(Errc::invalid_arguments, "sphere point length must be d - 1");
  }
  return u.matrix().transpose() * x;
}

/// Permutohedron vertex closest in angle to `lifted`: coordinate i receives
/// its ascending rank, so the result is inverse(argsort(lifted)).
inline Permutation nearest_permutation(std::span<const double> lifted) {
  return inverse(argsort(lifted));
}

inline Permutation nearest_permutation(const Eigen::VectorXd& lifted) {
  return nearest_permutation(std::span<const double>(lifted.data(), lifted.size()));
}

namespace detail {

// Tabulated CDF of the polar-angle density proportional to sin^k on [0, pi].
class PolarCdfTable {
 public:
  static constexpr int kNodes = 4096;

  explicit PolarCdfTable(int exponent) : exponent_(exponent), cum_(kNodes + 1, 0.0) {
    const double h = std::numbers::pi / kNodes;
    for (int t = 0; t < kNodes; ++t) cum_[t + 1] = cum_[t] + integrate(t * h, (t + 1) * h);
    total_ = cum_[kNodes];
  }

  double density(double phi) const { return std::pow(std::sin(phi), exponent_) / total_; }

  double cdf(double phi) const {
    if (phi <= 0.0) return 0.0;
    if (phi >= std::numbers::pi) return 1.0;
    const double h = std::numbers::pi / kNodes;
    const int t = std::min(static_cast<int>(phi / h), kNodes - 1);
    return (cum_[t] + integrate(t * h, phi)) / total_;
  }

  double normaliser() const noexcept { return total_; }

  double inverse(double u) const {
    const double h = std::numbers::pi / kNodes;
    const double target = u * total_;
    const auto it = std::upper_bound(cum_.begin(), cum_.end(), target);
    int t = static_cast<int>(it - cum_.begin()) - 1;
    t = std::clamp(t, 0, kNodes - 1);
    double lo = t * h, hi = (t + 1) * h;
    // Safeguarded Newton inside the bracketing interval.
    const double span = cum_[t + 1] - cum_[t];
    double phi = span > 0.0 ? lo + h * (target - cum_[t]) / span : 0.5 * (lo + hi);
    for (int iter = 0; iter < 100; ++iter) {
      const double f = (cum_[t] + integrate(t * h, phi)) / total_ - u;
      if (std::abs(f) < 1e-14) break;
      if (f > 0.0) hi = phi; else lo = phi;
      if (hi - lo < 1e-15) break;
      const double slope = density(phi);
      double next = slope > 0.0 ? phi - f / slope : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      phi = next;
    }
    return phi;
  }

 private:
  // 10-point Gauss-Legendre on [a, b].
  double integrate(double a, double b) const {
    static constexpr double kX[5] = {0.1488743389816312, 0.4333953941292472, 0.6794095682990244,
                                     0.8650633666889845, 0.9739065285171717};
    static constexpr double kW[5] = {0.2955242247147529, 0.2692667193099963, 0.2190863625159820,
                                     0.1494513491505806, 0.0666713443086881};
    if (b <= a) return 0.0;
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double s = 0.0;
    for (int i = 0; i < 5; ++i) {
      s += kW[i] * (std::pow(std::sin(mid - half * kX[i]), exponent_) +
                    std::pow(std::sin(mid + half * kX[i]), exponent_));
    }
    return s * half;
  }

  int exponent_;
  std::vector<double> cum_;
  double total_ = 0.0;
};

inline const PolarCdfTable& polar_cdf_table(int exponent) {
  static std::mutex mu;
  static std::map<int, std::unique_ptr<const PolarCdfTable>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[exponent];
  if (!slot) slot = std::make_unique<const PolarCdfTable>(exponent);
  return *slot;
}

}  // namespace detail

/// Inverse CDF of polar angle `j` (1-based, 1..d-2) of a uniform point on
/// S^{d-2}. Angles j < d-2 have density proportional to sin^{d-j-2} on
/// [0, pi]; the last angle is uniform on [0, 2 pi).
inline double polar_inverse_cdf(int j, double u, Dimension d) {
  if (!(u >= 0.0 && u < 1.0)) throw Error(Errc::invalid_arguments, "u must lie in [0, 1)");
  const int m = d.value() - 2;
  if (m < 1 || j < 1 || j > m) {
    throw Error(Errc::invalid_arguments, "polar axis index out of range");
  }
  if (j == m) return 2.0 * std::numbers::pi * u;
  return detail::polar_cdf_table(d.value() - j - 2).inverse(u);
}

/// Generalised polar coordinates (unit radius) to a Cartesian point with one
/// more coordinate than there are angles.
inline Eigen::VectorXd polar_to_cartesian(std::span<const double> angles) {
  const auto m = static_cast<Eigen::Index>(angles.size());
  Eigen::VectorXd x(m + 1);
  double sines = 1.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    x[i] = sines * std::cos(angles[i]);
    sines *= std::sin(angles[i]);
  }
  x[m] = sines;
  return x;
}

}  // namespace permqmc
