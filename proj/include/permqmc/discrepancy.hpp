#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "permqmc/error.hpp"
#include "permqmc/kernels.hpp"
#include "permqmc/permutation.hpp"

namespace permqmc {

struct SampleMeta {
  std::string algorithm;
  std::uint64_t seed = 0;
  double seconds = 0.0;
  std::int64_t kernel_evals = 0;
  std::int64_t candidates_drawn = 0;
};

/// Permutation samples with per-sample quadrature weights.
struct WeightedSampleSet {
  std::vector<Permutation> samples;
  std::vector<double> weights;
  SampleMeta meta;

  std::size_t size() const noexcept { return samples.size(); }
  int dim() const noexcept { return samples.empty() ? 0 : samples.front().dim(); }

  static WeightedSampleSet uniform(std::vector<Permutation> samples, std::string algorithm = "") {
    WeightedSampleSet s;
    const double w = samples.empty() ? 0.0 : 1.0 / static_cast<double>(samples.size());
    s.weights.assign(samples.size(), w);
    s.samples = std::move(samples);
    s.meta.algorithm = std::move(algorithm);
    return s;
  }

  void validate() const {
    if (samples.empty()) throw Error(Errc::invalid_arguments, "empty sample set");
    if (weights.size() != samples.size()) {
      throw Error(Errc::invalid_arguments, "weights length does not match sample count");
    }
    for (const auto& p : samples) {
      if (p.size() != samples.front().size()) {
        throw Error(Errc::invalid_arguments, "samples have mixed dimensions");
      }
    }
    for (double w : weights) {
      if (!std::isfinite(w)) throw Error(Errc::invalid_arguments, "non-finite weight");
    }
  }
};

inline constexpr double kRadicandClamp = 1e-10;

/// Squared RKHS discrepancy of a weighted set against the uniform
/// distribution on S_d. Not clamped.
inline double squared_discrepancy(const WeightedSampleSet& set, const KernelSpec& spec) {
  set.validate();
  const Dimension d(set.dim());
  const double expected = expected_kernel_uniform(spec, d);
  double weight_sum = 0.0;
  for (double w : set.weights) weight_sum += w;
  double pair_sum = 0.0;
  const std::size_t n = set.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = set.weights[i];
    pair_sum += wi * wi * spec(set.samples[i], set.samples[i]);
    double row = 0.0;
    for (std::size_t j = 0; j < i; ++j) row += set.weights[j] * spec(set.samples[i], set.samples[j]);
    pair_sum += 2.0 * wi * row;
  }
  return expected - 2.0 * weight_sum * expected + pair_sum;
}

/// Square root of a squared discrepancy. Radicands in [-1e-10, 0) are
/// rounding noise and map to 0; anything more negative is an error.
inline double sqrt_radicand(double r) {
  if (!(r >= -kRadicandClamp)) {
    throw Error(Errc::numerical_failure, "negative discrepancy radicand " + std::to_string(r));
  }
  return std::sqrt(std::max(r, 0.0));
}

inline double discrepancy(const WeightedSampleSet& set, const KernelSpec& spec) {
  return sqrt_radicand(squared_discrepancy(set, spec));
}

}  // namespace permqmc
