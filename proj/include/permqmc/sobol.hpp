#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "permqmc/error.hpp"

namespace permqmc {

/// Sobol direction numbers in the Joe-Kuo text layout:
///
///   d  s  a  m_1 ... m_s
///
/// one line per dimension starting at d = 2 after a single header line.
/// `s` is the degree of the primitive polynomial, `a` its interior
/// coefficients as a bit pattern, and `m_i` the initial direction integers.
/// Dimension 1 is the van der Corput sequence and has no line.
class DirectionNumbers {
 public:
  static constexpr int kBits = 32;

  struct Entry {
    int degree = 0;
    std::uint32_t coeffs = 0;
    std::vector<std::uint32_t> m;
  };

  static DirectionNumbers parse(std::istream& in) {
    DirectionNumbers out;
    std::string line;
    bool header = true;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      if (header) {
        header = false;
        if (line.find_first_not_of(" \t0123456789") != std::string::npos) continue;
      }
      std::istringstream fields(line);
      long dim = 0;
      Entry e;
      if (!(fields >> dim >> e.degree >> e.coeffs) || e.degree < 1 || e.degree > kBits) {
        throw Error(Errc::config_error, "malformed direction-number line " + std::to_string(line_no));
      }
      if (dim != static_cast<long>(out.entries_.size()) + 2) {
        throw Error(Errc::config_error, "direction-number dimensions out of order at line " +
                                            std::to_string(line_no));
      }
      e.m.resize(e.degree);
      for (auto& m : e.m) {
        if (!(fields >> m)) {
          throw Error(Errc::config_error, "missing m_i on line " + std::to_string(line_no));
        }
      }
      out.entries_.push_back(std::move(e));
    }
    return out;
  }

  static DirectionNumbers from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::config_error, "cannot open direction-number file " + path);
    return parse(in);
  }

  /// The packaged table (first 1025 dimensions of new-joe-kuo-6.21201).
  static const DirectionNumbers& builtin();

  /// Highest supported dimension, counting the van der Corput coordinate.
  int max_dimension() const noexcept { return static_cast<int>(entries_.size()) + 1; }

  /// Direction integers v[b] (scaled to kBits bits) for 0-based dimension k.
  std::array<std::uint32_t, kBits> directions(int k) const {
    std::array<std::uint32_t, kBits> v{};
    if (k == 0) {
      for (int b = 0; b < kBits; ++b) v[b] = std::uint32_t{1} << (kBits - 1 - b);
      return v;
    }
    const Entry& e = entries_.at(static_cast<std::size_t>(k - 1));
    const int s = e.degree;
    for (int b = 0; b < std::min(s, kBits); ++b) v[b] = e.m[b] << (kBits - 1 - b);
    for (int b = s; b < kBits; ++b) {
      std::uint32_t x = v[b - s] ^ (v[b - s] >> s);
      for (int t = 1; t < s; ++t) {
        if ((e.coeffs >> (s - 1 - t)) & 1u) x ^= v[b - t];
      }
      v[b] = x;
    }
    return v;
  }

 private:
  std::vector<Entry> entries_;
};

#if __has_include("permqmc/joe_kuo_table.inc")
inline const DirectionNumbers& DirectionNumbers::builtin() {
  static const DirectionNumbers table = [] {
    static const char kText[] =
#include "permqmc/joe_kuo_table.inc"
        ;
    std::istringstream in(kText);
    return parse(in);
  }();
  return table;
}
#else
inline const DirectionNumbers& DirectionNumbers::builtin() {
  throw Error(Errc::config_error,
              "built-in Sobol table not generated; load one with DirectionNumbers::from_file");
}
#endif

/// Digitally shifted Sobol sequence (Gray-code order). Index 0, the all-zero
/// point, is skipped, so the first call to next() yields index 1.
class SobolSequence {
 public:
  using Shift = std::vector<std::uint32_t>;

  explicit SobolSequence(int dimension, Shift shift = {},
                         const DirectionNumbers& table = DirectionNumbers::builtin())
      : dimension_(dimension), shift_(std::move(shift)) {
    if (dimension < 1 || dimension > table.max_dimension()) {
      throw Error(Errc::invalid_dimension,
                  "Sobol dimension " + std::to_string(dimension) + " outside table range 1.." +
                      std::to_string(table.max_dimension()));
    }
    if (shift_.empty()) shift_.assign(dimension, 0u);
    if (static_cast<int>(shift_.size()) != dimension) {
      throw Error(Errc::invalid_arguments, "Sobol shift length must equal the dimension");
    }
    directions_.reserve(dimension);
    for (int k = 0; k < dimension; ++k) directions_.push_back(table.directions(k));
    state_.assign(dimension, 0u);
  }

  /// Uniform random digital shift for `dimension` coordinates.
  template <class URBG>
  static Shift random_shift(int dimension, URBG& rng) {
    std::uniform_int_distribution<std::uint32_t> bits;
    Shift s(dimension);
    for (auto& v : s) v = bits(rng);
    return s;
  }

  int dimension() const noexcept { return dimension_; }
  std::uint64_t index() const noexcept { return index_; }
  const Shift& shift() const noexcept { return shift_; }

  std::vector<double> next() {
    if (index_ >= (std::uint64_t{1} << DirectionNumbers::kBits) - 1) {
      throw Error(Errc::invalid_arguments, "Sobol sequence exhausted");
    }
    // Moving from index i to i+1 flips the direction of the lowest zero bit of i.
    const int c = std::countr_one(index_);
    ++index_;
    std::vector<double> out(dimension_);
    for (int k = 0; k < dimension_; ++k) {
      state_[k] ^= directions_[k][c];
      out[k] = static_cast<double>(state_[k] ^ shift_[k]) * 0x1p-32;
    }
    return out;
  }

 private:
  int dimension_;
  Shift shift_;
  std::vector<std::array<std::uint32_t, DirectionNumbers::kBits>> directions_;
  std::vector<std::uint32_t> state_;
  std::uint64_t index_ = 0;
};

inline std::vector<double> sobol_next(SobolSequence& state) { return state.next(); }

}  // namespace permqmc
