#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "permqmc/error.hpp"

namespace permqmc {

/// Number of players/features. Always at least 2.
class Dimension {
 public:
  explicit Dimension(int d) : d_(d) {
    if (d < 2) throw Error(Errc::invalid_dimension, "d must be >= 2, got " + std::to_string(d));
  }
  int value() const noexcept { return d_; }
  operator int() const noexcept { return d_; }

 private:
  int d_;
};

inline std::int64_t n_pairs(int d) { return static_cast<std::int64_t>(d) * (d - 1) / 2; }

/// A permutation in one-line notation: element i (0-based index) has rank
/// `p[i]` in 1..d.
class Permutation {
 public:
  Permutation() = default;

  explicit Permutation(std::vector<int> ranks) : ranks_(std::move(ranks)) { validate(); }
  Permutation(std::initializer_list<int> ranks) : ranks_(ranks) { validate(); }

  std::size_t size() const noexcept { return ranks_.size(); }
  int dim() const noexcept { return static_cast<int>(ranks_.size()); }
  int operator[](std::size_t i) const noexcept { return ranks_[i]; }
  std::span<const int> ranks() const noexcept { return ranks_; }

  /// Elements in ascending rank order, as 0-based indices.
  std::vector<int> order() const {
    std::vector<int> out(ranks_.size());
    for (std::size_t i = 0; i < ranks_.size(); ++i) out[ranks_[i] - 1] = static_cast<int>(i);
    return out;
  }

  friend bool operator==(const Permutation&, const Permutation&) = default;
  friend auto operator<=>(const Permutation&, const Permutation&) = default;

  // Unchecked construction for internal callers that build a bijection by
  // construction.
  static Permutation from_trusted(std::vector<int> ranks) {
    Permutation p;
    p.ranks_ = std::move(ranks);
    return p;
  }

 private:
  void validate() const {
    const std::size_t d = ranks_.size();
    if (d < 2) throw Error(Errc::invalid_dimension, "permutation length must be >= 2");
    std::vector<bool> seen(d, false);
    for (int r : ranks_) {
      if (r < 1 || static_cast<std::size_t>(r) > d || seen[r - 1]) {
        throw Error(Errc::invalid_arguments, "ranks are not a bijection on 1..d");
      }
      seen[r - 1] = true;
    }
  }

  std::vector<int> ranks_;
};

struct PermutationHash {
  std::size_t operator()(const Permutation& p) const noexcept {
    std::size_t h = 1469598103934665603ull;
    for (int r : p.ranks()) {
      h ^= static_cast<std::size_t>(r);
      h *= 1099511628211ull;
    }
    return h;
  }
};

inline Permutation identity(Dimension d) {
  std::vector<int> r(d.value());
  std::iota(r.begin(), r.end(), 1);
  return Permutation::from_trusted(std::move(r));
}

inline Permutation inverse(const Permutation& p) {
  std::vector<int> r(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) r[p[i] - 1] = static_cast<int>(i) + 1;
  return Permutation::from_trusted(std::move(r));
}

/// Rank complement: element i gets rank d + 1 - p(i).
inline Permutation reverse(const Permutation& p) {
  const int d = p.dim();
  std::vector<int> r(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) r[i] = d + 1 - p[i];
  return Permutation::from_trusted(std::move(r));
}

namespace detail {

// Counts inversions of `a` in place, using `buf` (same length) as scratch.
inline std::int64_t merge_count(int* a, int* buf, std::size_t n) {
  if (n < 2) return 0;
  const std::size_t mid = n / 2;
  std::int64_t count = merge_count(a, buf, mid) + merge_count(a + mid, buf + mid, n - mid);
  std::size_t i = 0, j = mid, k = 0;
  while (i < mid && j < n) {
    if (a[i] <= a[j]) {
      buf[k++] = a[i++];
    } else {
      count += static_cast<std::int64_t>(mid - i);
      buf[k++] = a[j++];
    }
  }
  while (i < mid) buf[k++] = a[i++];
  while (j < n) buf[k++] = a[j++];
  std::copy(buf, buf + n, a);
  return count;
}

inline void require_same_dim(const Permutation& p, const Permutation& q) {
  if (p.size() != q.size()) {
    throw Error(Errc::invalid_arguments, "permutation dimensions differ (" +
                                             std::to_string(p.size()) + " vs " +
                                             std::to_string(q.size()) + ")");
  }
}

}  // namespace detail

/// Number of element pairs ordered differently by p and q, in O(d log d).
inline std::int64_t n_discordant(const Permutation& p, const Permutation& q) {
  detail::require_same_dim(p, q);
  const std::size_t d = p.size();
  constexpr std::size_t kStack = 64;
  int stack_seq[kStack], stack_buf[kStack];
  std::vector<int> heap_seq, heap_buf;
  int* seq = stack_seq;
  int* buf = stack_buf;
  if (d > kStack) {
    heap_seq.resize(d);
    heap_buf.resize(d);
    seq = heap_seq.data();
    buf = heap_buf.data();
  }
  // Arrange q's ranks in p's rank order; discordant pairs are its inversions.
  for (std::size_t i = 0; i < d; ++i) seq[p[i] - 1] = q[i];
  return detail::merge_count(seq, buf, d);
}

inline std::int64_t n_inversions(const Permutation& p) {
  return n_discordant(identity(Dimension(p.dim())), p);
}

/// Stable argsort: 1-based indices of x in ascending order, ties by index.
inline Permutation argsort(std::span<const double> x) {
  if (x.size() < 2) throw Error(Errc::invalid_dimension, "argsort needs at least 2 entries");
  for (double v : x) {
    if (std::isnan(v)) throw Error(Errc::invalid_arguments, "argsort input contains NaN");
  }
  std::vector<int> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return x[a] < x[b]; });
  for (int& i : idx) ++i;
  return Permutation::from_trusted(std::move(idx));
}

/// Uniform permutation by Fisher-Yates.
template <class URBG>
Permutation random_permutation(Dimension d, URBG& rng) {
  std::vector<int> r(d.value());
  std::iota(r.begin(), r.end(), 1);
  for (int i = d.value() - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i);
    std::swap(r[i], r[pick(rng)]);
  }
  return Permutation::from_trusted(std::move(r));
}

/// All d! permutations in lexicographic order. Intended for d <= 10.
inline std::vector<Permutation> all_permutations(Dimension d) {
  if (d.value() > 10) throw Error(Errc::invalid_dimension, "enumeration capped at d = 10");
  std::vector<int> r(d.value());
  std::iota(r.begin(), r.end(), 1);
  std::vector<Permutation> out;
  do {
    out.push_back(Permutation::from_trusted(r));
  } while (std::next_permutation(r.begin(), r.end()));
  return out;
}

// Text form: comma-separated 1-based ranks.
inline std::string format_permutation(const Permutation& p) {
  std::string s;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(p[i]);
  }
  return s;
}

inline Permutation parse_permutation(std::string_view line) {
  std::vector<int> ranks;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    std::size_t end = line.find(',', pos);
    if (end == std::string_view::npos) end = line.size();
    std::string field(line.substr(pos, end - pos));
    const auto first = field.find_first_not_of(" \t\r");
    const auto last = field.find_last_not_of(" \t\r");
    if (first == std::string::npos) {
      throw Error(Errc::invalid_arguments, "empty rank field in permutation line");
    }
    field = field.substr(first, last - first + 1);
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(field, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != field.size()) throw Error(Errc::invalid_arguments, "bad rank '" + field + "'");
    ranks.push_back(v);
    pos = end + 1;
  }
  return Permutation(std::move(ranks));
}

}  // namespace permqmc

template <>
struct std::hash<permqmc::Permutation> : permqmc::PermutationHash {};
