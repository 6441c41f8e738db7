#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "permqmc/error.hpp"
#include "permqmc/permutation.hpp"

namespace permqmc {

/// A subset of the players {0, ..., d-1}, stored as a bitset.
class Coalition {
 public:
  explicit Coalition(int d) : d_(d), words_((d + 63) / 64, 0) {}

  static Coalition full(int d) {
    Coalition c(d);
    for (int i = 0; i < d; ++i) c.insert(i);
    return c;
  }

  static Coalition from_members(int d, std::span<const int> members) {
    Coalition c(d);
    for (int i : members) {
      if (i < 0 || i >= d) {
        throw Error(Errc::invalid_arguments, "player index " + std::to_string(i) + " out of range");
      }
      if (c.contains(i)) {
        throw Error(Errc::invalid_arguments, "duplicate player " + std::to_string(i));
      }
      c.insert(i);
    }
    return c;
  }

  int players() const noexcept { return d_; }
  bool contains(int i) const noexcept { return (words_[i >> 6] >> (i & 63)) & 1u; }
  void insert(int i) noexcept { words_[i >> 6] |= std::uint64_t{1} << (i & 63); }
  void erase(int i) noexcept { words_[i >> 6] &= ~(std::uint64_t{1} << (i & 63)); }

  int size() const noexcept {
    int s = 0;
    for (auto w : words_) s += std::popcount(w);
    return s;
  }

  std::vector<int> members() const {
    std::vector<int> out;
    for (int i = 0; i < d_; ++i) {
      if (contains(i)) out.push_back(i);
    }
    return out;
  }

  std::span<const std::uint64_t> words() const noexcept { return words_; }

  friend bool operator==(const Coalition&, const Coalition&) = default;

 private:
  int d_;
  std::vector<std::uint64_t> words_;
};

struct CoalitionHash {
  std::size_t operator()(const Coalition& c) const noexcept {
    const auto w = c.words();
    if (w.size() == 1) return std::hash<std::uint64_t>{}(w[0]);
    std::size_t h = 0x9e3779b97f4a7c15ull;
    for (auto x : w) h ^= std::hash<std::uint64_t>{}(x) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return h;
  }
};

/// A characteristic function v over coalitions of d players.
///
/// `calls()` counts every v(S) request; `evaluations()` counts the requests
/// that reached the underlying function (i.e. were not served from the
/// per-game cache).
class Game {
 public:
  explicit Game(Dimension d) : d_(d.value()) {}
  virtual ~Game() = default;
  Game(const Game&) = delete;
  Game& operator=(const Game&) = delete;

  int players() const noexcept { return d_; }

  double value(const Coalition& s) {
    if (s.players() != d_) {
      throw Error(Errc::invalid_arguments, "coalition built for a different player count");
    }
    ++calls_;
    if (caching_) {
      if (auto it = cache_.find(s); it != cache_.end()) return it->second;
    }
    ++evaluations_;
    const double v = evaluate(s);
    if (caching_) cache_.emplace(s, v);
    return v;
  }

  std::int64_t calls() const noexcept { return calls_; }
  std::int64_t evaluations() const noexcept { return evaluations_; }

  bool caching() const noexcept { return caching_; }
  void set_caching(bool on) {
    caching_ = on;
    if (!on) cache_.clear();
  }
  void clear_cache() { cache_.clear(); }

  virtual std::string describe() const = 0;

 protected:
  virtual double evaluate(const Coalition& s) = 0;

 private:
  int d_;
  bool caching_ = true;
  std::int64_t calls_ = 0;
  std::int64_t evaluations_ = 0;
  std::unordered_map<Coalition, double, CoalitionHash> cache_;
};

/// Disables a game's cache for the lifetime of the guard.
class CachingDisabled {
 public:
  explicit CachingDisabled(Game& g) : game_(g), was_(g.caching()) { g.set_caching(false); }
  ~CachingDisabled() { game_.set_caching(was_); }
  CachingDisabled(const CachingDisabled&) = delete;
  CachingDisabled& operator=(const CachingDisabled&) = delete;

 private:
  Game& game_;
  bool was_;
};

/// v(S) = baseline + sum of coefficients in S. Shapley value of i is c_i.
class LinearGame final : public Game {
 public:
  LinearGame(std::vector<double> coeffs, double baseline)
      : Game(Dimension(static_cast<int>(coeffs.size()))), coeffs_(std::move(coeffs)), baseline_(baseline) {
    for (double c : coeffs_) {
      if (!std::isfinite(c)) throw Error(Errc::invalid_arguments, "non-finite linear coefficient");
    }
  }

  std::span<const double> coefficients() const noexcept { return coeffs_; }
  std::string describe() const override { return "linear"; }

 protected:
  double evaluate(const Coalition& s) override {
    double v = baseline_;
    for (int i = 0; i < players(); ++i) {
      if (s.contains(i)) v += coeffs_[i];
    }
    return v;
  }

 private:
  std::vector<double> coeffs_;
  double baseline_;
};

/// Three players; v(S) = 1 when S holds player 2 and at least one of 0, 1.
class GloveGame final : public Game {
 public:
  GloveGame() : Game(Dimension(3)) {}
  std::string describe() const override { return "glove"; }

 protected:
  double evaluate(const Coalition& s) override {
    return (s.contains(2) && (s.contains(0) || s.contains(1))) ? 1.0 : 0.0;
  }
};

struct InteractionPair {
  int i = 0;
  int j = 0;
  double strength = 1.0;
};

/// v(S) = sum of strengths of pairs with both members in S.
class InteractionGame final : public Game {
 public:
  InteractionGame(Dimension d, std::vector<InteractionPair> pairs)
      : Game(d), pairs_(std::move(pairs)) {
    for (const auto& p : pairs_) {
      if (p.i < 0 || p.j < 0 || p.i >= d.value() || p.j >= d.value() || p.i == p.j) {
        throw Error(Errc::invalid_arguments, "interaction pair index out of range");
      }
    }
  }

  std::span<const InteractionPair> pairs() const noexcept { return pairs_; }
  std::string describe() const override { return "interaction"; }

 protected:
  double evaluate(const Coalition& s) override {
    double v = 0.0;
    for (const auto& p : pairs_) {
      if (s.contains(p.i) && s.contains(p.j)) v += p.strength;
    }
    return v;
  }

 private:
  std::vector<InteractionPair> pairs_;
};

inline std::unique_ptr<LinearGame> linear_game(std::vector<double> coeffs, double baseline = 0.0) {
  return std::make_unique<LinearGame>(std::move(coeffs), baseline);
}

inline std::unique_ptr<GloveGame> glove_game() { return std::make_unique<GloveGame>(); }

inline std::unique_ptr<InteractionGame> interaction_game(Dimension d,
                                                         std::vector<InteractionPair> pairs) {
  return std::make_unique<InteractionGame>(d, std::move(pairs));
}

/// Interaction game with `count` random distinct-member pairs and strengths
/// drawn from N(0, 1).
template <class URBG>
std::unique_ptr<InteractionGame> random_interaction_game(Dimension d, int count, URBG& rng) {
  std::uniform_int_distribution<int> player(0, d.value() - 1);
  std::normal_distribution<double> strength;
  std::vector<InteractionPair> pairs;
  for (int k = 0; k < count; ++k) {
    int i = player(rng), j = player(rng);
    while (j == i) j = player(rng);
    pairs.push_back({i, j, strength(rng)});
  }
  return interaction_game(d, std::move(pairs));
}

// ---------------------------------------------------------------------------
// Model marginalisation over background rows.

using Row = std::vector<double>;

class Predictor {
 public:
  virtual ~Predictor() = default;
  /// One prediction per row, in order.
  virtual std::vector<double> predict(std::span<const Row> rows) = 0;
};

/// f(x) = w . x + b
class LinearPredictor final : public Predictor {
 public:
  LinearPredictor(std::vector<double> weights, double bias) : w_(std::move(weights)), b_(bias) {}

  std::vector<double> predict(std::span<const Row> rows) override {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
      if (r.size() != w_.size()) throw Error(Errc::predictor_error, "row width mismatch");
      double v = b_;
      for (std::size_t i = 0; i < r.size(); ++i) v += w_[i] * r[i];
      out.push_back(v);
    }
    return out;
  }

 private:
  std::vector<double> w_;
  double b_;
};

/// v(S) is the mean prediction over the background rows, each with the
/// foreground's values substituted on S. All rows of one v(S) go to the
/// predictor as a single batch.
class MarginalizationGame final : public Game {
 public:
  MarginalizationGame(std::shared_ptr<Predictor> predictor, Row foreground,
                      std::vector<Row> background)
      : Game(Dimension(static_cast<int>(foreground.size()))),
        predictor_(std::move(predictor)),
        foreground_(std::move(foreground)),
        background_(std::move(background)) {
    if (!predictor_) throw Error(Errc::invalid_arguments, "null predictor");
    if (background_.empty()) throw Error(Errc::invalid_arguments, "empty background set");
    for (double v : foreground_) {
      if (!std::isfinite(v)) throw Error(Errc::invalid_arguments, "non-finite foreground value");
    }
    for (const auto& b : background_) {
      if (b.size() != foreground_.size()) {
        throw Error(Errc::invalid_arguments, "background row width differs from foreground");
      }
      for (double v : b) {
        if (!std::isfinite(v)) throw Error(Errc::invalid_arguments, "non-finite background value");
      }
    }
  }

  std::int64_t batches() const noexcept { return batches_; }
  std::string describe() const override { return "marginalization"; }

 protected:
  double evaluate(const Coalition& s) override {
    std::vector<Row> rows = background_;
    for (auto& r : rows) {
      for (int i = 0; i < players(); ++i) {
        if (s.contains(i)) r[i] = foreground_[i];
      }
    }
    ++batches_;
    const auto preds = predictor_->predict(rows);
    if (preds.size() != rows.size()) {
      throw Error(Errc::predictor_error, "predictor returned " + std::to_string(preds.size()) +
                                             " values for " + std::to_string(rows.size()) + " rows");
    }
    double sum = 0.0;
    for (double p : preds) sum += p;
    return sum / static_cast<double>(preds.size());
  }

 private:
  std::shared_ptr<Predictor> predictor_;
  Row foreground_;
  std::vector<Row> background_;
  std::int64_t batches_ = 0;
};

inline std::unique_ptr<MarginalizationGame> marginalization_game(std::shared_ptr<Predictor> predictor,
                                                                 Row foreground,
                                                                 std::vector<Row> background) {
  return std::make_unique<MarginalizationGame>(std::move(predictor), std::move(foreground),
                                               std::move(background));
}

}  // namespace permqmc
