#pragma once

// Benchmark harness behind the command-line tool: discrepancy tables,
// convergence runs and parameter sweeps. Everything returns a Report whose
// CSV output starts with a comment header holding the resolved config.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "permqmc/discrepancy.hpp"
#include "permqmc/error.hpp"
#include "permqmc/estimators.hpp"
#include "permqmc/external_predictor.hpp"
#include "permqmc/games.hpp"
#include "permqmc/io.hpp"
#include "permqmc/kernels.hpp"
#include "permqmc/samplers.hpp"

namespace permqmc {

using nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Games by description.

/// Builds fresh Game instances so each worker owns its own cache and
/// counters. Player indices in text and JSON forms are 1-based.
struct GameSpec {
  std::string kind = "glove";  // glove | linear | interaction | random-interaction | model

  std::vector<double> coefficients;  // linear
  double baseline = 0.0;

  int d = 0;  // interaction, random-interaction
  std::vector<InteractionPair> pairs;
  int pair_count = 0;
  std::uint64_t game_seed = 0;

  // model: a predictor marginalised over background rows
  std::string command;
  std::vector<double> model_weights;
  double model_bias = 0.0;
  std::string background_csv;
  std::string foreground_csv;
  int foreground_row = 0;
  std::chrono::milliseconds timeout{60000};

  int players() const {
    if (kind == "glove") return 3;
    if (kind == "linear") return static_cast<int>(coefficients.size());
    if (kind == "interaction" || kind == "random-interaction") return d;
    if (kind == "model") return static_cast<int>(load_foreground().size());
    throw Error(Errc::config_error, "unknown game kind '" + kind + "'");
  }

  /// Built-in games up to 20 players can be solved exactly for reference.
  bool has_exact_oracle() const { return kind != "model" && players() <= kExactSubsetCap; }

  std::unique_ptr<Game> build() const {
    if (kind == "glove") return glove_game();
    if (kind == "linear") return linear_game(coefficients, baseline);
    if (kind == "interaction") return interaction_game(Dimension(d), pairs);
    if (kind == "random-interaction") {
      std::mt19937_64 rng(game_seed);
      return random_interaction_game(Dimension(d), pair_count, rng);
    }
    if (kind == "model") {
      std::shared_ptr<Predictor> predictor;
      if (!command.empty()) {
        predictor = external_predictor(command, timeout);
      } else if (!model_weights.empty()) {
        predictor = std::make_shared<LinearPredictor>(model_weights, model_bias);
      } else {
        throw Error(Errc::config_error, "model game needs a predictor command or linear weights");
      }
      if (background_csv.empty()) throw Error(Errc::config_error, "model game needs a background CSV");
      return marginalization_game(std::move(predictor), load_foreground(),
                                  read_table_file(background_csv).rows);
    }
    throw Error(Errc::config_error, "unknown game kind '" + kind + "'");
  }

  Row load_foreground() const {
    if (foreground_csv.empty()) throw Error(Errc::config_error, "model game needs a foreground CSV");
    const Table t = read_table_file(foreground_csv);
    if (foreground_row < 0 || foreground_row >= static_cast<int>(t.rows.size())) {
      throw Error(Errc::config_error, "foreground row " + std::to_string(foreground_row) +
                                          " not in '" + foreground_csv + "'");
    }
    return t.rows[foreground_row];
  }

  json to_json() const {
    json j;
    j["kind"] = kind;
    if (kind == "linear") {
      j["coefficients"] = coefficients;
      j["baseline"] = baseline;
    } else if (kind == "interaction") {
      j["d"] = d;
      json ps = json::array();
      for (const auto& p : pairs) ps.push_back({p.i + 1, p.j + 1, p.strength});
      j["pairs"] = ps;
    } else if (kind == "random-interaction") {
      j["d"] = d;
      j["pair_count"] = pair_count;
      j["seed"] = game_seed;
    } else if (kind == "model") {
      if (!command.empty()) j["command"] = command;
      if (!model_weights.empty()) {
        j["linear_weights"] = model_weights;
        j["bias"] = model_bias;
      }
      j["background"] = background_csv;
      j["foreground"] = foreground_csv;
      j["row"] = foreground_row;
      j["timeout_ms"] = timeout.count();
    }
    return j;
  }

  static GameSpec from_json(const json& j) {
    try {
      GameSpec g;
      g.kind = j.value("kind", std::string("glove"));
      if (g.kind == "linear") {
        g.coefficients = j.at("coefficients").get<std::vector<double>>();
        g.baseline = j.value("baseline", 0.0);
      } else if (g.kind == "interaction") {
        g.d = j.at("d").get<int>();
        for (const auto& p : j.at("pairs")) {
          g.pairs.push_back({p.at(0).get<int>() - 1, p.at(1).get<int>() - 1, p.at(2).get<double>()});
        }
      } else if (g.kind == "random-interaction") {
        g.d = j.at("d").get<int>();
        g.pair_count = j.at("pair_count").get<int>();
        g.game_seed = j.value("seed", std::uint64_t{0});
      } else if (g.kind == "model") {
        g.command = j.value("command", std::string());
        g.model_weights = j.value("linear_weights", std::vector<double>{});
        g.model_bias = j.value("bias", 0.0);
        g.background_csv = j.at("background").get<std::string>();
        g.foreground_csv = j.at("foreground").get<std::string>();
        g.foreground_row = j.value("row", 0);
        g.timeout = std::chrono::milliseconds(j.value("timeout_ms", std::int64_t{60000}));
      } else if (g.kind != "glove") {
        throw Error(Errc::config_error, "unknown game kind '" + g.kind + "'");
      }
      g.validate();
      return g;
    } catch (const json::exception& e) {
      throw Error(Errc::config_error, std::string("game spec: ") + e.what());
    }
  }

  void validate() const {
    if (kind == "linear" && coefficients.size() < 2) {
      throw Error(Errc::config_error, "linear game needs at least 2 coefficients");
    }
    if ((kind == "interaction" || kind == "random-interaction") && d < 2) {
      throw Error(Errc::config_error, "interaction game needs d >= 2");
    }
    if (kind == "random-interaction" && pair_count < 0) {
      throw Error(Errc::config_error, "pair count must be non-negative");
    }
    if (kind == "interaction") {
      for (const auto& p : pairs) {
        if (p.i < 0 || p.j < 0 || p.i >= d || p.j >= d || p.i == p.j) {
          throw Error(Errc::config_error, "interaction pair (" + std::to_string(p.i + 1) + ", " +
                                              std::to_string(p.j + 1) + ") is invalid for d = " +
                                              std::to_string(d));
        }
      }
    }
  }
};

/// Text form of a built-in game:
///
///   glove
///   linear:c1,c2,...
///   interaction:D:i-j=s,i-j=s,...      (1-based players)
///   random-interaction:D:COUNT[:SEED]
inline GameSpec parse_game_spec(const std::string& text) {
  auto fields = [](const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string f;
    std::istringstream in(s);
    while (std::getline(in, f, sep)) out.push_back(detail::trim(f));
    return out;
  };
  auto to_int = [&](const std::string& s) {
    const double v = detail::parse_number(s, "game spec '" + text + "'");
    if (v != static_cast<int>(v)) throw Error(Errc::config_error, "expected an integer in '" + text + "'");
    return static_cast<int>(v);
  };
  try {
    const auto parts = fields(text, ':');
    if (parts.empty()) throw Error(Errc::config_error, "empty game spec");
    GameSpec g;
    g.kind = parts[0];
    if (g.kind == "glove" && parts.size() == 1) {
      // nothing further
    } else if (g.kind == "linear" && parts.size() == 2) {
      for (const auto& c : fields(parts[1], ',')) {
        g.coefficients.push_back(detail::parse_number(c, "game spec '" + text + "'"));
      }
    } else if (g.kind == "interaction" && (parts.size() == 2 || parts.size() == 3)) {
      g.d = to_int(parts[1]);
      if (parts.size() == 3 && !parts[2].empty()) {
        for (const auto& term : fields(parts[2], ',')) {
          const auto eq = term.find('=');
          const auto dash = term.find('-');
          if (eq == std::string::npos || dash == std::string::npos || dash > eq) {
            throw Error(Errc::config_error, "interaction term '" + term + "' is not i-j=s");
          }
          g.pairs.push_back({to_int(term.substr(0, dash)) - 1,
                             to_int(term.substr(dash + 1, eq - dash - 1)) - 1,
                             detail::parse_number(term.substr(eq + 1), "game spec '" + text + "'")});
        }
      }
    } else if (g.kind == "random-interaction" && (parts.size() == 3 || parts.size() == 4)) {
      g.d = to_int(parts[1]);
      g.pair_count = to_int(parts[2]);
      if (parts.size() == 4) g.game_seed = static_cast<std::uint64_t>(to_int(parts[3]));
    } else {
      throw Error(Errc::config_error, "cannot parse game spec '" + text + "'");
    }
    g.validate();
    return g;
  } catch (const Error& e) {
    if (e.code() == Errc::config_error) throw;
    throw Error(Errc::config_error, e.what());
  }
}

// ---------------------------------------------------------------------------
// Estimation methods on a shared marginal-evaluation budget.

struct MethodOptions {
  KernelSpec kernel = KernelSpec::mallows();
  int pool_size = 25;
  int owen_nodes = 10;
};

/// Canonical method name; accepts the sampler aliases plus Owen,
/// Owen-halved, Stratified and Exact.
inline std::string canonical_method(const std::string& name) {
  std::string s;
  for (char c : name) {
    if (c != '-' && c != '_' && c != ' ') s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  if (s == "owen") return "Owen";
  if (s == "owenhalved" || s == "owenantithetic") return "Owen-halved";
  if (s == "stratified") return "Stratified";
  if (s == "exact") return "Exact";
  try {
    return to_string(parse_algorithm(name));
  } catch (const Error&) {
    throw Error(Errc::config_error, "unknown method '" + name + "'");
  }
}

inline bool is_sampler_method(const std::string& canonical) {
  return canonical != "Owen" && canonical != "Owen-halved" && canonical != "Stratified" &&
         canonical != "Exact";
}

/// Sample count a permutation sampler gets from `budget` marginal
/// evaluations on d players (antithetic rounds down to even).
inline int samples_for_budget(const std::string& method, std::int64_t budget, int d) {
  std::int64_t n = budget / d;
  if (canonical_method(method) == "MC-antithetic") n -= n % 2;
  if (n < 1) {
    throw Error(Errc::invalid_arguments, "budget " + std::to_string(budget) + " is too small for " +
                                             method + " with d = " + std::to_string(d));
  }
  return static_cast<int>(n);
}

/// Runs one estimator with about `budget` marginal evaluations.
inline ShapleyEstimate run_method(Game& game, const std::string& method, std::int64_t budget,
                                  std::uint64_t seed, const MethodOptions& opt) {
  const std::string m = canonical_method(method);
  const int d = game.players();
  std::mt19937_64 rng(seed);
  if (m == "Exact") return exact_shapley_subsets(game);
  if (m == "Stratified") return stratified_castro(game, budget, rng);
  if (m == "Owen" || m == "Owen-halved") {
    const bool halved = m == "Owen-halved";
    const std::int64_t per_draw = static_cast<std::int64_t>(d) * (opt.owen_nodes + 1) * (halved ? 2 : 1);
    const int draws = static_cast<int>(std::max<std::int64_t>(1, budget / per_draw));
    return owen_multilinear(game, opt.owen_nodes, draws, halved, rng);
  }
  SamplerConfig cfg;
  cfg.algorithm = parse_algorithm(m);
  cfg.n = samples_for_budget(m, budget, d);
  cfg.d = d;
  cfg.kernel = opt.kernel;
  cfg.pool_size = opt.pool_size;
  cfg.seed = seed;
  return shapley_from_permutations(game, generate(cfg));
}

// ---------------------------------------------------------------------------
// Worker pool.

/// Calls body(i) for i in [0, count) on up to `jobs` threads. Results must
/// be written to per-index slots, which keeps output order independent of
/// scheduling. The first exception is rethrown after all workers stop.
template <class Body>
void parallel_for(std::size_t count, int jobs, Body&& body) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count || failed.load()) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          failed.store(true);
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Reports.

struct Report {
  std::string kind;
  json config;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void write_csv(std::ostream& out) const {
    out << "# permqmc " << kVersion << ' ' << kind << '\n';
    out << "# config: " << config.dump() << '\n';
    for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
    out << '\n';
    for (const auto& r : rows) {
      for (std::size_t c = 0; c < r.size(); ++c) out << (c ? "," : "") << r[c];
      out << '\n';
    }
  }

  std::string csv() const {
    std::ostringstream s;
    write_csv(s);
    return s.str();
  }

  std::size_t column(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw Error(Errc::invalid_arguments, "report has no column '" + name + "'");
    return static_cast<std::size_t>(it - columns.begin());
  }

  /// gnuplot data: one block per distinct value of the `group` columns,
  /// blocks separated by two blank lines, each row "x y err".
  void write_gnuplot(std::ostream& out, const std::vector<std::string>& group, const std::string& x,
                     const std::string& y, const std::string& err) const {
    std::vector<std::size_t> gcols;
    for (const auto& g : group) gcols.push_back(column(g));
    const std::size_t xc = column(x), yc = column(y), ec = column(err);
    std::vector<std::string> order;
    std::map<std::string, std::vector<const std::vector<std::string>*>> blocks;
    for (const auto& r : rows) {
      std::string key;
      for (std::size_t k = 0; k < gcols.size(); ++k) key += (k ? " " : "") + group[k] + "=" + r[gcols[k]];
      if (!blocks.count(key)) order.push_back(key);
      blocks[key].push_back(&r);
    }
    out << "# permqmc " << kVersion << ' ' << kind << '\n';
    out << "# config: " << config.dump() << '\n';
    for (std::size_t b = 0; b < order.size(); ++b) {
      if (b) out << "\n\n";
      out << "# " << order[b] << '\n';
      out << "# " << x << ' ' << y << ' ' << err << '\n';
      for (const auto* r : blocks[order[b]]) out << (*r)[xc] << ' ' << (*r)[yc] << ' ' << (*r)[ec] << '\n';
    }
  }
};

// ---------------------------------------------------------------------------
// Experiment configuration.

struct ExperimentConfig {
  std::vector<std::string> methods{"MC"};
  std::vector<int> dims{10};
  // Sample counts for discrepancy tables and sweeps; marginal-evaluation
  // budgets for convergence runs.
  std::vector<std::int64_t> ns{100};
  KernelSpec kernel = KernelSpec::mallows();
  int pool_size = 25;
  int owen_nodes = 10;
  int trials = 25;
  std::uint64_t base_seed = 0;
  int jobs = 1;
  bool timing = true;
  std::optional<GameSpec> game;
  std::string reference = "auto";  // auto | exact | trial-mean
  std::string sweep_axis;          // lambda | pool_size | kernel
  std::vector<std::string> sweep_values;

  std::uint64_t seed_for(int trial) const { return base_seed + static_cast<std::uint64_t>(trial); }

  MethodOptions method_options() const { return {kernel, pool_size, owen_nodes}; }

  void validate() const {
    if (trials < 1) throw Error(Errc::config_error, "trial count must be >= 1");
    if (methods.empty()) throw Error(Errc::config_error, "no methods given");
    for (const auto& m : methods) canonical_method(m);
    if (dims.empty() || ns.empty()) throw Error(Errc::config_error, "need at least one d and one n");
    for (int d : dims) {
      if (d < 2) throw Error(Errc::config_error, "dimension must be >= 2");
    }
    for (auto n : ns) {
      if (n < 1) throw Error(Errc::config_error, "n must be >= 1");
    }
    if (pool_size < 1) throw Error(Errc::config_error, "pool size must be >= 1");
    if (owen_nodes < 2) throw Error(Errc::config_error, "Owen sampling needs at least 2 nodes");
    if (reference != "auto" && reference != "exact" && reference != "trial-mean") {
      throw Error(Errc::config_error, "reference must be auto, exact or trial-mean");
    }
    try {
      kernel.validate();
    } catch (const Error& e) {
      throw Error(Errc::config_error, e.what());
    }
  }

  json to_json() const {
    json j;
    j["methods"] = methods;
    j["dims"] = dims;
    j["n"] = ns;
    j["kernel"] = to_string(kernel.kind);
    j["lambda"] = kernel.lambda;
    j["pool_size"] = pool_size;
    j["owen_nodes"] = owen_nodes;
    j["trials"] = trials;
    j["base_seed"] = base_seed;
    std::vector<std::uint64_t> seeds;
    for (int t = 0; t < trials; ++t) seeds.push_back(seed_for(t));
    j["seeds"] = seeds;
    j["jobs"] = jobs;
    j["timing"] = timing;
    j["reference"] = reference;
    if (game) j["game"] = game->to_json();
    if (!sweep_axis.empty()) {
      j["sweep"] = {{"axis", sweep_axis}, {"values", sweep_values}};
    }
    return j;
  }

  static ExperimentConfig from_json(const json& j) {
    try {
      ExperimentConfig c;
      c.methods = j.value("methods", c.methods);
      c.dims = j.value("dims", c.dims);
      c.ns = j.value("n", c.ns);
      const std::string kind = j.value("kernel", std::string("mallows"));
      c.kernel = KernelSpec{parse_kernel_kind(kind), j.value("lambda", kDefaultMallowsLambda)};
      c.pool_size = j.value("pool_size", c.pool_size);
      c.owen_nodes = j.value("owen_nodes", c.owen_nodes);
      c.trials = j.value("trials", c.trials);
      c.base_seed = j.value("base_seed", c.base_seed);
      c.jobs = j.value("jobs", c.jobs);
      c.timing = j.value("timing", c.timing);
      c.reference = j.value("reference", c.reference);
      if (j.contains("game")) {
        c.game = j["game"].is_string() ? parse_game_spec(j["game"].get<std::string>())
                                       : GameSpec::from_json(j["game"]);
      }
      if (j.contains("sweep")) {
        const auto& s = j["sweep"];
        c.sweep_axis = s.at("axis").get<std::string>();
        for (const auto& v : s.at("values")) {
          c.sweep_values.push_back(v.is_string() ? v.get<std::string>() : v.dump());
        }
      }
      c.validate();
      return c;
    } catch (const json::exception& e) {
      throw Error(Errc::config_error, std::string("config: ") + e.what());
    }
  }
};

inline ExperimentConfig load_experiment_config(const std::string& path) {
  auto in = detail::open_input(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(Errc::config_error, "'" + path + "': " + e.what());
  }
  return ExperimentConfig::from_json(j);
}

// ---------------------------------------------------------------------------
// Discrepancy tables.

struct DiscrepancyCell {
  int d = 0;
  int n = 0;
  std::string method;
  std::vector<double> discrepancy;  // per trial
  std::vector<double> seconds;      // per trial, sample generation only
};

struct DiscrepancyTable {
  Report report;
  std::vector<DiscrepancyCell> cells;
};

/// Per (d, n, sampler): discrepancy under cfg.kernel and generation time,
/// over cfg.trials seeds. Samplers use cfg.kernel for their greedy steps.
inline DiscrepancyTable run_discrepancy_table(const ExperimentConfig& cfg) {
  cfg.validate();
  DiscrepancyTable out;
  for (int d : cfg.dims) {
    for (auto n : cfg.ns) {
      for (const auto& m : cfg.methods) {
        const std::string name = canonical_method(m);
        if (!is_sampler_method(name)) {
          throw Error(Errc::config_error, name + " does not produce permutation samples");
        }
        out.cells.push_back({d, static_cast<int>(n), name, std::vector<double>(cfg.trials),
                             std::vector<double>(cfg.trials)});
      }
    }
  }
  const std::size_t trials = static_cast<std::size_t>(cfg.trials);
  parallel_for(out.cells.size() * trials, cfg.jobs, [&](std::size_t job) {
    auto& cell = out.cells[job / trials];
    const int t = static_cast<int>(job % trials);
    SamplerConfig sc;
    sc.algorithm = parse_algorithm(cell.method);
    sc.n = cell.n;
    sc.d = cell.d;
    sc.kernel = cfg.kernel;
    sc.pool_size = cfg.pool_size;
    sc.seed = cfg.seed_for(t);
    const auto set = generate(sc);
    cell.discrepancy[t] = discrepancy(set, cfg.kernel);
    cell.seconds[t] = cfg.timing ? set.meta.seconds : 0.0;
  });
  out.report.kind = "discrepancy-table";
  out.report.config = cfg.to_json();
  out.report.columns = {"d", "n", "algorithm", "disc_mean", "disc_std", "time_mean", "time_std"};
  for (const auto& c : out.cells) {
    const auto disc = summarize(c.discrepancy);
    const auto time = summarize(c.seconds);
    out.report.rows.push_back({std::to_string(c.d), std::to_string(c.n), c.method,
                               format_double(disc.mean), format_double(disc.std),
                               format_double(time.mean), format_double(time.std)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convergence of Shapley estimates.

struct ConvergenceCell {
  std::string method;
  std::int64_t budget = 0;
  std::vector<std::vector<double>> estimates;  // per trial
  std::vector<double> mse;                     // per trial
  std::vector<double> marginal_evals;
  std::vector<double> v_evals;
};

struct ConvergenceResult {
  Report report;
  std::vector<double> reference;
  std::string reference_kind;
  std::vector<ConvergenceCell> cells;
};

/// Per (method, budget): MSE of the estimates against the exact values
/// (built-in games up to 20 players) or, failing that, against the
/// elementwise mean of every estimate at the largest budget.
inline ConvergenceResult run_convergence(const ExperimentConfig& cfg) {
  cfg.validate();
  if (!cfg.game) throw Error(Errc::config_error, "convergence runs need a game");
  const GameSpec& spec = *cfg.game;
  ConvergenceResult out;
  for (const auto& m : cfg.methods) {
    for (auto b : cfg.ns) {
      ConvergenceCell c;
      c.method = canonical_method(m);
      c.budget = b;
      c.estimates.resize(cfg.trials);
      c.mse.resize(cfg.trials);
      c.marginal_evals.resize(cfg.trials);
      c.v_evals.resize(cfg.trials);
      out.cells.push_back(std::move(c));
    }
  }
  const std::size_t trials = static_cast<std::size_t>(cfg.trials);
  const auto opt = cfg.method_options();
  parallel_for(out.cells.size() * trials, cfg.jobs, [&](std::size_t job) {
    auto& cell = out.cells[job / trials];
    const int t = static_cast<int>(job % trials);
    auto game = spec.build();
    const auto est = run_method(*game, cell.method, cell.budget, cfg.seed_for(t), opt);
    cell.estimates[t] = est.values;
    cell.marginal_evals[t] = static_cast<double>(est.marginal_evals);
    cell.v_evals[t] = static_cast<double>(est.v_evals);
  });

  bool exact = cfg.reference == "exact" || (cfg.reference == "auto" && spec.has_exact_oracle());
  if (exact) {
    auto game = spec.build();
    out.reference = exact_shapley_subsets(*game).values;
    out.reference_kind = "exact";
  } else {
    const auto top = *std::max_element(cfg.ns.begin(), cfg.ns.end());
    std::size_t count = 0;
    for (const auto& c : out.cells) {
      if (c.budget != top) continue;
      for (const auto& e : c.estimates) {
        if (out.reference.empty()) out.reference.assign(e.size(), 0.0);
        for (std::size_t i = 0; i < e.size(); ++i) out.reference[i] += e[i];
        ++count;
      }
    }
    for (double& r : out.reference) r /= static_cast<double>(count);
    out.reference_kind = "trial-mean";
  }
  for (auto& c : out.cells) {
    for (std::size_t t = 0; t < trials; ++t) c.mse[t] = mse(out.reference, c.estimates[t]);
  }

  out.report.kind = "convergence";
  out.report.config = cfg.to_json();
  out.report.config["reference_values"] = out.reference;
  out.report.config["reference_kind"] = out.reference_kind;
  out.report.columns = {"algorithm", "budget", "marginal_evals", "v_evals_mean",
                        "mse_mean",  "mse_std", "mse_ci95"};
  for (const auto& c : out.cells) {
    const auto e = summarize(c.mse);
    out.report.rows.push_back({c.method, std::to_string(c.budget),
                               format_double(summarize(c.marginal_evals).mean),
                               format_double(summarize(c.v_evals).mean), format_double(e.mean),
                               format_double(e.std), format_double(e.ci95)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps over one sampler parameter.

struct SweepCell {
  std::string value;
  std::string method;
  std::vector<double> discrepancy;
  std::vector<double> mse;
};

struct SweepResult {
  Report report;
  std::vector<SweepCell> cells;
};

/// Varies one of lambda (Mallows parameter used by the sampler), pool_size
/// or kernel (kendall | mallows | spearman) with d = dims[0] and n = ns[0].
/// Discrepancy is always measured under cfg.kernel so rows are comparable;
/// with a game, the MSE of the resulting estimates is reported as well.
inline SweepResult run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::string& axis = cfg.sweep_axis;
  if (axis != "lambda" && axis != "pool_size" && axis != "kernel") {
    throw Error(Errc::config_error, "sweep axis must be lambda, pool_size or kernel");
  }
  if (cfg.sweep_values.empty()) throw Error(Errc::config_error, "sweep needs at least one value");

  std::vector<SamplerConfig> variants;
  for (const auto& v : cfg.sweep_values) {
    SamplerConfig sc;
    sc.kernel = cfg.kernel;
    sc.pool_size = cfg.pool_size;
    if (axis == "lambda") {
      const double lambda = detail::parse_number(v, "sweep value");
      if (!(lambda > 0.0)) throw Error(Errc::config_error, "lambda must be positive");
      sc.kernel = KernelSpec{KernelKind::mallows, lambda};
    } else if (axis == "pool_size") {
      const double p = detail::parse_number(v, "sweep value");
      if (p < 1 || p != static_cast<int>(p)) throw Error(Errc::config_error, "pool size must be a positive integer");
      sc.pool_size = static_cast<int>(p);
    } else {
      sc.kernel = KernelSpec{parse_kernel_kind(v), cfg.kernel.lambda};
    }
    variants.push_back(sc);
  }

  std::optional<std::vector<double>> reference;
  int d = cfg.dims.front();
  if (cfg.game) {
    d = cfg.game->players();
    if (cfg.game->has_exact_oracle()) {
      auto g = cfg.game->build();
      reference = exact_shapley_subsets(*g).values;
    }
  }
  const int n = static_cast<int>(cfg.ns.front());

  SweepResult out;
  std::vector<std::size_t> variant_of;
  for (std::size_t k = 0; k < variants.size(); ++k) {
    for (const auto& m : cfg.methods) {
      const std::string name = canonical_method(m);
      if (!is_sampler_method(name)) throw Error(Errc::config_error, name + " cannot be swept");
      out.cells.push_back({cfg.sweep_values[k], name, std::vector<double>(cfg.trials),
                           std::vector<double>(cfg.game ? cfg.trials : 0)});
      variant_of.push_back(k);
    }
  }
  std::vector<std::vector<std::vector<double>>> estimates(
      out.cells.size(), std::vector<std::vector<double>>(cfg.trials));
  const std::size_t trials = static_cast<std::size_t>(cfg.trials);
  parallel_for(out.cells.size() * trials, cfg.jobs, [&](std::size_t job) {
    const std::size_t c = job / trials;
    const int t = static_cast<int>(job % trials);
    SamplerConfig sc = variants[variant_of[c]];
    sc.algorithm = parse_algorithm(out.cells[c].method);
    sc.n = n;
    sc.d = d;
    sc.seed = cfg.seed_for(t);
    const auto set = generate(sc);
    out.cells[c].discrepancy[t] = discrepancy(set, cfg.kernel);
    if (cfg.game) {
      auto game = cfg.game->build();
      estimates[c][t] = shapley_from_permutations(*game, set).values;
    }
  });
  if (cfg.game && !reference) {
    std::vector<double> mean(d, 0.0);
    for (const auto& cell : estimates) {
      for (const auto& e : cell) {
        for (int i = 0; i < d; ++i) mean[i] += e[i] / static_cast<double>(estimates.size() * trials);
      }
    }
    reference = mean;
  }
  if (cfg.game) {
    for (std::size_t c = 0; c < out.cells.size(); ++c) {
      for (std::size_t t = 0; t < trials; ++t) out.cells[c].mse[t] = mse(*reference, estimates[c][t]);
    }
  }

  out.report.kind = "sweep";
  out.report.config = cfg.to_json();
  out.report.columns = {"axis", "value", "algorithm", "d", "n", "disc_mean", "disc_ci95",
                        "mse_mean", "mse_ci95"};
  for (const auto& c : out.cells) {
    const auto disc = summarize(c.discrepancy);
    std::vector<std::string> row{axis, c.value, c.method, std::to_string(d), std::to_string(n),
                                 format_double(disc.mean), format_double(disc.ci95)};
    if (cfg.game) {
      const auto e = summarize(c.mse);
      row.push_back(format_double(e.mean));
      row.push_back(format_double(e.ci95));
    } else {
      row.push_back("");
      row.push_back("");
    }
    out.report.rows.push_back(std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Repeated estimation on one game.

struct EstimateRun {
  json report;  // config, mean values, per-trial breakdown
  Report table; // one row per trial plus a mean row
};

/// `n` is the permutation count; other methods get the same budget of
/// n * d marginal evaluations.
inline EstimateRun run_estimate(const GameSpec& spec, const std::string& method, int n, int trials,
                                std::uint64_t base_seed, const MethodOptions& opt, int jobs = 1) {
  if (trials < 1) throw Error(Errc::config_error, "trial count must be >= 1");
  if (n < 1) throw Error(Errc::config_error, "n must be >= 1");
  const std::string name = canonical_method(method);
  const int d = spec.players();
  const std::int64_t budget = static_cast<std::int64_t>(n) * d;
  std::vector<ShapleyEstimate> runs(trials);
  std::vector<std::int64_t> evaluations(trials);
  parallel_for(static_cast<std::size_t>(trials), jobs, [&](std::size_t t) {
    auto game = spec.build();
    runs[t] = run_method(*game, name, budget, base_seed + t, opt);
    evaluations[t] = game->evaluations();
  });

  std::vector<double> mean(d, 0.0);
  for (const auto& r : runs) {
    for (int i = 0; i < d; ++i) mean[i] += r.values[i] / trials;
  }
  EstimateRun out;
  json& j = out.report;
  j["version"] = kVersion;
  j["config"] = {{"game", spec.to_json()},
                 {"method", name},
                 {"n", n},
                 {"budget", budget},
                 {"trials", trials},
                 {"base_seed", base_seed},
                 {"kernel", to_string(opt.kernel.kind)},
                 {"lambda", opt.kernel.lambda},
                 {"pool_size", opt.pool_size},
                 {"owen_nodes", opt.owen_nodes}};
  j["values"] = mean;
  std::int64_t marginal_total = 0;
  j["trials"] = json::array();
  for (int t = 0; t < trials; ++t) {
    marginal_total += runs[t].marginal_evals;
    j["trials"].push_back({{"trial", t},
                           {"seed", base_seed + t},
                           {"values", runs[t].values},
                           {"marginal_evals", runs[t].marginal_evals},
                           {"v_evals", runs[t].v_evals},
                           {"evaluations", evaluations[t]}});
  }
  j["marginal_evals"] = marginal_total / trials;
  if (spec.has_exact_oracle()) {
    auto game = spec.build();
    const auto exact = exact_shapley_subsets(*game).values;
    j["exact"] = exact;
    std::vector<double> errs;
    for (const auto& r : runs) errs.push_back(mse(exact, r.values));
    const auto s = summarize(errs);
    j["mse"] = {{"mean", s.mean}, {"std", s.std}, {"ci95", s.ci95}};
  }

  Report& tab = out.table;
  tab.kind = "estimate";
  tab.config = j["config"];
  tab.columns = {"trial", "seed", "marginal_evals", "v_evals"};
  for (int i = 1; i <= d; ++i) tab.columns.push_back("phi_" + std::to_string(i));
  for (int t = 0; t < trials; ++t) {
    std::vector<std::string> row{std::to_string(t), std::to_string(base_seed + t),
                                 std::to_string(runs[t].marginal_evals), std::to_string(runs[t].v_evals)};
    for (double v : runs[t].values) row.push_back(format_double(v));
    tab.rows.push_back(std::move(row));
  }
  std::vector<std::string> row{"mean", "", std::to_string(marginal_total / trials), ""};
  for (double v : mean) row.push_back(format_double(v));
  tab.rows.push_back(std::move(row));
  return out;
}

}  // namespace permqmc
