// permqmc: sample permutations, measure discrepancy, estimate Shapley values
// and run the benchmark tables from the command line.

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "permqmc/discrepancy.hpp"
#include "permqmc/error.hpp"
#include "permqmc/estimators.hpp"
#include "permqmc/experiments.hpp"
#include "permqmc/io.hpp"
#include "permqmc/kernels.hpp"
#include "permqmc/samplers.hpp"

namespace {

using namespace permqmc;

// Opens `path` for writing, or returns std::cout for "" and "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw Error(Errc::config_error, "cannot write '" + path + "'");
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::vector<std::string> split_list(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& item : items) {
    std::stringstream in(item);
    std::string f;
    while (std::getline(in, f, ',')) {
      if (!f.empty()) out.push_back(f);
    }
  }
  return out;
}

KernelSpec make_kernel(const std::string& kind, double lambda) {
  KernelSpec k{parse_kernel_kind(kind), lambda};
  try {
    k.validate();
  } catch (const Error& e) {
    throw Error(Errc::config_error, e.what());
  }
  return k;
}

struct GameOptions {
  std::string game = "glove";
  std::string game_file;
  std::string predictor;
  double bias = 0.0;
  std::string background;
  std::string foreground;
  int row = 0;
  double timeout_s = 60.0;

  void add(CLI::App& app) {
    app.add_option("--game", game,
                   "glove | linear:c1,c2,... | interaction:D:i-j=s,... | "
                   "random-interaction:D:COUNT[:SEED] | model");
    app.add_option("--game-file", game_file, "JSON game description");
    app.add_option("--predictor", predictor,
                   "model game predictor: shell command speaking NDJSON, or linear:w1,w2,...");
    app.add_option("--bias", bias, "bias of a linear predictor");
    app.add_option("--background", background, "background rows (CSV with header)");
    app.add_option("--foreground", foreground, "CSV holding the instance to explain");
    app.add_option("--row", row, "0-based row of --foreground to explain");
    app.add_option("--timeout", timeout_s, "predictor response timeout in seconds");
  }

  GameSpec resolve() const {
    if (!game_file.empty()) {
      std::ifstream in(game_file);
      if (!in) throw Error(Errc::config_error, "cannot open '" + game_file + "'");
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::config_error, "'" + game_file + "': " + e.what());
      }
      return GameSpec::from_json(j);
    }
    if (game != "model") return parse_game_spec(game);
    GameSpec g;
    g.kind = "model";
    g.background_csv = background;
    g.foreground_csv = foreground;
    g.foreground_row = row;
    g.timeout = std::chrono::milliseconds(static_cast<std::int64_t>(timeout_s * 1000));
    if (predictor.rfind("linear:", 0) == 0) {
      for (const auto& w : split_list({predictor.substr(7)})) {
        g.model_weights.push_back(detail::parse_number(w, "--predictor"));
      }
      g.model_bias = bias;
    } else {
      g.command = predictor;
    }
    if (g.command.empty() && g.model_weights.empty()) {
      throw Error(Errc::config_error, "--game model needs --predictor");
    }
    return g;
  }
};

// Options shared by bench and sweep. Only options given on the command line
// override values from --config.
struct ExperimentOptions {
  std::string config;
  std::vector<std::string> methods;
  std::vector<int> dims;
  std::vector<std::int64_t> ns;
  std::string kernel = "mallows";
  double lambda = kDefaultMallowsLambda;
  int pool = 25;
  int owen_nodes = 10;
  int trials = 25;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool no_timing = false;
  std::string reference = "auto";
  std::string out;
  std::string plot;
  GameOptions game;
  std::vector<CLI::Option*> opts;

  void add(CLI::App& app) {
    app.add_option("--config", config, "JSON experiment config");
    opts = {
        app.add_option("--alg", methods, "methods, comma separated")->delimiter(','),
        app.add_option("--d", dims, "dimensions")->delimiter(','),
        app.add_option("--n", ns, "sample counts or marginal-evaluation budgets")->delimiter(','),
        app.add_option("--kernel", kernel, "kendall | mallows | spearman"),
        app.add_option("--lambda", lambda, "Mallows lambda"),
        app.add_option("--pool", pool, "argmax candidate pool size for herding and SBQ"),
        app.add_option("--owen-nodes", owen_nodes, "trapezoid intervals for Owen sampling"),
        app.add_option("--trials", trials, "trials per cell"),
        app.add_option("--seed", seed, "base seed; trial t uses seed + t"),
        app.add_option("--jobs", jobs, "worker threads"),
        app.add_flag("--no-timing", no_timing, "write 0 in wall-time columns"),
        app.add_option("--reference", reference, "auto | exact | trial-mean"),
    };
    app.add_option("--out", out, "CSV report path (default stdout)");
    app.add_option("--plot", plot, "also write gnuplot data to this path");
    game.add(app);
  }

  bool given(const char* name) const {
    for (auto* o : opts) {
      if (o->check_lname(name) && o->count() > 0) return true;
    }
    return false;
  }

  ExperimentConfig resolve(const CLI::App& app) const {
    ExperimentConfig c = config.empty() ? ExperimentConfig{} : load_experiment_config(config);
    if (given("alg")) c.methods = split_list(methods);
    if (given("d")) c.dims = dims;
    if (given("n")) c.ns = ns;
    if (given("kernel") || given("lambda")) {
      c.kernel = make_kernel(given("kernel") ? kernel : to_string(c.kernel.kind),
                             given("lambda") ? lambda : c.kernel.lambda);
    }
    if (given("pool")) c.pool_size = pool;
    if (given("owen-nodes")) c.owen_nodes = owen_nodes;
    if (given("trials")) c.trials = trials;
    if (given("seed")) c.base_seed = seed;
    if (given("jobs")) c.jobs = jobs;
    if (given("no-timing")) c.timing = !no_timing;
    if (given("reference")) c.reference = reference;
    const bool game_given = app.count("--game") > 0 || app.count("--game-file") > 0;
    if (game_given) c.game = game.resolve();
    c.validate();
    return c;
  }

  void emit(const Report& report, const std::vector<std::string>& group, const std::string& x,
            const std::string& y, const std::string& err) const {
    Output o(out);
    report.write_csv(o.stream());
    if (!plot.empty()) {
      Output p(plot);
      report.write_gnuplot(p.stream(), group, x, y, err);
    }
  }
};

void write_json(const std::string& path, const nlohmann::json& j) {
  Output o(path);
  o.stream() << j.dump(2) << '\n';
}

int run(int argc, char** argv) {
  CLI::App app{"Permutation sampling for Shapley value estimation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  // sample
  auto* sample = app.add_subcommand("sample", "generate a permutation sample set");
  std::string s_alg = "MC", s_kernel = "mallows", s_out;
  int s_n = 100, s_d = 10, s_pool = 25;
  double s_lambda = kDefaultMallowsLambda;
  std::uint64_t s_seed = 0;
  sample->add_option("--alg", s_alg, "MC | antithetic | herding | SBQ | orthogonal | Sobol | sphere");
  sample->add_option("--n", s_n, "number of permutations");
  sample->add_option("--d", s_d, "permutation length");
  sample->add_option("--kernel", s_kernel, "kernel for herding and SBQ");
  sample->add_option("--lambda", s_lambda, "Mallows lambda");
  sample->add_option("--pool", s_pool, "argmax candidate pool size");
  sample->add_option("--seed", s_seed, "random seed");
  sample->add_option("--out", s_out, "CSV output path (default stdout)");

  // discrepancy
  auto* disc = app.add_subcommand("discrepancy", "discrepancy of a sample file");
  std::string d_file, d_kernel = "mallows", d_report;
  double d_lambda = kDefaultMallowsLambda;
  disc->add_option("file", d_file, "sample CSV (rank_1..rank_d[,weight]) or one permutation per line")
      ->required();
  disc->add_option("--kernel", d_kernel, "kendall | mallows | spearman");
  disc->add_option("--lambda", d_lambda, "Mallows lambda");
  disc->add_option("--report", d_report, "write a JSON report here ('-' for stdout)");

  // estimate
  auto* est = app.add_subcommand("estimate", "estimate Shapley values over repeated trials");
  GameOptions e_game;
  e_game.add(*est);
  std::string e_alg = "MC", e_kernel = "mallows", e_json, e_csv;
  int e_n = 100, e_trials = 1, e_pool = 25, e_nodes = 10, e_jobs = 1;
  double e_lambda = kDefaultMallowsLambda;
  std::uint64_t e_seed = 0;
  est->add_option("--alg", e_alg, "sampler, or Owen | Owen-halved | Stratified | Exact");
  est->add_option("--n", e_n, "permutations per trial; other methods get n*d marginal evaluations");
  est->add_option("--trials", e_trials, "number of trials");
  est->add_option("--seed", e_seed, "base seed; trial t uses seed + t");
  est->add_option("--kernel", e_kernel, "kernel for herding and SBQ");
  est->add_option("--lambda", e_lambda, "Mallows lambda");
  est->add_option("--pool", e_pool, "argmax candidate pool size");
  est->add_option("--owen-nodes", e_nodes, "trapezoid intervals for Owen sampling");
  est->add_option("--jobs", e_jobs, "worker threads");
  est->add_option("--json", e_json, "JSON report path (default stdout)");
  est->add_option("--csv", e_csv, "per-trial CSV path");

  // bench
  auto* bench = app.add_subcommand("bench", "discrepancy table or convergence run");
  std::string b_kind = "discrepancy";
  bench->add_option("--kind", b_kind, "discrepancy | convergence")
      ->check(CLI::IsMember({"discrepancy", "convergence"}));
  ExperimentOptions b_opts;
  b_opts.add(*bench);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "vary lambda, pool size or kernel");
  ExperimentOptions w_opts;
  std::string w_axis;
  std::vector<std::string> w_values;
  sweep->add_option("--axis", w_axis, "lambda | pool_size | kernel");
  sweep->add_option("--values", w_values, "sweep values, comma separated")->delimiter(',');
  w_opts.add(*sweep);

  // exact
  auto* exact = app.add_subcommand("exact", "exact Shapley values by enumeration");
  GameOptions x_game;
  x_game.add(*exact);
  std::string x_method = "subsets", x_json, x_csv;
  exact->add_option("--method", x_method, "subsets | permutations")
      ->check(CLI::IsMember({"subsets", "permutations"}));
  exact->add_option("--json", x_json, "JSON report path (default stdout)");
  exact->add_option("--csv", x_csv, "CSV with one row per player");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*sample) {
    SamplerConfig cfg;
    cfg.algorithm = parse_algorithm(s_alg);
    cfg.n = s_n;
    cfg.d = s_d;
    cfg.kernel = make_kernel(s_kernel, s_lambda);
    cfg.pool_size = s_pool;
    cfg.seed = s_seed;
    const auto set = generate(cfg);
    Output o(s_out);
    nlohmann::json header{{"algorithm", to_string(cfg.algorithm)}, {"n", cfg.n},
                          {"d", cfg.d},  {"kernel", to_string(cfg.kernel.kind)},
                          {"lambda", cfg.kernel.lambda}, {"pool_size", cfg.pool_size},
                          {"seed", cfg.seed}};
    o.stream() << "# permqmc " << kVersion << " sample\n# config: " << header.dump() << '\n';
    write_samples_csv(o.stream(), set);
    return 0;
  }

  if (*disc) {
    const auto set = read_samples_file(d_file);
    const auto kernel = make_kernel(d_kernel, d_lambda);
    const double d2 = squared_discrepancy(set, kernel);
    const double d1 = discrepancy(set, kernel);
    std::cout << format_double(d1) << '\n';
    if (!d_report.empty()) {
      double wsum = 0.0;
      for (double w : set.weights) wsum += w;
      write_json(d_report, {{"version", kVersion},
                            {"file", d_file},
                            {"kernel", to_string(kernel.kind)},
                            {"lambda", kernel.lambda},
                            {"n", set.size()},
                            {"d", set.dim()},
                            {"weight_sum", wsum},
                            {"squared_discrepancy", d2},
                            {"discrepancy", d1}});
    }
    return 0;
  }

  if (*est) {
    const GameSpec spec = e_game.resolve();
    MethodOptions opt{make_kernel(e_kernel, e_lambda), e_pool, e_nodes};
    const auto r = run_estimate(spec, e_alg, e_n, e_trials, e_seed, opt, e_jobs);
    write_json(e_json, r.report);
    if (!e_csv.empty()) {
      Output o(e_csv);
      r.table.write_csv(o.stream());
    }
    return 0;
  }

  if (*bench) {
    const auto cfg = b_opts.resolve(*bench);
    if (b_kind == "discrepancy") {
      b_opts.emit(run_discrepancy_table(cfg).report, {"algorithm", "d"}, "n", "disc_mean", "disc_std");
    } else {
      b_opts.emit(run_convergence(cfg).report, {"algorithm"}, "marginal_evals", "mse_mean", "mse_ci95");
    }
    return 0;
  }

  if (*sweep) {
    auto cfg = w_opts.resolve(*sweep);
    if (!w_axis.empty()) cfg.sweep_axis = w_axis;
    if (!w_values.empty()) cfg.sweep_values = w_values;
    if (cfg.methods == std::vector<std::string>{"MC"} && !w_opts.given("alg")) cfg.methods = {"Herding"};
    w_opts.emit(run_sweep(cfg).report, {"algorithm"}, "value", "disc_mean", "disc_ci95");
    return 0;
  }

  if (*exact) {
    const GameSpec spec = x_game.resolve();
    auto game = spec.build();
    const auto r = x_method == "subsets" ? exact_shapley_subsets(*game) : exact_shapley_permutations(*game);
    write_json(x_json, {{"version", kVersion},
                        {"game", spec.to_json()},
                        {"method", r.method},
                        {"values", r.values},
                        {"v_evals", r.v_evals}});
    if (!x_csv.empty()) {
      Output o(x_csv);
      o.stream() << "player,value\n";
      for (std::size_t i = 0; i < r.values.size(); ++i) {
        o.stream() << i + 1 << ',' << format_double(r.values[i]) << '\n';
      }
    }
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const permqmc::Error& e) {
    std::cerr << "permqmc: " << e.what() << '\n';
    return permqmc::exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "permqmc: " << e.what() << '\n';
    return 2;
  }
}
