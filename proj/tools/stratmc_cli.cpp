// Command-line front end: single estimates, replicated MSE sweeps, rate
// fitting from saved sweeps, oracle constants, and the sub-stratum floor
// check. Exit codes: 0 ok, 2 invalid configuration, 3 numerical failure.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "stratmc/errors.hpp"
#include "stratmc/harness.hpp"

namespace {

using nlohmann::json;
using namespace stratmc;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("short write to '" + path + "'");
}

json load_config(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& bad) {
    throw ConfigError("config file '" + path + "': " + bad.what());
  }
}

// Flat key-value config document; explicit CLI flags win over file values.
template <typename T>
void merge(const CLI::Option* opt, const json& cfg, const char* key, T& value) {
  if (opt->count() > 0 || !cfg.contains(key)) return;
  try {
    value = cfg.at(key).get<T>();
  } catch (const json::exception& bad) {
    throw ConfigError(std::string("config key '") + key + "': " + bad.what());
  }
}

KPolicy parse_k_policy(const std::string& text) {
  if (text == "theorem4" || text == "tuned") return KPolicy::tuned();
  try {
    std::size_t used = 0;
    const long long k = std::stoll(text, &used);
    if (used != text.size() || k < 1) throw std::invalid_argument(text);
    return KPolicy::fixed(k);
  } catch (const std::exception&) {
    throw ConfigError("--K expects a positive integer or 'theorem4'");
  }
}

LeftoverPolicy parse_leftover(const std::string& text) {
  if (text == "discard") return LeftoverPolicy::discard;
  if (text == "refill" || text == "uniform_refill") return LeftoverPolicy::uniform_refill;
  throw ConfigError("--leftover expects 'discard' or 'refill'");
}

std::vector<EstimatorKind> parse_estimators(const std::vector<std::string>& names) {
  std::vector<EstimatorKind> out;
  for (const auto& name : names) {
    const auto est = estimator_from_string(name);
    if (!est) throw ConfigError("unknown estimator '" + name + "'");
    out.push_back(*est);
  }
  return out;
}

void check_dim(const Integrand& f, int requested) {
  if (requested != 0 && requested != f.dim) {
    throw ConfigError("function '" + f.name + "' has dimension " +
                      std::to_string(f.dim) + ", not " + std::to_string(requested));
  }
}

struct CommonFlags {
  std::string fn;
  int dim = 0;
  double delta = 0.05;
  std::optional<double> grad_bound;
  std::optional<double> scale;
  std::string k_policy = "theorem4";
  std::string leftover = "discard";
  std::uint64_t seed = 0;
  int workers = 1;
  std::string config_path;
  std::string out_path;
  std::string format = "csv";
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--fn", flags.fn, "corpus function name");
  cmd->add_option("--d", flags.dim, "expected dimension (checked against --fn)");
  cmd->add_option("--delta", flags.delta, "confidence level in (0,1)");
  cmd->add_option("--L", flags.grad_bound, "gradient-norm bound override");
  cmd->add_option("--A", flags.scale, "confidence scale override");
  cmd->add_option("--K", flags.k_policy, "stratum count or 'theorem4'");
  cmd->add_option("--leftover", flags.leftover, "leftover budget policy: discard|refill");
  cmd->add_option("--seed", flags.seed, "root seed");
  cmd->add_option("--workers", flags.workers, "replication worker threads");
  cmd->add_option("--config", flags.config_path, "flat JSON config file (flags override)");
  cmd->add_option("--out", flags.out_path, "output path (stdout when omitted)");
  cmd->add_option("--format", flags.format, "output format: csv|json");
}

void merge_common(CLI::App* cmd, const json& cfg, CommonFlags& flags) {
  merge(cmd->get_option("--fn"), cfg, "fn", flags.fn);
  merge(cmd->get_option("--d"), cfg, "d", flags.dim);
  merge(cmd->get_option("--delta"), cfg, "delta", flags.delta);
  if (cmd->get_option("--L")->count() == 0 && cfg.contains("L")) {
    flags.grad_bound = cfg.at("L").get<double>();
  }
  if (cmd->get_option("--A")->count() == 0 && cfg.contains("A")) {
    flags.scale = cfg.at("A").get<double>();
  }
  merge(cmd->get_option("--K"), cfg, "K", flags.k_policy);
  merge(cmd->get_option("--leftover"), cfg, "leftover", flags.leftover);
  merge(cmd->get_option("--seed"), cfg, "seed", flags.seed);
  merge(cmd->get_option("--workers"), cfg, "workers", flags.workers);
  merge(cmd->get_option("--out"), cfg, "out", flags.out_path);
  merge(cmd->get_option("--format"), cfg, "format", flags.format);
}

void deliver(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_file(out_path, text);
  }
}

int run_integrate(CLI::App* cmd, CommonFlags& flags, std::string& estimator_name,
                  std::int64_t& budget) {
  json cfg = flags.config_path.empty() ? json::object() : load_config(flags.config_path);
  merge_common(cmd, cfg, flags);
  merge(cmd->get_option("--estimator"), cfg, "estimator", estimator_name);
  merge(cmd->get_option("--n"), cfg, "n", budget);

  const auto est = estimator_from_string(estimator_name);
  if (!est) throw ConfigError("unknown estimator '" + estimator_name + "'");
  const Integrand& f = corpus_function(flags.fn);
  check_dim(f, flags.dim);

  EstimateReport report;
  const RngSpec rng{flags.seed, 0};
  switch (*est) {
    case EstimatorKind::crude:
      report = crude_mc(f, budget, rng);
      break;
    case EstimatorKind::uniform:
      report = uniform_stratified(f, budget, rng);
      break;
    case EstimatorKind::lmcucb: {
      LmcUcbConfig run;
      run.strata = parse_k_policy(flags.k_policy).strata_for(budget, f.dim);
      run.budget = budget;
      run.delta = flags.delta;
      if (flags.scale) {
        run.scale_override = flags.scale;
      } else if (flags.grad_bound) {
        run.grad_bound = flags.grad_bound;
      } else {
        run.grad_bound = f.grad_bound;
      }
      run.leftover = parse_leftover(flags.leftover);
      report = lmc_ucb(f, run, rng);
      break;
    }
  }

  std::ostringstream out;
  out.precision(17);
  out << "function " << f.name << " (d=" << f.dim << "), estimator "
      << to_string(*est) << ", seed " << flags.seed << "\n";
  out << "estimate " << report.estimate;
  if (f.exact_integral) {
    out << "  (exact " << *f.exact_integral << ", error "
        << report.estimate - *f.exact_integral << ")";
  }
  out << "\n";
  out << "samples used " << report.samples_used << " of " << budget
      << "  [init " << report.phases.init << ", main " << report.phases.main
      << ", leftover " << report.phases.leftover << "]\n";
  if (!report.strata.empty()) {
    out << "sbar " << report.sbar << "\n";
    out << "stratum  sigma_hat            substrata  points\n";
    for (std::size_t k = 0; k < report.strata.size(); ++k) {
      const auto& s = report.strata[k];
      out << k << "  " << s.sigma_hat << "  " << s.substrata << "  " << s.points << "\n";
    }
  }
  deliver(flags.out_path, out.str());
  return kExitOk;
}

int run_benchmark_cmd(CLI::App* cmd, CommonFlags& flags,
                      std::vector<std::int64_t>& budgets,
                      std::vector<std::string>& estimator_names,
                      std::int64_t& replications) {
  json cfg = flags.config_path.empty() ? json::object() : load_config(flags.config_path);
  merge_common(cmd, cfg, flags);
  merge(cmd->get_option("--budgets"), cfg, "budgets", budgets);
  merge(cmd->get_option("--estimators"), cfg, "estimators", estimator_names);
  merge(cmd->get_option("--reps"), cfg, "reps", replications);

  ExperimentConfig run;
  run.function = flags.fn;
  run.estimators = parse_estimators(estimator_names);
  run.budgets = budgets;
  run.replications = replications;
  run.delta = flags.delta;
  run.k_policy = parse_k_policy(flags.k_policy);
  run.scale_override = flags.scale;
  run.grad_bound_override = flags.grad_bound;
  run.leftover = parse_leftover(flags.leftover);
  run.root_seed = flags.seed;
  run.workers = flags.workers;
  check_dim(corpus_function(flags.fn), flags.dim);

  const auto report = run_benchmark(run);
  if (flags.format != "csv" && flags.format != "json") {
    throw ConfigError("--format expects 'csv' or 'json'");
  }
  deliver(flags.out_path,
          emit(report, flags.format == "csv" ? OutputFormat::csv : OutputFormat::json));
  return kExitOk;
}

int run_rates(const std::string& in_path, const std::string& out_path) {
  const auto rows = parse_csv(read_file(in_path));
  const auto fits = fit_rates(rows);
  if (fits.empty()) {
    throw InsufficientSpan("no estimator in '" + in_path + "' has a fittable sweep");
  }
  std::ostringstream out;
  out.precision(17);
  out << "estimator,slope,intercept,ci95_half\n";
  for (const auto& [est, fit] : fits) {
    out << to_string(est) << "," << fit.slope << "," << fit.intercept << ","
        << fit.ci_half << "\n";
  }
  deliver(out_path, out.str());
  return kExitOk;
}

int run_oracle(CLI::App* cmd, CommonFlags& flags, std::int64_t& budget) {
  json cfg = flags.config_path.empty() ? json::object() : load_config(flags.config_path);
  merge_common(cmd, cfg, flags);
  merge(cmd->get_option("--n"), cfg, "n", budget);

  const Integrand& f = corpus_function(flags.fn);
  check_dim(f, flags.dim);
  const auto policy = parse_k_policy(flags.k_policy);
  const auto partition = HyperCubePartition::make(f.dim, policy.strata_for(budget, f.dim));
  const auto grid = QuadratureGrid::for_integrand(f, f.dim == 1 ? 4096 : 256);
  const auto summary = summarize(f, partition, budget, grid);

  std::ostringstream out;
  out.precision(17);
  out << "function " << f.name << " (d=" << f.dim << "), K " << partition.strata()
      << ", n " << budget << "\n";
  out << "sigma_big " << summary.sigma_big << "\n";
  out << "sigma_K " << summary.sigma_K << "\n";
  out << "uniform_constant " << summary.uniform_constant << "\n";
  out << "oracle_risk " << summary.oracle_risk << "\n";
  out << "stratum,lambda,sigma\n";
  for (std::size_t k = 0; k < summary.lambda.size(); ++k) {
    out << k << "," << summary.lambda[k] << "," << summary.stratum_sigmas[k] << "\n";
  }
  deliver(flags.out_path, out.str());
  return kExitOk;
}

int run_verify(CLI::App* cmd, CommonFlags& flags, std::int64_t& budget,
               std::int64_t& replications) {
  json cfg = flags.config_path.empty() ? json::object() : load_config(flags.config_path);
  merge_common(cmd, cfg, flags);
  merge(cmd->get_option("--n"), cfg, "n", budget);
  merge(cmd->get_option("--reps"), cfg, "reps", replications);

  ExperimentConfig run;
  run.function = flags.fn;
  run.budgets = {budget};
  run.replications = replications;
  run.delta = flags.delta;
  run.k_policy = parse_k_policy(flags.k_policy);
  run.grad_bound_override = flags.grad_bound;
  run.root_seed = flags.seed;
  run.workers = flags.workers;
  check_dim(corpus_function(flags.fn), flags.dim);

  const auto result = verify_lemma3(run);
  std::ostringstream out;
  out.precision(17);
  if (!result.applicable) {
    out << "not applicable: the function has no variation, proportions are undefined\n";
    deliver(flags.out_path, out.str());
    return kExitOk;
  }
  const double threshold =
      1.0 - run.delta -
      3.0 * std::sqrt(run.delta * (1.0 - run.delta) / static_cast<double>(replications));
  out << "pass_rate " << result.pass_rate << " (threshold " << threshold << ", delta "
      << run.delta << ", reps " << replications << ")\n";
  out << "sigma_K " << result.sigma_K << "\n";
  out << "stratum,lambda,bound\n";
  for (std::size_t k = 0; k < result.bound.size(); ++k) {
    out << k << "," << result.lambda[k] << "," << result.bound[k] << "\n";
  }
  deliver(flags.out_path, out.str());
  return result.pass_rate >= threshold ? kExitOk : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stratified Monte-Carlo integration on the unit hypercube"};
  app.require_subcommand(1);

  auto* integrate_cmd = app.add_subcommand("integrate", "one estimate with its sample ledger");
  CommonFlags integrate_flags;
  std::string estimator_name = "lmcucb";
  std::int64_t integrate_budget = 100;
  add_common(integrate_cmd, integrate_flags);
  integrate_cmd->add_option("--estimator", estimator_name, "crude|uniform|lmcucb");
  integrate_cmd->add_option("--n", integrate_budget, "sample budget");

  auto* bench_cmd = app.add_subcommand("benchmark", "replicated MSE sweep over budgets");
  CommonFlags bench_flags;
  std::vector<std::int64_t> budgets;
  std::vector<std::string> estimator_names = {"crude", "uniform", "lmcucb"};
  std::int64_t replications = 1000;
  add_common(bench_cmd, bench_flags);
  bench_cmd->add_option("--budgets", budgets, "budget list")->delimiter(',');
  bench_cmd->add_option("--estimators", estimator_names, "estimator subset")->delimiter(',');
  bench_cmd->add_option("--reps", replications, "replications per point");

  auto* rates_cmd = app.add_subcommand("rates", "fit log-log rate slopes from a saved CSV");
  std::string rates_in;
  std::string rates_out;
  rates_cmd->add_option("--in", rates_in, "benchmark CSV to fit")->required();
  rates_cmd->add_option("--out", rates_out, "output path (stdout when omitted)");

  auto* oracle_cmd = app.add_subcommand("oracle", "deterministic reference constants");
  CommonFlags oracle_flags;
  std::int64_t oracle_budget = 100;
  add_common(oracle_cmd, oracle_flags);
  oracle_cmd->add_option("--n", oracle_budget, "budget the oracle risk is quoted at");

  auto* verify_cmd = app.add_subcommand("verify-lemma3", "empirical sub-stratum floor check");
  CommonFlags verify_flags;
  std::int64_t verify_budget = 10000;
  std::int64_t verify_reps = 2000;
  add_common(verify_cmd, verify_flags);
  verify_cmd->add_option("--n", verify_budget, "sample budget per run");
  verify_cmd->add_option("--reps", verify_reps, "number of runs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& help) {
    return app.exit(help);
  } catch (const CLI::ParseError& bad) {
    app.exit(bad);
    return kExitConfig;
  }

  try {
    if (integrate_cmd->parsed()) {
      return run_integrate(integrate_cmd, integrate_flags, estimator_name, integrate_budget);
    }
    if (bench_cmd->parsed()) {
      return run_benchmark_cmd(bench_cmd, bench_flags, budgets, estimator_names, replications);
    }
    if (rates_cmd->parsed()) return run_rates(rates_in, rates_out);
    if (oracle_cmd->parsed()) return run_oracle(oracle_cmd, oracle_flags, oracle_budget);
    if (verify_cmd->parsed()) {
      return run_verify(verify_cmd, verify_flags, verify_budget, verify_reps);
    }
  } catch (const ConfigError& bad) {
    std::cerr << "config error: " << bad.what() << "\n";
    return kExitConfig;
  } catch (const NotPerfectPower& bad) {
    std::cerr << "config error: " << bad.what() << "\n";
    return kExitConfig;
  } catch (const MissingExactIntegral& bad) {
    std::cerr << "config error: " << bad.what() << "\n";
    return kExitConfig;
  } catch (const IndexOutOfRange& bad) {
    std::cerr << "config error: " << bad.what() << "\n";
    return kExitConfig;
  } catch (const IoError& bad) {
    std::cerr << "io error: " << bad.what() << "\n";
    return 1;
  } catch (const std::exception& bad) {
    // numerical preconditions: flat functions, unfittable sweeps, ...
    std::cerr << "numerical failure: " << bad.what() << "\n";
    return kExitNumerical;
  }
  return kExitConfig;
}
