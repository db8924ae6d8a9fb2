#include "stratmc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "stratmc/errors.hpp"
#include "stratmc/summation.hpp"

namespace stratmc {

namespace {

std::uint64_t estimator_stream_id(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::crude: return 1;
    case EstimatorKind::uniform: return 2;
    case EstimatorKind::lmcucb: return 3;
  }
  return 0;
}

double rate_exponent(int dim) { return 1.0 + 2.0 / dim; }

// Block-parallel loop; the partition does not influence any result because
// every iteration writes only its own slot from its own derived stream.
void parallel_for(std::int64_t count, int workers,
                  const std::function<void(std::int64_t, std::int64_t)>& body) {
  workers = static_cast<int>(std::clamp<std::int64_t>(workers, 1, std::max<std::int64_t>(count, 1)));
  if (workers == 1) {
    body(0, count);
    return;
  }
  const std::int64_t chunk = (count + workers - 1) / workers;
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (int t = 0; t < workers; ++t) {
    const std::int64_t lo = t * chunk;
    const std::int64_t hi = std::min<std::int64_t>(count, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi] {
      try {
        body(lo, hi);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

// 95% two-sided Student t quantiles by degrees of freedom.
double t_quantile_975(int dof) {
  static constexpr double kTable[30] = {
      12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
      2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
      2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};
  if (dof < 1) return 12.706;
  if (dof <= 30) return kTable[dof - 1];
  return 1.960;
}

constexpr const char* kCsvHeader =
    "estimator,n,mse,mse_stderr,samples_used_mean,oracle_bound,uniform_bound";

std::string format_real(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

}  // namespace

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::crude: return "crude";
    case EstimatorKind::uniform: return "uniform";
    case EstimatorKind::lmcucb: return "lmcucb";
  }
  return "unknown";
}

std::optional<EstimatorKind> estimator_from_string(std::string_view name) {
  if (name == "crude") return EstimatorKind::crude;
  if (name == "uniform") return EstimatorKind::uniform;
  if (name == "lmcucb") return EstimatorKind::lmcucb;
  return std::nullopt;
}

std::int64_t KPolicy::strata_for(std::int64_t budget, int dim) const {
  if (kind == Kind::fixed) return strata;
  // K_n = floor(sqrt(n)^{1/d})^d: largest l with l^{2d} <= n
  const std::int64_t l = std::max<std::int64_t>(floor_root(budget, 2 * dim), 1);
  return *checked_pow(l, dim);
}

void ExperimentConfig::validate(const Integrand& f) const {
  if (function.empty()) throw ConfigError("no function selected");
  if (estimators.empty()) throw ConfigError("no estimators selected");
  if (budgets.empty()) throw ConfigError("no budgets given");
  if (replications < 2) throw ConfigError("need at least two replications");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
  if (workers < 1) throw ConfigError("need at least one worker");
  if (!f.exact_integral) {
    throw MissingExactIntegral("function '" + f.name + "' has no reference integral");
  }
  if (k_policy.kind == KPolicy::Kind::fixed && k_policy.strata < 1) {
    throw ConfigError("fixed stratum count must be >= 1");
  }
  for (std::int64_t n : budgets) {
    if (n < 1) throw ConfigError("budgets must be >= 1");
  }
  const bool wants_uniform = std::find(estimators.begin(), estimators.end(),
                                       EstimatorKind::uniform) != estimators.end();
  if (wants_uniform) {
    for (std::int64_t n : budgets) {
      if (!exact_root(n, f.dim)) {
        throw NotPerfectPower("budget " + std::to_string(n) +
                              " is not a valid uniform-stratified size in dimension " +
                              std::to_string(f.dim));
      }
    }
  }
  const bool wants_adaptive = std::find(estimators.begin(), estimators.end(),
                                        EstimatorKind::lmcucb) != estimators.end();
  if (wants_adaptive && !scale_override && !grad_bound_override && !f.grad_bound) {
    throw ConfigError("adaptive runs need a gradient bound or a scale override");
  }
}

namespace {

LmcUcbConfig adaptive_config(const ExperimentConfig& cfg, const Integrand& f,
                             std::int64_t budget, int dim) {
  LmcUcbConfig out;
  out.strata = cfg.k_policy.strata_for(budget, dim);
  out.budget = budget;
  out.delta = cfg.delta;
  if (cfg.scale_override) {
    out.scale_override = cfg.scale_override;
  } else if (cfg.grad_bound_override) {
    out.grad_bound = cfg.grad_bound_override;
  } else {
    out.grad_bound = f.grad_bound;
  }
  out.leftover = cfg.leftover;
  return out;
}

BenchmarkRow run_point(const ExperimentConfig& cfg, const Integrand& f,
                       EstimatorKind est, std::int64_t budget,
                       const std::optional<LmcUcbConfig>& adaptive) {
  const double mu = *f.exact_integral;
  const std::int64_t reps = cfg.replications;
  std::vector<double> err(static_cast<std::size_t>(reps));
  std::vector<std::int64_t> used(static_cast<std::size_t>(reps));

  parallel_for(reps, cfg.workers, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t r = lo; r < hi; ++r) {
      const RngSpec rng{cfg.root_seed,
                        derive_stream({estimator_stream_id(est),
                                       static_cast<std::uint64_t>(budget),
                                       static_cast<std::uint64_t>(r)})};
      EstimateReport rep;
      switch (est) {
        case EstimatorKind::crude: rep = crude_mc(f, budget, rng); break;
        case EstimatorKind::uniform: rep = uniform_stratified(f, budget, rng); break;
        case EstimatorKind::lmcucb: rep = lmc_ucb(f, *adaptive, rng); break;
      }
      err[static_cast<std::size_t>(r)] = rep.estimate - mu;
      used[static_cast<std::size_t>(r)] = rep.samples_used;
    }
  });

  NeumaierSum sq;
  for (double e : err) sq.add(e * e);
  const double mse = sq.value() / static_cast<double>(reps);
  NeumaierSum dev;
  for (double e : err) {
    const double c = e * e - mse;
    dev.add(c * c);
  }
  NeumaierSum cnt;
  for (std::int64_t u : used) cnt.add(static_cast<double>(u));

  BenchmarkRow row;
  row.estimator = est;
  row.budget = budget;
  row.mse = mse;
  row.mse_stderr = std::sqrt(dev.value() / static_cast<double>(reps - 1) /
                             static_cast<double>(reps));
  row.samples_used_mean = cnt.value() / static_cast<double>(reps);
  return row;
}

}  // namespace

BenchmarkReport run_benchmark(const ExperimentConfig& cfg) {
  const Integrand& f = corpus_function(cfg.function);
  cfg.validate(f);

  BenchmarkReport report;
  report.function = cfg.function;
  report.dim = f.dim;
  report.root_seed = cfg.root_seed;
  report.replications = cfg.replications;

  const int nodes = cfg.oracle_nodes > 0 ? cfg.oracle_nodes : (f.dim == 1 ? 4096 : 256);
  if (f.has_gradient()) {
    const auto grid = QuadratureGrid::for_integrand(f, nodes);
    report.sigma_big = sigma_big(f, grid);
    report.uniform_constant = uniform_constant(f, grid);
  } else {
    report.sigma_big = std::nan("");
    report.uniform_constant = std::nan("");
  }

  for (EstimatorKind est : cfg.estimators) {
    for (std::int64_t n : cfg.budgets) {
      std::optional<LmcUcbConfig> adaptive;
      if (est == EstimatorKind::lmcucb) {
        adaptive = adaptive_config(cfg, f, n, f.dim);
        try {
          adaptive->validate(f.dim);
        } catch (const std::invalid_argument& bad) {
          report.skipped.push_back({est, n, bad.what()});
          continue;
        }
      }
      BenchmarkRow row = run_point(cfg, f, est, n, adaptive);
      const double scale = std::pow(static_cast<double>(n), rate_exponent(f.dim));
      row.oracle_bound = report.sigma_big / scale;
      row.uniform_bound = report.uniform_constant / scale;
      report.rows.push_back(row);
    }
  }

  report.fits = fit_rates(report.rows);
  return report;
}

RateFit fit_rate(std::span<const std::pair<double, double>> budget_mse) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& [n, mse] : budget_mse) {
    if (!(mse > 0.0)) throw NonPositiveMse("rate fit needs positive mse values");
    xs.push_back(std::log(n));
    ys.push_back(std::log(mse));
  }
  std::vector<double> distinct = xs;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 4) {
    throw InsufficientSpan("rate fit needs at least four distinct budgets");
  }
  if (distinct.back() - distinct.front() < std::log(10.0) * (1.0 - 1e-12)) {
    throw InsufficientSpan("budgets must span at least one decade");
  }

  const auto m = static_cast<double>(xs.size());
  NeumaierSum sx;
  NeumaierSum sy;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx.add(xs[i]);
    sy.add(ys[i]);
  }
  const double xbar = sx.value() / m;
  const double ybar = sy.value() / m;
  NeumaierSum sxx;
  NeumaierSum sxy;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx.add((xs[i] - xbar) * (xs[i] - xbar));
    sxy.add((xs[i] - xbar) * (ys[i] - ybar));
  }
  RateFit fit;
  fit.slope = sxy.value() / sxx.value();
  fit.intercept = ybar - fit.slope * xbar;
  NeumaierSum ssr;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double resid = ys[i] - (fit.intercept + fit.slope * xs[i]);
    ssr.add(resid * resid);
  }
  const int dof = static_cast<int>(xs.size()) - 2;
  const double se = dof > 0 ? std::sqrt(ssr.value() / dof / sxx.value()) : 0.0;
  fit.ci_half = t_quantile_975(dof) * se;
  return fit;
}

std::vector<std::pair<EstimatorKind, RateFit>> fit_rates(
    std::span<const BenchmarkRow> rows) {
  std::vector<std::pair<EstimatorKind, RateFit>> fits;
  for (EstimatorKind est :
       {EstimatorKind::crude, EstimatorKind::uniform, EstimatorKind::lmcucb}) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& row : rows) {
      if (row.estimator == est) {
        pts.emplace_back(static_cast<double>(row.budget), row.mse);
      }
    }
    if (pts.empty()) continue;
    try {
      fits.emplace_back(est, fit_rate(pts));
    } catch (const InsufficientSpan&) {
    } catch (const NonPositiveMse&) {
    }
  }
  return fits;
}

Lemma3Result verify_lemma3(const ExperimentConfig& cfg) {
  const Integrand& f = corpus_function(cfg.function);
  if (cfg.budgets.size() != 1) {
    throw ConfigError("the bound check runs at a single budget");
  }
  const std::int64_t n = cfg.budgets.front();
  auto adaptive = adaptive_config(cfg, f, n, f.dim);
  if (!adaptive.grad_bound) {
    throw ConfigError("the bound is stated in terms of the gradient bound");
  }
  adaptive.validate(f.dim);

  const auto partition = HyperCubePartition::make(f.dim, adaptive.strata);
  const int nodes = cfg.oracle_nodes > 0 ? cfg.oracle_nodes : (f.dim == 1 ? 4096 : 256);
  const auto grid = QuadratureGrid::for_integrand(f, nodes);

  Lemma3Result out;
  std::vector<double> sigmas(static_cast<std::size_t>(partition.strata()));
  for (std::int64_t k = 0; k < partition.strata(); ++k) {
    sigmas[static_cast<std::size_t>(k)] = stratum_sigma(f, partition.stratum_box(k), grid);
  }
  std::vector<double> weights(sigmas.size(), partition.stratum_measure());
  try {
    out.lambda = optimal_proportions(sigmas, weights, f.dim);
  } catch (const AllZeroVariation&) {
    out.applicable = false;
    return out;
  }
  out.applicable = true;
  out.sigma_K = sigma_K(sigmas, weights, f.dim);
  out.bound = lemma3_lower_bound(out.lambda, out.sigma_K, adaptive, f.dim);

  const std::int64_t reps = cfg.replications;
  std::vector<std::uint8_t> pass(static_cast<std::size_t>(reps), 0);
  parallel_for(reps, cfg.workers, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t r = lo; r < hi; ++r) {
      const RngSpec rng{cfg.root_seed,
                        derive_stream({estimator_stream_id(EstimatorKind::lmcucb),
                                       static_cast<std::uint64_t>(n),
                                       static_cast<std::uint64_t>(r)})};
      const EstimateReport rep = lmc_ucb(f, adaptive, rng);
      bool ok = true;
      for (std::size_t k = 0; k < rep.strata.size(); ++k) {
        if (static_cast<double>(rep.strata[k].substrata) < out.bound[k]) {
          ok = false;
          break;
        }
      }
      pass[static_cast<std::size_t>(r)] = ok ? 1 : 0;
    }
  });
  std::int64_t hits = 0;
  for (std::uint8_t p : pass) hits += p;
  out.pass_rate = static_cast<double>(hits) / static_cast<double>(reps);
  return out;
}

std::string emit_csv(const BenchmarkReport& report) {
  std::string out = kCsvHeader;
  out += '\n';
  for (const auto& row : report.rows) {
    out += to_string(row.estimator);
    out += ',';
    out += std::to_string(row.budget);
    out += ',';
    out += format_real(row.mse);
    out += ',';
    out += format_real(row.mse_stderr);
    out += ',';
    out += format_real(row.samples_used_mean);
    out += ',';
    out += format_real(row.oracle_bound);
    out += ',';
    out += format_real(row.uniform_bound);
    out += '\n';
  }
  return out;
}

namespace {

nlohmann::json row_to_json(const BenchmarkRow& row) {
  return nlohmann::json{{"estimator", to_string(row.estimator)},
                        {"n", row.budget},
                        {"mse", row.mse},
                        {"mse_stderr", row.mse_stderr},
                        {"samples_used_mean", row.samples_used_mean},
                        {"oracle_bound", row.oracle_bound},
                        {"uniform_bound", row.uniform_bound}};
}

double json_real(const nlohmann::json& j) {
  // NaN serializes as null; map it back
  return j.is_null() ? std::nan("") : j.get<double>();
}

EstimatorKind json_estimator(const nlohmann::json& j) {
  const auto parsed = estimator_from_string(j.get<std::string>());
  if (!parsed) throw IoError("unknown estimator '" + j.get<std::string>() + "'");
  return *parsed;
}

}  // namespace

std::string emit_json(const BenchmarkReport& report) {
  nlohmann::json j;
  j["function"] = report.function;
  j["dim"] = report.dim;
  j["root_seed"] = report.root_seed;
  j["replications"] = report.replications;
  j["sigma_big"] = report.sigma_big;
  j["uniform_constant"] = report.uniform_constant;
  j["rows"] = nlohmann::json::array();
  for (const auto& row : report.rows) j["rows"].push_back(row_to_json(row));
  j["skipped"] = nlohmann::json::array();
  for (const auto& skip : report.skipped) {
    j["skipped"].push_back({{"estimator", to_string(skip.estimator)},
                            {"n", skip.budget},
                            {"reason", skip.reason}});
  }
  j["fits"] = nlohmann::json::array();
  for (const auto& [est, fit] : report.fits) {
    j["fits"].push_back({{"estimator", to_string(est)},
                         {"slope", fit.slope},
                         {"intercept", fit.intercept},
                         {"ci_half", fit.ci_half}});
  }
  return j.dump(2) + "\n";
}

std::string emit(const BenchmarkReport& report, OutputFormat format) {
  return format == OutputFormat::csv ? emit_csv(report) : emit_json(report);
}

BenchmarkReport parse_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& bad) {
    throw IoError(std::string("invalid report json: ") + bad.what());
  }
  BenchmarkReport report;
  report.function = j.at("function").get<std::string>();
  report.dim = j.at("dim").get<int>();
  report.root_seed = j.at("root_seed").get<std::uint64_t>();
  report.replications = j.at("replications").get<std::int64_t>();
  report.sigma_big = json_real(j.at("sigma_big"));
  report.uniform_constant = json_real(j.at("uniform_constant"));
  for (const auto& jr : j.at("rows")) {
    BenchmarkRow row;
    row.estimator = json_estimator(jr.at("estimator"));
    row.budget = jr.at("n").get<std::int64_t>();
    row.mse = json_real(jr.at("mse"));
    row.mse_stderr = json_real(jr.at("mse_stderr"));
    row.samples_used_mean = json_real(jr.at("samples_used_mean"));
    row.oracle_bound = json_real(jr.at("oracle_bound"));
    row.uniform_bound = json_real(jr.at("uniform_bound"));
    report.rows.push_back(row);
  }
  for (const auto& js : j.at("skipped")) {
    report.skipped.push_back({json_estimator(js.at("estimator")),
                              js.at("n").get<std::int64_t>(),
                              js.at("reason").get<std::string>()});
  }
  for (const auto& jf : j.at("fits")) {
    RateFit fit;
    fit.slope = json_real(jf.at("slope"));
    fit.intercept = json_real(jf.at("intercept"));
    fit.ci_half = json_real(jf.at("ci_half"));
    report.fits.emplace_back(json_estimator(jf.at("estimator")), fit);
  }
  return report;
}

std::vector<BenchmarkRow> parse_csv(std::string_view text) {
  std::vector<BenchmarkRow> rows;
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) continue;
    if (header) {
      if (line != kCsvHeader) throw IoError("unexpected csv header");
      header = false;
      continue;
    }
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.emplace_back(line.substr(start, comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 7) throw IoError("csv row has wrong field count");
    BenchmarkRow row;
    const auto est = estimator_from_string(fields[0]);
    if (!est) throw IoError("unknown estimator '" + fields[0] + "'");
    row.estimator = *est;
    row.budget = std::stoll(fields[1]);
    row.mse = std::stod(fields[2]);
    row.mse_stderr = std::stod(fields[3]);
    row.samples_used_mean = std::stod(fields[4]);
    row.oracle_bound = std::stod(fields[5]);
    row.uniform_bound = std::stod(fields[6]);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace stratmc
