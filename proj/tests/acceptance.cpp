// Acceptance suite: one line per criterion, nonzero exit if any fails.
#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "stratmc/analysis.hpp"
#include "stratmc/errors.hpp"
#include "stratmc/estimators.hpp"
#include "stratmc/harness.hpp"
#include "stratmc/integrand.hpp"
#include "stratmc/rng.hpp"

using namespace stratmc;

namespace {

int g_failures = 0;
std::vector<std::string> g_notes;

void note(const char* fmt, ...) {
  char buf[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, args);
  va_end(args);
  g_notes.emplace_back(buf);
}

class Criterion {
 public:
  explicit Criterion(std::string label) : label_(std::move(label)) {
    g_notes.clear();
    start_ = std::chrono::steady_clock::now();
  }

  void expect(bool ok, const char* what) {
    if (!ok) {
      failed_ = true;
      g_notes.emplace_back(std::string("violated: ") + what);
    }
  }

  ~Criterion() {
    const auto elapsed = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - start_)
                             .count();
    std::printf("[%s] %s (%.1fs)\n", failed_ ? "FAIL" : "PASS", label_.c_str(), elapsed);
    if (failed_) {
      for (const auto& line : g_notes) std::printf("       %s\n", line.c_str());
      ++g_failures;
    }
    std::fflush(stdout);
  }

 private:
  std::string label_;
  std::chrono::steady_clock::time_point start_;
  bool failed_ = false;
};

bool close_rel(double value, double expected, double tol) {
  return std::abs(value - expected) <= tol * std::abs(expected);
}

PiecewiseLinearSpec random_pl_spec(int dim, std::int64_t strata, SplitMix64& gen) {
  PiecewiseLinearSpec spec{HyperCubePartition::make(dim, strata), {}, {}};
  for (std::int64_t k = 0; k < strata; ++k) {
    std::vector<double> theta(static_cast<std::size_t>(dim));
    for (double& t : theta) t = 4.0 * gen.next_double() - 2.0;
    spec.slopes.push_back(std::move(theta));
    spec.offsets.push_back(2.0 * gen.next_double() - 1.0);
  }
  return spec;
}

std::map<std::pair<EstimatorKind, std::int64_t>, double> mse_by_key(
    const BenchmarkReport& report) {
  std::map<std::pair<EstimatorKind, std::int64_t>, double> out;
  for (const auto& row : report.rows) out[{row.estimator, row.budget}] = row.mse;
  return out;
}

void criterion1_analytic_oracles() {
  Criterion c("1. analytic oracle equivalence");
  const auto& linear = corpus_function("linear1d");
  const auto& quadratic = corpus_function("quadratic1d");
  const auto grid_lin = QuadratureGrid::for_integrand(linear, 4096);
  const auto grid_quad = QuadratureGrid::for_integrand(quadratic, 4096);

  const double sb_lin = sigma_big(linear, grid_lin);
  const double uc_lin = uniform_constant(linear, grid_lin);
  const double sb_quad = sigma_big(quadratic, grid_quad);
  note("sigma_big(linear1d) = %.12g, uniform_constant = %.12g, sigma_big(quadratic1d) = %.12g",
       sb_lin, uc_lin, sb_quad);
  c.expect(close_rel(sb_lin, 1.0 / 12.0, 1e-8), "sigma_big(linear1d) != 1/12 @1e-8");
  c.expect(close_rel(uc_lin, 1.0 / 12.0, 1e-8), "uniform_constant(linear1d) != 1/12 @1e-8");
  c.expect(close_rel(sb_quad, 16.0 / 243.0, 1e-6), "sigma_big(quadratic1d) != 16/243 @1e-6");
}

void criterion2_piecewise_linear_crosscheck() {
  Criterion c("2. piecewise-linear cross-check (50 random specs)");
  SplitMix64 gen(2026);
  const std::int64_t budget = 1000;
  for (int trial = 0; trial < 50; ++trial) {
    const int dim = trial % 2 == 0 ? 1 : 2;
    const std::int64_t strata = std::array<std::int64_t, 3>{1, 4, 16}[trial % 3];
    const auto spec = random_pl_spec(dim, strata, gen);
    const auto f = pl_integrand(spec);

    // per-stratum deviations: quadrature vs closed form
    const QuadratureGrid stratum_grid{dim == 1 ? 512 : 128, QuadRule::gauss_legendre, {}};
    std::vector<double> sigma(static_cast<std::size_t>(strata));
    bool sigma_ok = true;
    for (std::int64_t k = 0; k < strata; ++k) {
      sigma[static_cast<std::size_t>(k)] = pl_sigma_k(spec, k);
      const double quad = stratum_sigma(f, spec.partition.stratum_box(k), stratum_grid);
      if (!close_rel(quad, sigma[static_cast<std::size_t>(k)], 1e-6)) sigma_ok = false;
    }
    if (!sigma_ok) {
      note("trial %d (d=%d K=%lld): stratum_sigma mismatch", trial, dim,
           static_cast<long long>(strata));
      c.expect(false, "stratum_sigma vs closed form @1e-6");
      continue;
    }

    std::vector<double> weights(sigma.size(), spec.partition.stratum_measure());
    const auto oracle = oracle_risk(sigma, weights, budget, dim);
    const double at_ideal = stratified_risk(sigma, weights, oracle.counts, dim);
    if (!close_rel(at_ideal, oracle.risk, 1e-12)) {
      note("trial %d: risk at ideal counts %.17g vs oracle %.17g", trial, at_ideal,
           oracle.risk);
      c.expect(false, "risk at ideal counts != oracle risk @1e-12");
    }

    const auto grid = QuadratureGrid::for_integrand(f, dim == 1 ? 4096 : 256);
    const double floor_value =
        sigma_big(f, grid) / std::pow(static_cast<double>(budget), 1.0 + 2.0 / dim);
    if (!close_rel(oracle.risk, floor_value, 1e-8)) {
      note("trial %d: oracle risk %.17g vs oracle floor %.17g", trial, oracle.risk,
           floor_value);
      c.expect(false, "oracle risk != sigma_big/n^{1+2/d} @1e-8");
    }
  }
}

void criterion3_uniform_exactness() {
  Criterion c("3. uniform-stratified variance at n=100");
  const auto& linear = corpus_function("linear1d");
  const int reps = 10000;
  std::vector<double> estimates(reps);
  double mean = 0.0;
  for (int r = 0; r < reps; ++r) {
    estimates[static_cast<std::size_t>(r)] =
        uniform_stratified(linear, 100, {2026081, static_cast<std::uint64_t>(r)}).estimate;
    mean += estimates[static_cast<std::size_t>(r)];
  }
  mean /= reps;
  double var = 0.0;
  double fourth = 0.0;
  for (double est : estimates) {
    const double d2 = (est - mean) * (est - mean);
    var += d2;
    fourth += d2 * d2;
  }
  var /= reps - 1;
  fourth /= reps;
  const double expected = 1.0 / (12.0 * 1e6);
  const double se = std::sqrt(std::max(fourth - var * var, 0.0) / reps);
  note("empirical var %.6g, target %.6g, se %.2g", var, expected, se);
  c.expect(std::abs(var - expected) <= 3.0 * se, "variance outside 3 se of 1/(12*100^3)");
}

void criterion4_rate_slopes() {
  Criterion c("4. convergence-rate slopes on linear1d");
  // Fixed K keeps the adaptive scheme's initialization overhead K*sbar =
  // sqrt(K n) a vanishing share of the budget, so the fit sees the rate
  // itself; with the budget-tuned K_n the overhead decays only like
  // n^{-1/4} and the desk-scale fit steepens to the window edge.
  ExperimentConfig cfg;
  cfg.function = "linear1d";
  cfg.budgets = {100, 400, 900, 1600, 2500, 10000};
  cfg.replications = 10000;
  cfg.k_policy = KPolicy::fixed(4);
  cfg.leftover = LeftoverPolicy::uniform_refill;
  cfg.root_seed = 41;
  cfg.workers = 2;
  const auto report = run_benchmark(cfg);
  double crude_slope = 0.0;
  double uniform_slope = 0.0;
  double adaptive_slope = 0.0;
  for (const auto& [est, fit] : report.fits) {
    if (est == EstimatorKind::crude) crude_slope = fit.slope;
    if (est == EstimatorKind::uniform) uniform_slope = fit.slope;
    if (est == EstimatorKind::lmcucb) adaptive_slope = fit.slope;
  }
  note("slopes: crude %.4f, uniform %.4f, lmcucb %.4f", crude_slope, uniform_slope,
       adaptive_slope);
  c.expect(crude_slope >= -1.1 && crude_slope <= -0.9, "crude slope outside [-1.1,-0.9]");
  c.expect(uniform_slope >= -3.2 && uniform_slope <= -2.8,
           "uniform slope outside [-3.2,-2.8]");
  c.expect(adaptive_slope >= -3.2 && adaptive_slope <= -2.8,
           "lmcucb slope outside [-3.2,-2.8]");
}

void criterion5_oscillator_reproduction() {
  Criterion c("5. oscillator comparison at small budgets");
  // Leftover refill spends the rounding remainder; without it the scheme
  // hands back ~5% of n=100 and concedes that comparison to the baseline.
  ExperimentConfig cfg;
  cfg.function = "oscillator1d";
  cfg.budgets = {100, 400, 900};
  cfg.replications = 10000;
  cfg.k_policy = KPolicy::tuned();
  cfg.scale_override = 10.0;
  cfg.leftover = LeftoverPolicy::uniform_refill;
  cfg.root_seed = 5;
  cfg.workers = 2;
  const auto report = run_benchmark(cfg);
  const auto mse = mse_by_key(report);
  const double ratio = mse.at({EstimatorKind::crude, 100}) / mse.at({EstimatorKind::lmcucb, 100});
  note("crude/lmcucb at n=100: %.1f", ratio);
  c.expect(ratio >= 20.0, "crude/lmcucb mse ratio below 20 at n=100");
  for (std::int64_t n : cfg.budgets) {
    const double adaptive = mse.at({EstimatorKind::lmcucb, n});
    const double uniform = mse.at({EstimatorKind::uniform, n});
    note("n=%lld: lmcucb %.4g vs uniform %.4g", static_cast<long long>(n), adaptive,
         uniform);
    c.expect(adaptive <= uniform, "lmcucb mse above uniform mse");
  }
}

void criterion6_lemma3() {
  Criterion c("6. sub-stratum floor holds with the stated confidence");
  ExperimentConfig cfg;
  cfg.function = "linear1d";
  cfg.budgets = {10000};
  cfg.replications = 2000;
  cfg.delta = 0.05;
  cfg.k_policy = KPolicy::fixed(4);
  cfg.root_seed = 6;
  cfg.workers = 2;
  const auto result = verify_lemma3(cfg);
  const double threshold =
      1.0 - cfg.delta - 3.0 * std::sqrt(cfg.delta * (1.0 - cfg.delta) /
                                        static_cast<double>(cfg.replications));
  note("pass rate %.4f, threshold %.4f", result.pass_rate, threshold);
  c.expect(result.applicable, "floor check not applicable");
  c.expect(result.pass_rate >= threshold, "pass rate below 1-delta-3*sqrt(delta(1-delta)/R)");
}

void criterion7_budget_ledger_properties() {
  Criterion c("7. budget-ledger property suite (10^4 random configs)");
  SplitMix64 gen(777);
  int budget_ok = 0;
  int floor_ok = 0;
  int power_ok = 0;
  int const_ok = 0;
  const int trials = 10000;
  for (int trial = 0; trial < trials; ++trial) {
    const int dim = 1 + static_cast<int>(gen.next() % 3);
    const auto root = static_cast<std::int64_t>(1 + gen.next() % 3);
    const std::int64_t strata = *checked_pow(root, dim);
    const std::int64_t floor_budget =
        std::max<std::int64_t>(4 * strata, (1LL << (dim + 1)) * strata);
    const std::int64_t budget = floor_budget + static_cast<std::int64_t>(gen.next() % 800);
    LmcUcbConfig cfg;
    cfg.strata = strata;
    cfg.budget = budget;
    cfg.delta = 0.01 + 0.5 * gen.next_double();
    if (gen.next() % 2 == 0) {
      cfg.grad_bound = 10.0 * gen.next_double();
    } else {
      cfg.scale_override = 20.0 * gen.next_double();
    }
    cfg.leftover = gen.next() % 2 == 0 ? LeftoverPolicy::discard
                                       : LeftoverPolicy::uniform_refill;
    const auto spec = random_pl_spec(dim, strata, gen);
    const auto f = pl_integrand(spec);
    const RngSpec rng{gen.next(), gen.next()};
    const auto rep = lmc_ucb(f, cfg, rng);

    if (rep.samples_used <= budget) ++budget_ok;
    bool floors = true;
    bool powers = true;
    for (const auto& s : rep.strata) {
      if (s.substrata < rep.sbar) floors = false;
      if (!exact_root(s.substrata, dim).has_value()) powers = false;
    }
    if (floors) ++floor_ok;
    if (powers) ++power_ok;

    Integrand flat;
    flat.dim = dim;
    flat.eval = [](std::span<const double>) { return 2.5; };
    flat.exact_integral = 2.5;
    auto flat_cfg = cfg;
    flat_cfg.grad_bound.reset();
    flat_cfg.scale_override = cfg.scale_override ? *cfg.scale_override : 0.0;
    if (lmc_ucb(flat, flat_cfg, rng).estimate == 2.5) ++const_ok;
  }
  note("budget %d/%d, floor %d/%d, power %d/%d, const %d/%d", budget_ok, trials,
       floor_ok, trials, power_ok, trials, const_ok, trials);
  c.expect(budget_ok == trials, "samples_used exceeded the budget");
  c.expect(floor_ok == trials, "some S_k fell under sbar");
  c.expect(power_ok == trials, "some S_k not an exact d-th power");
  c.expect(const_ok == trials, "constant integrand not reproduced exactly");
}

void criterion8_determinism() {
  Criterion c("8. byte-identical output across runs and worker counts");
  ExperimentConfig cfg;
  cfg.function = "oscillator1d";
  cfg.budgets = {100, 400};
  cfg.replications = 500;
  cfg.k_policy = KPolicy::tuned();
  cfg.scale_override = 10.0;
  cfg.root_seed = 8;
  cfg.workers = 1;
  const auto base = emit_csv(run_benchmark(cfg));
  c.expect(emit_csv(run_benchmark(cfg)) == base, "re-run differs at workers=1");
  for (int workers : {2, 5}) {
    auto alt = cfg;
    alt.workers = workers;
    if (emit_csv(run_benchmark(alt)) != base) {
      note("workers=%d differs", workers);
      c.expect(false, "csv depends on worker count");
    }
  }
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  criterion1_analytic_oracles();
  criterion2_piecewise_linear_crosscheck();
  criterion3_uniform_exactness();
  criterion4_rate_slopes();
  criterion5_oscillator_reproduction();
  criterion6_lemma3();
  criterion7_budget_ledger_properties();
  criterion8_determinism();
  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
