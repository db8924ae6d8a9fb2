#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stratmc/analysis.hpp"
#include "stratmc/estimators.hpp"
#include "stratmc/integrand.hpp"

namespace stratmc {

enum class EstimatorKind { crude, uniform, lmcucb };

std::string to_string(EstimatorKind kind);
std::optional<EstimatorKind> estimator_from_string(std::string_view name);

/// How the stratum count is chosen per budget: a fixed K, or the tuned
/// K_n = floor(sqrt(n)^{1/d})^d.
struct KPolicy {
  enum class Kind { fixed, theorem4 };
  Kind kind = Kind::theorem4;
  std::int64_t strata = 1;

  static KPolicy fixed(std::int64_t strata) { return {Kind::fixed, strata}; }
  static KPolicy tuned() { return {Kind::theorem4, 1}; }

  std::int64_t strata_for(std::int64_t budget, int dim) const;
};

struct ExperimentConfig {
  std::string function;
  std::vector<EstimatorKind> estimators = {EstimatorKind::crude, EstimatorKind::uniform,
                                           EstimatorKind::lmcucb};
  std::vector<std::int64_t> budgets;
  std::int64_t replications = 2;
  double delta = 0.05;
  KPolicy k_policy;
  std::optional<double> scale_override;     // A; otherwise derived from L
  std::optional<double> grad_bound_override;  // L; otherwise the function's own
  LeftoverPolicy leftover = LeftoverPolicy::discard;
  std::uint64_t root_seed = 0;
  int workers = 1;
  int oracle_nodes = 0;  // 0: pick by dimension (4096 for d=1, 256 for d=2+)

  void validate(const Integrand& f) const;
};

struct BenchmarkRow {
  EstimatorKind estimator = EstimatorKind::crude;
  std::int64_t budget = 0;
  double mse = 0.0;
  double mse_stderr = 0.0;
  double samples_used_mean = 0.0;
  double oracle_bound = 0.0;   // Sigma / n^{1+2/d}
  double uniform_bound = 0.0;  // uniform constant / n^{1+2/d}
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double ci_half = 0.0;  // 95% half-width on the slope
};

struct SkippedPoint {
  EstimatorKind estimator = EstimatorKind::lmcucb;
  std::int64_t budget = 0;
  std::string reason;
};

struct BenchmarkReport {
  std::string function;
  int dim = 1;
  std::uint64_t root_seed = 0;
  std::int64_t replications = 0;
  std::vector<BenchmarkRow> rows;
  std::vector<SkippedPoint> skipped;
  std::vector<std::pair<EstimatorKind, RateFit>> fits;
  double sigma_big = 0.0;
  double uniform_constant = 0.0;
};

/// Replicated MSE sweep. Deterministic in the full config including the
/// root seed; per-replication streams are derived from
/// (root, estimator, budget, replication), so neither worker count nor
/// execution order changes any output byte.
BenchmarkReport run_benchmark(const ExperimentConfig& cfg);

/// Least-squares fit of log(mse) against log(n). Requires four distinct
/// budgets spanning at least a decade and positive mse values.
RateFit fit_rate(std::span<const std::pair<double, double>> budget_mse);

struct Lemma3Result {
  bool applicable = false;     // false when the function has no variation
  double pass_rate = 0.0;      // fraction of runs with all S_k above bound
  std::vector<double> bound;   // per-stratum floor
  std::vector<double> lambda;
  double sigma_K = 0.0;
};

/// Empirical check of the sub-stratum-count floor: runs the adaptive
/// scheme cfg.replications times and reports how often every stratum met
/// the bound computed from true (quadrature) deviations.
Lemma3Result verify_lemma3(const ExperimentConfig& cfg);

enum class OutputFormat { csv, json };

/// CSV: fixed column order (estimator, n, mse, mse_stderr,
/// samples_used_mean, oracle_bound, uniform_bound), LF endings, reals at
/// 17 significant digits. Skipped points are carried by JSON only.
std::string emit_csv(const BenchmarkReport& report);
std::string emit_json(const BenchmarkReport& report);
std::string emit(const BenchmarkReport& report, OutputFormat format);

/// Inverse of emit_json; all numeric fields round-trip bit-exactly.
BenchmarkReport parse_json(std::string_view text);

/// Reads rows back from emit_csv output (for rate fitting on saved runs).
std::vector<BenchmarkRow> parse_csv(std::string_view text);

/// Slope fits per estimator from benchmark rows.
std::vector<std::pair<EstimatorKind, RateFit>> fit_rates(
    std::span<const BenchmarkRow> rows);

}  // namespace stratmc
