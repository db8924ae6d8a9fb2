#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "stratmc/integrand.hpp"
#include "stratmc/rng.hpp"

namespace stratmc {

enum class LeftoverPolicy { discard, uniform_refill };

/// Configuration of one adaptive two-layer run. Exactly one of grad_bound
/// (the scale is derived from it) or scale_override (used as-is) must be
/// set. Requires budget >= 4 * strata and an initialization count of at
/// least 2 per stratum so deviations can be estimated.
struct LmcUcbConfig {
  std::int64_t strata = 1;   // K, an exact d-th power
  std::int64_t budget = 4;   // n
  double delta = 0.05;       // confidence level in (0,1)
  std::optional<double> grad_bound;       // L
  std::optional<double> scale_override;   // A
  LeftoverPolicy leftover = LeftoverPolicy::discard;

  void validate(int dim) const;
};

struct PhaseLedger {
  std::int64_t init = 0;      // initialization draws, K * sbar
  std::int64_t main = 0;      // fresh draws in re-stratified strata
  std::int64_t leftover = 0;  // refill draws
};

struct StratumRecord {
  double sigma_hat = 0.0;     // deviation estimated from the init pass
  std::int64_t substrata = 0; // final S_k
  std::int64_t points = 0;    // draws that landed in this stratum
};

struct EstimateReport {
  double estimate = 0.0;
  std::int64_t samples_used = 0;
  std::int64_t sbar = 0;
  PhaseLedger phases;
  std::vector<StratumRecord> strata;  // populated by the adaptive scheme
};

/// Per-stratum sub-cell counts chosen by the allocation rule, plus the
/// raw pre-rounding quotas for diagnostics.
struct TwoLayerPlan {
  std::int64_t sbar = 0;
  std::vector<std::int64_t> substrata;  // S_k, exact d-th powers, >= sbar
  std::vector<double> quotas;           // C_k, sum to budget - K*sbar
};

/// Sample mean of n i.i.d. uniform draws on [0,1]^d.
EstimateReport crude_mc(const Integrand& f, std::int64_t n, RngSpec rng);

/// n equal hyper-cubes, one uniform draw each. Throws NotPerfectPower when
/// n is not an exact d-th power.
EstimateReport uniform_stratified(const Integrand& f, std::int64_t n, RngSpec rng);

/// Initialization sub-stratum count per stratum:
/// floor((n/K)^{1/(d+1)})^d, the inner root taken by exact integer search
/// on the rational n/K.
std::int64_t sbar(std::int64_t n, std::int64_t strata, int dim);

/// Confidence inflation scale 2 L sqrt(d) sqrt(log(2K/delta)).
double confidence_scale(double grad_bound, std::int64_t strata, double delta, int dim);

/// Unbiased standard deviation, 1/(n-1) normalization. Throws
/// TooFewSamples below two samples.
double empirical_std(std::span<const double> samples);

/// Allocation rule: quota C_k proportional to
/// w^{d/(d+1)} (sigma_hat_k + A (w/sbar)^{1/d} / sqrt(sbar))^{d/(d+1)},
/// scaled to spend budget - K*sbar; S_k = max(floor(C_k^{1/d})^d, sbar).
/// With a zero scale and all-zero deviations the quotas fall back to
/// uniform, matching the symmetric limit.
TwoLayerPlan allocate(std::span<const double> sigma_hat, const LmcUcbConfig& cfg,
                      std::int64_t sbar_count, int dim);

/// Two-layer adaptive stratified estimate:
///  1. split each stratum into sbar cells, one uniform draw per cell;
///  2. estimate per-stratum deviations, re-stratify via allocate();
///  3. strata with S_k > sbar get fresh cells and one fresh draw per cell;
///     strata with S_k == sbar keep their init draws as the cells' points
///     (this is what keeps the total inside the budget);
///  4. estimate = (1/K) sum_k (mean of cell points in stratum k);
///  5. under uniform_refill the unspent remainder is drawn uniformly on
///     the domain, each draw credited to the sub-cell containing it, and
///     cell means replace single points.
EstimateReport lmc_ucb(const Integrand& f, const LmcUcbConfig& cfg, RngSpec rng);

/// High-probability floor for the realized S_k given the true optimal
/// proportions: max(lambda_k (n - penalty(n, K, L, delta, sigma_K)), sbar).
std::vector<double> lemma3_lower_bound(std::span<const double> lambda, double sigma_K,
                                       const LmcUcbConfig& cfg, int dim);

}  // namespace stratmc
