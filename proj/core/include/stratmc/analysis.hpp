#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "stratmc/geometry.hpp"
#include "stratmc/integrand.hpp"

namespace stratmc {

enum class QuadRule { midpoint, gauss_legendre };

/// Composite quadrature control. `nodes_per_axis` is the per-axis node
/// budget (rounded up to whole panels); `splits` holds interior domain
/// coordinates each axis is segmented at before paneling, so panels never
/// straddle a known discontinuity.
struct QuadratureGrid {
  int nodes_per_axis = 256;
  QuadRule rule = QuadRule::gauss_legendre;
  std::vector<std::vector<double>> splits;

  /// Grid seeded with the integrand's advertised discontinuities.
  static QuadratureGrid for_integrand(const Integrand& f, int nodes_per_axis,
                                      QuadRule rule = QuadRule::gauss_legendre);
};

/// Composite quadrature of g over an axis-aligned box. Tile order is fixed
/// and accumulation compensated, so the result does not depend on how the
/// caller partitions surrounding work.
double integrate(const std::function<double(std::span<const double>)>& g,
                 int dim, const Box& box, const QuadratureGrid& grid);

/// Integral of f over [0,1]^d.
double integral(const Integrand& f, const QuadratureGrid& grid);

/// Integral over [0,1]^d of ||grad f(x)||_2 ^ p. Throws MissingGradient
/// unless the integrand has a gradient or fd_fallback is set.
double grad_norm_integral(const Integrand& f, double p, const QuadratureGrid& grid,
                          bool fd_fallback = false);

/// Oracle constant (1/12) * (integral of ||grad f||_2^{d/(d+1)}) ^ {2(d+1)/d}.
double sigma_big(const Integrand& f, const QuadratureGrid& grid);

/// Equal-measure stratification constant (1/12) * integral of ||grad f||_2^2.
double uniform_constant(const Integrand& f, const QuadratureGrid& grid);

/// Conditional standard deviation of f on a box: sqrt((1/w) ∫ (f - mean)^2).
double stratum_sigma(const Integrand& f, const Box& box, const QuadratureGrid& grid);

/// Pointwise ideal sub-stratum density ||grad f(x)||^{d/(d+1)} normalized
/// to unit integral. Diagnostic / plotting aid only.
double optimal_allocation_density(const Integrand& f, std::span<const double> x,
                                  const QuadratureGrid& grid);

/// sum_k (w_k sigma_k)^{d/(d+1)}.
double sigma_K(std::span<const double> sigma, std::span<const double> weights, int dim);

/// Ideal fraction of sub-strata per stratum, proportional to
/// (w_k sigma_k)^{d/(d+1)}. Throws AllZeroVariation when every term is 0.
std::vector<double> optimal_proportions(std::span<const double> sigma,
                                        std::span<const double> weights, int dim);

/// Variance of the two-layer one-point-per-cell estimator:
/// sum_k sum_i (w_k/S_k)^2 sigma_{k,i}^2.
double pseudo_risk(const std::vector<std::vector<double>>& sigma_sub,
                   std::span<const std::int64_t> counts,
                   std::span<const double> weights);

/// Same risk in per-stratum form, sum_k w_k^2 sigma_k^2 / S_k^{1+2/d},
/// valid when sub-cell deviations are equal within each stratum. Accepts
/// real-valued counts so ideal (unrounded) plans can be evaluated.
double stratified_risk(std::span<const double> sigma, std::span<const double> weights,
                       std::span<const double> counts, int dim);

struct OracleAllocation {
  double risk = 0.0;            // sigma_K^{2(d+1)/d} / n^{1+2/d}
  double sigma_K = 0.0;
  std::vector<double> counts;   // ideal real-valued S_k, proportions * n
};

/// Risk of the best fixed allocation given true per-stratum deviations.
/// Rounding of the ideal counts is deliberately ignored.
OracleAllocation oracle_risk(std::span<const double> sigma,
                             std::span<const double> weights,
                             std::int64_t budget, int dim);

/// risk - Sigma / n^{1+2/d}: the price paid for not knowing f in advance.
double pseudo_regret(double risk, double sigma_big_value, std::int64_t budget, int dim);

struct OracleSummary {
  double sigma_big = 0.0;
  double sigma_K = 0.0;
  std::vector<double> lambda;
  double uniform_constant = 0.0;
  double oracle_risk = 0.0;
  std::vector<double> stratum_sigmas;
};

/// All deterministic reference quantities for f on a partition at budget n.
OracleSummary summarize(const Integrand& f, const HyperCubePartition& partition,
                        std::int64_t budget, const QuadratureGrid& grid);

/// Per-(stratum, sub-cell) conditional standard deviations by quadrature.
std::vector<std::vector<double>> substratum_sigmas(const Integrand& f,
                                                   const SubStratification& sub,
                                                   const QuadratureGrid& grid);

}  // namespace stratmc
