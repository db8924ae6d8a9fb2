#include "stratmc/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stratmc/errors.hpp"
#include "stratmc/summation.hpp"

namespace stratmc {

namespace {

// Sub-stream tags; one stream per (phase, stratum) so a stratum's draws do
// not move when the allocation of other strata changes.
constexpr std::uint64_t kPhaseFlat = 0;
constexpr std::uint64_t kPhaseInit = 1;
constexpr std::uint64_t kPhaseMain = 2;
constexpr std::uint64_t kPhaseRefill = 3;

// One uniform draw inside cell `cell` of the row-major axis-uniform grid
// with `cells_per_axis` cells per axis.
inline void sample_in_cell(SplitMix64& gen, std::int64_t cell,
                           std::int64_t cells_per_axis, int dim,
                           std::span<double> pt) {
  const auto lattice = static_cast<double>(cells_per_axis);
  for (int j = dim - 1; j >= 0; --j) {
    const std::int64_t c = cell % cells_per_axis;
    cell /= cells_per_axis;
    pt[static_cast<std::size_t>(j)] = (static_cast<double>(c) + gen.next_double()) / lattice;
  }
}

// As above, but for sub-cell `i` (lattice m per axis) of stratum `k`
// (lattice l per axis); both layers resolve onto the global l*m grid.
inline void sample_in_subcell(SplitMix64& gen, std::int64_t k, std::int64_t i,
                              std::int64_t l, std::int64_t m, int dim,
                              std::span<double> pt) {
  const auto lattice = static_cast<double>(l * m);
  for (int j = dim - 1; j >= 0; --j) {
    const std::int64_t sc = k % l;
    k /= l;
    const std::int64_t cc = i % m;
    i /= m;
    pt[static_cast<std::size_t>(j)] =
        (static_cast<double>(sc * m + cc) + gen.next_double()) / lattice;
  }
}

// floor(quota^{1/d})^d with a guard band so a quota that is an integer up
// to rounding noise is not floored one step too low.
std::int64_t floor_power_quota(double quota, int dim) {
  if (!(quota > 0.0)) return 0;
  const double limit = quota * (1.0 + 1e-9);
  auto above = [&](std::int64_t c) {
    return std::pow(static_cast<double>(c), dim) > limit;
  };
  auto c = static_cast<std::int64_t>(std::floor(std::pow(quota, 1.0 / dim))) + 1;
  while (c > 0 && above(c)) --c;
  while (!above(c + 1)) ++c;
  if (c <= 0) return 0;
  return *checked_pow(c, dim);
}

}  // namespace

void LmcUcbConfig::validate(int dim) const {
  if (budget < 1) throw ConfigError("budget must be >= 1");
  if (strata < 1) throw ConfigError("stratum count must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
  if (grad_bound.has_value() == scale_override.has_value()) {
    throw ConfigError("set exactly one of the gradient bound and the scale override");
  }
  if (grad_bound && *grad_bound < 0.0) throw ConfigError("gradient bound must be >= 0");
  if (scale_override && *scale_override < 0.0) throw ConfigError("scale override must be >= 0");
  if (!exact_root(strata, dim)) {
    throw NotPerfectPower("stratum count " + std::to_string(strata) +
                          " is not an integer to the power " + std::to_string(dim));
  }
  if (budget < 4 * strata) throw ConfigError("budget must be at least 4x the stratum count");
  if (sbar(budget, strata, dim) < 2) {
    throw ConfigError("budget too small: initialization needs >= 2 cells per stratum");
  }
}

EstimateReport crude_mc(const Integrand& f, std::int64_t n, RngSpec rng) {
  if (n < 1) throw ConfigError("budget must be >= 1");
  SplitMix64 gen = substream(rng, kPhaseFlat, 0);
  std::vector<double> pt(static_cast<std::size_t>(f.dim));
  NeumaierSum acc;
  for (std::int64_t i = 0; i < n; ++i) {
    gen.fill_unit_point(pt);
    acc.add(f.eval(pt));
  }
  EstimateReport report;
  report.estimate = acc.value() / static_cast<double>(n);
  report.samples_used = n;
  report.phases.main = n;
  return report;
}

EstimateReport uniform_stratified(const Integrand& f, std::int64_t n, RngSpec rng) {
  if (n < 1) throw ConfigError("budget must be >= 1");
  const auto root = exact_root(n, f.dim);
  if (!root) {
    throw NotPerfectPower("budget " + std::to_string(n) +
                          " is not an integer to the power " + std::to_string(f.dim));
  }
  SplitMix64 gen = substream(rng, kPhaseFlat, 0);
  std::vector<double> pt(static_cast<std::size_t>(f.dim));
  NeumaierSum acc;
  for (std::int64_t cell = 0; cell < n; ++cell) {
    sample_in_cell(gen, cell, *root, f.dim, pt);
    acc.add(f.eval(pt));
  }
  EstimateReport report;
  report.estimate = acc.value() / static_cast<double>(n);
  report.samples_used = n;
  report.phases.main = n;
  return report;
}

std::int64_t sbar(std::int64_t n, std::int64_t strata, int dim) {
  if (strata < 1 || n < strata) throw ConfigError("need budget >= strata >= 1");
  // largest m with m^{d+1} * K <= n, compared in exact integer arithmetic
  auto fits = [&](std::int64_t m) {
    std::int64_t acc = strata;
    for (int i = 0; i < dim + 1; ++i) {
      if (__builtin_mul_overflow(acc, m, &acc)) return false;
    }
    return acc <= n;
  };
  auto m = static_cast<std::int64_t>(std::llround(
      std::pow(static_cast<double>(n) / static_cast<double>(strata), 1.0 / (dim + 1))));
  m = std::max<std::int64_t>(m, 1);
  while (m > 1 && !fits(m)) --m;
  while (fits(m + 1)) ++m;
  return *checked_pow(m, dim);
}

double confidence_scale(double grad_bound, std::int64_t strata, double delta, int dim) {
  if (grad_bound < 0.0) throw ConfigError("gradient bound must be >= 0");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
  return 2.0 * grad_bound * std::sqrt(static_cast<double>(dim)) *
         std::sqrt(std::log(2.0 * static_cast<double>(strata) / delta));
}

double empirical_std(std::span<const double> samples) {
  if (samples.size() < 2) throw TooFewSamples("need at least two samples");
  NeumaierSum sum;
  for (double x : samples) sum.add(x);
  const double mean = sum.value() / static_cast<double>(samples.size());
  NeumaierSum sq;
  for (double x : samples) sq.add((x - mean) * (x - mean));
  return std::sqrt(std::max(sq.value(), 0.0) / static_cast<double>(samples.size() - 1));
}

TwoLayerPlan allocate(std::span<const double> sigma_hat, const LmcUcbConfig& cfg,
                      std::int64_t sbar_count, int dim) {
  const std::int64_t strata = cfg.strata;
  if (static_cast<std::int64_t>(sigma_hat.size()) != strata) {
    throw ShapeMismatch("need one deviation estimate per stratum");
  }
  if (!cfg.scale_override && !cfg.grad_bound) {
    throw ConfigError("set exactly one of the gradient bound and the scale override");
  }
  const double w = 1.0 / static_cast<double>(strata);
  const double scale = cfg.scale_override
                           ? *cfg.scale_override
                           : confidence_scale(*cfg.grad_bound, strata, cfg.delta, dim);
  const double pad = scale * std::pow(w / static_cast<double>(sbar_count), 1.0 / dim) /
                     std::sqrt(static_cast<double>(sbar_count));
  const double q = static_cast<double>(dim) / (dim + 1);
  const double wq = std::pow(w, q);

  std::vector<double> score(sigma_hat.size());
  NeumaierSum total;
  for (std::size_t k = 0; k < sigma_hat.size(); ++k) {
    if (sigma_hat[k] < 0.0) throw ConfigError("deviation estimates must be >= 0");
    score[k] = wq * std::pow(sigma_hat[k] + pad, q);
    total.add(score[k]);
  }
  const double denom = total.value();
  const auto spare = static_cast<double>(cfg.budget - strata * sbar_count);

  TwoLayerPlan plan;
  plan.sbar = sbar_count;
  plan.quotas.resize(sigma_hat.size());
  plan.substrata.resize(sigma_hat.size());
  for (std::size_t k = 0; k < sigma_hat.size(); ++k) {
    // zero scale with all-flat estimates degenerates to the symmetric limit
    plan.quotas[k] = denom > 0.0 ? score[k] / denom * spare
                                 : spare / static_cast<double>(strata);
    plan.substrata[k] = std::max(floor_power_quota(plan.quotas[k], dim), sbar_count);
  }
  return plan;
}

EstimateReport lmc_ucb(const Integrand& f, const LmcUcbConfig& cfg, RngSpec rng) {
  const int d = f.dim;
  cfg.validate(d);
  const std::int64_t strata = cfg.strata;
  const std::int64_t n = cfg.budget;
  const std::int64_t l = *exact_root(strata, d);
  const std::int64_t init_cells = sbar(n, strata, d);
  const std::int64_t mbar = floor_root(init_cells, d);
  const bool refill = cfg.leftover == LeftoverPolicy::uniform_refill;

  std::vector<double> pt(static_cast<std::size_t>(d));
  std::vector<std::vector<double>> init_vals(
      static_cast<std::size_t>(strata),
      std::vector<double>(static_cast<std::size_t>(init_cells)));
  std::vector<double> sigma_hat(static_cast<std::size_t>(strata));
  for (std::int64_t k = 0; k < strata; ++k) {
    SplitMix64 gen = substream(rng, kPhaseInit, static_cast<std::uint64_t>(k));
    auto& vals = init_vals[static_cast<std::size_t>(k)];
    for (std::int64_t i = 0; i < init_cells; ++i) {
      sample_in_subcell(gen, k, i, l, mbar, d, pt);
      vals[static_cast<std::size_t>(i)] = f.eval(pt);
    }
    sigma_hat[static_cast<std::size_t>(k)] = empirical_std(vals);
  }

  const TwoLayerPlan plan = allocate(sigma_hat, cfg, init_cells, d);

  EstimateReport report;
  report.sbar = init_cells;
  report.phases.init = strata * init_cells;
  report.strata.resize(static_cast<std::size_t>(strata));

  // Per-cell sums and counts are only needed when leftovers are folded in.
  std::vector<double> cell_sum;
  std::vector<std::int32_t> cell_count;
  std::vector<std::int64_t> cell_offset;
  if (refill) {
    cell_offset.resize(static_cast<std::size_t>(strata) + 1, 0);
    for (std::int64_t k = 0; k < strata; ++k) {
      cell_offset[static_cast<std::size_t>(k) + 1] =
          cell_offset[static_cast<std::size_t>(k)] + plan.substrata[static_cast<std::size_t>(k)];
    }
    cell_sum.assign(static_cast<std::size_t>(cell_offset.back()), 0.0);
    cell_count.assign(static_cast<std::size_t>(cell_offset.back()), 0);
  }

  std::int64_t fresh = 0;
  NeumaierSum strata_acc;  // sum over strata of per-stratum cell means
  for (std::int64_t k = 0; k < strata; ++k) {
    const std::int64_t cells = plan.substrata[static_cast<std::size_t>(k)];
    auto& record = report.strata[static_cast<std::size_t>(k)];
    record.sigma_hat = sigma_hat[static_cast<std::size_t>(k)];
    record.substrata = cells;
    record.points = init_cells;

    const bool reuse = cells == init_cells;
    NeumaierSum stratum_sum;
    if (reuse) {
      // keep the initialization draw as each cell's point
      const auto& vals = init_vals[static_cast<std::size_t>(k)];
      for (std::int64_t i = 0; i < cells; ++i) {
        const double v = vals[static_cast<std::size_t>(i)];
        stratum_sum.add(v);
        if (refill) {
          cell_sum[static_cast<std::size_t>(cell_offset[static_cast<std::size_t>(k)] + i)] = v;
          cell_count[static_cast<std::size_t>(cell_offset[static_cast<std::size_t>(k)] + i)] = 1;
        }
      }
    } else {
      const std::int64_t m = floor_root(cells, d);
      SplitMix64 gen = substream(rng, kPhaseMain, static_cast<std::uint64_t>(k));
      for (std::int64_t i = 0; i < cells; ++i) {
        sample_in_subcell(gen, k, i, l, m, d, pt);
        const double v = f.eval(pt);
        stratum_sum.add(v);
        if (refill) {
          cell_sum[static_cast<std::size_t>(cell_offset[static_cast<std::size_t>(k)] + i)] = v;
          cell_count[static_cast<std::size_t>(cell_offset[static_cast<std::size_t>(k)] + i)] = 1;
        }
      }
      fresh += cells;
      record.points += cells;
    }
    strata_acc.add(stratum_sum.value() / static_cast<double>(cells));
  }

  report.phases.main = fresh;
  report.samples_used = report.phases.init + fresh;
  const std::int64_t leftover = n - report.samples_used;

  if (refill && leftover > 0) {
    SplitMix64 gen = substream(rng, kPhaseRefill, 0);
    std::vector<std::int64_t> coords(static_cast<std::size_t>(d));
    for (std::int64_t r = 0; r < leftover; ++r) {
      gen.fill_unit_point(pt);
      std::int64_t k = 0;
      for (int j = 0; j < d; ++j) {
        coords[static_cast<std::size_t>(j)] = detail::locate_axis(pt[static_cast<std::size_t>(j)], l);
        k = k * l + coords[static_cast<std::size_t>(j)];
      }
      const std::int64_t cells = plan.substrata[static_cast<std::size_t>(k)];
      const std::int64_t m = floor_root(cells, d);
      std::int64_t i = 0;
      for (int j = 0; j < d; ++j) {
        const std::int64_t g = detail::locate_axis(pt[static_cast<std::size_t>(j)], l * m);
        i = i * m + std::clamp<std::int64_t>(g - coords[static_cast<std::size_t>(j)] * m, 0, m - 1);
      }
      cell_sum[static_cast<std::size_t>(cell_offset[static_cast<std::size_t>(k)] + i)] += f.eval(pt);
      ++cell_count[static_cast<std::size_t>(cell_offset[static_cast<std::size_t>(k)] + i)];
      ++report.strata[static_cast<std::size_t>(k)].points;
    }
    report.phases.leftover = leftover;
    report.samples_used += leftover;

    // estimate from per-cell means instead of single points
    NeumaierSum refined;
    for (std::int64_t k = 0; k < strata; ++k) {
      const std::int64_t cells = plan.substrata[static_cast<std::size_t>(k)];
      NeumaierSum stratum_sum;
      for (std::int64_t i = 0; i < cells; ++i) {
        const auto idx = static_cast<std::size_t>(cell_offset[static_cast<std::size_t>(k)] + i);
        stratum_sum.add(cell_sum[idx] / static_cast<double>(cell_count[idx]));
      }
      refined.add(stratum_sum.value() / static_cast<double>(cells));
    }
    report.estimate = refined.value() / static_cast<double>(strata);
  } else {
    report.estimate = strata_acc.value() / static_cast<double>(strata);
  }
  return report;
}

std::vector<double> lemma3_lower_bound(std::span<const double> lambda, double sigma_K,
                                       const LmcUcbConfig& cfg, int dim) {
  if (!(sigma_K > 0.0)) throw AllZeroVariation("bound needs sigma_K > 0");
  if (!cfg.grad_bound) throw ConfigError("the bound is stated in terms of the gradient bound");
  const auto strata = static_cast<double>(cfg.strata);
  const auto n = static_cast<double>(cfg.budget);
  const double gb = *cfg.grad_bound;
  const double penalty = 7.0 * (gb + 1.0) * std::pow(static_cast<double>(dim), 1.5) *
                         std::sqrt(std::log(strata / cfg.delta)) * (1.0 + 1.0 / sigma_K) *
                         std::pow(strata, 1.0 / (dim + 1)) *
                         std::pow(n, static_cast<double>(dim) / (dim + 1));
  const auto floor_cells = static_cast<double>(sbar(cfg.budget, cfg.strata, dim));
  std::vector<double> bound(lambda.size());
  for (std::size_t k = 0; k < lambda.size(); ++k) {
    bound[k] = std::max(lambda[k] * (n - penalty), floor_cells);
  }
  return bound;
}

}  // namespace stratmc
