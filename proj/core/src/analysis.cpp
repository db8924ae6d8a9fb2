#include "stratmc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "stratmc/errors.hpp"
#include "stratmc/summation.hpp"

namespace stratmc {

namespace {

// 8-point Gauss-Legendre rule on [-1,1]; composite panels of this order
// divide all the working resolutions evenly.
constexpr int kPanelOrder = 8;
constexpr double kGlNodes[kPanelOrder] = {
    -0.96028985649753623168, -0.79666647741362673959, -0.52553240991632898582,
    -0.18343464249564980494, 0.18343464249564980494,  0.52553240991632898582,
    0.79666647741362673959,  0.96028985649753623168};
constexpr double kGlWeights[kPanelOrder] = {
    0.10122853629037625915, 0.22238103445337447054, 0.31370664587788728734,
    0.36268378337836198297, 0.36268378337836198297, 0.31370664587788728734,
    0.22238103445337447054, 0.10122853629037625915};

struct AxisRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Panels per segment, proportional to length, at least one each, summing
// to `total`. Largest-remainder rounding keeps the choice deterministic.
std::vector<int> distribute_panels(const std::vector<double>& lengths, int total) {
  const int nseg = static_cast<int>(lengths.size());
  total = std::max(total, nseg);
  const double whole = std::accumulate(lengths.begin(), lengths.end(), 0.0);
  std::vector<int> panels(lengths.size(), 1);
  std::vector<double> remainder(lengths.size(), 0.0);
  int assigned = 0;
  for (int s = 0; s < nseg; ++s) {
    const double ideal = total * lengths[static_cast<std::size_t>(s)] / whole;
    panels[static_cast<std::size_t>(s)] = std::max(1, static_cast<int>(std::floor(ideal)));
    remainder[static_cast<std::size_t>(s)] = ideal - std::floor(ideal);
    assigned += panels[static_cast<std::size_t>(s)];
  }
  while (assigned < total) {
    int best = 0;
    for (int s = 1; s < nseg; ++s) {
      if (remainder[static_cast<std::size_t>(s)] > remainder[static_cast<std::size_t>(best)]) best = s;
    }
    ++panels[static_cast<std::size_t>(best)];
    remainder[static_cast<std::size_t>(best)] -= 1.0;
    ++assigned;
  }
  while (assigned > total) {
    int best = -1;
    for (int s = 0; s < nseg; ++s) {
      if (panels[static_cast<std::size_t>(s)] > 1 &&
          (best < 0 || remainder[static_cast<std::size_t>(s)] < remainder[static_cast<std::size_t>(best)])) {
        best = s;
      }
    }
    if (best < 0) break;
    --panels[static_cast<std::size_t>(best)];
    remainder[static_cast<std::size_t>(best)] += 1.0;
    --assigned;
  }
  return panels;
}

AxisRule build_axis_rule(double lo, double hi, const std::vector<double>& splits,
                         int target_nodes, QuadRule rule) {
  std::vector<double> edges{lo};
  for (double s : splits) {
    if (s > lo && s < hi) edges.push_back(s);
  }
  edges.push_back(hi);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  std::vector<double> lengths;
  for (std::size_t s = 0; s + 1 < edges.size(); ++s) lengths.push_back(edges[s + 1] - edges[s]);

  const int per_panel = rule == QuadRule::gauss_legendre ? kPanelOrder : 1;
  const int total_panels = (std::max(target_nodes, 1) + per_panel - 1) / per_panel;
  const auto panels = distribute_panels(lengths, total_panels);

  AxisRule out;
  for (std::size_t s = 0; s + 1 < edges.size(); ++s) {
    const int count = panels[s];
    const double h = lengths[s] / count;
    for (int pnl = 0; pnl < count; ++pnl) {
      const double a = edges[s] + pnl * h;
      if (rule == QuadRule::gauss_legendre) {
        const double mid = a + 0.5 * h;
        const double half = 0.5 * h;
        for (int q = 0; q < kPanelOrder; ++q) {
          out.nodes.push_back(mid + half * kGlNodes[q]);
          out.weights.push_back(half * kGlWeights[q]);
        }
      } else {
        out.nodes.push_back(a + 0.5 * h);
        out.weights.push_back(h);
      }
    }
  }
  return out;
}

double gradient_norm(const Integrand& f, std::span<const double> x,
                     std::span<double> buffer, bool fd_fallback) {
  if (f.has_gradient()) {
    f.gradient(x, buffer);
  } else if (fd_fallback) {
    f.fd_gradient(x, buffer);
  } else {
    throw MissingGradient("integrand '" + f.name + "' has no gradient");
  }
  double s = 0.0;
  for (double g : buffer) s += g * g;
  return std::sqrt(s);
}

double rate_exponent(int dim) { return 1.0 + 2.0 / dim; }

}  // namespace

QuadratureGrid QuadratureGrid::for_integrand(const Integrand& f, int nodes_per_axis,
                                             QuadRule rule) {
  QuadratureGrid grid;
  grid.nodes_per_axis = nodes_per_axis;
  grid.rule = rule;
  grid.splits = f.splits;
  grid.splits.resize(static_cast<std::size_t>(f.dim));
  return grid;
}

double integrate(const std::function<double(std::span<const double>)>& g,
                 int dim, const Box& box, const QuadratureGrid& grid) {
  if (box.dim() != dim) throw ShapeMismatch("box dimension mismatch");
  std::vector<AxisRule> axes;
  axes.reserve(static_cast<std::size_t>(dim));
  static const std::vector<double> kNoSplits;
  for (int j = 0; j < dim; ++j) {
    const auto& splits =
        static_cast<std::size_t>(j) < grid.splits.size() ? grid.splits[static_cast<std::size_t>(j)] : kNoSplits;
    axes.push_back(build_axis_rule(box.lower[static_cast<std::size_t>(j)],
                                   box.upper[static_cast<std::size_t>(j)], splits,
                                   grid.nodes_per_axis, grid.rule));
  }

  std::vector<std::size_t> idx(static_cast<std::size_t>(dim), 0);
  std::vector<double> pt(static_cast<std::size_t>(dim));
  NeumaierSum acc;
  while (true) {
    double w = 1.0;
    for (int j = 0; j < dim; ++j) {
      const auto i = idx[static_cast<std::size_t>(j)];
      pt[static_cast<std::size_t>(j)] = axes[static_cast<std::size_t>(j)].nodes[i];
      w *= axes[static_cast<std::size_t>(j)].weights[i];
    }
    acc.add(w * g(pt));
    int j = dim - 1;
    while (j >= 0) {
      auto& i = idx[static_cast<std::size_t>(j)];
      if (++i < axes[static_cast<std::size_t>(j)].nodes.size()) break;
      i = 0;
      --j;
    }
    if (j < 0) break;
  }
  return acc.value();
}

namespace {

Box unit_box(int dim) {
  Box box;
  box.lower.assign(static_cast<std::size_t>(dim), 0.0);
  box.upper.assign(static_cast<std::size_t>(dim), 1.0);
  return box;
}

}  // namespace

double integral(const Integrand& f, const QuadratureGrid& grid) {
  return integrate(f.eval, f.dim, unit_box(f.dim), grid);
}

double grad_norm_integral(const Integrand& f, double p, const QuadratureGrid& grid,
                          bool fd_fallback) {
  if (!f.has_gradient() && !fd_fallback) {
    throw MissingGradient("integrand '" + f.name + "' has no gradient");
  }
  if (p <= 0.0) throw ConfigError("gradient norm exponent must be positive");
  std::vector<double> buffer(static_cast<std::size_t>(f.dim));
  auto g = [&](std::span<const double> x) {
    return std::pow(gradient_norm(f, x, buffer, fd_fallback), p);
  };
  return integrate(g, f.dim, unit_box(f.dim), grid);
}

double sigma_big(const Integrand& f, const QuadratureGrid& grid) {
  const int d = f.dim;
  const double inner = grad_norm_integral(f, static_cast<double>(d) / (d + 1), grid);
  return std::pow(inner, 2.0 * (d + 1) / d) / 12.0;
}

double uniform_constant(const Integrand& f, const QuadratureGrid& grid) {
  return grad_norm_integral(f, 2.0, grid) / 12.0;
}

double stratum_sigma(const Integrand& f, const Box& box, const QuadratureGrid& grid) {
  const double w = box.measure();
  const double mean = integrate(f.eval, f.dim, box, grid) / w;
  auto centered = [&](std::span<const double> x) {
    const double v = f.eval(x) - mean;
    return v * v;
  };
  const double var = integrate(centered, f.dim, box, grid) / w;
  return std::sqrt(std::max(var, 0.0));
}

double optimal_allocation_density(const Integrand& f, std::span<const double> x,
                                  const QuadratureGrid& grid) {
  const double q = static_cast<double>(f.dim) / (f.dim + 1);
  const double total = grad_norm_integral(f, q, grid);
  if (total <= 0.0) throw AllZeroVariation("flat integrand has no allocation density");
  std::vector<double> buffer(static_cast<std::size_t>(f.dim));
  return std::pow(gradient_norm(f, x, buffer, false), q) / total;
}

double sigma_K(std::span<const double> sigma, std::span<const double> weights, int dim) {
  if (sigma.size() != weights.size()) throw ShapeMismatch("sigma/weights size mismatch");
  const double q = static_cast<double>(dim) / (dim + 1);
  NeumaierSum acc;
  for (std::size_t k = 0; k < sigma.size(); ++k) {
    acc.add(std::pow(weights[k] * sigma[k], q));
  }
  return acc.value();
}

std::vector<double> optimal_proportions(std::span<const double> sigma,
                                        std::span<const double> weights, int dim) {
  const double total = sigma_K(sigma, weights, dim);
  if (total <= 0.0) {
    throw AllZeroVariation("all strata have zero deviation; proportions undefined");
  }
  const double q = static_cast<double>(dim) / (dim + 1);
  std::vector<double> lambda(sigma.size());
  for (std::size_t k = 0; k < sigma.size(); ++k) {
    lambda[k] = std::pow(weights[k] * sigma[k], q) / total;
  }
  return lambda;
}

double pseudo_risk(const std::vector<std::vector<double>>& sigma_sub,
                   std::span<const std::int64_t> counts,
                   std::span<const double> weights) {
  if (sigma_sub.size() != counts.size() || sigma_sub.size() != weights.size()) {
    throw ShapeMismatch("per-stratum shapes disagree");
  }
  NeumaierSum acc;
  for (std::size_t k = 0; k < sigma_sub.size(); ++k) {
    if (static_cast<std::int64_t>(sigma_sub[k].size()) != counts[k]) {
      throw ShapeMismatch("sub-cell deviations do not match the plan");
    }
    const double ratio = weights[k] / static_cast<double>(counts[k]);
    NeumaierSum inner;
    for (double s : sigma_sub[k]) inner.add(s * s);
    acc.add(ratio * ratio * inner.value());
  }
  return acc.value();
}

double stratified_risk(std::span<const double> sigma, std::span<const double> weights,
                       std::span<const double> counts, int dim) {
  if (sigma.size() != weights.size() || sigma.size() != counts.size()) {
    throw ShapeMismatch("per-stratum shapes disagree");
  }
  NeumaierSum acc;
  for (std::size_t k = 0; k < sigma.size(); ++k) {
    if (!(counts[k] > 0.0)) throw ConfigError("sub-stratum counts must be positive");
    acc.add(weights[k] * weights[k] * sigma[k] * sigma[k] /
            std::pow(counts[k], rate_exponent(dim)));
  }
  return acc.value();
}

OracleAllocation oracle_risk(std::span<const double> sigma,
                             std::span<const double> weights,
                             std::int64_t budget, int dim) {
  if (budget < 1) throw ConfigError("budget must be >= 1");
  OracleAllocation out;
  out.sigma_K = sigma_K(sigma, weights, dim);
  out.risk = std::pow(out.sigma_K, 2.0 * (dim + 1) / dim) /
             std::pow(static_cast<double>(budget), rate_exponent(dim));
  out.counts.resize(sigma.size());
  if (out.sigma_K > 0.0) {
    const auto lambda = optimal_proportions(sigma, weights, dim);
    for (std::size_t k = 0; k < lambda.size(); ++k) {
      out.counts[k] = lambda[k] * static_cast<double>(budget);
    }
  } else {
    for (std::size_t k = 0; k < out.counts.size(); ++k) {
      out.counts[k] = weights[k] * static_cast<double>(budget);
    }
  }
  return out;
}

double pseudo_regret(double risk, double sigma_big_value, std::int64_t budget, int dim) {
  return risk - sigma_big_value / std::pow(static_cast<double>(budget), rate_exponent(dim));
}

OracleSummary summarize(const Integrand& f, const HyperCubePartition& partition,
                        std::int64_t budget, const QuadratureGrid& grid) {
  OracleSummary out;
  out.sigma_big = sigma_big(f, grid);
  out.uniform_constant = uniform_constant(f, grid);
  out.stratum_sigmas.resize(static_cast<std::size_t>(partition.strata()));
  for (std::int64_t k = 0; k < partition.strata(); ++k) {
    out.stratum_sigmas[static_cast<std::size_t>(k)] =
        stratum_sigma(f, partition.stratum_box(k), grid);
  }
  std::vector<double> weights(static_cast<std::size_t>(partition.strata()),
                              partition.stratum_measure());
  const auto oracle = oracle_risk(out.stratum_sigmas, weights, budget, partition.dim());
  out.sigma_K = oracle.sigma_K;
  out.oracle_risk = oracle.risk;
  out.lambda = optimal_proportions(out.stratum_sigmas, weights, partition.dim());
  return out;
}

std::vector<std::vector<double>> substratum_sigmas(const Integrand& f,
                                                   const SubStratification& sub,
                                                   const QuadratureGrid& grid) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(sub.parent().strata()));
  for (std::int64_t k = 0; k < sub.parent().strata(); ++k) {
    auto& row = out[static_cast<std::size_t>(k)];
    row.resize(static_cast<std::size_t>(sub.count(k)));
    for (std::int64_t i = 0; i < sub.count(k); ++i) {
      row[static_cast<std::size_t>(i)] = stratum_sigma(f, sub.substratum_box(k, i), grid);
    }
  }
  return out;
}

}  // namespace stratmc
