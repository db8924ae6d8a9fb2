#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stratmc/geometry.hpp"

namespace stratmc {

using EvalFn = std::function<double(std::span<const double>)>;
using GradFn = std::function<void(std::span<const double>, std::span<double>)>;

/// A real-valued function on [0,1]^d plus whatever reference data is known
/// about it. `gradient` is empty when no analytic gradient is available;
/// `splits` lists interior coordinates, per axis, where eval or gradient
/// jumps (quadrature panels must not straddle them).
struct Integrand {
  std::string name;
  int dim = 1;
  EvalFn eval;
  GradFn gradient;
  std::optional<double> exact_integral;
  std::optional<double> grad_bound;  // uniform bound on ||grad f||_2
  std::vector<std::vector<double>> splits;

  bool has_gradient() const { return static_cast<bool>(gradient); }
  double operator()(std::span<const double> x) const { return eval(x); }

  /// Central finite differences with step h.
  void fd_gradient(std::span<const double> x, std::span<double> out, double h = 1e-5) const;
  /// Analytic gradient when present, finite differences otherwise.
  void gradient_or_fd(std::span<const double> x, std::span<double> out) const;
};

/// Function that is affine on every stratum of `partition`:
/// f(x) = <slopes[k], x> + offsets[k] on stratum k.
struct PiecewiseLinearSpec {
  HyperCubePartition partition;
  std::vector<std::vector<double>> slopes;   // one d-vector per stratum
  std::vector<double> offsets;               // one scalar per stratum

  void validate() const;
};

/// Conditional standard deviation of the affine piece on stratum k:
/// ||slopes[k]||_2 * w_k^{1/d} / (2*sqrt(3)).
double pl_sigma_k(const PiecewiseLinearSpec& spec, std::int64_t k);

/// Exact integral of the piecewise-affine function (sum of cell centers).
double pl_exact_integral(const PiecewiseLinearSpec& spec);

/// Wraps a spec as an Integrand with analytic gradient, exact integral,
/// gradient bound, and splits at the stratum boundaries.
Integrand pl_integrand(const PiecewiseLinearSpec& spec,
                       std::string name = "piecewise_linear");

/// Named test functions with analytic (or committed high-resolution)
/// reference integrals. Keys: const1d, linear1d, quadratic1d,
/// oscillator1d, sinsin2d.
const std::map<std::string, Integrand>& corpus();

/// Corpus member by name; throws ConfigError listing valid names.
const Integrand& corpus_function(const std::string& name);

}  // namespace stratmc
