#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace stratmc {

/// base^exp, or nullopt if it overflows int64.
std::optional<std::int64_t> checked_pow(std::int64_t base, int exp);

/// The integer r with r^exp == value, if one exists.
std::optional<std::int64_t> exact_root(std::int64_t value, int exp);

/// Largest r >= 0 with r^exp <= value. Exact integer search; never trusts
/// a floating-point root (pow(27, 1./3) style misrounds).
std::int64_t floor_root(std::int64_t value, int exp);

/// Closed axis-aligned hyper-cube. Membership follows the lower-index tie
/// rule: a face shared by two cells belongs to the cell with the smaller
/// index, so cells are open from below except against coordinate 0.
struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  int dim() const { return static_cast<int>(lower.size()); }
  double side() const { return upper[0] - lower[0]; }
  double measure() const;
  std::vector<double> center() const;
  bool contains(std::span<const double> x) const;
};

/// Partition of [0,1]^d into l^d equal hyper-cubes, indexed row-major
/// over lattice coordinates (last axis fastest).
class HyperCubePartition {
 public:
  /// Builds the partition with `strata` cells; throws NotPerfectPower if
  /// strata is not an exact d-th power.
  static HyperCubePartition make(int dim, std::int64_t strata);

  int dim() const { return dim_; }
  std::int64_t cells_per_axis() const { return cells_per_axis_; }
  std::int64_t strata() const { return strata_; }
  double stratum_measure() const { return 1.0 / static_cast<double>(strata_); }

  Box stratum_box(std::int64_t k) const;
  /// Index of the stratum containing x (lower-index tie rule).
  std::int64_t locate(std::span<const double> x) const;

 private:
  HyperCubePartition(int dim, std::int64_t cells_per_axis, std::int64_t strata)
      : dim_(dim), cells_per_axis_(cells_per_axis), strata_(strata) {}

  int dim_;
  std::int64_t cells_per_axis_;
  std::int64_t strata_;
};

/// Second layer: each stratum k split into counts[k] equal hyper-cubes,
/// counts[k] an exact d-th power. Sub-cells are indexed row-major within
/// their stratum.
class SubStratification {
 public:
  SubStratification(HyperCubePartition parent, std::vector<std::int64_t> counts);
  static SubStratification uniform(HyperCubePartition parent, std::int64_t count);

  const HyperCubePartition& parent() const { return parent_; }
  std::span<const std::int64_t> counts() const { return counts_; }
  std::int64_t count(std::int64_t k) const;        // S_k
  std::int64_t root(std::int64_t k) const;         // S_k^{1/d}
  double substratum_measure(std::int64_t k) const; // w_k / S_k

  Box substratum_box(std::int64_t k, std::int64_t i) const;
  /// (stratum, sub-cell) containing x.
  std::pair<std::int64_t, std::int64_t> locate(std::span<const double> x) const;

 private:
  HyperCubePartition parent_;
  std::vector<std::int64_t> counts_;
  std::vector<std::int64_t> roots_;
};

namespace detail {
/// Cell index of x on a uniform axis grid with the lower-index tie rule,
/// consistent with boxes whose edges are computed as j/cells.
std::int64_t locate_axis(double x, std::int64_t cells);
}  // namespace detail

}  // namespace stratmc
