#include "stratmc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stratmc/errors.hpp"

namespace stratmc {

std::optional<std::int64_t> checked_pow(std::int64_t base, int exp) {
  if (base < 0 || exp < 0) return std::nullopt;
  std::int64_t acc = 1;
  for (int i = 0; i < exp; ++i) {
    if (__builtin_mul_overflow(acc, base, &acc)) return std::nullopt;
  }
  return acc;
}

std::int64_t floor_root(std::int64_t value, int exp) {
  if (value <= 0) return 0;
  if (exp <= 1) return value;
  auto exceeds = [&](std::int64_t r) {
    auto p = checked_pow(r, exp);
    return !p || *p > value;
  };
  auto r = static_cast<std::int64_t>(
      std::llround(std::pow(static_cast<double>(value), 1.0 / exp)));
  r = std::max<std::int64_t>(r, 1);
  while (r > 1 && exceeds(r)) --r;
  while (!exceeds(r + 1)) ++r;
  return r;
}

std::optional<std::int64_t> exact_root(std::int64_t value, int exp) {
  if (value < 1 || exp < 1) return std::nullopt;
  const std::int64_t r = floor_root(value, exp);
  if (checked_pow(r, exp) == std::optional<std::int64_t>(value)) return r;
  return std::nullopt;
}

double Box::measure() const {
  double m = 1.0;
  for (int j = 0; j < dim(); ++j) m *= upper[j] - lower[j];
  return m;
}

std::vector<double> Box::center() const {
  std::vector<double> c(lower.size());
  for (std::size_t j = 0; j < lower.size(); ++j) c[j] = 0.5 * (lower[j] + upper[j]);
  return c;
}

bool Box::contains(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim()) return false;
  for (int j = 0; j < dim(); ++j) {
    if (x[j] > upper[j] || x[j] < lower[j]) return false;
    if (x[j] == lower[j] && lower[j] > 0.0) return false;  // face belongs to the lower cell
  }
  return true;
}

namespace detail {

std::int64_t locate_axis(double x, std::int64_t cells) {
  auto idx = static_cast<std::int64_t>(std::ceil(x * static_cast<double>(cells))) - 1;
  idx = std::clamp<std::int64_t>(idx, 0, cells - 1);
  // Repair against the exact edge doubles so location always agrees with
  // Box::contains, even when x*cells rounds across a boundary.
  if (idx > 0 && x <= static_cast<double>(idx) / static_cast<double>(cells)) {
    --idx;
  } else if (idx < cells - 1 &&
             x > static_cast<double>(idx + 1) / static_cast<double>(cells)) {
    ++idx;
  }
  return idx;
}

// Row-major lattice decode, last axis fastest.
inline void decode(std::int64_t index, std::int64_t cells, int dim,
                   std::span<std::int64_t> coords) {
  for (int j = dim - 1; j >= 0; --j) {
    coords[j] = index % cells;
    index /= cells;
  }
}

}  // namespace detail

HyperCubePartition HyperCubePartition::make(int dim, std::int64_t strata) {
  if (dim < 1) throw ConfigError("partition dimension must be >= 1");
  if (strata < 1) throw ConfigError("stratum count must be >= 1");
  auto root = exact_root(strata, dim);
  if (!root) {
    throw NotPerfectPower("stratum count " + std::to_string(strata) +
                          " is not an integer to the power " + std::to_string(dim));
  }
  return HyperCubePartition(dim, *root, strata);
}

Box HyperCubePartition::stratum_box(std::int64_t k) const {
  if (k < 0 || k >= strata_) throw IndexOutOfRange("stratum index " + std::to_string(k));
  Box box;
  box.lower.resize(dim_);
  box.upper.resize(dim_);
  std::int64_t rest = k;
  for (int j = dim_ - 1; j >= 0; --j) {
    const std::int64_t c = rest % cells_per_axis_;
    rest /= cells_per_axis_;
    box.lower[j] = static_cast<double>(c) / static_cast<double>(cells_per_axis_);
    box.upper[j] = static_cast<double>(c + 1) / static_cast<double>(cells_per_axis_);
  }
  return box;
}

std::int64_t HyperCubePartition::locate(std::span<const double> x) const {
  std::int64_t k = 0;
  for (int j = 0; j < dim_; ++j) {
    k = k * cells_per_axis_ + detail::locate_axis(x[j], cells_per_axis_);
  }
  return k;
}

SubStratification::SubStratification(HyperCubePartition parent,
                                     std::vector<std::int64_t> counts)
    : parent_(parent), counts_(std::move(counts)) {
  if (static_cast<std::int64_t>(counts_.size()) != parent_.strata()) {
    throw ShapeMismatch("need one sub-stratum count per stratum");
  }
  roots_.reserve(counts_.size());
  for (std::int64_t s : counts_) {
    auto r = exact_root(s, parent_.dim());
    if (!r) {
      throw NotPerfectPower("sub-stratum count " + std::to_string(s) +
                            " is not an integer to the power " +
                            std::to_string(parent_.dim()));
    }
    roots_.push_back(*r);
  }
}

SubStratification SubStratification::uniform(HyperCubePartition parent,
                                             std::int64_t count) {
  std::vector<std::int64_t> counts(parent.strata(), count);
  return SubStratification(parent, std::move(counts));
}

std::int64_t SubStratification::count(std::int64_t k) const {
  if (k < 0 || k >= parent_.strata()) {
    throw IndexOutOfRange("stratum index " + std::to_string(k));
  }
  return counts_[static_cast<std::size_t>(k)];
}

std::int64_t SubStratification::root(std::int64_t k) const {
  count(k);  // bounds check
  return roots_[static_cast<std::size_t>(k)];
}

double SubStratification::substratum_measure(std::int64_t k) const {
  return parent_.stratum_measure() / static_cast<double>(count(k));
}

Box SubStratification::substratum_box(std::int64_t k, std::int64_t i) const {
  const std::int64_t sk = count(k);
  if (i < 0 || i >= sk) throw IndexOutOfRange("sub-stratum index " + std::to_string(i));
  const int d = parent_.dim();
  const std::int64_t l = parent_.cells_per_axis();
  const std::int64_t m = roots_[static_cast<std::size_t>(k)];
  // Both layers resolve onto the global l*m lattice; edges computed as a
  // single integer division so adjacent boxes share bit-identical faces.
  const auto lattice = static_cast<double>(l * m);
  Box box;
  box.lower.resize(d);
  box.upper.resize(d);
  std::int64_t krest = k;
  std::int64_t irest = i;
  for (int j = d - 1; j >= 0; --j) {
    const std::int64_t sc = krest % l;
    krest /= l;
    const std::int64_t cc = irest % m;
    irest /= m;
    const std::int64_t g = sc * m + cc;
    box.lower[j] = static_cast<double>(g) / lattice;
    box.upper[j] = static_cast<double>(g + 1) / lattice;
  }
  return box;
}

std::pair<std::int64_t, std::int64_t> SubStratification::locate(
    std::span<const double> x) const {
  const std::int64_t k = parent_.locate(x);
  const int d = parent_.dim();
  const std::int64_t l = parent_.cells_per_axis();
  const std::int64_t m = roots_[static_cast<std::size_t>(k)];
  std::vector<std::int64_t> sc(static_cast<std::size_t>(d));
  detail::decode(k, l, d, sc);
  std::int64_t i = 0;
  for (int j = 0; j < d; ++j) {
    const std::int64_t g = detail::locate_axis(x[j], l * m);
    const std::int64_t cc = std::clamp<std::int64_t>(g - sc[static_cast<std::size_t>(j)] * m,
                                                     0, m - 1);
    i = i * m + cc;
  }
  return {k, i};
}

}  // namespace stratmc
