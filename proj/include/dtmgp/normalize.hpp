#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dtmgp {

// Per-coordinate affine map x' = scale * x + shift on row-major arrays.
struct AffineMap {
  std::vector<double> scale;
  std::vector<double> shift;

  std::size_t dimension() const { return scale.size(); }
  void apply(std::span<double> rowmajor) const;
  void invert(std::span<double> rowmajor) const;

  static AffineMap identity(std::size_t dim);
  // Sends each coordinate's observed [min, max] onto [lo, hi]. A constant
  // coordinate is shifted to the midpoint.
  static AffineMap fit_minmax(std::span<const double> rowmajor, std::size_t dim, double lo = 0.05, double hi = 0.95);

  friend bool operator==(const AffineMap&, const AffineMap&) = default;
};

}  // namespace dtmgp
