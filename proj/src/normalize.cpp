#include "dtmgp/normalize.hpp"

#include <algorithm>
#include <limits>

#include "dtmgp/error.hpp"

namespace dtmgp {

void AffineMap::apply(std::span<double> rowmajor) const {
  const std::size_t d = dimension();
  if (d == 0 || rowmajor.size() % d != 0) throw StructuralError("affine map: array is not a multiple of the dimension");
  for (std::size_t i = 0; i < rowmajor.size(); ++i) rowmajor[i] = scale[i % d] * rowmajor[i] + shift[i % d];
}

void AffineMap::invert(std::span<double> rowmajor) const {
  const std::size_t d = dimension();
  if (d == 0 || rowmajor.size() % d != 0) throw StructuralError("affine map: array is not a multiple of the dimension");
  for (std::size_t i = 0; i < rowmajor.size(); ++i) rowmajor[i] = (rowmajor[i] - shift[i % d]) / scale[i % d];
}

AffineMap AffineMap::identity(std::size_t dim) { return {std::vector<double>(dim, 1.0), std::vector<double>(dim, 0.0)}; }

AffineMap AffineMap::fit_minmax(std::span<const double> rowmajor, std::size_t dim, double lo, double hi) {
  if (dim == 0 || rowmajor.empty() || rowmajor.size() % dim != 0) {
    throw StructuralError("fit_minmax: empty array or wrong dimension");
  }
  if (!(lo < hi)) throw ConfigError("fit_minmax: target interval is empty");
  AffineMap map;
  for (std::size_t j = 0; j < dim; ++j) {
    double mn = std::numeric_limits<double>::infinity();
    double mx = -mn;
    for (std::size_t i = j; i < rowmajor.size(); i += dim) {
      mn = std::min(mn, rowmajor[i]);
      mx = std::max(mx, rowmajor[i]);
    }
    if (mx > mn) {
      const double s = (hi - lo) / (mx - mn);
      map.scale.push_back(s);
      map.shift.push_back(lo - s * mn);
    } else {
      map.scale.push_back(1.0);
      map.shift.push_back(0.5 * (lo + hi) - mn);
    }
  }
  return map;
}

}  // namespace dtmgp
