#include "dtmgp/hier_chol.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dtmgp/error.hpp"

namespace dtmgp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void singular(const char* why, double a, double c, double b) {
  std::ostringstream os;
  os.precision(17);
  os << "local_coefficients: " << why << " for triple (" << a << ", " << c << ", " << b << ")";
  throw NumericalError(os.str());
}

}  // namespace

bool LocalCoefficients::has_left() const { return std::isfinite(x_left); }
bool LocalCoefficients::has_right() const { return std::isfinite(x_right); }

LocalCoefficients local_coefficients(const MarkovKernel1D& kernel, double a, double c, double b) {
  if (!std::isfinite(c) || !(a < c) || !(c < b) || a == kInf || b == -kInf) {
    singular("neighbours not strictly ordered", a, c, b);
  }
  const bool left = std::isfinite(a);
  const bool right = std::isfinite(b);
  const double pc = kernel.p(c);
  const double qc = kernel.q(c);

  // Fix c2 = 1, eliminate the neighbour coefficients from the two
  // annihilation conditions, then rescale to unit variance. With phi
  // vanishing at both neighbours the variance reduces to c2 * phi(c).
  double c1 = 0.0;
  double c3 = 0.0;
  if (left && right) {
    const double pa = kernel.p(a), qa = kernel.q(a);
    const double pb = kernel.p(b), qb = kernel.q(b);
    const double det = qa * pb - qb * pa;
    if (!(det > 0.0) || !std::isfinite(det)) singular("singular neighbour system", a, c, b);
    c1 = (qb * pc - qc * pb) / det;
    c3 = (pa * qc - qa * pc) / det;
  } else if (right) {
    const double pb = kernel.p(b);
    if (!(pb > 0.0)) singular("p vanishes at the right neighbour", a, c, b);
    c3 = -pc / pb;
  } else if (left) {
    const double qa = kernel.q(a);
    if (!(qa > 0.0)) singular("q vanishes at the left neighbour", a, c, b);
    c1 = -qc / qa;
  }
  double variance = pc * qc;
  if (left) variance += c1 * kernel.p(a) * qc;
  if (right) variance += c3 * pc * kernel.q(b);
  if (!(variance > 0.0) || !std::isfinite(variance)) singular("non-positive conditional variance", a, c, b);

  const double scale = 1.0 / std::sqrt(variance);
  return {c1 * scale, scale, c3 * scale, a, c, b};
}

std::pair<double, double> dyadic_neighbours(DyadicIndex index) {
  const std::int64_t full = std::int64_t{1} << index.level;
  const double left = index.offset - 1 == 0 ? -kInf : std::ldexp(static_cast<double>(index.offset - 1), -index.level);
  const double right = index.offset + 1 == full ? kInf : std::ldexp(static_cast<double>(index.offset + 1), -index.level);
  return {left, right};
}

DyadicCoefficientTable::DyadicCoefficientTable(const MarkovKernel1D& kernel, int max_level)
    : max_level_(max_level) {
  const auto points = sorted_dyadic_1d(max_level);
  table_.reserve(points.size());
  for (const auto& d : points) {
    const auto [left, right] = dyadic_neighbours(d);
    table_.push_back(local_coefficients(kernel, left, d.value(), right));
  }
}

// ---------------------------------------------------------------------------

SparseUpperTriangular SparseUpperTriangular::from_triplets(std::size_t order, std::vector<Triplet> triplets) {
  for (const auto& t : triplets) {
    if (t.row >= order || t.col >= order) throw StructuralError("triplet index outside the matrix");
    if (t.row > t.col) {
      throw StructuralError("entry (" + std::to_string(t.row) + ", " + std::to_string(t.col) +
                            ") lies below the diagonal");
    }
  }
  // Stable bucket pass by column, then a stable sort by row inside each column.
  std::vector<std::size_t> start(order + 1, 0);
  for (const auto& t : triplets) ++start[t.col + 1];
  for (std::size_t j = 0; j < order; ++j) start[j + 1] += start[j];
  std::vector<Triplet> sorted(triplets.size());
  {
    auto next = start;
    for (const auto& t : triplets) sorted[next[t.col]++] = t;
  }
  SparseUpperTriangular m;
  m.order_ = order;
  m.col_ptr_.assign(order + 1, 0);
  m.rows_.reserve(sorted.size());
  m.values_.reserve(sorted.size());
  for (std::size_t col = 0; col < order; ++col) {
    const auto first = sorted.begin() + static_cast<std::ptrdiff_t>(start[col]);
    const auto last = sorted.begin() + static_cast<std::ptrdiff_t>(start[col + 1]);
    std::stable_sort(first, last, [](const Triplet& x, const Triplet& y) { return x.row < y.row; });
    for (auto it = first; it != last;) {
      const std::size_t row = it->row;
      double sum = 0.0;
      for (; it != last && it->row == row; ++it) sum += it->value;
      m.rows_.push_back(row);
      m.values_.push_back(sum);
      ++m.col_ptr_[col + 1];
    }
  }
  for (std::size_t j = 0; j < order; ++j) m.col_ptr_[j + 1] += m.col_ptr_[j];
  return m;
}

std::span<const std::size_t> SparseUpperTriangular::column_rows(std::size_t col) const {
  return {rows_.data() + col_ptr_[col], col_ptr_[col + 1] - col_ptr_[col]};
}

std::span<const double> SparseUpperTriangular::column_values(std::size_t col) const {
  return {values_.data() + col_ptr_[col], col_ptr_[col + 1] - col_ptr_[col]};
}

double SparseUpperTriangular::coeff(std::size_t row, std::size_t col) const {
  const auto rows = column_rows(col);
  const auto it = std::lower_bound(rows.begin(), rows.end(), row);
  if (it == rows.end() || *it != row) return 0.0;
  return column_values(col)[static_cast<std::size_t>(it - rows.begin())];
}

std::vector<double> SparseUpperTriangular::multiply(std::span<const double> v) const {
  if (v.size() != order_) throw StructuralError("multiply: vector length does not match matrix order");
  std::vector<double> out(order_, 0.0);
  for (std::size_t j = 0; j < order_; ++j) {
    const auto rows = column_rows(j);
    const auto vals = column_values(j);
    for (std::size_t k = 0; k < rows.size(); ++k) out[rows[k]] += vals[k] * v[j];
  }
  return out;
}

std::vector<double> SparseUpperTriangular::transpose_multiply(std::span<const double> v) const {
  if (v.size() != order_) throw StructuralError("transpose_multiply: vector length does not match matrix order");
  std::vector<double> out(order_, 0.0);
  for (std::size_t j = 0; j < order_; ++j) {
    const auto rows = column_rows(j);
    const auto vals = column_values(j);
    double s = 0.0;
    for (std::size_t k = 0; k < rows.size(); ++k) s += vals[k] * v[rows[k]];
    out[j] = s;
  }
  return out;
}

Eigen::MatrixXd SparseUpperTriangular::to_dense() const {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(order_), static_cast<Eigen::Index>(order_));
  for (std::size_t j = 0; j < order_; ++j) {
    const auto rows = column_rows(j);
    const auto vals = column_values(j);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      d(static_cast<Eigen::Index>(rows[k]), static_cast<Eigen::Index>(j)) = vals[k];
    }
  }
  return d;
}

std::vector<Triplet> SparseUpperTriangular::triplets() const {
  std::vector<Triplet> out;
  out.reserve(nnz());
  for (std::size_t j = 0; j < order_; ++j) {
    const auto rows = column_rows(j);
    const auto vals = column_values(j);
    for (std::size_t k = 0; k < rows.size(); ++k) out.push_back({rows[k], j, vals[k]});
  }
  return out;
}

// ---------------------------------------------------------------------------

SparseUpperTriangular inverse_cholesky_1d(const MarkovKernel1D& kernel, int level) {
  const auto points = sorted_dyadic_1d(level);
  const DyadicCoefficientTable table(kernel, level);
  std::vector<Triplet> triplets;
  triplets.reserve(3 * points.size());
  for (std::size_t col = 0; col < points.size(); ++col) {
    const DyadicIndex d = points[col];
    const auto& c = table.at(d);
    // Neighbours are the dyadic points (offset -+ 1) / 2^level, reduced to
    // their own coarser level.
    if (c.has_left()) {
      std::int64_t off = d.offset - 1;
      int lev = d.level;
      while (off % 2 == 0) off /= 2, --lev;
      triplets.push_back({DyadicIndex{lev, off}.sorted_position(), col, c.c1});
    }
    triplets.push_back({col, col, c.c2});
    if (c.has_right()) {
      std::int64_t off = d.offset + 1;
      int lev = d.level;
      while (off % 2 == 0) off /= 2, --lev;
      triplets.push_back({DyadicIndex{lev, off}.sorted_position(), col, c.c3});
    }
  }
  return SparseUpperTriangular::from_triplets(points.size(), std::move(triplets));
}

SparseUpperTriangular inverse_cholesky_fg(const TensorMarkovKernel& kernel, std::span<const int> levels) {
  if (levels.size() != kernel.dimension()) {
    throw StructuralError("inverse_cholesky_fg: " + std::to_string(levels.size()) + " levels for a kernel of dimension " +
                          std::to_string(kernel.dimension()));
  }
  const std::size_t d = levels.size();
  std::vector<SparseUpperTriangular> factors;
  std::vector<std::size_t> extents(d), strides(d);
  factors.reserve(d);
  std::size_t order = 1;
  for (std::size_t j = 0; j < d; ++j) {
    strides[j] = order;
    extents[j] = (std::size_t{1} << levels[j]) - 1;
    order *= extents[j];
  }
  for (std::size_t j = 0; j < d; ++j) factors.push_back(inverse_cholesky_1d(kernel.factor(j), levels[j]));

  std::size_t nnz = 1;
  for (const auto& f : factors) nnz *= f.nnz();
  std::vector<Triplet> triplets;
  triplets.reserve(nnz);

  std::vector<std::size_t> col_idx(d, 0), entry(d, 0);
  for (std::size_t col = 0; col < order; ++col) {
    for (std::size_t j = 0; j < d; ++j) col_idx[j] = (col / strides[j]) % extents[j];
    // Odometer over the nonzeros of each factor column.
    std::fill(entry.begin(), entry.end(), 0);
    while (true) {
      std::size_t row = 0;
      double value = 1.0;
      for (std::size_t j = 0; j < d; ++j) {
        row += factors[j].column_rows(col_idx[j])[entry[j]] * strides[j];
        value *= factors[j].column_values(col_idx[j])[entry[j]];
      }
      triplets.push_back({row, col, value});
      std::size_t j = 0;
      for (; j < d; ++j) {
        if (++entry[j] < factors[j].column_rows(col_idx[j]).size()) break;
        entry[j] = 0;
      }
      if (j == d) break;
    }
  }
  return SparseUpperTriangular::from_triplets(order, std::move(triplets));
}

double combination_coefficient(int level, int dim, int level_sum) {
  const int gap = level + dim - 1 - level_sum;
  if (gap < 0 || gap > dim - 1) return 0.0;
  const double b = static_cast<double>(binomial(dim - 1, gap));
  return gap % 2 == 0 ? b : -b;
}

SparseUpperTriangular inverse_cholesky_sg(const TensorMarkovKernel& kernel, const SparseGridDesign& design) {
  if (design.dimension() != kernel.dimension()) {
    throw StructuralError("inverse_cholesky_sg: design dimension " + std::to_string(design.dimension()) +
                          " does not match kernel dimension " + std::to_string(kernel.dimension()));
  }
  const int l = design.level();
  const int d = static_cast<int>(design.dimension());
  std::vector<Triplet> triplets;
  // Shells ascending, level vectors in design order: the summation order is fixed.
  for (int shell = std::max(l, d); shell <= l + d - 1; ++shell) {
    const double weight = combination_coefficient(l, d, shell);
    for (const auto& lv : level_vectors_with_sum(d, shell)) {
      const FullGridDesign fg(lv);
      const auto local = inverse_cholesky_fg(kernel, lv);
      const auto to_sg = fg_to_sg_positions(fg, design);
      for (std::size_t col = 0; col < local.order(); ++col) {
        const auto rows = local.column_rows(col);
        const auto vals = local.column_values(col);
        for (std::size_t k = 0; k < rows.size(); ++k) {
          triplets.push_back({to_sg[rows[k]], to_sg[col], weight * vals[k]});
        }
      }
    }
  }
  return SparseUpperTriangular::from_triplets(design.size(), std::move(triplets));
}

SparseUpperTriangular inverse_cholesky_sg(const TensorMarkovKernel& kernel, int level) {
  return inverse_cholesky_sg(kernel, SparseGridDesign(level, static_cast<int>(kernel.dimension())));
}

Eigen::MatrixXd gram_matrix(const TensorMarkovKernel& kernel, std::span<const double> points) {
  const std::size_t d = kernel.dimension();
  const std::size_t n = points.size() / d;
  Eigen::MatrixXd k(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = kernel(points.subspan(i * d, d), points.subspan(j * d, d));
      k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      k(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }
  return k;
}

}  // namespace dtmgp
