#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dtmgp/kernels.hpp"
#include "dtmgp/sparse_grid.hpp"

namespace dtmgp {

// Coefficients of the compactly supported combination
//   c1 k(., x_left) + c2 k(., x_center) + c3 k(., x_right)
// that vanishes at both neighbours and has unit variance. Infinite neighbours
// carry a zero coefficient.
struct LocalCoefficients {
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double x_left = 0.0;
  double x_center = 0.0;
  double x_right = 0.0;

  bool has_left() const;
  bool has_right() const;
};

LocalCoefficients local_coefficients(const MarkovKernel1D& kernel, double x_left, double x_center,
                                     double x_right);

// Left and right neighbours of a dyadic point among all coarser points; 0
// and 1 are reported as -inf and +inf.
std::pair<double, double> dyadic_neighbours(DyadicIndex index);

// Local coefficients of every dyadic point up to max_level, indexed by sorted
// position. Shared by the factor builders and the feature evaluators.
class DyadicCoefficientTable {
 public:
  DyadicCoefficientTable(const MarkovKernel1D& kernel, int max_level);

  int max_level() const { return max_level_; }
  const LocalCoefficients& at(DyadicIndex index) const { return table_[index.sorted_position()]; }
  const LocalCoefficients& at_position(std::size_t pos) const { return table_[pos]; }

 private:
  int max_level_;
  std::vector<LocalCoefficients> table_;
};

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

// Compressed-column upper-triangular matrix. Holds inverse Cholesky factors.
class SparseUpperTriangular {
 public:
  SparseUpperTriangular() = default;

  // Duplicate (row, col) pairs are summed in the order given.
  static SparseUpperTriangular from_triplets(std::size_t order, std::vector<Triplet> triplets);

  std::size_t order() const { return order_; }
  std::size_t nnz() const { return values_.size(); }

  std::span<const std::size_t> column_rows(std::size_t col) const;
  std::span<const double> column_values(std::size_t col) const;
  double coeff(std::size_t row, std::size_t col) const;
  double diagonal(std::size_t col) const { return coeff(col, col); }

  // this * v
  std::vector<double> multiply(std::span<const double> v) const;
  // this^T * v
  std::vector<double> transpose_multiply(std::span<const double> v) const;

  Eigen::MatrixXd to_dense() const;
  std::vector<Triplet> triplets() const;

  friend bool operator==(const SparseUpperTriangular&, const SparseUpperTriangular&) = default;

 private:
  std::size_t order_ = 0;
  std::vector<std::size_t> col_ptr_{0};
  std::vector<std::size_t> rows_;
  std::vector<double> values_;
};

// Inverse Cholesky factor of the Gram matrix on the sorted dyadic set of `level`.
SparseUpperTriangular inverse_cholesky_1d(const MarkovKernel1D& kernel, int level);

// Kronecker product of the one-dimensional factors, in full-grid order.
SparseUpperTriangular inverse_cholesky_fg(const TensorMarkovKernel& kernel, std::span<const int> levels);

// Signed binomial combination of the full-grid factors, in sparse-grid order.
SparseUpperTriangular inverse_cholesky_sg(const TensorMarkovKernel& kernel, const SparseGridDesign& design);
SparseUpperTriangular inverse_cholesky_sg(const TensorMarkovKernel& kernel, int level);

// Combination-technique weight (-1)^(l+d-1-|lv|) * C(d-1, l+d-1-|lv|).
double combination_coefficient(int level, int dim, int level_sum);

// Dense Gram matrix of the kernel over a row-major point array.
Eigen::MatrixXd gram_matrix(const TensorMarkovKernel& kernel, std::span<const double> points);

}  // namespace dtmgp
