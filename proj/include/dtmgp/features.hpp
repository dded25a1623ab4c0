#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dtmgp/hier_chol.hpp"
#include "dtmgp/kernels.hpp"
#include "dtmgp/sparse_grid.hpp"

namespace dtmgp {

struct SparseFeatureVector {
  std::size_t length = 0;
  std::vector<std::size_t> index;  // strictly increasing
  std::vector<double> value;

  std::size_t nnz() const { return index.size(); }
  std::vector<double> dense() const;
  double dot(std::span<const double> dense_weights) const;
  double squared_norm() const;
};

// Feature values plus d(phi_k)/d(x_j) for each stored entry k.
struct SparseFeatureJacobian {
  SparseFeatureVector features;
  std::size_t dim = 0;
  std::vector<double> gradient;  // nnz x dim, row-major

  std::span<const double> gradient_row(std::size_t k) const { return {gradient.data() + k * dim, dim}; }
};

// Closed box outside whose interior a hierarchical feature vanishes.
struct SupportBox {
  std::vector<double> lower;
  std::vector<double> upper;

  bool contains_strictly(std::span<const double> x) const;
};

SupportBox support_box(const MultiIndex& center);

// Sparse evaluator of phi(x) = R^{-T} k(X, x) on a level-l sparse grid. The
// per-coordinate pass keeps one active feature per level, the per-coordinate
// vectors are Kronecker-combined per full grid and summed with the signed
// binomial weights. Inputs outside the open unit cube give phi = 0.
class FeatureMap {
 public:
  FeatureMap(TensorMarkovKernel kernel, int level);

  const TensorMarkovKernel& kernel() const { return kernel_; }
  const SparseGridDesign& design() const { return design_; }
  int level() const { return level_; }
  std::size_t dimension() const { return kernel_.dimension(); }
  std::size_t size() const { return design_.size(); }

  SparseFeatureVector evaluate(std::span<const double> x) const;
  SparseFeatureJacobian evaluate_with_gradient(std::span<const double> x) const;

 private:
  struct Active {
    int level;
    std::int64_t offset;
    double value;
    double slope;
  };
  struct Term {
    std::vector<int> levels;
    double weight;
  };

  void active_1d(std::size_t dim, double x, bool with_slope, std::vector<Active>& out) const;
  SparseFeatureJacobian assemble(std::span<const double> x, bool with_gradient) const;

  TensorMarkovKernel kernel_;
  int level_;
  SparseGridDesign design_;
  std::vector<DyadicCoefficientTable> tables_;
  std::vector<Term> terms_;
};

SparseFeatureVector features_1d(const MarkovKernel1D& kernel, int level, double x);
SparseFeatureVector features_sg(const TensorMarkovKernel& kernel, int level, std::span<const double> x);
SparseFeatureJacobian feature_gradient(const TensorMarkovKernel& kernel, int level, std::span<const double> x);

// Reference k(x, X) R^{-1} with a dense kernel vector. Limited to 10^4 features.
std::vector<double> features_dense_oracle(const TensorMarkovKernel& kernel, int level, std::span<const double> x);
std::vector<double> features_dense_oracle(const TensorMarkovKernel& kernel, const SparseGridDesign& design,
                                          const SparseUpperTriangular& inv_chol, std::span<const double> x);

}  // namespace dtmgp
