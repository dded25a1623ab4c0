#pragma once

#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dtmgp/features.hpp"
#include "dtmgp/hier_chol.hpp"
#include "dtmgp/rng.hpp"

namespace dtmgp {

// Single-layer hierarchical expansion mu + phi(x)^T z of a tensor Markov GP.
class HierarchicalBasis {
 public:
  HierarchicalBasis(TensorMarkovKernel kernel, int level, double mean = 0.0);

  const FeatureMap& features() const { return *features_; }
  const SparseGridDesign& design() const { return features_->design(); }
  const TensorMarkovKernel& kernel() const { return features_->kernel(); }
  const SparseUpperTriangular& inv_chol() const { return inv_chol_; }
  double mean() const { return mean_; }
  int level() const { return features_->level(); }
  std::size_t size() const { return features_->size(); }

 private:
  std::shared_ptr<const FeatureMap> features_;
  SparseUpperTriangular inv_chol_;
  double mean_;
};

struct ExpansionCoefficients {
  std::vector<double> z;
};

ExpansionCoefficients sample_prior_coefficients(std::size_t m, Rng& rng);

// z = R^{-T} g for function values g at the sparse-grid points.
ExpansionCoefficients coefficients_from_samples(const HierarchicalBasis& basis, std::span<const double> g_values);

double evaluate_expansion(const HierarchicalBasis& basis, const ExpansionCoefficients& coeffs,
                          std::span<const double> x);

// k(x, x) - |phi(x)|^2, the posterior variance given the grid values.
double variance_gap(const HierarchicalBasis& basis, std::span<const double> x);

// Deterministic evaluation lattice: n midpoints per axis, row-major, last
// coordinate fastest.
std::vector<double> midpoint_lattice(std::size_t n_per_axis, std::size_t dim);

// Largest variance gap over a point array.
double sup_variance_gap(const HierarchicalBasis& basis, std::span<const double> points);

// Exact joint Gaussian draws over a fixed point set, via a dense Cholesky
// factor of the Gram matrix with a small diagonal jitter.
class DenseGaussianSampler {
 public:
  static constexpr std::size_t kMaxPoints = 4000;

  DenseGaussianSampler(const TensorMarkovKernel& kernel, std::vector<double> points, double jitter = 1e-10);

  std::size_t size() const { return static_cast<std::size_t>(chol_.rows()); }
  std::vector<double> sample(Rng& rng) const;
  const Eigen::MatrixXd& lower_factor() const { return chol_; }

 private:
  Eigen::MatrixXd chol_;
};

}  // namespace dtmgp
