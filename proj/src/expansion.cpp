#include "dtmgp/expansion.hpp"

#include <algorithm>
#include <sstream>

#include "dtmgp/error.hpp"

namespace dtmgp {
namespace {

constexpr double kGapTolerance = 1e-10;

}  // namespace

HierarchicalBasis::HierarchicalBasis(TensorMarkovKernel kernel, int level, double mean)
    : features_(std::make_shared<FeatureMap>(std::move(kernel), level)), mean_(mean) {
  inv_chol_ = inverse_cholesky_sg(features_->kernel(), features_->design());
}

ExpansionCoefficients sample_prior_coefficients(std::size_t m, Rng& rng) {
  return {standard_normals(m, rng)};
}

ExpansionCoefficients coefficients_from_samples(const HierarchicalBasis& basis, std::span<const double> g_values) {
  if (g_values.size() != basis.size()) {
    throw StructuralError("coefficients_from_samples: expected " + std::to_string(basis.size()) + " values, got " +
                          std::to_string(g_values.size()));
  }
  return {basis.inv_chol().transpose_multiply(g_values)};
}

double evaluate_expansion(const HierarchicalBasis& basis, const ExpansionCoefficients& coeffs,
                          std::span<const double> x) {
  if (coeffs.z.size() != basis.size()) throw StructuralError("evaluate_expansion: coefficient length mismatch");
  return basis.mean() + basis.features().evaluate(x).dot(coeffs.z);
}

double variance_gap(const HierarchicalBasis& basis, std::span<const double> x) {
  const double gap = basis.kernel()(x, x) - basis.features().evaluate(x).squared_norm();
  if (gap < -kGapTolerance) {
    std::ostringstream os;
    os.precision(17);
    os << "variance_gap: negative gap " << gap << " indicates a broken factorization";
    throw NumericalError(os.str());
  }
  return std::max(gap, 0.0);
}

std::vector<double> midpoint_lattice(std::size_t n_per_axis, std::size_t dim) {
  std::size_t count = 1;
  for (std::size_t j = 0; j < dim; ++j) count *= n_per_axis;
  std::vector<double> out(count * dim);
  for (std::size_t k = 0; k < count; ++k) {
    std::size_t rem = k;
    for (std::size_t j = dim; j-- > 0;) {
      out[k * dim + j] = (static_cast<double>(rem % n_per_axis) + 0.5) / static_cast<double>(n_per_axis);
      rem /= n_per_axis;
    }
  }
  return out;
}

double sup_variance_gap(const HierarchicalBasis& basis, std::span<const double> points) {
  const std::size_t d = basis.kernel().dimension();
  double sup = 0.0;
  for (std::size_t k = 0; k + d <= points.size(); k += d) sup = std::max(sup, variance_gap(basis, points.subspan(k, d)));
  return sup;
}

DenseGaussianSampler::DenseGaussianSampler(const TensorMarkovKernel& kernel, std::vector<double> points,
                                           double jitter) {
  const std::size_t n = points.size() / kernel.dimension();
  if (points.size() % kernel.dimension() != 0) throw StructuralError("sampler: point array not a multiple of the dimension");
  if (n > kMaxPoints) {
    throw ConfigError("sampler: " + std::to_string(n) + " points exceed the dense limit of " +
                      std::to_string(kMaxPoints));
  }
  Eigen::MatrixXd k = gram_matrix(kernel, points);
  k.diagonal().array() += jitter;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) throw NumericalError("sampler: Cholesky factorization failed after jitter");
  chol_ = llt.matrixL();
}

std::vector<double> DenseGaussianSampler::sample(Rng& rng) const {
  const auto z = standard_normals(size(), rng);
  const Eigen::VectorXd v = chol_.triangularView<Eigen::Lower>() * Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
  return {v.data(), v.data() + v.size()};
}

}  // namespace dtmgp
