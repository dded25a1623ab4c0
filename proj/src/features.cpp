#include "dtmgp/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dtmgp/error.hpp"

namespace dtmgp {
namespace {

constexpr double kDenormalGuard = 1e-300;
constexpr std::size_t kDenseOracleLimit = 10000;

}  // namespace

std::vector<double> SparseFeatureVector::dense() const {
  std::vector<double> out(length, 0.0);
  for (std::size_t k = 0; k < index.size(); ++k) out[index[k]] = value[k];
  return out;
}

double SparseFeatureVector::dot(std::span<const double> dense_weights) const {
  if (dense_weights.size() != length) throw StructuralError("feature dot: length mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < index.size(); ++k) s += value[k] * dense_weights[index[k]];
  return s;
}

double SparseFeatureVector::squared_norm() const {
  double s = 0.0;
  for (double v : value) s += v * v;
  return s;
}

bool SupportBox::contains_strictly(std::span<const double> x) const {
  if (x.size() != lower.size()) throw StructuralError("support box: dimension mismatch");
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (!(x[j] > lower[j] && x[j] < upper[j])) return false;
  }
  return true;
}

SupportBox support_box(const MultiIndex& center) {
  SupportBox box;
  for (std::size_t j = 0; j < center.dimension(); ++j) {
    const double h = std::ldexp(1.0, -center.levels[j]);
    const double c = center.component(j).value();
    box.lower.push_back(c - h);
    box.upper.push_back(c + h);
  }
  return box;
}

// ---------------------------------------------------------------------------

FeatureMap::FeatureMap(TensorMarkovKernel kernel, int level)
    : kernel_(std::move(kernel)), level_(level), design_(level, static_cast<int>(kernel_.dimension())) {
  const int d = static_cast<int>(kernel_.dimension());
  tables_.reserve(kernel_.dimension());
  for (const auto& f : kernel_.factors()) tables_.emplace_back(f, level);
  for (int shell = std::max(level, d); shell <= level + d - 1; ++shell) {
    const double w = combination_coefficient(level, d, shell);
    for (auto& lv : level_vectors_with_sum(d, shell)) terms_.push_back({std::move(lv), w});
  }
}

void FeatureMap::active_1d(std::size_t dim, double x, bool with_slope, std::vector<Active>& out) const {
  out.clear();
  if (!(x > 0.0 && x < 1.0)) return;
  const auto& k = kernel_.factor(dim);
  const auto& table = tables_[dim];
  for (int ell = 1; ell <= level_; ++ell) {
    const double t = std::ldexp(x, ell - 1);
    const double cell = std::floor(t);
    // On a coarser grid point every level-ell feature vanishes.
    if (t == cell) continue;
    const DyadicIndex idx{ell, 2 * static_cast<std::int64_t>(cell) + 1};
    const auto& c = table.at(idx);
    double v = c.c2 * k(c.x_center, x);
    if (c.has_left()) v += c.c1 * k(c.x_left, x);
    if (c.has_right()) v += c.c3 * k(c.x_right, x);
    double s = 0.0;
    if (with_slope) {
      s = c.c2 * k.derivative_second(c.x_center, x);
      if (c.has_left()) s += c.c1 * k.derivative_second(c.x_left, x);
      if (c.has_right()) s += c.c3 * k.derivative_second(c.x_right, x);
    }
    out.push_back({ell, idx.offset, v, s});
  }
}

SparseFeatureJacobian FeatureMap::assemble(std::span<const double> x, bool with_gradient) const {
  const std::size_t d = dimension();
  if (x.size() != d) {
    throw StructuralError("features: input of size " + std::to_string(x.size()) + " for a " + std::to_string(d) +
                          "-dimensional kernel");
  }
  SparseFeatureJacobian out;
  out.dim = d;
  out.features.length = size();

  thread_local std::vector<std::vector<Active>> active;
  active.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    active_1d(j, x[j], with_gradient, active[j]);
    if (active[j].empty()) return out;
  }

  // Contributions in term order; merged per ordinal below.
  thread_local std::vector<std::size_t> ord;
  thread_local std::vector<double> val;
  thread_local std::vector<double> grad;
  ord.clear();
  val.clear();
  grad.clear();

  std::vector<std::size_t> prefix(d), pick(d);
  std::vector<int> lv(d);
  std::vector<std::int64_t> off(d);
  for (const auto& term : terms_) {
    bool empty = false;
    for (std::size_t j = 0; j < d; ++j) {
      std::size_t n = 0;
      while (n < active[j].size() && active[j][n].level <= term.levels[j]) ++n;
      prefix[j] = n;
      empty = empty || n == 0;
    }
    if (empty) continue;
    std::fill(pick.begin(), pick.end(), 0);
    while (true) {
      double prod = term.weight;
      for (std::size_t j = 0; j < d; ++j) {
        const Active& a = active[j][pick[j]];
        lv[j] = a.level;
        off[j] = a.offset;
        prod *= a.value;
      }
      const auto pos = design_.position_of(lv, off);
      if (!pos) throw StructuralError("features: combination term outside the sparse grid");
      ord.push_back(*pos);
      val.push_back(prod);
      if (with_gradient) {
        for (std::size_t j = 0; j < d; ++j) {
          double g = term.weight * active[j][pick[j]].slope;
          for (std::size_t i = 0; i < d; ++i) {
            if (i != j) g *= active[i][pick[i]].value;
          }
          grad.push_back(g);
        }
      }
      std::size_t j = d;
      while (j-- > 0) {
        if (++pick[j] < prefix[j]) break;
        pick[j] = 0;
      }
      if (j == static_cast<std::size_t>(-1)) break;
    }
  }

  std::vector<std::size_t> order(ord.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ord[a] < ord[b]; });

  auto& fv = out.features;
  std::vector<double> gsum(d);
  for (std::size_t k = 0; k < order.size();) {
    const std::size_t o = ord[order[k]];
    double v = 0.0;
    std::fill(gsum.begin(), gsum.end(), 0.0);
    for (; k < order.size() && ord[order[k]] == o; ++k) {
      v += val[order[k]];
      if (with_gradient) {
        for (std::size_t j = 0; j < d; ++j) gsum[j] += grad[order[k] * d + j];
      }
    }
    if (std::abs(v) < kDenormalGuard) continue;
    fv.index.push_back(o);
    fv.value.push_back(v);
    if (with_gradient) out.gradient.insert(out.gradient.end(), gsum.begin(), gsum.end());
  }
  return out;
}

SparseFeatureVector FeatureMap::evaluate(std::span<const double> x) const {
  return assemble(x, false).features;
}

SparseFeatureJacobian FeatureMap::evaluate_with_gradient(std::span<const double> x) const {
  return assemble(x, true);
}

// ---------------------------------------------------------------------------

SparseFeatureVector features_1d(const MarkovKernel1D& kernel, int level, double x) {
  const FeatureMap map(TensorMarkovKernel({kernel}), level);
  return map.evaluate(std::span<const double>(&x, 1));
}

SparseFeatureVector features_sg(const TensorMarkovKernel& kernel, int level, std::span<const double> x) {
  return FeatureMap(kernel, level).evaluate(x);
}

SparseFeatureJacobian feature_gradient(const TensorMarkovKernel& kernel, int level, std::span<const double> x) {
  return FeatureMap(kernel, level).evaluate_with_gradient(x);
}

std::vector<double> features_dense_oracle(const TensorMarkovKernel& kernel, const SparseGridDesign& design,
                                          const SparseUpperTriangular& inv_chol, std::span<const double> x) {
  if (design.size() > kDenseOracleLimit) {
    throw ConfigError("features_dense_oracle: " + std::to_string(design.size()) + " features exceed the dense limit");
  }
  if (x.size() != kernel.dimension()) throw StructuralError("features_dense_oracle: dimension mismatch");
  const std::vector<double> pts = design.points();
  const std::size_t d = design.dimension();
  std::vector<double> kvec(design.size());
  for (std::size_t i = 0; i < design.size(); ++i) kvec[i] = kernel(x, std::span<const double>(pts).subspan(i * d, d));
  return inv_chol.transpose_multiply(kvec);
}

std::vector<double> features_dense_oracle(const TensorMarkovKernel& kernel, int level, std::span<const double> x) {
  const SparseGridDesign design(level, static_cast<int>(kernel.dimension()));
  if (design.size() > kDenseOracleLimit) {
    throw ConfigError("features_dense_oracle: " + std::to_string(design.size()) + " features exceed the dense limit");
  }
  return features_dense_oracle(kernel, design, inverse_cholesky_sg(kernel, design), x);
}

}  // namespace dtmgp
