#pragma once

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dtmgp {

// One-dimensional Markov kernel k(x, y) = p(min(x, y)) * q(max(x, y)),
// with p, q > 0 and p / q strictly increasing on (0, 1).
//
// The built-in families are evaluated on all of R through their defining
// formulas. Arguments at +-infinity give k = 0, which is the convention the
// factorization uses for missing neighbours.
class MarkovKernel1D {
 public:
  enum class Family { laplace, brownian_sheet, brownian_bridge, custom };

  using Fn = std::function<double(double)>;

  // exp(-theta |x - y|): p = e^{theta x}, q = e^{-theta x}.
  static MarkovKernel1D laplace(double theta);
  // 1 + theta * min(x, y): p = 1 + theta x, q = 1.
  static MarkovKernel1D brownian_sheet(double theta);
  // min(x, y) * (1 - max(x, y)): p = x, q = 1 - x. q vanishes at 1, so the
  // kernel is only valid on the open interval.
  static MarkovKernel1D brownian_bridge();
  static MarkovKernel1D custom(std::string name, Fn p, Fn q, Fn dp, Fn dq);

  // Parses "laplace[:theta]", "brownian[:theta]" or "bridge".
  static MarkovKernel1D parse(std::string_view spec);

  Family family() const { return family_; }
  double theta() const { return theta_; }
  std::string spec() const;

  double p(double x) const;
  double q(double x) const;
  double dp(double x) const;
  double dq(double x) const;

  double operator()(double x, double y) const;
  // d/dy k(a, y). At y == a the derivative from the left is returned.
  double derivative_second(double a, double y) const;

 private:
  Family family_ = Family::laplace;
  double theta_ = 1.0;
  std::string name_;
  Fn p_, q_, dp_, dq_;
};

double markov_eval(const MarkovKernel1D& kernel, double x, double y);

// Product of one-dimensional Markov kernels, one per input coordinate.
class TensorMarkovKernel {
 public:
  TensorMarkovKernel() = default;
  explicit TensorMarkovKernel(std::vector<MarkovKernel1D> factors);
  // The same factor in every one of `dim` coordinates.
  static TensorMarkovKernel isotropic(const MarkovKernel1D& factor, std::size_t dim);
  // "laplace:0.5" (broadcast to dim) or "laplace:1;brownian:2" (one per coordinate).
  static TensorMarkovKernel parse(std::string_view spec, std::size_t dim);

  std::size_t dimension() const { return factors_.size(); }
  const MarkovKernel1D& factor(std::size_t j) const { return factors_[j]; }
  const std::vector<MarkovKernel1D>& factors() const { return factors_; }
  // Compact spec string; parse(spec(), dimension()) reproduces the kernel.
  std::string spec() const;

  double operator()(std::span<const double> x, std::span<const double> y) const;

 private:
  std::vector<MarkovKernel1D> factors_;
};

double tmk_eval(const TensorMarkovKernel& kernel, std::span<const double> x, std::span<const double> y);

struct ValidationReport {
  bool positive = true;
  bool monotone = true;
  std::vector<double> nonpositive_at;   // abscissae where p or q <= 0
  std::vector<double> nonmonotone_at;   // abscissae where p/q fails to increase

  bool ok() const { return positive && monotone; }
};

// Checks positivity of p, q and strict growth of p/q on a uniform grid of the
// open unit interval.
ValidationReport validate_markov(const MarkovKernel1D& kernel, int grid_size = 1024);

}  // namespace dtmgp
