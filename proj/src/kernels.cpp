#include "dtmgp/kernels.hpp"

#include <charconv>
#include <limits>
#include <cmath>
#include <sstream>

#include "dtmgp/error.hpp"

namespace dtmgp {
namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double parse_theta(std::string_view text, std::string_view whole) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v) || v <= 0.0) {
    throw ConfigError("invalid kernel hyperparameter in '" + std::string(whole) + "'");
  }
  return v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

MarkovKernel1D MarkovKernel1D::laplace(double theta) {
  if (!(theta > 0.0) || !std::isfinite(theta)) throw ConfigError("laplace: theta must be positive");
  MarkovKernel1D k;
  k.family_ = Family::laplace;
  k.theta_ = theta;
  k.name_ = "laplace";
  return k;
}

MarkovKernel1D MarkovKernel1D::brownian_sheet(double theta) {
  if (!(theta > 0.0) || !std::isfinite(theta)) throw ConfigError("brownian: theta must be positive");
  MarkovKernel1D k;
  k.family_ = Family::brownian_sheet;
  k.theta_ = theta;
  k.name_ = "brownian";
  return k;
}

MarkovKernel1D MarkovKernel1D::brownian_bridge() {
  MarkovKernel1D k;
  k.family_ = Family::brownian_bridge;
  k.theta_ = 1.0;
  k.name_ = "bridge";
  return k;
}

MarkovKernel1D MarkovKernel1D::custom(std::string name, Fn p, Fn q, Fn dp, Fn dq) {
  MarkovKernel1D k;
  k.family_ = Family::custom;
  k.name_ = std::move(name);
  k.p_ = std::move(p);
  k.q_ = std::move(q);
  k.dp_ = std::move(dp);
  k.dq_ = std::move(dq);
  return k;
}

MarkovKernel1D MarkovKernel1D::parse(std::string_view spec) {
  const std::string_view s = trim(spec);
  const auto colon = s.find(':');
  const std::string_view name = trim(s.substr(0, colon));
  const bool has_arg = colon != std::string_view::npos;
  const std::string_view arg = has_arg ? trim(s.substr(colon + 1)) : std::string_view{};
  if (name == "laplace") return laplace(has_arg ? parse_theta(arg, s) : 1.0);
  if (name == "brownian") return brownian_sheet(has_arg ? parse_theta(arg, s) : 1.0);
  if (name == "bridge") {
    if (has_arg) throw ConfigError("bridge kernel takes no hyperparameter: '" + std::string(s) + "'");
    return brownian_bridge();
  }
  throw ConfigError("unknown kernel '" + std::string(s) + "'");
}

std::string MarkovKernel1D::spec() const {
  switch (family_) {
    case Family::laplace:
    case Family::brownian_sheet:
      return name_ + ":" + format_double(theta_);
    default:
      return name_;
  }
}

double MarkovKernel1D::p(double x) const {
  switch (family_) {
    case Family::laplace: return std::exp(theta_ * x);
    case Family::brownian_sheet: return 1.0 + theta_ * x;
    case Family::brownian_bridge: return x;
    case Family::custom: return p_(x);
  }
  return 0.0;
}

double MarkovKernel1D::q(double x) const {
  switch (family_) {
    case Family::laplace: return std::exp(-theta_ * x);
    case Family::brownian_sheet: return 1.0;
    case Family::brownian_bridge: return 1.0 - x;
    case Family::custom: return q_(x);
  }
  return 0.0;
}

double MarkovKernel1D::dp(double x) const {
  switch (family_) {
    case Family::laplace: return theta_ * std::exp(theta_ * x);
    case Family::brownian_sheet: return theta_;
    case Family::brownian_bridge: return 1.0;
    case Family::custom: return dp_(x);
  }
  return 0.0;
}

double MarkovKernel1D::dq(double x) const {
  switch (family_) {
    case Family::laplace: return -theta_ * std::exp(-theta_ * x);
    case Family::brownian_sheet: return 0.0;
    case Family::brownian_bridge: return -1.0;
    case Family::custom: return dq_(x);
  }
  return 0.0;
}

double MarkovKernel1D::operator()(double x, double y) const {
  if (std::isinf(x) || std::isinf(y)) return 0.0;
  if (family_ == Family::laplace) return std::exp(-theta_ * std::abs(x - y));
  return x <= y ? p(x) * q(y) : p(y) * q(x);
}

double MarkovKernel1D::derivative_second(double a, double y) const {
  if (std::isinf(a)) return 0.0;
  // y <= a: k = p(y) q(a); y > a: k = p(a) q(y).
  return y <= a ? dp(y) * q(a) : p(a) * dq(y);
}

double markov_eval(const MarkovKernel1D& kernel, double x, double y) { return kernel(x, y); }

// ---------------------------------------------------------------------------

TensorMarkovKernel::TensorMarkovKernel(std::vector<MarkovKernel1D> factors) : factors_(std::move(factors)) {
  if (factors_.empty()) throw ConfigError("tensor kernel needs at least one factor");
}

TensorMarkovKernel TensorMarkovKernel::isotropic(const MarkovKernel1D& factor, std::size_t dim) {
  return TensorMarkovKernel(std::vector<MarkovKernel1D>(dim, factor));
}

TensorMarkovKernel TensorMarkovKernel::parse(std::string_view spec, std::size_t dim) {
  std::vector<MarkovKernel1D> factors;
  std::size_t start = 0;
  while (true) {
    const auto semi = spec.find(';', start);
    factors.push_back(MarkovKernel1D::parse(spec.substr(start, semi - start)));
    if (semi == std::string_view::npos) break;
    start = semi + 1;
  }
  if (factors.size() == 1 && dim > 1) return isotropic(factors.front(), dim);
  if (factors.size() != dim) {
    throw ConfigError("kernel '" + std::string(spec) + "' has " + std::to_string(factors.size()) +
                      " factors but the input dimension is " + std::to_string(dim));
  }
  return TensorMarkovKernel(std::move(factors));
}

std::string TensorMarkovKernel::spec() const {
  bool same = true;
  for (const auto& f : factors_) same = same && f.spec() == factors_.front().spec();
  if (same) return factors_.front().spec();
  std::string out;
  for (std::size_t j = 0; j < factors_.size(); ++j) {
    if (j) out += ';';
    out += factors_[j].spec();
  }
  return out;
}

double TensorMarkovKernel::operator()(std::span<const double> x, std::span<const double> y) const {
  if (x.size() != factors_.size() || y.size() != factors_.size()) {
    throw StructuralError("tmk_eval: kernel dimension " + std::to_string(factors_.size()) +
                          " does not match arguments of size " + std::to_string(x.size()) + " and " +
                          std::to_string(y.size()));
  }
  double v = 1.0;
  for (std::size_t j = 0; j < factors_.size(); ++j) v *= factors_[j](x[j], y[j]);
  return v;
}

double tmk_eval(const TensorMarkovKernel& kernel, std::span<const double> x, std::span<const double> y) {
  return kernel(x, y);
}

ValidationReport validate_markov(const MarkovKernel1D& kernel, int grid_size) {
  if (grid_size < 3) throw ConfigError("validate_markov: grid_size must be >= 3");
  ValidationReport report;
  double prev_ratio = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid_size; ++i) {
    const double x = (i + 1.0) / (grid_size + 1.0);
    const double p = kernel.p(x);
    const double q = kernel.q(x);
    if (!(p > 0.0) || !(q > 0.0)) {
      report.positive = false;
      report.nonpositive_at.push_back(x);
      continue;
    }
    const double ratio = p / q;
    if (!(ratio > prev_ratio)) {
      report.monotone = false;
      report.nonmonotone_at.push_back(x);
    }
    prev_ratio = ratio;
  }
  return report;
}

}  // namespace dtmgp
