#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <set>
#include <span>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "dtmgp/kernels.hpp"

namespace dtmgp::testing {

// Dense K over a row-major point array, evaluated with the closed-form kernel.
inline Eigen::MatrixXd dense_gram(const std::function<double(std::span<const double>, std::span<const double>)>& k,
                                  const std::vector<double>& pts, std::size_t d) {
  const auto n = static_cast<Eigen::Index>(pts.size() / d);
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      K(i, j) = k(std::span<const double>(pts).subspan(static_cast<std::size_t>(i) * d, d),
                  std::span<const double>(pts).subspan(static_cast<std::size_t>(j) * d, d));
    }
  }
  return K;
}

// Inverse of the upper Cholesky factor R (K = R^T R, positive diagonal).
inline Eigen::MatrixXd dense_inverse_cholesky(const Eigen::MatrixXd& K) {
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  const Eigen::MatrixXd R = llt.matrixU();
  return R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(K.rows(), K.cols()));
}

// Closed forms, written independently of the library's p/q factorization.
inline double laplace_closed(double theta, double x, double y) { return std::exp(-theta * std::abs(x - y)); }
inline double brownian_closed(double theta, double x, double y) { return 1.0 + theta * std::min(x, y); }
inline double bridge_closed(double x, double y) { return std::min(x, y) * (1.0 - std::max(x, y)); }

inline double product_laplace(double theta, std::span<const double> x, std::span<const double> y) {
  double v = 1.0;
  for (std::size_t j = 0; j < x.size(); ++j) v *= laplace_closed(theta, x[j], y[j]);
  return v;
}

inline double product_brownian(double theta, std::span<const double> x, std::span<const double> y) {
  double v = 1.0;
  for (std::size_t j = 0; j < x.size(); ++j) v *= brownian_closed(theta, x[j], y[j]);
  return v;
}

using Label = std::vector<std::pair<int, std::int64_t>>;

// Union of the full grids X*_lv over |lv| = l + d - 1, by direct enumeration
// of every dyadic coordinate, each reduced to its own (level, odd offset).
inline std::set<Label> brute_force_sg_labels(int l, int d) {
  std::set<Label> points;
  std::vector<int> lv(static_cast<std::size_t>(d), 1);
  while (true) {
    int sum = 0;
    for (int v : lv) sum += v;
    if (sum == l + d - 1) {
      std::vector<std::int64_t> idx(static_cast<std::size_t>(d), 1);
      while (true) {
        Label label;
        for (std::size_t k = 0; k < idx.size(); ++k) {
          int lev = lv[k];
          std::int64_t off = idx[k];
          while (off % 2 == 0) off /= 2, --lev;
          label.emplace_back(lev, off);
        }
        points.insert(label);
        std::size_t k = 0;
        for (; k < idx.size(); ++k) {
          if (++idx[k] < (std::int64_t{1} << lv[k])) break;
          idx[k] = 1;
        }
        if (k == idx.size()) break;
      }
    }
    std::size_t j = 0;
    for (; j < lv.size(); ++j) {
      if (++lv[j] <= l) break;
      lv[j] = 1;
    }
    if (j == lv.size()) break;
  }
  return points;
}

inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-8);
}

// Distance of x to the nearest dyadic point of level <= l, or to 0 and 1.
inline double kink_distance(double x, int l) {
  const double h = std::ldexp(1.0, -l);
  const double r = std::fmod(x, h);
  return std::min(r, h - r);
}

}  // namespace dtmgp::testing
