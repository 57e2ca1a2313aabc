#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "vbdiag/core.hpp"
#include "vbdiag/errors.hpp"
#include "vbdiag/imh.hpp"
#include "vbdiag/models.hpp"

namespace testing {

using vbdiag::Matrix;
using vbdiag::Vector;

// Random correlation matrix with |rho_ij| <= max_abs, built from a random
// factor model and rejected until the bound holds.
inline Matrix random_correlation(std::size_t p, std::mt19937_64& gen, double max_abs = 0.9) {
  std::normal_distribution<double> z(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(p);
  for (;;) {
    Matrix w(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) w(i, j) = z(gen);
    Matrix s = w * w.transpose() + 0.5 * Matrix::Identity(n, n);
    const Vector d = s.diagonal().cwiseSqrt().cwiseInverse();
    Matrix rho = d.asDiagonal() * s * d.asDiagonal();
    rho.diagonal().setOnes();
    double worst = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < i; ++j) worst = std::max(worst, std::abs(rho(i, j)));
    if (worst <= max_abs) return rho;
  }
}

inline Matrix random_spd(std::size_t p, std::mt19937_64& gen, double max_abs_rho = 0.8) {
  std::uniform_real_distribution<double> logsd(-1.0, 1.0);
  Vector sd(static_cast<Eigen::Index>(p));
  for (auto& s : sd) s = std::exp(logsd(gen));
  return vbdiag::models::covariance_from(sd, random_correlation(p, gen, max_abs_rho));
}

inline vbdiag::VBApproximation normal_vb(const Vector& mean, const Vector& var) {
  std::vector<vbdiag::MarginalFamily> f;
  for (Eigen::Index i = 0; i < mean.size(); ++i) f.push_back(vbdiag::MarginalFamily::normal(mean[i], var[i]));
  return vbdiag::VBApproximation(std::move(f));
}

// Mean-field fit of a Gaussian: var_i = 1 / (Sigma^-1)_ii.
inline vbdiag::VBApproximation mean_field(const vbdiag::models::MvnTarget& t) {
  return normal_vb(t.mean(), t.precision().diagonal().cwiseInverse());
}

inline std::string error_code(auto&& fn) {
  try {
    fn();
  } catch (const vbdiag::Error& e) {
    return e.code();
  }
  return "";
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline const vbdiag::EARTable& shared_table() {
  static const vbdiag::EARTable table = [] {
    const auto grid = vbdiag::default_ear_grid();
    return vbdiag::build_ear_table(grid);
  }();
  return table;
}

}  // namespace testing
