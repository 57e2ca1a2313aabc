#include "vbdiag/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vbdiag/errors.hpp"

namespace vbdiag {

Vector TargetModel::gradient_at(const Vector& theta) const {
  if (gradient) return gradient(theta);
  return finite_diff_gradient(*this, theta);
}

Matrix TargetModel::hessian_at(const Vector& theta) const {
  if (hessian) return hessian(theta);
  if (gradient) {
    // Differences of the analytic gradient lose less precision than
    // second differences of the density.
    const auto p = static_cast<Eigen::Index>(dim);
    Matrix h(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
      const double step = std::max(1e-5, 1e-5 * std::abs(theta[i]));
      Vector up = theta, dn = theta;
      up[i] += step;
      dn[i] -= step;
      const Vector gu = gradient(up), gd = gradient(dn);
      if (!gu.allFinite() || !gd.allFinite())
        throw Error("NonFiniteEvaluation", "gradient not finite near the Hessian point");
      h.col(i) = (gu - gd) / (2.0 * step);
    }
    return 0.5 * (h + h.transpose());
  }
  return finite_diff_hessian(*this, theta);
}

Matrix finite_diff_hessian(const TargetModel& model, const Vector& point) {
  const auto p = static_cast<Eigen::Index>(model.dim);
  require(point.size() == p, "DimensionMismatch", "hessian point has wrong dimension");
  Vector h(p);
  for (Eigen::Index i = 0; i < p; ++i) h[i] = std::max(1e-5, 1e-5 * std::abs(point[i]));

  auto eval = [&](const Vector& x) {
    const double v = model.log_density(x);
    if (!std::isfinite(v))
      throw Error("NonFiniteEvaluation", "finite-difference stencil left the support; supply an analytic Hessian");
    return v;
  };

  const double f0 = eval(point);
  Matrix hess(p, p);
  Vector x = point;
  for (Eigen::Index i = 0; i < p; ++i) {
    x[i] = point[i] + h[i];
    const double fp = eval(x);
    x[i] = point[i] - h[i];
    const double fm = eval(x);
    x[i] = point[i];
    hess(i, i) = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
  }
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = i + 1; j < p; ++j) {
      double acc = 0.0;
      for (int si : {1, -1}) {
        for (int sj : {1, -1}) {
          x[i] = point[i] + si * h[i];
          x[j] = point[j] + sj * h[j];
          acc += si * sj * eval(x);
        }
      }
      x[i] = point[i];
      x[j] = point[j];
      hess(i, j) = hess(j, i) = acc / (4.0 * h[i] * h[j]);
    }
  }
  return 0.5 * (hess + hess.transpose());
}

Vector finite_diff_gradient(const TargetModel& model, const Vector& point) {
  const auto p = static_cast<Eigen::Index>(model.dim);
  const double base = std::cbrt(std::numeric_limits<double>::epsilon());
  Vector g(p);
  Vector x = point;
  for (Eigen::Index i = 0; i < p; ++i) {
    const double step = base * std::max(1.0, std::abs(point[i]));
    x[i] = point[i] + step;
    const double fp = model.log_density(x);
    x[i] = point[i] - step;
    const double fm = model.log_density(x);
    x[i] = point[i];
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

VBApproximation::VBApproximation(std::vector<MarginalFamily> marginals) : marginals_(std::move(marginals)) {
  const std::size_t p = marginals_.size();
  require(p >= 1, "InvalidApproximation", "VB approximation needs at least one coordinate");
  mean_.resize(static_cast<Eigen::Index>(p));
  variance_.resize(static_cast<Eigen::Index>(p));

  for (std::size_t i = 0; i < p; ++i) {
    if (!marginals_[i].is_conditional()) order_.push_back(i);
  }
  for (std::size_t i = 0; i < p; ++i) {
    const auto& f = marginals_[i];
    if (!f.is_conditional()) {
      mean_[static_cast<Eigen::Index>(i)] = f.mean();
      variance_[static_cast<Eigen::Index>(i)] = f.variance();
      continue;
    }
    const std::size_t link = *f.link();
    require(link < p && link != i, "InvalidApproximation", "conditional factor links to an invalid coordinate");
    const auto& scale = marginals_[link];
    require(!scale.is_conditional() && scale.support().first >= 0.0, "InvalidApproximation",
            "conditional factor must link to a positive, unconditional coordinate");
    order_.push_back(i);
    mean_[static_cast<Eigen::Index>(i)] = f.mean();
    variance_[static_cast<Eigen::Index>(i)] = f.variance_given_link(scale.mean());
  }
}

double VBApproximation::log_density(const Vector& eta) const {
  double total = 0.0;
  for (std::size_t i = 0; i < marginals_.size(); ++i) {
    const auto& f = marginals_[i];
    const double x = eta[static_cast<Eigen::Index>(i)];
    total += f.is_conditional() ? f.log_density(x, eta[static_cast<Eigen::Index>(*f.link())]) : f.log_density(x);
  }
  return total;
}

Vector VBApproximation::sample(Rng& rng) const {
  Vector eta(static_cast<Eigen::Index>(dim()));
  for (std::size_t i : order_) {
    const auto& f = marginals_[i];
    eta[static_cast<Eigen::Index>(i)] =
        f.is_conditional() ? f.sample(rng, eta[static_cast<Eigen::Index>(*f.link())]) : f.sample(rng);
  }
  return eta;
}

Matrix VBApproximation::sample(std::size_t n, const RngPolicy& policy) const {
  Rng rng(policy);
  Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim()));
  for (std::size_t r = 0; r < n; ++r) out.row(static_cast<Eigen::Index>(r)) = sample(rng).transpose();
  return out;
}

std::string to_string(MethodTag tag) {
  switch (tag) {
    case MethodTag::Affine: return "affine";
    case MethodTag::Marginal: return "marginal";
    case MethodTag::Stepwise: return "stepwise";
    case MethodTag::Gibbs: return "gibbs";
    case MethodTag::Exact: return "exact";
  }
  return "unknown";
}

CovarianceEstimate CovarianceEstimate::from_parts(Vector sigma2, Matrix rho, const Vector& reference_variance,
                                                  MethodTag method) {
  const auto p = sigma2.size();
  require(rho.rows() == p && rho.cols() == p && reference_variance.size() == p, "DimensionMismatch",
          "covariance estimate parts disagree in dimension");
  CovarianceEstimate est;
  est.sigma2 = std::move(sigma2);
  est.rho = std::move(rho);
  est.ratios = est.sigma2.cwiseQuotient(reference_variance);
  est.method = method;
  est.indefinite = implied_covariance(est).indefinite;
  return est;
}

CovarianceEstimate CovarianceEstimate::from_covariance(const Matrix& cov, const Vector& reference_variance,
                                                       MethodTag method) {
  Vector sigma2 = cov.diagonal();
  const Vector sd = sigma2.cwiseSqrt();
  Matrix rho = cov.cwiseQuotient(sd * sd.transpose());
  rho.diagonal().setOnes();
  rho = 0.5 * (rho + rho.transpose());
  return from_parts(std::move(sigma2), std::move(rho), reference_variance, method);
}

ImpliedCovariance implied_covariance(const CovarianceEstimate& est) {
  const Vector sd = est.sigma2.cwiseSqrt();
  ImpliedCovariance out;
  out.covariance = sd.asDiagonal() * est.rho * sd.asDiagonal();
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(out.covariance, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  out.indefinite = lo < -1e-8 * std::abs(hi);
  return out;
}

}  // namespace vbdiag
