#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "vbdiag/families.hpp"
#include "vbdiag/rng.hpp"

namespace vbdiag {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Unnormalized log-posterior log p(theta | x) in `dim` coordinates.
///
/// `log_density` must return -inf (not throw) outside the support. The
/// derivative evaluators are optional; when absent `gradient_at` and
/// `hessian_at` fall back to central differences.
struct TargetModel {
  std::size_t dim = 0;
  std::function<double(const Vector&)> log_density;
  std::function<Vector(const Vector&)> gradient;
  std::function<Matrix(const Vector&)> hessian;

  double operator()(const Vector& theta) const { return log_density(theta); }
  Vector gradient_at(const Vector& theta) const;
  Matrix hessian_at(const Vector& theta) const;
};

/// Central-difference Hessian of model.log_density with per-coordinate step
/// h_i = max(1e-5, 1e-5 |x_i|), symmetrized. Throws NonFiniteEvaluation if
/// any stencil point is outside the support.
Matrix finite_diff_hessian(const TargetModel& model, const Vector& point);

/// Central-difference gradient with step cbrt(eps) * max(1, |x_i|).
Vector finite_diff_gradient(const TargetModel& model, const Vector& point);

/// Factorized approximation q(eta) = prod_i q_i(eta_i). Conditional factors
/// (NormalGivenScale) are evaluated against the value of their link.
class VBApproximation {
 public:
  explicit VBApproximation(std::vector<MarginalFamily> marginals);

  std::size_t dim() const { return marginals_.size(); }
  const std::vector<MarginalFamily>& marginals() const { return marginals_; }
  const Vector& mean() const { return mean_; }
  const Vector& variance() const { return variance_; }

  double log_density(const Vector& eta) const;
  Vector sample(Rng& rng) const;
  /// n x dim matrix of independent draws.
  Matrix sample(std::size_t n, const RngPolicy& policy) const;

 private:
  std::vector<MarginalFamily> marginals_;
  std::vector<std::size_t> order_;  // unconditional coordinates first
  Vector mean_;
  Vector variance_;
};

enum class MethodTag { Affine, Marginal, Stepwise, Gibbs, Exact };

std::string to_string(MethodTag tag);

/// Posterior variances, correlations, and variance ratios against VB.
struct CovarianceEstimate {
  Vector sigma2;
  Matrix rho;
  Vector ratios;
  MethodTag method = MethodTag::Exact;
  bool indefinite = false;        // implied covariance has a negative eigenvalue
  bool rho_clamped = false;       // some |rho| was clamped to 0.999
  bool projected_to_pd = false;   // rho was repaired by eigenvalue clipping

  /// Builds from sigma2 and rho; ratios = sigma2 / reference_variance.
  static CovarianceEstimate from_parts(Vector sigma2, Matrix rho, const Vector& reference_variance,
                                       MethodTag method);
  static CovarianceEstimate from_covariance(const Matrix& cov, const Vector& reference_variance,
                                            MethodTag method);

  std::size_t dim() const { return static_cast<std::size_t>(sigma2.size()); }
};

struct ImpliedCovariance {
  Matrix covariance;
  bool indefinite = false;
};

/// diag(sigma) rho diag(sigma); flagged indefinite when
/// lambda_min < -1e-8 * lambda_max.
ImpliedCovariance implied_covariance(const CovarianceEstimate& est);

}  // namespace vbdiag
