#include "vbdiag/errors.hpp"
#include "vbdiag/models.hpp"

namespace vbdiag::models {

MvnTarget::MvnTarget(Vector mean, Matrix covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)), chol_(covariance_) {
  require(covariance_.rows() == mean_.size() && covariance_.cols() == mean_.size(), "DimensionMismatch",
          "MVN mean and covariance disagree in dimension");
  require((covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * covariance_.cwiseAbs().maxCoeff(),
          "InvalidModel", "MVN covariance must be symmetric");
  require(chol_.info() == Eigen::Success, "InvalidModel", "MVN covariance is not positive definite");
  precision_ = chol_.solve(Matrix::Identity(mean_.size(), mean_.size()));
  precision_ = 0.5 * (precision_ + precision_.transpose());
}

double MvnTarget::log_density(const Vector& theta) const {
  const Vector z = chol_.matrixL().solve(theta - mean_);
  return -0.5 * z.squaredNorm();
}

Vector MvnTarget::gradient(const Vector& theta) const { return -(precision_ * (theta - mean_)); }

TargetModel MvnTarget::as_model() const {
  auto self = std::make_shared<const MvnTarget>(*this);
  TargetModel m;
  m.dim = dim();
  m.log_density = [self](const Vector& x) { return self->log_density(x); };
  m.gradient = [self](const Vector& x) { return self->gradient(x); };
  m.hessian = [self](const Vector&) -> Matrix { return -self->precision(); };
  return m;
}

Matrix covariance_from(const Vector& sd, const Matrix& rho) { return sd.asDiagonal() * rho * sd.asDiagonal(); }

}  // namespace vbdiag::models
