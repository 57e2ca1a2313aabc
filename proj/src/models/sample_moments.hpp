#pragma once

#include "vbdiag/models.hpp"

namespace vbdiag::models::detail {

// Fills mean, covariance (n - 1 denominator) and the Gibbs estimate.
inline void summarize(GibbsResult& out, const Vector& reference_variance) {
  const auto n = out.samples.rows();
  out.mean = out.samples.colwise().mean().transpose();
  const Matrix centered = out.samples.rowwise() - out.mean.transpose();
  out.covariance = (centered.transpose() * centered) / static_cast<double>(n - 1);
  const Vector ref = reference_variance.size() == 0 ? Vector::Ones(out.samples.cols()) : reference_variance;
  out.estimate = CovarianceEstimate::from_covariance(out.covariance, ref, MethodTag::Gibbs);
}

}  // namespace vbdiag::models::detail
