#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "vbdiag/core.hpp"
#include "vbdiag/imh.hpp"
#include "vbdiag/parallel.hpp"

namespace vbdiag {

/// Number of distinct covariance entries, p(p+1)/2.
std::size_t covariance_unknowns(std::size_t p);

/// Row k maps u = (sigma_1^2..sigma_p^2, c_12, c_13, c_23, c_14, ...) to
/// alpha_k' Sigma alpha_k. Pairs are ordered (1,2),(1,3),(2,3),(1,4),...
Matrix moment_design(const std::vector<Vector>& directions);

class DirectionSet {
 public:
  /// Throws RankDeficient when `full_covariance` and the design does not
  /// have full column rank.
  explicit DirectionSet(std::vector<Vector> directions, bool full_covariance = true);

  std::size_t dim() const { return static_cast<std::size_t>(directions_.front().size()); }
  std::size_t size() const { return directions_.size(); }
  const std::vector<Vector>& directions() const { return directions_; }
  const Vector& operator[](std::size_t k) const { return directions_[k]; }

 private:
  std::vector<Vector> directions_;
};

/// e_i, then (e_i + e_j)/sqrt2 and, if `overdetermined`, (e_i - e_j)/sqrt2.
DirectionSet default_directions(std::size_t p, bool overdetermined = false);

/// Laplace-type approximation to the log marginal density of omega = alpha'theta.
///
/// theta_omega maximizes log p on the hyperplane alpha'theta = omega,
/// parameterized as omega alpha/|alpha|^2 + N z with N an orthonormal basis
/// of alpha's complement. The curvature term uses
///   |det(-R)| * alpha'(-R)^{-1} alpha = |alpha|^2 det(N'(-R)N),
/// which stays defined whenever theta_omega is a constrained maximum.
///
/// Keeps the last maximizer as a warm start, so an instance is not safe to
/// share between threads.
class TKKProfile {
 public:
  TKKProfile(TargetModel model, Vector alpha, Vector start);

  /// -inf when neither the warm start nor the projected start is in the
  /// support. Throws ProfileDivergence if the constrained optimizer fails.
  double operator()(double omega);

  const Vector& alpha() const { return alpha_; }
  const Vector& last_maximizer() const { return last_theta_; }
  double last_omega() const { return last_omega_; }
  std::size_t evaluations() const { return evaluations_; }

 private:
  bool maximize(Vector& z, double omega, double& value, Matrix& neg_hess) const;
  Vector point(double omega, const Vector& z) const { return omega * offset_ + basis_ * z; }

  TargetModel model_;
  Vector alpha_;
  Vector offset_;  // alpha / |alpha|^2
  Matrix basis_;   // p x (p-1)
  Vector start_;
  double log_alpha_norm2_ = 0.0;
  bool has_last_ = false;
  Vector last_theta_;
  double last_omega_ = 0.0;
  std::size_t evaluations_ = 0;
};

/// One-shot evaluation starting from `start` projected onto the constraint.
double tkk_log_marginal(const TargetModel& model, const Vector& alpha, double omega, const Vector& start);
double tkk_log_marginal(const TargetModel& model, const Vector& alpha, double omega);

struct ProjectionRead {
  Vector alpha;
  double center = 0.0;
  double proposal_variance = 0.0;
  VarianceRead read;
  double l() const { return read.variance; }
};

/// VBAIMH on the profile density of alpha'theta, proposal
/// N(alpha'mu_q, alpha' diag(var_q) alpha).
ProjectionRead projection_variance(const TargetModel& model, const VBApproximation& vb, const Vector& alpha,
                                   const EARTable& table, std::size_t n, const RngPolicy& rng,
                                   double skew_scale = kDefaultSkewScale);

/// Least-squares solve of alpha_k' Sigma alpha_k = l_k. Works on
/// VB-standardized coordinates internally; |rho| is clamped to 0.999.
CovarianceEstimate solve_moment_system(const DirectionSet& directions, const std::vector<double>& l_values,
                                       const VBApproximation& vb);

struct MarginalOptions {
  std::size_t chain_length = kDefaultProjectionChainLength;
  bool overdetermined = false;
  double skew_scale = kDefaultSkewScale;
  Execution execution = Execution::Parallel;
};

struct MarginalReport {
  /// Directions on the VB-standardized scale Y = Q theta, Q_ii = 1/sd_q.
  std::vector<Vector> standardized_directions;
  std::vector<ProjectionRead> reads;
  CovarianceEstimate estimate;
  bool non_normal = false;
};

/// Full method: standardized directions a_k (default_directions unless
/// given), alpha_k = Q a_k, one read per direction on rng.substream(k),
/// then the moment solve.
MarginalReport run_marginal(const TargetModel& model, const VBApproximation& vb, const EARTable& table,
                            const RngPolicy& rng, const MarginalOptions& options = {},
                            const std::vector<Vector>& standardized_directions = {});

/// CSV "alpha_1,...,alpha_p,acceptance,l" with theta-scale directions.
void write_projection_csv(std::ostream& out, const std::vector<ProjectionRead>& reads);

}  // namespace vbdiag
