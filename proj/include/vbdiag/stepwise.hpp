#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "vbdiag/core.hpp"
#include "vbdiag/imh.hpp"
#include "vbdiag/parallel.hpp"

namespace vbdiag {

/// Pairs (i < j) in the order (0,1),(0,2),(1,2),(0,3),...
std::vector<std::pair<std::size_t, std::size_t>> correlation_pairs(std::size_t p);

struct ScaleTransform {
  Vector q;     // diagonal of Q, 1/sd_q
  Vector mu_s;  // Q mu_q
};

ScaleTransform scale_transform(const VBApproximation& vb);

/// m_i^2 = var(Y_i | Y_-i) read on the slice through the VB mean.
VarianceRead conditional_variance_read(const TargetModel& model, const VBApproximation& vb, std::size_t i,
                                       const EARTable& table, std::size_t n, const RngPolicy& rng,
                                       double skew_scale = kDefaultSkewScale);

struct PairRead {
  std::size_t i = 0, j = 0;
  VarianceRead first;   // along (1,1)/sqrt2 in the (Z_i, Z_j) plane
  VarianceRead second;  // along (-1,1)/sqrt2
};

/// Reads var(V_1), var(V_2) of the rotated conditional pair with Z = M Y,
/// M = diag(1/m_i); the other rotated coordinate is held at its mean.
PairRead rotated_pair_reads(const TargetModel& model, const VBApproximation& vb, const Vector& m2, std::size_t i,
                            std::size_t j, const EARTable& table, std::size_t n, const RngPolicy& rng,
                            double skew_scale = kDefaultSkewScale);

/// (l1/l2 - 1) / (l1/l2 + 1).
double eigen_to_r(double lambda1, double lambda2);

/// -Omega_ij / sqrt(Omega_ii Omega_jj), Omega = rho^{-1}.
double partial_correlation_forward(const Matrix& rho, std::size_t i, std::size_t j);
/// All pairs in correlation_pairs order.
Vector partial_correlations(const Matrix& rho);

struct StepwiseState {
  Vector m2;
  std::vector<std::pair<double, double>> lambda2;
  Vector r;
  Vector mu_s;
  Vector mu_ss;
  // Acceptance records for reporting; optional when the state is built by hand.
  std::vector<VarianceRead> step1;
  std::vector<PairRead> step2;
};

struct CorrelationSolve {
  Matrix rho;
  int iterations = 0;
  double residual = 0.0;
  bool used_fallback = false;  // Levenberg-Marquardt after Newton failed
  bool projected_to_pd = false;
};

/// Solves partial_correlations(rho) = r, starting from rho_ij = r_k.
/// Throws NewtonDiverged when neither Newton nor LM reaches 1e-8.
CorrelationSolve solve_partial_correlation_system(const Vector& r, std::size_t p);

/// Step 3: correlations from r, then s_i^2 = m_i^2 (rho^{-1})_ii and
/// sigma_i^2 = s_i^2 var_q_i.
CovarianceEstimate solve_stepwise(const StepwiseState& state, const VBApproximation& vb);

struct StepwiseOptions {
  std::size_t chain_length = kDefaultChainLength;
  double skew_scale = kDefaultSkewScale;
  Execution execution = Execution::Parallel;
};

struct StepwiseReport {
  StepwiseState state;
  CovarianceEstimate estimate;
  bool non_normal = false;
};

/// Steps 1-3. Coordinate reads use rng.substream(i); pair k uses
/// rng.substream(p + k).
StepwiseReport run_stepwise(const TargetModel& model, const VBApproximation& vb, const EARTable& table,
                            const RngPolicy& rng, const StepwiseOptions& options = {});

}  // namespace vbdiag
