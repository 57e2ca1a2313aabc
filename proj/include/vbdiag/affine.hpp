#pragma once

#include <cstddef>
#include <string>

#include "vbdiag/core.hpp"
#include "vbdiag/optim.hpp"
#include "vbdiag/parallel.hpp"

namespace vbdiag {

enum class AffineClass { LowerTriangular, Diagonal, Banded };
std::string to_string(AffineClass cls);
AffineClass affine_class_from_string(const std::string& name);

struct AffineStructure {
  AffineClass cls = AffineClass::LowerTriangular;
  std::size_t dim = 0;
  std::size_t bandwidth = 0;  // Banded: A_ij free for 0 < i - j <= bandwidth

  bool free_entry(std::size_t i, std::size_t j) const;  // strictly below the diagonal
  /// Free entries of A plus the p entries of B.
  std::size_t free_parameters() const;
};

struct AffineOptions {
  std::size_t n_samples = 0;  // 0: max(600, 10 * free parameters)
  int restarts = 5;           // including the identity start
  double jitter_sd = 0.1;
  optim::Options optimizer{1e-6, 500};
  Execution execution = Execution::Parallel;
};

struct AffineFit {
  Matrix A;
  Vector B;
  double log_lik = 0.0;  // sum_i log p(A eta_i + B) + n log det A
  std::size_t n_samples = 0;
  std::size_t dropped_samples = 0;
  bool converged = false;
  int iterations = 0;
  int restarts = 0;
  int best_restart = 0;
  double identity_log_lik = 0.0;  // objective at A = I, B = 0 on the same draws
};

/// Maximizes sum_i log p(A eta_i + B | x) + n log det A over the structure
/// class, eta_i ~ q. A is fitted as D Atilde D^{-1} with D = diag(sd_q) and
/// Atilde_kk = exp(d_k), which keeps the diagonal positive and the problem
/// scale-free.
AffineFit fit_affine(const TargetModel& model, const VBApproximation& vb, const AffineStructure& structure,
                     const RngPolicy& rng, const AffineOptions& options = {});

/// Sigma = A diag(var_q) A'.
CovarianceEstimate corrected_covariance(const AffineFit& fit, const VBApproximation& vb);

}  // namespace vbdiag
