#pragma once

#include <array>
#include <iosfwd>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "vbdiag/core.hpp"
#include "vbdiag/rng.hpp"

namespace vbdiag::models {

// --- Multivariate normal -------------------------------------------------

class MvnTarget {
 public:
  MvnTarget(Vector mean, Matrix covariance);

  std::size_t dim() const { return static_cast<std::size_t>(mean_.size()); }
  const Vector& mean() const { return mean_; }
  const Matrix& covariance() const { return covariance_; }

  /// Up to the normalizing constant.
  double log_density(const Vector& theta) const;
  Vector gradient(const Vector& theta) const;
  const Matrix& precision() const { return precision_; }

  /// Target model with analytic gradient and Hessian.
  TargetModel as_model() const;

 private:
  Vector mean_;
  Matrix covariance_;
  Eigen::LLT<Matrix> chol_;
  Matrix precision_;
};

/// Covariance from standard deviations and a correlation matrix.
Matrix covariance_from(const Vector& sd, const Matrix& rho);

// --- Semi-conjugate normal ------------------------------------------------

struct DataSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double centered_ss = 0.0;  // sum (y_i - ybar)^2

  static DataSummary from(std::span<const double> y);
};

struct SemiConjugatePrior {
  double alpha = 2.0;   // sigma^2 ~ IG(alpha, beta)
  double beta = 440.64;
  double gamma = 221.86;  // mu ~ N(gamma, eta2)
  double eta2 = 1.0;
};

/// y_i ~ N(mu, sigma^2), mu ~ N(gamma, eta^2), sigma^2 ~ IG(alpha, beta).
/// Coordinates are (mu, sigma^2) on the natural scale.
class SemiConjugateNormalModel {
 public:
  SemiConjugateNormalModel(DataSummary data, SemiConjugatePrior prior);

  const DataSummary& data() const { return data_; }
  const SemiConjugatePrior& prior() const { return prior_; }

  double log_posterior(double mu, double sigma2) const;
  Vector gradient(double mu, double sigma2) const;
  TargetModel as_model() const;

 private:
  DataSummary data_;
  SemiConjugatePrior prior_;
};

struct CaviResult {
  VBApproximation vb;
  int iterations = 0;
};

/// Coordinate ascent for q(mu) = N(m, v), q(sigma^2) = IG(a, b) until the
/// variational means move less than `tol`.
CaviResult cavi_semiconjugate(const SemiConjugateNormalModel& model, double tol = 1e-10, int max_iterations = 1000);

// --- Two-component normal mixture -----------------------------------------

struct MixturePrior {
  double a0 = 0.02;                    // pi ~ Beta(a0/2, a0/2)
  std::array<double, 2> c{2.5, 2.5};   // mu_j | s_j ~ N(c_j, s_j / d2_j)
  std::array<double, 2> d2{1.0, 1.0};
  std::array<double, 2> e{2.0, 2.0};   // s_j ~ IG(e_j, f_j)
  std::array<double, 2> f{1.0, 1.0};
};

/// pi N(mu1, s1) + (1 - pi) N(mu2, s2). Coordinates are ordered
/// (pi, mu1, mu2, s1, s2), matching the layout of the comparison tables.
class MixtureModel {
 public:
  static constexpr std::size_t kPi = 0, kMu1 = 1, kMu2 = 2, kS1 = 3, kS2 = 4;

  MixtureModel(std::vector<double> data, MixturePrior prior);

  const std::vector<double>& data() const { return data_; }
  const MixturePrior& prior() const { return prior_; }

  double log_posterior(const Vector& psi) const;
  Vector gradient(const Vector& psi) const;
  TargetModel as_model() const;

 private:
  std::vector<double> data_;
  MixturePrior prior_;
};

// --- Gibbs reference samplers ---------------------------------------------

struct GibbsResult {
  Matrix samples;  // retained draws, one row per iteration
  Vector mean;
  Matrix covariance;
  CovarianceEstimate estimate;
  std::size_t empty_component_draws = 0;
};

/// Alternates mu | sigma^2 (normal) and sigma^2 | mu (inverse gamma).
/// Ratios in `estimate` are against `reference_variance` (ones if empty).
GibbsResult gibbs_semiconjugate(const SemiConjugateNormalModel& model, std::size_t n_iter, const RngPolicy& rng,
                                const Vector& reference_variance = Vector());

/// Data-augmentation Gibbs: z | psi, pi | z, (mu_j, s_j) | z, x. Draws are
/// relabeled so that mu1 < mu2.
GibbsResult gibbs_mixture(const MixtureModel& model, std::size_t n_iter, const RngPolicy& rng,
                          const Vector& reference_variance = Vector());

// --- Synthetic data ----------------------------------------------------------

struct NormalDataSpec {
  std::size_t n = 1033;
  double mean = 221.86;
  double variance = 440.64;
};

struct MixtureDataSpec {
  std::size_t n = 400;
  double weight = 0.4;
  double mu1 = 1.0, var1 = 1.0;
  double mu2 = 3.5, var2 = 0.5;
};

std::vector<double> make_normal_data(const NormalDataSpec& spec, const RngPolicy& rng);
std::vector<double> make_mixture_data(const MixtureDataSpec& spec, const RngPolicy& rng);

/// Single-column CSV with header "x"; a missing header is tolerated on read.
void write_data_csv(std::ostream& out, std::span<const double> data);
std::vector<double> read_data_csv(std::istream& in);

/// Fixed VB fit for the mixture: Beta on pi, mu_j | s_j normal,
/// s_j inverse gamma. Arguments in coordinate order.
VBApproximation mixture_vb(double pi_a, double pi_b, double m1, double kappa1, double m2, double kappa2,
                           double shape1, double scale1, double shape2, double scale2);

}  // namespace vbdiag::models
