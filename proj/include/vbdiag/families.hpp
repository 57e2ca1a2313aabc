#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "vbdiag/rng.hpp"

namespace vbdiag {

enum class FamilyKind { Normal, InverseGamma, Beta, Dirichlet, ScaledT, NormalGivenScale };

std::string to_string(FamilyKind kind);

/// One univariate factor q_i of a factorized VB approximation.
///
/// Parameterizations:
///   Normal(mean, variance)
///   InverseGamma(shape, scale)          density ∝ x^{-shape-1} exp(-scale/x)
///   Beta(a, b)
///   Dirichlet(alpha_1..alpha_K; component k)   marginal Beta(alpha_k, sum - alpha_k)
///   ScaledT(dof, location, scale)       location + scale * t_dof
///   NormalGivenScale(mean, kappa; link) N(mean, s / kappa) where s is the value
///                                       of coordinate `link` (e.g. mu | sigma^2)
///
/// NormalGivenScale is conditional: its standalone moments need the linked
/// family, so `mean_given_link` / `variance_given_link` take the link's mean.
class MarginalFamily {
 public:
  static MarginalFamily normal(double mean, double variance);
  static MarginalFamily inverse_gamma(double shape, double scale);
  static MarginalFamily beta(double a, double b);
  static MarginalFamily dirichlet(std::vector<double> alpha, std::size_t component);
  static MarginalFamily scaled_t(double dof, double location, double scale);
  static MarginalFamily normal_given_scale(double mean, double kappa, std::size_t link);

  FamilyKind kind() const { return kind_; }
  const std::vector<double>& parameters() const { return params_; }
  std::optional<std::size_t> link() const { return link_; }
  std::size_t component() const { return component_; }
  bool is_conditional() const { return kind_ == FamilyKind::NormalGivenScale; }

  // Unconditional families only (throw InvalidFamily for NormalGivenScale).
  double mean() const;
  double variance() const;
  double log_density(double x) const;
  double sample(Rng& rng) const;

  // NormalGivenScale: moments given E[s] of the linked coordinate.
  double variance_given_link(double link_mean) const;
  double log_density(double x, double link_value) const;
  double sample(Rng& rng, double link_value) const;

  /// Open support (lo, hi); +-inf where unbounded.
  std::pair<double, double> support() const;

 private:
  MarginalFamily(FamilyKind kind, std::vector<double> params) : kind_(kind), params_(std::move(params)) {}

  FamilyKind kind_;
  std::vector<double> params_;
  std::optional<std::size_t> link_;
  std::size_t component_ = 0;
};

}  // namespace vbdiag
