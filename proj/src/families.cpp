#include "vbdiag/families.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "vbdiag/errors.hpp"

namespace vbdiag {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double normal_logpdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * d * d / var - 0.5 * std::log(var) - kLogSqrt2Pi;
}

double beta_logpdf(double x, double a, double b) {
  if (!(x > 0.0 && x < 1.0)) return -kInf;
  return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - std::lgamma(a) - std::lgamma(b) +
         std::lgamma(a + b);
}

void check(bool ok, const std::string& what) { require(ok, "InvalidFamily", what); }

}  // namespace

std::string to_string(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::Normal: return "normal";
    case FamilyKind::InverseGamma: return "inverse_gamma";
    case FamilyKind::Beta: return "beta";
    case FamilyKind::Dirichlet: return "dirichlet";
    case FamilyKind::ScaledT: return "scaled_t";
    case FamilyKind::NormalGivenScale: return "normal_given_scale";
  }
  return "unknown";
}

MarginalFamily MarginalFamily::normal(double mean, double variance) {
  check(std::isfinite(mean) && variance > 0.0 && std::isfinite(variance), "normal: variance must be finite and > 0");
  return {FamilyKind::Normal, {mean, variance}};
}

MarginalFamily MarginalFamily::inverse_gamma(double shape, double scale) {
  check(shape > 2.0 && scale > 0.0, "inverse_gamma: need shape > 2 (finite variance) and scale > 0");
  return {FamilyKind::InverseGamma, {shape, scale}};
}

MarginalFamily MarginalFamily::beta(double a, double b) {
  check(a > 0.0 && b > 0.0, "beta: shapes must be > 0");
  return {FamilyKind::Beta, {a, b}};
}

MarginalFamily MarginalFamily::dirichlet(std::vector<double> alpha, std::size_t component) {
  check(alpha.size() >= 2 && component < alpha.size(), "dirichlet: need >= 2 concentrations and a valid component");
  for (double a : alpha) check(a > 0.0, "dirichlet: concentrations must be > 0");
  MarginalFamily f{FamilyKind::Dirichlet, std::move(alpha)};
  f.component_ = component;
  return f;
}

MarginalFamily MarginalFamily::scaled_t(double dof, double location, double scale) {
  check(dof > 2.0 && scale > 0.0, "scaled_t: need dof > 2 and scale > 0");
  return {FamilyKind::ScaledT, {dof, location, scale}};
}

MarginalFamily MarginalFamily::normal_given_scale(double mean, double kappa, std::size_t link) {
  check(kappa > 0.0, "normal_given_scale: kappa must be > 0");
  MarginalFamily f{FamilyKind::NormalGivenScale, {mean, kappa}};
  f.link_ = link;
  return f;
}

namespace {

// Beta shapes of the standalone marginal for Beta and Dirichlet.
std::pair<double, double> beta_shapes(const MarginalFamily& f) {
  const auto& p = f.parameters();
  if (f.kind() == FamilyKind::Beta) return {p[0], p[1]};
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  return {p[f.component()], total - p[f.component()]};
}

}  // namespace

double MarginalFamily::mean() const {
  const auto& p = params_;
  switch (kind_) {
    case FamilyKind::Normal: return p[0];
    case FamilyKind::InverseGamma: return p[1] / (p[0] - 1.0);
    case FamilyKind::Beta:
    case FamilyKind::Dirichlet: {
      const auto [a, b] = beta_shapes(*this);
      return a / (a + b);
    }
    case FamilyKind::ScaledT: return p[1];
    case FamilyKind::NormalGivenScale: return p[0];
  }
  return 0.0;
}

double MarginalFamily::variance() const {
  const auto& p = params_;
  switch (kind_) {
    case FamilyKind::Normal: return p[1];
    case FamilyKind::InverseGamma: {
      const double a = p[0];
      return p[1] * p[1] / ((a - 1.0) * (a - 1.0) * (a - 2.0));
    }
    case FamilyKind::Beta:
    case FamilyKind::Dirichlet: {
      const auto [a, b] = beta_shapes(*this);
      return a * b / ((a + b) * (a + b) * (a + b + 1.0));
    }
    case FamilyKind::ScaledT: return p[2] * p[2] * p[0] / (p[0] - 2.0);
    case FamilyKind::NormalGivenScale:
      throw Error("InvalidFamily", "normal_given_scale variance needs the linked coordinate");
  }
  return 0.0;
}

double MarginalFamily::variance_given_link(double link_mean) const {
  if (kind_ != FamilyKind::NormalGivenScale) return variance();
  return link_mean / params_[1];
}

double MarginalFamily::log_density(double x) const {
  const auto& p = params_;
  switch (kind_) {
    case FamilyKind::Normal: return normal_logpdf(x, p[0], p[1]);
    case FamilyKind::InverseGamma: {
      if (!(x > 0.0)) return -kInf;
      const double a = p[0], b = p[1];
      return a * std::log(b) - std::lgamma(a) - (a + 1.0) * std::log(x) - b / x;
    }
    case FamilyKind::Beta:
    case FamilyKind::Dirichlet: {
      const auto [a, b] = beta_shapes(*this);
      return beta_logpdf(x, a, b);
    }
    case FamilyKind::ScaledT: {
      const double nu = p[0], z = (x - p[1]) / p[2];
      return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi) -
             std::log(p[2]) - 0.5 * (nu + 1.0) * std::log1p(z * z / nu);
    }
    case FamilyKind::NormalGivenScale:
      throw Error("InvalidFamily", "normal_given_scale density needs the linked coordinate");
  }
  return -kInf;
}

double MarginalFamily::log_density(double x, double link_value) const {
  if (kind_ != FamilyKind::NormalGivenScale) return log_density(x);
  if (!(link_value > 0.0)) return -kInf;
  return normal_logpdf(x, params_[0], link_value / params_[1]);
}

double MarginalFamily::sample(Rng& rng) const {
  const auto& p = params_;
  switch (kind_) {
    case FamilyKind::Normal: return rng.normal(p[0], std::sqrt(p[1]));
    case FamilyKind::InverseGamma: return p[1] / rng.gamma(p[0]);
    case FamilyKind::Beta:
    case FamilyKind::Dirichlet: {
      const auto [a, b] = beta_shapes(*this);
      return rng.beta(a, b);
    }
    case FamilyKind::ScaledT: {
      const double z = rng.normal();
      const double chi = rng.chi_squared(p[0]);
      return p[1] + p[2] * z / std::sqrt(chi / p[0]);
    }
    case FamilyKind::NormalGivenScale:
      throw Error("InvalidFamily", "normal_given_scale sampling needs the linked coordinate");
  }
  return 0.0;
}

double MarginalFamily::sample(Rng& rng, double link_value) const {
  if (kind_ != FamilyKind::NormalGivenScale) return sample(rng);
  return rng.normal(params_[0], std::sqrt(link_value / params_[1]));
}

std::pair<double, double> MarginalFamily::support() const {
  switch (kind_) {
    case FamilyKind::InverseGamma: return {0.0, kInf};
    case FamilyKind::Beta:
    case FamilyKind::Dirichlet: return {0.0, 1.0};
    default: return {-kInf, kInf};
  }
}

}  // namespace vbdiag
