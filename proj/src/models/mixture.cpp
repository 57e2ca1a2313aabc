#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

#include "sample_moments.hpp"
#include "vbdiag/errors.hpp"
#include "vbdiag/models.hpp"

namespace vbdiag::models {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double log_normal_pdf(double x, double mu, double var) {
  const double d = x - mu;
  return -kLogSqrt2Pi - 0.5 * std::log(var) - 0.5 * d * d / var;
}

bool in_support(const Vector& psi) {
  return psi.size() == 5 && psi.allFinite() && psi[0] > 0.0 && psi[0] < 1.0 && psi[3] > 0.0 && psi[4] > 0.0;
}

}  // namespace

MixtureModel::MixtureModel(std::vector<double> data, MixturePrior prior) : data_(std::move(data)), prior_(prior) {
  bool ok = prior_.a0 > 0.0;
  for (int j = 0; j < 2; ++j) ok = ok && prior_.d2[j] > 0.0 && prior_.e[j] > 0.0 && prior_.f[j] > 0.0;
  require(ok, "InvalidModel", "mixture hyperparameters must be positive");
}

double MixtureModel::log_posterior(const Vector& psi) const {
  if (!in_support(psi)) return kNegInf;
  const double pi = psi[kPi];
  const double mu[2] = {psi[kMu1], psi[kMu2]};
  const double s[2] = {psi[kS1], psi[kS2]};
  // log(1 - pi) rather than log1p keeps the label swap exact.
  const double lw1 = std::log(pi), lw2 = std::log(1.0 - pi);

  double lp = 0.0;
  for (double x : data_) {
    const double a = lw1 + log_normal_pdf(x, mu[0], s[0]);
    const double b = lw2 + log_normal_pdf(x, mu[1], s[1]);
    const double hi = std::max(a, b);
    lp += hi + std::log1p(std::exp(std::min(a, b) - hi));
  }
  lp += (0.5 * prior_.a0 - 1.0) * (lw1 + lw2);
  double term[2];
  for (int j = 0; j < 2; ++j) {
    const double d = mu[j] - prior_.c[j];
    term[j] = -0.5 * std::log(s[j]) - 0.5 * prior_.d2[j] * d * d / s[j] - (prior_.e[j] + 1.0) * std::log(s[j]) -
              prior_.f[j] / s[j];
  }
  return lp + (term[0] + term[1]);
}

Vector MixtureModel::gradient(const Vector& psi) const {
  Vector g = Vector::Zero(5);
  if (!in_support(psi)) {
    g.setConstant(std::numeric_limits<double>::quiet_NaN());
    return g;
  }
  const double pi = psi[kPi];
  const double mu[2] = {psi[kMu1], psi[kMu2]};
  const double s[2] = {psi[kS1], psi[kS2]};
  const double lw[2] = {std::log(pi), std::log1p(-pi)};
  const std::size_t mu_idx[2] = {kMu1, kMu2}, s_idx[2] = {kS1, kS2};

  for (double x : data_) {
    double l[2];
    for (int j = 0; j < 2; ++j) l[j] = lw[j] + log_normal_pdf(x, mu[j], s[j]);
    const double hi = std::max(l[0], l[1]);
    const double lse = hi + std::log1p(std::exp(std::min(l[0], l[1]) - hi));
    const double r[2] = {std::exp(l[0] - lse), std::exp(l[1] - lse)};
    g[kPi] += r[0] / pi - r[1] / (1.0 - pi);
    for (int j = 0; j < 2; ++j) {
      const double d = x - mu[j];
      g[mu_idx[j]] += r[j] * d / s[j];
      g[s_idx[j]] += r[j] * (0.5 * d * d / (s[j] * s[j]) - 0.5 / s[j]);
    }
  }
  g[kPi] += (0.5 * prior_.a0 - 1.0) * (1.0 / pi - 1.0 / (1.0 - pi));
  for (int j = 0; j < 2; ++j) {
    const double d = mu[j] - prior_.c[j];
    g[mu_idx[j]] += -prior_.d2[j] * d / s[j];
    g[s_idx[j]] += -(prior_.e[j] + 1.5) / s[j] + (0.5 * prior_.d2[j] * d * d + prior_.f[j]) / (s[j] * s[j]);
  }
  return g;
}

TargetModel MixtureModel::as_model() const {
  auto self = std::make_shared<const MixtureModel>(*this);
  TargetModel m;
  m.dim = 5;
  m.log_density = [self](const Vector& x) { return self->log_posterior(x); };
  m.gradient = [self](const Vector& x) { return self->gradient(x); };
  return m;
}

GibbsResult gibbs_mixture(const MixtureModel& model, std::size_t n_iter, const RngPolicy& policy,
                          const Vector& reference_variance) {
  require(n_iter >= 10000, "InvalidArgument", "Gibbs run needs at least 10000 iterations");
  const auto& pr = model.prior();
  const auto& x = model.data();
  const std::size_t n = x.size();

  Rng rng(policy);
  const std::size_t burn = n_iter / 2;
  GibbsResult out;
  out.samples.resize(static_cast<Eigen::Index>(n_iter - burn), 5);

  // Start from a split at the data median-ish point: lower half vs upper half.
  double pi = 0.5;
  double mu[2] = {pr.c[0] - 1.0, pr.c[1] + 1.0};
  double s[2] = {1.0, 1.0};
  if (n > 0) {
    std::vector<double> sorted(x);
    std::sort(sorted.begin(), sorted.end());
    mu[0] = sorted[n / 4];
    mu[1] = sorted[(3 * n) / 4];
  }

  std::vector<unsigned char> z(n);
  for (std::size_t t = 0; t < n_iter; ++t) {
    // Allocations.
    double cnt[2] = {0, 0}, sum[2] = {0, 0};
    const double lw[2] = {std::log(pi), std::log1p(-pi)};
    for (std::size_t i = 0; i < n; ++i) {
      const double a = lw[0] + log_normal_pdf(x[i], mu[0], s[0]);
      const double b = lw[1] + log_normal_pdf(x[i], mu[1], s[1]);
      const double p1 = 1.0 / (1.0 + std::exp(b - a));
      z[i] = rng.uniform() < p1 ? 0 : 1;
      cnt[z[i]] += 1.0;
      sum[z[i]] += x[i];
    }
    pi = rng.beta(0.5 * pr.a0 + cnt[0], 0.5 * pr.a0 + cnt[1]);
    pi = std::clamp(pi, 1e-300, 1.0 - 1e-16);

    double ss[2] = {0, 0};
    double xbar[2] = {0, 0};
    for (int j = 0; j < 2; ++j) xbar[j] = cnt[j] > 0 ? sum[j] / cnt[j] : 0.0;
    for (std::size_t i = 0; i < n; ++i) ss[z[i]] += (x[i] - xbar[z[i]]) * (x[i] - xbar[z[i]]);

    // Normal-inverse-gamma block per component; an empty component draws
    // from its prior.
    bool empty = false;
    for (int j = 0; j < 2; ++j) {
      if (cnt[j] == 0) empty = true;
      const double kappa = pr.d2[j] + cnt[j];
      const double mean = (pr.d2[j] * pr.c[j] + sum[j]) / kappa;
      const double d = xbar[j] - pr.c[j];
      const double shape = pr.e[j] + 0.5 * cnt[j];
      const double scale = pr.f[j] + 0.5 * ss[j] + 0.5 * pr.d2[j] * cnt[j] * d * d / kappa;
      s[j] = scale / rng.gamma(shape);
      mu[j] = rng.normal(mean, std::sqrt(s[j] / kappa));
    }
    if (t >= burn) {
      if (empty) ++out.empty_component_draws;
      const auto row = static_cast<Eigen::Index>(t - burn);
      const bool swap = mu[0] > mu[1];
      const int a = swap ? 1 : 0, b = swap ? 0 : 1;
      out.samples(row, MixtureModel::kPi) = swap ? 1.0 - pi : pi;
      out.samples(row, MixtureModel::kMu1) = mu[a];
      out.samples(row, MixtureModel::kMu2) = mu[b];
      out.samples(row, MixtureModel::kS1) = s[a];
      out.samples(row, MixtureModel::kS2) = s[b];
    }
  }
  detail::summarize(out, reference_variance);
  return out;
}

VBApproximation mixture_vb(double pi_a, double pi_b, double m1, double kappa1, double m2, double kappa2,
                           double shape1, double scale1, double shape2, double scale2) {
  return VBApproximation({MarginalFamily::beta(pi_a, pi_b),
                          MarginalFamily::normal_given_scale(m1, kappa1, MixtureModel::kS1),
                          MarginalFamily::normal_given_scale(m2, kappa2, MixtureModel::kS2),
                          MarginalFamily::inverse_gamma(shape1, scale1), MarginalFamily::inverse_gamma(shape2, scale2)});
}

}  // namespace vbdiag::models
