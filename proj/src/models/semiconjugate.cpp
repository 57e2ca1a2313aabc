#include <cmath>
#include <limits>
#include <numeric>

#include "sample_moments.hpp"
#include "vbdiag/errors.hpp"
#include "vbdiag/models.hpp"

namespace vbdiag::models {

DataSummary DataSummary::from(std::span<const double> y) {
  DataSummary s;
  s.n = y.size();
  if (s.n == 0) return s;
  s.mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(s.n);
  for (double v : y) s.centered_ss += (v - s.mean) * (v - s.mean);
  return s;
}

SemiConjugateNormalModel::SemiConjugateNormalModel(DataSummary data, SemiConjugatePrior prior)
    : data_(data), prior_(prior) {
  require(prior_.alpha > 0 && prior_.beta > 0 && prior_.eta2 > 0, "InvalidModel",
          "semi-conjugate hyperparameters alpha, beta, eta2 must be positive");
  require(data_.centered_ss >= 0.0, "InvalidModel", "centered sum of squares must be non-negative");
}

double SemiConjugateNormalModel::log_posterior(double mu, double sigma2) const {
  if (!(sigma2 > 0.0) || !std::isfinite(mu) || !std::isfinite(sigma2)) return -std::numeric_limits<double>::infinity();
  const double n = static_cast<double>(data_.n);
  const double d = mu - data_.mean;
  const double scale = 0.5 * data_.centered_ss + prior_.beta + 0.5 * n * d * d;
  const double e = mu - prior_.gamma;
  return -(0.5 * n + prior_.alpha + 1.0) * std::log(sigma2) - scale / sigma2 - e * e / (2.0 * prior_.eta2);
}

Vector SemiConjugateNormalModel::gradient(double mu, double sigma2) const {
  const double n = static_cast<double>(data_.n);
  const double d = mu - data_.mean;
  const double scale = 0.5 * data_.centered_ss + prior_.beta + 0.5 * n * d * d;
  Vector g(2);
  g[0] = -n * d / sigma2 - (mu - prior_.gamma) / prior_.eta2;
  g[1] = -(0.5 * n + prior_.alpha + 1.0) / sigma2 + scale / (sigma2 * sigma2);
  return g;
}

TargetModel SemiConjugateNormalModel::as_model() const {
  auto self = std::make_shared<const SemiConjugateNormalModel>(*this);
  TargetModel m;
  m.dim = 2;
  m.log_density = [self](const Vector& x) { return self->log_posterior(x[0], x[1]); };
  m.gradient = [self](const Vector& x) { return self->gradient(x[0], x[1]); };
  m.hessian = [self](const Vector& x) -> Matrix {
    const double n = static_cast<double>(self->data().n);
    const auto& pr = self->prior();
    const double d = x[0] - self->data().mean;
    const double s = x[1];
    const double scale = 0.5 * self->data().centered_ss + pr.beta + 0.5 * n * d * d;
    Matrix h(2, 2);
    h(0, 0) = -n / s - 1.0 / pr.eta2;
    h(0, 1) = h(1, 0) = n * d / (s * s);
    h(1, 1) = (0.5 * n + pr.alpha + 1.0) / (s * s) - 2.0 * scale / (s * s * s);
    return h;
  };
  return m;
}

CaviResult cavi_semiconjugate(const SemiConjugateNormalModel& model, double tol, int max_iterations) {
  const auto& pr = model.prior();
  const auto& data = model.data();
  const double n = static_cast<double>(data.n);

  const double a = pr.alpha + 0.5 * n;
  double m = data.n > 0 ? data.mean : pr.gamma;
  double v = pr.eta2;
  double b = pr.beta;
  int it = 0;
  for (; it < max_iterations; ++it) {
    const double d = m - data.mean;
    const double b_new = pr.beta + 0.5 * data.centered_ss + 0.5 * n * (d * d + v);
    const double inv_s = a / b_new;  // E[1 / sigma^2]
    const double v_new = 1.0 / (n * inv_s + 1.0 / pr.eta2);
    const double m_new = v_new * (n * data.mean * inv_s + pr.gamma / pr.eta2);
    const double moved = std::max(std::abs(m_new - m), std::abs(b_new / (a - 1.0) - b / (a - 1.0)));
    m = m_new;
    v = v_new;
    b = b_new;
    if (moved < tol) {
      ++it;
      break;
    }
  }
  require(a > 2.0, "InvalidModel", "q(sigma^2) shape must exceed 2 for a finite variance");
  return {VBApproximation({MarginalFamily::normal(m, v), MarginalFamily::inverse_gamma(a, b)}), it};
}

GibbsResult gibbs_semiconjugate(const SemiConjugateNormalModel& model, std::size_t n_iter, const RngPolicy& policy,
                                const Vector& reference_variance) {
  require(n_iter >= 10000, "InvalidArgument", "Gibbs run needs at least 10000 iterations");
  const auto& pr = model.prior();
  const auto& data = model.data();
  const double n = static_cast<double>(data.n);
  const double shape = pr.alpha + 0.5 * n;

  Rng rng(policy);
  const std::size_t burn = n_iter / 2;
  GibbsResult out;
  out.samples.resize(static_cast<Eigen::Index>(n_iter - burn), 2);

  double mu = data.n > 0 ? data.mean : pr.gamma;
  double sigma2 = pr.beta / (pr.alpha + 1.0);
  for (std::size_t t = 0; t < n_iter; ++t) {
    const double prec = n / sigma2 + 1.0 / pr.eta2;
    const double mean = (n * data.mean / sigma2 + pr.gamma / pr.eta2) / prec;
    mu = rng.normal(mean, 1.0 / std::sqrt(prec));
    const double d = mu - data.mean;
    const double scale = pr.beta + 0.5 * data.centered_ss + 0.5 * n * d * d;
    sigma2 = scale / rng.gamma(shape);
    if (t >= burn) {
      const auto row = static_cast<Eigen::Index>(t - burn);
      out.samples(row, 0) = mu;
      out.samples(row, 1) = sigma2;
    }
  }
  detail::summarize(out, reference_variance);
  return out;
}

}  // namespace vbdiag::models
