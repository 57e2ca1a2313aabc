#include "vbdiag/stepwise.hpp"

#include <cmath>

#include "vbdiag/errors.hpp"

namespace vbdiag {
namespace {

constexpr double kResidualTol = 1e-8;
constexpr int kMaxIterations = 200;
constexpr double kPdFloor = 1e-6;

Matrix rho_from(const Vector& x, std::size_t p) {
  Matrix rho = Matrix::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  std::size_t k = 0;
  for (const auto& [i, j] : correlation_pairs(p)) {
    rho(i, j) = rho(j, i) = x[static_cast<Eigen::Index>(k++)];
  }
  return rho;
}

bool positive_definite(const Matrix& m) { return Eigen::LLT<Matrix>(m).info() == Eigen::Success; }

Vector residual(const Vector& x, const Vector& r, std::size_t p) { return partial_correlations(rho_from(x, p)) - r; }

Matrix jacobian(const Vector& x, const Vector& r, std::size_t p) {
  const auto m = x.size();
  Matrix j(m, m);
  for (Eigen::Index c = 0; c < m; ++c) {
    const double h = 1e-7;
    Vector up = x, dn = x;
    up[c] += h;
    dn[c] -= h;
    j.col(c) = (residual(up, r, p) - residual(dn, r, p)) / (2.0 * h);
  }
  return j;
}

// Nearest correlation matrix by eigenvalue clipping and rescaling.
Matrix clip_to_pd(const Matrix& rho) {
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(rho);
  const Vector lam = eig.eigenvalues().cwiseMax(kPdFloor);
  Matrix m = eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
  const Vector d = m.diagonal().cwiseSqrt().cwiseInverse();
  m = d.asDiagonal() * m * d.asDiagonal();
  m.diagonal().setOnes();
  return 0.5 * (m + m.transpose());
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> correlation_pairs(std::size_t p) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t j = 1; j < p; ++j)
    for (std::size_t i = 0; i < j; ++i) pairs.emplace_back(i, j);
  return pairs;
}

ScaleTransform scale_transform(const VBApproximation& vb) {
  require((vb.variance().array() > 0.0).all(), "InvalidArgument", "VB variances must be positive");
  ScaleTransform t;
  t.q = vb.variance().cwiseSqrt().cwiseInverse();
  t.mu_s = t.q.cwiseProduct(vb.mean());
  return t;
}

VarianceRead conditional_variance_read(const TargetModel& model, const VBApproximation& vb, std::size_t i,
                                       const EARTable& table, std::size_t n, const RngPolicy& rng, double skew_scale) {
  require(vb.dim() == model.dim && i < model.dim, "DimensionMismatch", "coordinate index out of range");
  const auto t = scale_transform(vb);
  const auto idx = static_cast<Eigen::Index>(i);
  const double qi = t.q[idx];
  Vector theta = vb.mean();
  auto slice = [&](double y) {
    theta[idx] = y / qi;
    return model.log_density(theta);
  };
  return vbaimh_variance(slice, t.mu_s[idx], 1.0, table, n, rng, skew_scale);
}

PairRead rotated_pair_reads(const TargetModel& model, const VBApproximation& vb, const Vector& m2, std::size_t i,
                            std::size_t j, const EARTable& table, std::size_t n, const RngPolicy& rng,
                            double skew_scale) {
  require(vb.dim() == model.dim && m2.size() == static_cast<Eigen::Index>(model.dim), "DimensionMismatch",
          "pair read dimensions");
  require(i < j && j < model.dim, "InvalidArgument", "pair must satisfy i < j < p");
  require((m2.array() > 0.0).all(), "InvalidArgument", "conditional variance reads must be positive");
  const auto t = scale_transform(vb);
  const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(j);
  // theta_k = Z_k m_k / q_k.
  const double to_theta_a = std::sqrt(m2[a]) / t.q[a];
  const double to_theta_b = std::sqrt(m2[b]) / t.q[b];
  const double za = t.mu_s[a] / std::sqrt(m2[a]);
  const double zb = t.mu_s[b] / std::sqrt(m2[b]);
  const double h = 1.0 / std::sqrt(2.0);
  const double v1_mean = h * (za + zb);
  const double v2_mean = h * (zb - za);

  Vector theta = vb.mean();
  auto at = [&](double v1, double v2) {
    theta[a] = h * (v1 - v2) * to_theta_a;
    theta[b] = h * (v1 + v2) * to_theta_b;
    return model.log_density(theta);
  };
  PairRead out;
  out.i = i;
  out.j = j;
  out.first = vbaimh_variance([&](double v) { return at(v, v2_mean); }, v1_mean, 1.0, table, n, rng.substream(0),
                              skew_scale);
  out.second = vbaimh_variance([&](double v) { return at(v1_mean, v); }, v2_mean, 1.0, table, n, rng.substream(1),
                               skew_scale);
  return out;
}

double eigen_to_r(double lambda1, double lambda2) {
  require(lambda1 > 0.0 && lambda2 > 0.0, "InvalidArgument", "eigen-variance reads must be positive");
  // (l1/l2 - 1)/(l1/l2 + 1) rewritten so that swapping arguments negates exactly.
  return (lambda1 - lambda2) / (lambda1 + lambda2);
}

double partial_correlation_forward(const Matrix& rho, std::size_t i, std::size_t j) {
  const auto p = static_cast<std::size_t>(rho.rows());
  require(rho.cols() == rho.rows() && i < p && j < p && i != j, "InvalidArgument", "bad partial correlation pair");
  const Eigen::FullPivLU<Matrix> lu(rho);
  if (!lu.isInvertible()) throw Error("SingularMatrix", "correlation matrix is not invertible");
  const Matrix omega = lu.inverse();
  return -omega(i, j) / std::sqrt(omega(i, i) * omega(j, j));
}

Vector partial_correlations(const Matrix& rho) {
  const auto p = static_cast<std::size_t>(rho.rows());
  const Eigen::FullPivLU<Matrix> lu(rho);
  if (!lu.isInvertible()) throw Error("SingularMatrix", "correlation matrix is not invertible");
  const Matrix omega = lu.inverse();
  const auto pairs = correlation_pairs(p);
  Vector out(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [i, j] = pairs[k];
    out[static_cast<Eigen::Index>(k)] = -omega(i, j) / std::sqrt(omega(i, i) * omega(j, j));
  }
  return out;
}

CorrelationSolve solve_partial_correlation_system(const Vector& r, std::size_t p) {
  require(p >= 2 && r.size() == static_cast<Eigen::Index>(p * (p - 1) / 2), "DimensionMismatch",
          "need p(p-1)/2 partial correlations");
  require((r.array().abs() < 1.0).all(), "InvalidArgument", "partial correlations must lie in (-1, 1)");

  CorrelationSolve out;
  // Start at rho = r, shrunk toward the identity until positive definite.
  Vector x = r;
  while (!positive_definite(rho_from(x, p))) x *= 0.9;

  auto admissible = [&](const Vector& y) { return (y.array().abs() < 1.0).all() && positive_definite(rho_from(y, p)); };

  Vector f = residual(x, r, p);
  double fnorm = f.lpNorm<Eigen::Infinity>();
  int it = 0;
  for (; it < kMaxIterations && fnorm >= kResidualTol; ++it) {
    const Matrix jac = jacobian(x, r, p);
    const Eigen::FullPivLU<Matrix> lu(jac);
    if (!lu.isInvertible()) break;
    const Vector step = lu.solve(f);
    bool moved = false;
    for (double t = 1.0; t > 1e-10; t *= 0.5) {
      const Vector xn = x - t * step;
      if (!admissible(xn)) continue;
      const Vector fn = residual(xn, r, p);
      if (fn.lpNorm<Eigen::Infinity>() < fnorm) {
        x = xn;
        f = fn;
        fnorm = fn.lpNorm<Eigen::Infinity>();
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }

  if (fnorm >= kResidualTol) {
    out.used_fallback = true;
    double lambda = 1e-3;
    for (; it < 2 * kMaxIterations && fnorm >= kResidualTol; ++it) {
      const Matrix jac = jacobian(x, r, p);
      const Matrix jtj = jac.transpose() * jac;
      const Vector jtf = jac.transpose() * f;
      bool moved = false;
      for (int k = 0; k < 30; ++k, lambda *= 10.0) {
        const Matrix a = jtj + lambda * Matrix(jtj.diagonal().cwiseMax(1e-12).asDiagonal());
        const Vector xn = x - a.ldlt().solve(jtf);
        if (!admissible(xn)) continue;
        const Vector fn = residual(xn, r, p);
        if (fn.squaredNorm() < f.squaredNorm()) {
          x = xn;
          f = fn;
          fnorm = fn.lpNorm<Eigen::Infinity>();
          lambda = std::max(1e-12, lambda / 10.0);
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
  }
  // Residual below tolerance can still leave rho off by cond(J) * 1e-8;
  // a couple of full Newton steps cost little and reach rounding level.
  for (int polish = 0; polish < 2 && fnorm < kResidualTol && fnorm > 0.0; ++polish) {
    const Eigen::FullPivLU<Matrix> lu(jacobian(x, r, p));
    if (!lu.isInvertible()) break;
    const Vector xn = x - lu.solve(f);
    if (!admissible(xn)) break;
    const Vector fn = residual(xn, r, p);
    if (!(fn.lpNorm<Eigen::Infinity>() < fnorm)) break;
    x = xn;
    f = fn;
    fnorm = fn.lpNorm<Eigen::Infinity>();
  }
  out.iterations = it;
  out.residual = fnorm;
  if (fnorm >= kResidualTol)
    throw Error("NewtonDiverged",
                "partial correlation system did not converge; last residual " + std::to_string(fnorm));
  out.rho = rho_from(x, p);
  if (!positive_definite(out.rho)) {
    out.rho = clip_to_pd(out.rho);
    out.projected_to_pd = true;
  }
  return out;
}

CovarianceEstimate solve_stepwise(const StepwiseState& state, const VBApproximation& vb) {
  const auto p = static_cast<std::size_t>(state.m2.size());
  require(p >= 2 && vb.dim() == p, "DimensionMismatch", "stepwise state and VB disagree");
  require((state.m2.array() > 0.0).all(), "InvalidArgument", "m2 reads must be positive");
  const auto solved = solve_partial_correlation_system(state.r, p);
  const Matrix omega = solved.rho.inverse();
  const Vector s2 = state.m2.cwiseProduct(omega.diagonal());
  auto est = CovarianceEstimate::from_parts(s2.cwiseProduct(vb.variance()), solved.rho, vb.variance(),
                                            MethodTag::Stepwise);
  est.projected_to_pd = solved.projected_to_pd;
  return est;
}

StepwiseReport run_stepwise(const TargetModel& model, const VBApproximation& vb, const EARTable& table,
                            const RngPolicy& rng, const StepwiseOptions& options) {
  const std::size_t p = model.dim;
  require(p >= 2 && vb.dim() == p, "DimensionMismatch", "stepwise needs p >= 2 and matching VB");
  StepwiseReport report;
  auto& st = report.state;
  const auto t = scale_transform(vb);
  st.mu_s = t.mu_s;

  st.step1.resize(p);
  for_each_job(options.execution, p, [&](std::size_t i) {
    st.step1[i] =
        conditional_variance_read(model, vb, i, table, options.chain_length, rng.substream(i), options.skew_scale);
  });
  st.m2.resize(static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < p; ++i) st.m2[static_cast<Eigen::Index>(i)] = st.step1[i].variance;
  st.mu_ss = st.mu_s.cwiseQuotient(st.m2.cwiseSqrt());

  const auto pairs = correlation_pairs(p);
  st.step2.resize(pairs.size());
  for_each_job(options.execution, pairs.size(), [&](std::size_t k) {
    st.step2[k] = rotated_pair_reads(model, vb, st.m2, pairs[k].first, pairs[k].second, table, options.chain_length,
                                     rng.substream(p + k), options.skew_scale);
  });
  st.r.resize(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& pr = st.step2[k];
    st.lambda2.emplace_back(pr.first.variance, pr.second.variance);
    st.r[static_cast<Eigen::Index>(k)] = eigen_to_r(pr.first.variance, pr.second.variance);
  }

  for (const auto& s : st.step1) report.non_normal = report.non_normal || s.diagnosis.non_normal;
  for (const auto& s : st.step2)
    report.non_normal = report.non_normal || s.first.diagnosis.non_normal || s.second.diagnosis.non_normal;

  report.estimate = solve_stepwise(st, vb);
  return report;
}

}  // namespace vbdiag
