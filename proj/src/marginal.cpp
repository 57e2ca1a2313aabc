#include "vbdiag/marginal.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "vbdiag/errors.hpp"

namespace vbdiag {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int kMaxNewton = 100;
constexpr double kGradTol = 1e-8;
constexpr double kDecrementTol = 1e-12;
constexpr double kRhoClamp = 0.999;

// Column-major upper pair order: (0,1),(0,2),(1,2),(0,3),...
template <class F>
void for_each_pair(std::size_t p, F&& f) {
  std::size_t k = 0;
  for (std::size_t j = 1; j < p; ++j)
    for (std::size_t i = 0; i < j; ++i) f(i, j, k++);
}

}  // namespace

std::size_t covariance_unknowns(std::size_t p) { return p * (p + 1) / 2; }

Matrix moment_design(const std::vector<Vector>& directions) {
  require(!directions.empty(), "InvalidArgument", "no directions");
  const auto p = static_cast<std::size_t>(directions.front().size());
  Matrix x(static_cast<Eigen::Index>(directions.size()), static_cast<Eigen::Index>(covariance_unknowns(p)));
  for (std::size_t k = 0; k < directions.size(); ++k) {
    const auto& a = directions[k];
    const auto row = static_cast<Eigen::Index>(k);
    for (std::size_t i = 0; i < p; ++i) x(row, static_cast<Eigen::Index>(i)) = a[i] * a[i];
    for_each_pair(p, [&](std::size_t i, std::size_t j, std::size_t c) {
      x(row, static_cast<Eigen::Index>(p + c)) = 2.0 * a[i] * a[j];
    });
  }
  return x;
}

DirectionSet::DirectionSet(std::vector<Vector> directions, bool full_covariance) : directions_(std::move(directions)) {
  require(!directions_.empty(), "InvalidArgument", "direction set is empty");
  const auto p = directions_.front().size();
  require(p >= 1, "InvalidArgument", "directions must have dimension >= 1");
  for (const auto& a : directions_) {
    require(a.size() == p, "DimensionMismatch", "directions differ in dimension");
    require(a.allFinite() && a.squaredNorm() > 0.0, "InvalidArgument", "direction must be finite and nonzero");
  }
  if (!full_covariance) return;
  Matrix x = moment_design(directions_);
  // Rank is invariant under column scaling; normalizing keeps the
  // threshold meaningful when coordinates have very different scales.
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double norm = x.col(c).norm();
    if (norm > 0.0) x.col(c) /= norm;
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  qr.setThreshold(1e-10);
  const auto needed = static_cast<Eigen::Index>(covariance_unknowns(static_cast<std::size_t>(p)));
  if (qr.rank() < needed)
    throw Error("RankDeficient", "direction design has rank " + std::to_string(qr.rank()) + ", need " +
                                     std::to_string(needed));
}

DirectionSet default_directions(std::size_t p, bool overdetermined) {
  require(p >= 1, "InvalidArgument", "dimension must be positive");
  std::vector<Vector> dirs;
  for (std::size_t i = 0; i < p; ++i) dirs.push_back(Vector::Unit(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(i)));
  const double h = 1.0 / std::sqrt(2.0);
  for_each_pair(p, [&](std::size_t i, std::size_t j, std::size_t) {
    Vector a = Vector::Zero(static_cast<Eigen::Index>(p));
    a[i] = h;
    a[j] = h;
    dirs.push_back(a);
  });
  if (overdetermined) {
    for_each_pair(p, [&](std::size_t i, std::size_t j, std::size_t) {
      Vector a = Vector::Zero(static_cast<Eigen::Index>(p));
      a[i] = h;
      a[j] = -h;
      dirs.push_back(a);
    });
  }
  return DirectionSet(std::move(dirs));
}

TKKProfile::TKKProfile(TargetModel model, Vector alpha, Vector start)
    : model_(std::move(model)), alpha_(std::move(alpha)), start_(std::move(start)) {
  const auto p = static_cast<Eigen::Index>(model_.dim);
  require(alpha_.size() == p && start_.size() == p, "DimensionMismatch", "profile direction/start dimension");
  const double a2 = alpha_.squaredNorm();
  require(a2 > 0.0 && std::isfinite(a2), "InvalidArgument", "profile direction must be nonzero");
  offset_ = alpha_ / a2;
  log_alpha_norm2_ = std::log(a2);
  if (p > 1) {
    const Eigen::HouseholderQR<Matrix> qr(alpha_);
    const Matrix q = qr.householderQ();
    basis_ = q.rightCols(p - 1);
  } else {
    basis_.resize(1, 0);
  }
}

bool TKKProfile::maximize(Vector& z, double omega, double& value, Matrix& neg_hess) const {
  const auto m = basis_.cols();
  Vector theta = point(omega, z);
  value = model_.log_density(theta);
  if (!std::isfinite(value)) return false;
  if (m == 0) {
    neg_hess.resize(0, 0);
    return true;
  }
  for (int it = 0; it < kMaxNewton; ++it) {
    Vector grad;
    Matrix hess;
    try {
      grad = model_.gradient_at(theta);
      hess = model_.hessian_at(theta);
    } catch (const Error& e) {
      // Difference stencil crossed the support boundary: this start has run
      // into the edge, let the caller try the next one.
      if (e.code() != "NonFiniteEvaluation") throw;
      return false;
    }
    if (!grad.allFinite() || !hess.allFinite()) return false;
    const Vector g = basis_.transpose() * grad;
    neg_hess = -(basis_.transpose() * hess * basis_);
    neg_hess = 0.5 * (neg_hess + neg_hess.transpose());

    Eigen::LLT<Matrix> llt(neg_hess);
    const bool concave = llt.info() == Eigen::Success;
    if (concave && g.lpNorm<Eigen::Infinity>() < kGradTol) return true;
    if (!concave) {
      // Shift until positive definite: a damped ascent direction.
      const double lo = Eigen::SelfAdjointEigenSolver<Matrix>(neg_hess, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
      const double scale = std::max(1e-8, neg_hess.diagonal().cwiseAbs().maxCoeff());
      llt.compute(neg_hess + (std::abs(lo) + 1e-6 * scale) * Matrix::Identity(m, m));
      if (llt.info() != Eigen::Success) return false;
    }
    const Vector step = llt.solve(g);
    const double decrement = g.dot(step);
    if (concave && decrement < kDecrementTol) return true;

    double t = 1.0;
    bool moved = false;
    for (int k = 0; k < 50; ++k, t *= 0.5) {
      const Vector zn = z + t * step;
      const Vector tn = point(omega, zn);
      const double vn = model_.log_density(tn);
      if (std::isfinite(vn) && vn >= value + 1e-4 * t * decrement) {
        z = zn;
        theta = tn;
        value = vn;
        moved = true;
        break;
      }
    }
    if (!moved) return concave && decrement < 1e-8;
  }
  return false;
}

double TKKProfile::operator()(double omega) {
  ++evaluations_;
  const auto m = basis_.cols();
  auto feasible = [&](const Vector& z) { return std::isfinite(model_.log_density(point(omega, z))); };

  std::vector<Vector> starts;
  if (has_last_) starts.push_back(basis_.transpose() * (last_theta_ + (omega - last_omega_) * offset_));
  starts.push_back(basis_.transpose() * start_);

  bool any_feasible = false;
  for (auto& z : starts) {
    if (!feasible(z)) continue;
    any_feasible = true;
    double value = 0.0;
    Matrix neg_hess;
    if (!maximize(z, omega, value, neg_hess)) continue;
    double log_det = 0.0;
    if (m > 0) {
      const Eigen::LLT<Matrix> llt(neg_hess);
      log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    }
    last_theta_ = point(omega, z);
    last_omega_ = omega;
    has_last_ = true;
    return value - 0.5 * (log_det + log_alpha_norm2_);
  }
  if (!any_feasible) return kNegInf;
  throw Error("ProfileDivergence", "constrained maximization failed at omega = " + std::to_string(omega) +
                                       " (multimodal profile or support boundary)");
}

double tkk_log_marginal(const TargetModel& model, const Vector& alpha, double omega, const Vector& start) {
  TKKProfile profile(model, alpha, start);
  return profile(omega);
}

double tkk_log_marginal(const TargetModel& model, const Vector& alpha, double omega) {
  return tkk_log_marginal(model, alpha, omega, Vector::Zero(static_cast<Eigen::Index>(model.dim)));
}

ProjectionRead projection_variance(const TargetModel& model, const VBApproximation& vb, const Vector& alpha,
                                   const EARTable& table, std::size_t n, const RngPolicy& rng, double skew_scale) {
  require(vb.dim() == model.dim, "DimensionMismatch", "VB and model dimensions differ");
  ProjectionRead out;
  out.alpha = alpha;
  out.center = alpha.dot(vb.mean());
  out.proposal_variance = alpha.cwiseAbs2().dot(vb.variance());
  TKKProfile profile(model, alpha, vb.mean());
  out.read = vbaimh_variance([&profile](double w) { return profile(w); }, out.center, out.proposal_variance, table, n,
                             rng, skew_scale);
  return out;
}

CovarianceEstimate solve_moment_system(const DirectionSet& directions, const std::vector<double>& l_values,
                                       const VBApproximation& vb) {
  const std::size_t p = directions.dim();
  require(vb.dim() == p, "DimensionMismatch", "VB and direction dimensions differ");
  require(l_values.size() == directions.size(), "DimensionMismatch", "one reading per direction required");

  const Vector sd = vb.variance().cwiseSqrt();
  std::vector<Vector> standardized;
  for (const auto& a : directions.directions()) standardized.push_back(a.cwiseProduct(sd));
  const Matrix x = moment_design(standardized);
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  qr.setThreshold(1e-10);
  const auto needed = static_cast<Eigen::Index>(covariance_unknowns(p));
  if (qr.rank() < needed) throw Error("RankDeficient", "direction design is rank deficient");
  const Vector l = Eigen::Map<const Vector>(l_values.data(), static_cast<Eigen::Index>(l_values.size()));
  const Vector u = qr.solve(l);

  const Vector s2 = u.head(static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < s2.size(); ++i) {
    if (!(s2[i] > 0.0))
      throw Error("NegativeVariance", "least-squares variance for coordinate " + std::to_string(i + 1) +
                                          " is not positive");
  }
  Matrix rho = Matrix::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  bool clamped = false;
  for_each_pair(p, [&](std::size_t i, std::size_t j, std::size_t c) {
    double r = u[static_cast<Eigen::Index>(p + c)] / std::sqrt(s2[i] * s2[j]);
    if (std::abs(r) > kRhoClamp) {
      r = std::copysign(kRhoClamp, r);
      clamped = true;
    }
    rho(i, j) = rho(j, i) = r;
  });
  auto est = CovarianceEstimate::from_parts(s2.cwiseProduct(vb.variance()), rho, vb.variance(), MethodTag::Marginal);
  est.rho_clamped = clamped;
  return est;
}

MarginalReport run_marginal(const TargetModel& model, const VBApproximation& vb, const EARTable& table,
                            const RngPolicy& rng, const MarginalOptions& options,
                            const std::vector<Vector>& standardized_directions) {
  const std::size_t p = model.dim;
  require(vb.dim() == p, "DimensionMismatch", "VB and model dimensions differ");
  MarginalReport report;
  report.standardized_directions = standardized_directions.empty()
                                       ? default_directions(p, options.overdetermined).directions()
                                       : DirectionSet(standardized_directions).directions();
  const Vector inv_sd = vb.variance().cwiseSqrt().cwiseInverse();
  std::vector<Vector> alphas;
  for (const auto& a : report.standardized_directions) alphas.push_back(a.cwiseProduct(inv_sd));

  report.reads.resize(alphas.size());
  for_each_job(options.execution, alphas.size(), [&](std::size_t k) {
    report.reads[k] =
        projection_variance(model, vb, alphas[k], table, options.chain_length, rng.substream(k), options.skew_scale);
  });

  std::vector<double> l;
  for (const auto& r : report.reads) {
    l.push_back(r.l());
    report.non_normal = report.non_normal || r.read.diagnosis.non_normal;
  }
  report.estimate = solve_moment_system(DirectionSet(alphas), l, vb);
  return report;
}

void write_projection_csv(std::ostream& out, const std::vector<ProjectionRead>& reads) {
  if (reads.empty()) return;
  const auto p = reads.front().alpha.size();
  for (Eigen::Index i = 0; i < p; ++i) out << "alpha_" << (i + 1) << ',';
  out << "acceptance,l\n" << std::setprecision(10);
  for (const auto& r : reads) {
    for (Eigen::Index i = 0; i < p; ++i) out << r.alpha[i] << ',';
    out << r.read.diagnosis.first_rate << ',' << r.l() << '\n';
  }
}

}  // namespace vbdiag
