#include "vbdiag/affine.hpp"

#include <cmath>
#include <limits>

#include "vbdiag/errors.hpp"

namespace vbdiag {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMaxOutsideFraction = 0.01;

struct Layout {
  std::vector<std::pair<std::size_t, std::size_t>> lower;  // free off-diagonal entries
  std::size_t p = 0;
  std::size_t size() const { return lower.size() + 2 * p; }
  // x = [off-diagonals..., d_1..d_p, b_1..b_p]
  std::size_t diag(std::size_t k) const { return lower.size() + k; }
  std::size_t shift(std::size_t k) const { return lower.size() + p + k; }
};

Layout make_layout(const AffineStructure& s) {
  Layout l;
  l.p = s.dim;
  for (std::size_t i = 0; i < s.dim; ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (s.free_entry(i, j)) l.lower.emplace_back(i, j);
  return l;
}

Matrix a_tilde(const Layout& l, const Vector& x) {
  const auto p = static_cast<Eigen::Index>(l.p);
  Matrix a = Matrix::Zero(p, p);
  for (std::size_t k = 0; k < l.lower.size(); ++k) a(l.lower[k].first, l.lower[k].second) = x[k];
  for (std::size_t k = 0; k < l.p; ++k) a(k, k) = std::exp(x[l.diag(k)]);
  return a;
}

// Mean negative objective over the standardized draws xi (n x p).
class Objective {
 public:
  Objective(const TargetModel& model, const Vector& mu, const Vector& sd, Matrix xi, Layout layout, Execution exec)
      : model_(model), mu_(mu), sd_(sd), xi_(std::move(xi)), layout_(std::move(layout)), exec_(exec) {}

  std::size_t n() const { return static_cast<std::size_t>(xi_.rows()); }

  // Count of draws outside the support at parameters x.
  std::size_t outside(const Vector& x, std::vector<bool>* mask = nullptr) const {
    const Matrix at = a_tilde(layout_, x);
    const Vector b = x.tail(static_cast<Eigen::Index>(layout_.p));
    std::vector<double> lp(n());
    parallel_for(exec_, n(), [&](std::size_t s) { lp[s] = model_.log_density(theta(at, b, s)); });
    std::size_t count = 0;
    if (mask) mask->assign(n(), false);
    for (std::size_t s = 0; s < n(); ++s) {
      if (!std::isfinite(lp[s])) {
        ++count;
        if (mask) (*mask)[s] = true;
      }
    }
    return count;
  }

  double operator()(const Vector& x, Vector* grad) const {
    const auto p = static_cast<Eigen::Index>(layout_.p);
    const auto m = static_cast<Eigen::Index>(layout_.size());
    const Matrix at = a_tilde(layout_, x);
    const Vector b = x.tail(p);

    // Per-draw kernel writes its own row; the reduction below is serial and
    // in index order, so the value is identical for any thread count.
    std::vector<double> lp(n());
    Matrix contrib;
    if (grad) contrib.resize(m, static_cast<Eigen::Index>(n()));
    parallel_for(exec_, n(), [&](std::size_t s) {
      const Vector th = theta(at, b, s);
      lp[s] = model_.log_density(th);
      if (!grad || !std::isfinite(lp[s])) return;
      const Vector g = model_.gradient_at(th).cwiseProduct(sd_);  // d log p / d(D^{-1} theta)
      auto col = contrib.col(static_cast<Eigen::Index>(s));
      const auto xi = xi_.row(static_cast<Eigen::Index>(s));
      for (std::size_t k = 0; k < layout_.lower.size(); ++k)
        col[static_cast<Eigen::Index>(k)] = g[layout_.lower[k].first] * xi[layout_.lower[k].second];
      for (std::size_t k = 0; k < layout_.p; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        col[static_cast<Eigen::Index>(layout_.diag(k))] = g[kk] * xi[kk] * at(kk, kk);
        col[static_cast<Eigen::Index>(layout_.shift(k))] = g[kk];
      }
    });

    double sum = 0.0;
    for (double v : lp) {
      if (!std::isfinite(v)) return kInf;
      sum += v;
    }
    const double inv_n = 1.0 / static_cast<double>(n());
    const double log_det = x.segment(static_cast<Eigen::Index>(layout_.lower.size()), p).sum();
    if (grad) {
      Vector total = Vector::Zero(m);
      for (std::size_t s = 0; s < n(); ++s) total += contrib.col(static_cast<Eigen::Index>(s));
      *grad = -inv_n * total;
      grad->segment(static_cast<Eigen::Index>(layout_.lower.size()), p).array() -= 1.0;
      if (!grad->allFinite()) return kInf;
    }
    return -(sum * inv_n + log_det);
  }

  Vector theta(const Matrix& at, const Vector& b, std::size_t s) const {
    return mu_ + sd_.cwiseProduct(at * xi_.row(static_cast<Eigen::Index>(s)).transpose() + b);
  }

  void drop(const std::vector<bool>& mask) {
    Matrix kept(xi_.rows(), xi_.cols());
    Eigen::Index r = 0;
    for (Eigen::Index s = 0; s < xi_.rows(); ++s)
      if (!mask[static_cast<std::size_t>(s)]) kept.row(r++) = xi_.row(s);
    xi_ = kept.topRows(r);
  }

 private:
  const TargetModel& model_;
  Vector mu_, sd_;
  Matrix xi_;
  Layout layout_;
  Execution exec_;
};

}  // namespace

std::string to_string(AffineClass cls) {
  switch (cls) {
    case AffineClass::LowerTriangular: return "lower_triangular";
    case AffineClass::Diagonal: return "diagonal";
    case AffineClass::Banded: return "banded";
  }
  return "unknown";
}

AffineClass affine_class_from_string(const std::string& name) {
  if (name == "lower_triangular" || name == "lower") return AffineClass::LowerTriangular;
  if (name == "diagonal") return AffineClass::Diagonal;
  if (name == "banded") return AffineClass::Banded;
  throw Error("InvalidConfig", "unknown affine structure '" + name + "'");
}

bool AffineStructure::free_entry(std::size_t i, std::size_t j) const {
  if (j >= i) return false;
  switch (cls) {
    case AffineClass::LowerTriangular: return true;
    case AffineClass::Diagonal: return false;
    case AffineClass::Banded: return i - j <= bandwidth;
  }
  return false;
}

std::size_t AffineStructure::free_parameters() const {
  std::size_t count = 2 * dim;
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < i; ++j) count += free_entry(i, j) ? 1 : 0;
  return count;
}

AffineFit fit_affine(const TargetModel& model, const VBApproximation& vb, const AffineStructure& structure,
                     const RngPolicy& rng, const AffineOptions& options) {
  require(structure.dim == model.dim && vb.dim() == model.dim, "DimensionMismatch",
          "affine structure, model and VB dimensions differ");
  require(options.restarts >= 1, "InvalidArgument", "need at least one restart");
  const Layout layout = make_layout(structure);
  const std::size_t free = structure.free_parameters();
  const std::size_t n = options.n_samples > 0 ? options.n_samples : std::max<std::size_t>(600, 10 * free);
  require(n >= 10 * free, "InvalidArgument",
          "affine fit needs at least 10 draws per free parameter (" + std::to_string(10 * free) + ")");

  const Vector mu = vb.mean();
  const Vector sd = vb.variance().cwiseSqrt();
  const Matrix eta = vb.sample(n, rng.substream(0));
  Matrix xi = (eta.rowwise() - mu.transpose()).array().rowwise() / sd.transpose().array();
  Objective objective(model, mu, sd, std::move(xi), layout, options.execution);

  Vector identity = Vector::Zero(static_cast<Eigen::Index>(layout.size()));
  std::vector<bool> mask;
  const std::size_t bad = objective.outside(identity, &mask);
  if (static_cast<double>(bad) > kMaxOutsideFraction * static_cast<double>(n))
    throw Error("SampleOutsideSupport", std::to_string(bad) + " of " + std::to_string(n) +
                                            " VB draws fall outside the model support");
  if (bad > 0) objective.drop(mask);

  AffineFit fit;
  fit.n_samples = objective.n();
  fit.dropped_samples = bad;
  fit.restarts = options.restarts;
  const double scale = static_cast<double>(objective.n());
  fit.identity_log_lik = -scale * objective(identity, nullptr);

  // Restarts run serially here; the per-draw kernel inside the objective is
  // where the threads go.
  optim::Result best;
  best.value = kInf;
  Rng jitter(rng.substream(1));
  for (int k = 0; k < options.restarts; ++k) {
    Vector x0 = identity;
    if (k > 0)
      for (Eigen::Index c = 0; c < x0.size(); ++c) x0[c] = options.jitter_sd * jitter.normal();
    const auto f = [&objective](const Vector& x, Vector* g) { return objective(x, g); };
    if (!std::isfinite(f(x0, nullptr))) continue;
    auto res = optim::minimize_bfgs(f, x0, options.optimizer);
    if (!std::isfinite(res.value) || !res.x.allFinite())
      throw Error("OptimizerDiverged", "affine objective became non-finite");
    if (res.value < best.value) {
      best = std::move(res);
      fit.best_restart = k;
    }
  }
  if (!std::isfinite(best.value)) throw Error("OptimizerDiverged", "no restart produced a finite objective");

  const Matrix at = a_tilde(layout, best.x);
  const Vector b = best.x.tail(static_cast<Eigen::Index>(layout.p));
  fit.A = sd.asDiagonal() * at * sd.cwiseInverse().asDiagonal();
  fit.B = mu + sd.cwiseProduct(b) - fit.A * mu;
  fit.log_lik = -scale * best.value;
  fit.converged = best.converged;
  fit.iterations = best.iterations;
  return fit;
}

CovarianceEstimate corrected_covariance(const AffineFit& fit, const VBApproximation& vb) {
  const Matrix cov = fit.A * vb.variance().asDiagonal() * fit.A.transpose();
  return CovarianceEstimate::from_covariance(0.5 * (cov + cov.transpose()), vb.variance(), MethodTag::Affine);
}

}  // namespace vbdiag
