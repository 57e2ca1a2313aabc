#include "vbdiag/optim.hpp"

#include <cmath>
#include <limits>

namespace vbdiag::optim {

Result minimize_bfgs(const Objective& f, Vector x0, const Options& options) {
  const auto n = x0.size();
  Result res;
  res.x = std::move(x0);
  res.gradient.resize(n);
  res.value = f(res.x, &res.gradient);
  if (!std::isfinite(res.value) || !res.gradient.allFinite()) {
    res.stalled = true;
    return res;
  }

  Matrix hinv = Matrix::Identity(n, n);
  Vector g_new(n);
  bool scaled = false;
  for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
    if (res.gradient.lpNorm<Eigen::Infinity>() < options.gradient_tol) {
      res.converged = true;
      return res;
    }
    Vector dir = -hinv * res.gradient;
    double slope = res.gradient.dot(dir);
    if (!(slope < 0.0)) {
      // Lost descent; restart from steepest descent.
      hinv.setIdentity();
      dir = -res.gradient;
      slope = -res.gradient.squaredNorm();
    }

    double step = 1.0;
    double f_new = std::numeric_limits<double>::infinity();
    Vector x_new(n);
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      x_new = res.x + step * dir;
      f_new = f(x_new, &g_new);
      if (std::isfinite(f_new) && g_new.allFinite() && f_new <= res.value + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.stalled = true;
      return res;
    }

    const Vector s = x_new - res.x;
    const Vector y = g_new - res.gradient;
    const double sy = s.dot(y);
    const bool no_progress = std::abs(f_new - res.value) <= 4.0 * std::numeric_limits<double>::epsilon() *
                                                                 std::max(1.0, std::abs(res.value));
    res.x = x_new;
    res.value = f_new;
    res.gradient = g_new;
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        hinv *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Vector hy = hinv * y;
      hinv += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
    }
    if (no_progress && s.lpNorm<Eigen::Infinity>() <= 1e-15 * std::max(1.0, res.x.lpNorm<Eigen::Infinity>())) {
      res.stalled = true;
      res.converged = res.gradient.lpNorm<Eigen::Infinity>() < options.gradient_tol;
      return res;
    }
  }
  res.converged = res.gradient.lpNorm<Eigen::Infinity>() < options.gradient_tol;
  return res;
}

Objective with_numeric_gradient(std::function<double(const Vector&)> f) {
  return [f = std::move(f)](const Vector& x, Vector* grad) {
    const double v = f(x);
    if (grad != nullptr) {
      grad->resize(x.size());
      const double base = std::cbrt(std::numeric_limits<double>::epsilon());
      Vector xx = x;
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = base * std::max(1.0, std::abs(x[i]));
        xx[i] = x[i] + h;
        const double fp = f(xx);
        xx[i] = x[i] - h;
        const double fm = f(xx);
        xx[i] = x[i];
        (*grad)[i] = (fp - fm) / (2.0 * h);
      }
    }
    return v;
  };
}

}  // namespace vbdiag::optim
