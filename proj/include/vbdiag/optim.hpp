#pragma once

#include <functional>

#include "vbdiag/core.hpp"

namespace vbdiag::optim {

/// f(x, grad) returns the objective to MINIMIZE and, when grad is non-null,
/// writes the gradient. Infeasible points return +inf.
using Objective = std::function<double(const Vector& x, Vector* grad)>;

struct Options {
  double gradient_tol = 1e-6;  // sup-norm
  int max_iterations = 500;
};

struct Result {
  Vector x;
  double value = 0.0;
  Vector gradient;
  int iterations = 0;
  bool converged = false;  // sup-norm of gradient below tolerance
  bool stalled = false;    // line search could not make progress
};

/// BFGS with a backtracking Armijo line search on the inverse-Hessian
/// approximation. The first step is scaled by y's/y'y (Shanno scaling).
Result minimize_bfgs(const Objective& f, Vector x0, const Options& options = {});

/// Wraps a value-only objective with central-difference gradients.
Objective with_numeric_gradient(std::function<double(const Vector&)> f);

}  // namespace vbdiag::optim
