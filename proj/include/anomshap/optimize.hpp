#pragma once

#include <functional>

#include "anomshap/data.hpp"

namespace anomshap {

struct LbfgsOptions {
  std::size_t max_iter = 200;
  double gradient_tolerance = 1e-6;
  std::size_t history = 10;
  double armijo_c = 1e-4;
  std::size_t max_backtracks = 60;
};

struct LbfgsResult {
  Vector x;
  double value = 0.0;
  double gradient_norm = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Objective callback: returns f(x) and writes the gradient into `grad`.
using Objective = std::function<double(const Vector& x, Vector& grad)>;

/// Limited-memory BFGS with backtracking Armijo line search. Every accepted
/// step strictly decreases f, so the result never scores worse than x0.
/// Non-finite trial values shrink the step; OptimizationError is thrown if
/// f(x0) is not finite or no finite trial point can be found.
LbfgsResult minimize_lbfgs(const Objective& f, Vector x0, const LbfgsOptions& options = {});

}  // namespace anomshap
