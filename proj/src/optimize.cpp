#include "anomshap/optimize.hpp"

#include <cmath>
#include <deque>

#include "anomshap/errors.hpp"

namespace anomshap {

LbfgsResult minimize_lbfgs(const Objective& f, Vector x0, const LbfgsOptions& options) {
  LbfgsResult out;
  out.x = std::move(x0);
  if (out.x.size() == 0) {
    Vector g;
    out.value = f(out.x, g);
    out.converged = true;
    return out;
  }
  Vector grad(out.x.size());
  out.value = f(out.x, grad);
  if (!std::isfinite(out.value) || !grad.allFinite())
    throw OptimizationError("objective is not finite at the starting point");
  out.gradient_norm = grad.norm();

  std::deque<Vector> s_hist, y_hist;
  std::deque<double> rho_hist;
  Vector x_trial(out.x.size()), g_trial(out.x.size());

  while (out.iterations < options.max_iter) {
    if (out.gradient_norm <= options.gradient_tolerance) {
      out.converged = true;
      break;
    }
    // Two-loop recursion for the quasi-Newton direction.
    Vector q = grad;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t i = s_hist.size(); i-- > 0;) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    if (!s_hist.empty()) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(q);
      q += (alpha[i] - beta) * s_hist[i];
    }
    Vector direction = -q;
    double slope = grad.dot(direction);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      direction = -grad;
      slope = -grad.squaredNorm();
    }

    // First iteration without curvature information: scale to unit length.
    double step = s_hist.empty() ? std::min(1.0, 1.0 / direction.norm()) : 1.0;
    bool accepted = false;
    bool saw_finite = false;
    double f_trial = 0.0;
    for (std::size_t bt = 0; bt < options.max_backtracks; ++bt, step *= 0.5) {
      x_trial = out.x + step * direction;
      f_trial = f(x_trial, g_trial);
      if (!std::isfinite(f_trial) || !g_trial.allFinite()) continue;
      saw_finite = true;
      if (f_trial <= out.value + options.armijo_c * step * slope && f_trial < out.value) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!saw_finite) throw OptimizationError("objective stayed non-finite along the search direction");
      break;  // no further decrease representable; current point is kept
    }

    Vector s = x_trial - out.x;
    Vector y = g_trial - grad;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (s_hist.size() > options.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    out.x = x_trial;
    out.value = f_trial;
    grad = g_trial;
    out.gradient_norm = grad.norm();
    ++out.iterations;
  }
  if (out.gradient_norm <= options.gradient_tolerance) out.converged = true;
  return out;
}

}  // namespace anomshap
