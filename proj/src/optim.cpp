#include "uqvae/optim.hpp"

#include <cmath>
#include <deque>
#include <limits>

#include "uqvae/error.hpp"

namespace uqvae {

namespace {

double safe_eval(const Objective& fn, const Vec& x, Vec& g) {
  try {
    const double f = fn(x, g);
    if (!std::isfinite(f) || !g.allFinite()) return std::numeric_limits<double>::infinity();
    return f;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigError || e.kind() == ErrorKind::DimensionMismatch) throw;
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace

LbfgsResult lbfgs_minimize(const Objective& fn, Vec x0, const LbfgsOptions& opt) {
  LbfgsResult res;
  res.x = std::move(x0);
  res.grad = Vec::Zero(res.x.size());
  res.f = safe_eval(fn, res.x, res.grad);
  if (!std::isfinite(res.f)) fail(ErrorKind::NoConvergence, "lbfgs: objective not finite at start");

  std::deque<Vec> s_hist, y_hist;
  std::deque<double> rho_hist;
  Vec g_new(res.x.size());

  for (int it = 0; it < opt.max_iter; ++it) {
    res.iterations = it;
    if (res.grad.lpNorm<Eigen::Infinity>() <= opt.grad_tol) {
      res.converged = true;
      return res;
    }
    // Two-loop recursion.
    Vec q = res.grad;
    std::vector<double> alpha(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    double gamma = 1.0;
    if (!s_hist.empty()) gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    Vec dir = gamma * q;
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(dir);
      dir += s_hist[i] * (alpha[i] - beta);
    }
    dir = -dir;
    double slope = dir.dot(res.grad);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      dir = -res.grad;
      slope = -res.grad.squaredNorm();
    }

    double step = 1.0;
    if (s_hist.empty()) step = std::min(1.0, 1.0 / res.grad.lpNorm<Eigen::Infinity>());
    Vec x_new;
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int bt = 0; bt < opt.max_backtracks; ++bt) {
      x_new = res.x + step * dir;
      f_new = safe_eval(fn, x_new, g_new);
      if (std::isfinite(f_new) && f_new <= res.f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!s_hist.empty()) {
        // Memory may be stale; retry once along steepest descent.
        s_hist.clear();
        y_hist.clear();
        rho_hist.clear();
        continue;
      }
      res.converged = res.grad.lpNorm<Eigen::Infinity>() <= 1e3 * opt.grad_tol;
      return res;
    }

    Vec s = x_new - res.x;
    Vec yv = g_new - res.grad;
    const double sy = s.dot(yv);
    const double f_old = res.f;
    res.x = std::move(x_new);
    res.f = f_new;
    res.grad = g_new;
    if (sy > 1e-16 * s.norm() * yv.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(yv));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opt.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    if (std::abs(f_old - res.f) <= opt.rel_f_tol * std::max(1.0, std::abs(res.f)) &&
        res.grad.lpNorm<Eigen::Infinity>() <= 1e3 * opt.grad_tol) {
      res.converged = true;
      return res;
    }
  }
  res.iterations = opt.max_iter;
  return res;
}

}  // namespace uqvae
