#pragma once

#include <functional>

#include "uqvae/linalg.hpp"

namespace uqvae {

// Value and gradient at x. Return +inf (or throw uqvae::Error) to reject a point;
// the line search then backtracks.
using Objective = std::function<double(const Vec& x, Vec& grad)>;

struct LbfgsOptions {
  int max_iter = 2000;
  int history = 10;
  double grad_tol = 1e-10;  // on ‖g‖∞
  double rel_f_tol = 1e-15;
  int max_backtracks = 60;
};

struct LbfgsResult {
  Vec x;
  double f = 0.0;
  Vec grad;
  int iterations = 0;
  bool converged = false;
};

LbfgsResult lbfgs_minimize(const Objective& fn, Vec x0, const LbfgsOptions& opt = {});

}  // namespace uqvae
