#pragma once

#include <vector>

#include "uqvae/forward_model.hpp"
#include "uqvae/linalg.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace uqvae {

// Every kernel has a serial reference path; Parallel runs the same per-item work
// under OpenMP and reduces in index order, so results do not depend on thread count.
enum class Exec { Serial, Parallel };

int max_threads();
void set_threads(int n);
bool openmp_enabled();

template <class Fn>
void parallel_for(Eigen::Index n, Exec exec, Fn&& fn) {
#ifdef _OPENMP
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (Eigen::Index i = 0; i < n; ++i) fn(i);
    return;
  }
#endif
  (void)exec;
  for (Eigen::Index i = 0; i < n; ++i) fn(i);
}

struct BatchEvalResult {
  Mat y;                  // obs_dim × N, NaN columns where the model failed
  std::vector<char> ok;   // per column
  long failures = 0;
};

// Columns of us are parameter vectors. When tolerate_failures is false the first
// failure is rethrown after the loop finishes.
BatchEvalResult batch_forward(const ForwardModel& fwd, const Mat& us, Exec exec, bool tolerate_failures = false);

// −½‖y − μ_E − F_k‖²_{Γ_E⁻¹} for each column F_k.
Vec gaussian_log_likelihoods(const Mat& fu, const Vec& y, const Vec& noise_mean, const Mat& noise_chol,
                             Exec exec);

}  // namespace uqvae
