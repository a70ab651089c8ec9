#include "uqvae/parallel.hpp"

#include <exception>
#include <limits>
#include <mutex>

#include "uqvae/error.hpp"

namespace uqvae {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

bool openmp_enabled() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

BatchEvalResult batch_forward(const ForwardModel& fwd, const Mat& us, Exec exec, bool tolerate_failures) {
  require_dims(us.rows() == fwd.param_dim(), "batch_forward: parameter length mismatch");
  const Eigen::Index n = us.cols();
  BatchEvalResult res;
  res.y.resize(fwd.obs_dim(), n);
  res.ok.assign(static_cast<std::size_t>(n), 1);
  std::exception_ptr first_error;
  Eigen::Index first_index = n;
  std::mutex mu;
  parallel_for(n, exec, [&](Eigen::Index k) {
    try {
      res.y.col(k) = fwd.eval(us.col(k));
    } catch (...) {
      res.y.col(k).setConstant(std::numeric_limits<double>::quiet_NaN());
      res.ok[static_cast<std::size_t>(k)] = 0;
      std::lock_guard<std::mutex> lock(mu);
      if (k < first_index) {
        first_index = k;
        first_error = std::current_exception();
      }
    }
  });
  for (char c : res.ok) res.failures += c ? 0 : 1;
  if (first_error && !tolerate_failures) std::rethrow_exception(first_error);
  return res;
}

Vec gaussian_log_likelihoods(const Mat& fu, const Vec& y, const Vec& noise_mean, const Mat& noise_chol,
                             Exec exec) {
  require_dims(fu.rows() == y.size() && noise_mean.size() == y.size() && noise_chol.rows() == y.size(),
               "gaussian_log_likelihoods: size mismatch");
  const Eigen::Index n = fu.cols();
  Vec out(n);
  const Vec shift = y - noise_mean;
  const auto lower = noise_chol.triangularView<Eigen::Lower>();
  parallel_for(n, exec, [&](Eigen::Index k) {
    Vec r = shift - fu.col(k);
    lower.solveInPlace(r);
    out[k] = -0.5 * r.squaredNorm();
  });
  return out;
}

}  // namespace uqvae
