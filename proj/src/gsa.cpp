#include "uqvae/gsa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "uqvae/error.hpp"
#include "uqvae/qmc.hpp"

namespace uqvae {

void GsaPlan::validate() const {
  if (ranges.empty()) fail(ErrorKind::ConfigError, "gsa: no parameters");
  if (base_samples < 2) fail(ErrorKind::ConfigError, "gsa: N must be >= 2");
  for (const auto& r : ranges)
    if (!(r.low < r.high)) fail(ErrorKind::ConfigError, "gsa: empty range for " + r.name);
}

Mat saltelli_sample(const GsaPlan& plan, std::uint64_t seed) {
  plan.validate();
  const Eigen::Index n = plan.base_samples, k = plan.dim();
  SobolStream stream(static_cast<int>(2 * k), seed + 1);
  const Mat pts = stream.take(n);
  Mat a(n, k), b(n, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double lo = plan.ranges[static_cast<std::size_t>(j)].low;
    const double width = plan.ranges[static_cast<std::size_t>(j)].high - lo;
    a.col(j) = (lo + width * pts.row(j).array()).matrix().transpose();
    b.col(j) = (lo + width * pts.row(k + j).array()).matrix().transpose();
  }
  Mat rows(plan.row_count(), k);
  rows.topRows(n) = a;
  rows.middleRows(n, n) = b;
  for (Eigen::Index i = 0; i < k; ++i) {
    Mat ab = a, ba = b;
    ab.col(i) = b.col(i);
    ba.col(i) = a.col(i);
    rows.middleRows((2 + i) * n, n) = ab;
    rows.middleRows((2 + k + i) * n, n) = ba;
  }
  return rows;
}

SobolIndices total_sobol_indices(const Mat& outputs, const GsaPlan& plan) {
  plan.validate();
  const Eigen::Index n = plan.base_samples, k = plan.dim();
  require_dims(outputs.rows() == plan.row_count(), "total_sobol_indices: outputs do not match the sample plan");
  const Eigen::Index o = outputs.cols();
  SobolIndices s;
  s.total = Mat::Constant(k, o, std::numeric_limits<double>::quiet_NaN());
  s.variance.resize(o);
  s.defined.assign(static_cast<std::size_t>(o), 0);
  for (Eigen::Index j = 0; j < o; ++j) {
    const Vec fa = outputs.col(j).segment(0, n);
    const Vec fb = outputs.col(j).segment(n, n);
    const double mean = (fa.sum() + fb.sum()) / static_cast<double>(2 * n);
    const double var =
        ((fa.array() - mean).square().sum() + (fb.array() - mean).square().sum()) / static_cast<double>(2 * n);
    s.variance[j] = var;
    if (!(var > 0.0) || !std::isfinite(var)) continue;
    s.defined[static_cast<std::size_t>(j)] = 1;
    for (Eigen::Index i = 0; i < k; ++i) {
      const Vec fab = outputs.col(j).segment((2 + i) * n, n);
      const Vec fba = outputs.col(j).segment((2 + k + i) * n, n);
      // Jansen estimator from both base matrices, averaged.
      const double ja = (fa - fab).squaredNorm() / static_cast<double>(2 * n);
      const double jb = (fb - fba).squaredNorm() / static_cast<double>(2 * n);
      s.total(i, j) = 0.5 * (ja + jb) / var;
    }
  }
  return s;
}

SobolIndices run_gsa(const GsaPlan& plan, const ForwardModel& model, std::uint64_t seed, Exec exec) {
  require_dims(model.param_dim() == plan.dim(), "run_gsa: model dimension does not match the plan");
  const Mat rows = saltelli_sample(plan, seed);
  BatchEvalResult r = batch_forward(model, rows.transpose(), exec, true);
  if (r.failures > 0)
    fail(ErrorKind::TooManyFailures,
         "run_gsa: " + std::to_string(r.failures) + " of " + std::to_string(rows.rows()) + " model runs failed");
  return total_sobol_indices(r.y.transpose(), plan);
}

std::vector<int> select_parameters(const SobolIndices& s, double threshold) {
  std::vector<int> out;
  for (Eigen::Index i = 0; i < s.total.rows(); ++i) {
    bool keep = false;
    for (Eigen::Index j = 0; j < s.total.cols(); ++j)
      if (std::isfinite(s.total(i, j)) && s.total(i, j) > threshold) keep = true;
    if (keep) out.push_back(static_cast<int>(i));
  }
  return out;
}

Mat clipped_for_display(const Mat& total, int* clipped) {
  int count = 0;
  Mat out = total.unaryExpr([&](double v) {
    if (!std::isfinite(v)) return v;
    if (v < -0.05 || v > 1.05) ++count;
    return std::clamp(v, -0.05, 1.05);
  });
  if (clipped) *clipped = count;
  return out;
}

}  // namespace uqvae
