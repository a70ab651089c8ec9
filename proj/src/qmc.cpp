#include "uqvae/qmc.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>

#include "uqvae/error.hpp"
#include "uqvae/sobol_table.hpp"

namespace uqvae {

SobolStream::SobolStream(int dim, std::uint64_t skip) : dim_(dim) {
  if (dim < 1 || dim > max_dim())
    fail(ErrorKind::DimensionUnsupported,
         "SobolStream: dimension " + std::to_string(dim) + " outside [1, " + std::to_string(max_dim()) + "]");
  v_.resize(static_cast<std::size_t>(dim));
  for (int d = 0; d < dim; ++d) {
    auto& v = v_[static_cast<std::size_t>(d)];
    const auto& e = detail::kSobolTable[d];
    if (d == 0) {
      for (int i = 0; i < 32; ++i) v[i] = 1u << (31 - i);
      continue;
    }
    const int s = e.degree;
    for (int i = 0; i < s && i < 32; ++i) v[i] = e.m[i] << (31 - i);
    for (int i = s; i < 32; ++i) {
      std::uint32_t val = v[i - s] ^ (v[i - s] >> s);
      for (int k = 1; k < s; ++k) {
        if ((e.coeffs >> (s - 1 - k)) & 1u) val ^= v[i - k];
      }
      v[i] = val;
    }
  }
  x_.assign(static_cast<std::size_t>(dim), 0u);
  seek(skip);
}

int SobolStream::max_dim() { return detail::kSobolTableDims; }

void SobolStream::seek(std::uint64_t index) {
  if (index >= (std::uint64_t{1} << 32)) fail(ErrorKind::DimensionUnsupported, "SobolStream: index beyond 2^32");
  index_ = index;
  const std::uint64_t gray = index ^ (index >> 1);
  for (int d = 0; d < dim_; ++d) {
    std::uint32_t x = 0;
    for (int b = 0; b < 32; ++b)
      if ((gray >> b) & 1u) x ^= v_[static_cast<std::size_t>(d)][b];
    x_[static_cast<std::size_t>(d)] = x;
  }
}

Vec SobolStream::next() {
  Vec p(dim_);
  constexpr double scale = 1.0 / 4294967296.0;
  for (int d = 0; d < dim_; ++d) p[d] = x_[static_cast<std::size_t>(d)] * scale;
  // Advance: flip the direction number at the lowest zero bit of the current index.
  int c = 0;
  std::uint64_t i = index_;
  while (i & 1u) {
    i >>= 1;
    ++c;
  }
  if (c >= 32) fail(ErrorKind::DimensionUnsupported, "SobolStream: sequence exhausted");
  for (int d = 0; d < dim_; ++d) x_[static_cast<std::size_t>(d)] ^= v_[static_cast<std::size_t>(d)][c];
  ++index_;
  return p;
}

Mat SobolStream::take(Eigen::Index n) {
  Mat out(dim_, n);
  for (Eigen::Index k = 0; k < n; ++k) out.col(k) = next();
  return out;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) fail(ErrorKind::BoundaryPoint, "inverse_normal_cdf: p must lie in (0,1)");
  // Acklam's rational approximation followed by one Halley step.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

Vec gaussian_from_uniform(const Vec& p, const GaussianModel& model) {
  require_dims(p.size() == model.dim(), "gaussian_from_uniform: dimension mismatch");
  Vec eps(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) eps[i] = inverse_normal_cdf(p[i]);
  return model.mean + model.cov.chol() * eps;
}

Mat sobol_normal_points(int dim, Eigen::Index n, std::uint64_t skip) {
  SobolStream s(dim, skip);
  Mat pts = s.take(n);
  return pts.unaryExpr([](double p) { return inverse_normal_cdf(p); });
}

OracleResult weighted_moments(const Mat& us, const Vec& log_weights) {
  require_dims(us.cols() == log_weights.size(), "weighted_moments: size mismatch");
  const Eigen::Index n = us.cols();
  double lmax = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < n; ++k)
    if (std::isfinite(log_weights[k])) lmax = std::max(lmax, log_weights[k]);
  if (!std::isfinite(lmax)) fail(ErrorKind::DegenerateWeights, "posterior oracle: no finite weights");
  Vec w(n);
  for (Eigen::Index k = 0; k < n; ++k) w[k] = std::isfinite(log_weights[k]) ? std::exp(log_weights[k] - lmax) : 0.0;
  const double sw = w.sum();
  OracleResult r;
  r.n_points = static_cast<long>(n);
  r.ess = sw * sw / w.squaredNorm();
  if (r.ess < 2.0)
    fail(ErrorKind::DegenerateWeights, "posterior oracle: effective sample size " + std::to_string(r.ess));
  r.mean = us * w / sw;
  Mat centered = us.colwise() - r.mean;
  r.cov = centered * w.asDiagonal() * centered.transpose() / sw;
  r.cov = symmetrize(r.cov);
  for (Eigen::Index i = 0; i < r.cov.rows(); ++i) {
    if (r.cov(i, i) < 0.0) {
      if (r.cov(i, i) < -1e-12) std::cerr << "warning: negative oracle variance clipped\n";
      r.cov(i, i) = 0.0;
    }
  }
  return r;
}

PriorSampleBank PriorSampleBank::build(const ForwardModel& fwd, const GaussianModel& prior, Eigen::Index n_points,
                                       Exec exec, std::uint64_t skip) {
  if (n_points < 2) fail(ErrorKind::InsufficientSamples, "prior bank needs at least two points");
  PriorSampleBank bank;
  Mat eps = sobol_normal_points(static_cast<int>(prior.dim()), n_points, skip);
  bank.u = (prior.cov.chol() * eps).colwise() + prior.mean;
  BatchEvalResult r = batch_forward(fwd, bank.u, exec, true);
  if (r.failures * 100 > n_points)
    fail(ErrorKind::TooManyFailures,
         "prior bank: " + std::to_string(r.failures) + " of " + std::to_string(n_points) + " evaluations failed");
  bank.fu = std::move(r.y);
  bank.ok = std::move(r.ok);
  return bank;
}

OracleResult posterior_oracle(const PriorSampleBank& bank, const Vec& y, const GaussianModel& noise, Exec exec) {
  const auto t0 = std::chrono::steady_clock::now();
  Vec lw = gaussian_log_likelihoods(bank.fu, y, noise.mean, noise.cov.chol(), exec);
  for (Eigen::Index k = 0; k < lw.size(); ++k)
    if (!bank.ok[static_cast<std::size_t>(k)]) lw[k] = -std::numeric_limits<double>::infinity();
  OracleResult r = weighted_moments(bank.u, lw);
  r.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

OracleResult posterior_oracle(const Vec& y, const ForwardModel& fwd, const GaussianModel& prior,
                              const GaussianModel& noise, Eigen::Index n_points, Exec exec) {
  const auto t0 = std::chrono::steady_clock::now();
  PriorSampleBank bank = PriorSampleBank::build(fwd, prior, n_points, exec);
  OracleResult r = posterior_oracle(bank, y, noise, exec);
  r.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

ForwardUqResult forward_uq_samples(const Mat& samples, const std::function<Mat(const Vec&)>& simulate, Exec exec) {
  const Eigen::Index n = samples.cols();
  if (n < 2) fail(ErrorKind::InsufficientSamples, "forward_uq: need at least two samples");
  std::vector<Mat> runs(static_cast<std::size_t>(n));
  std::vector<char> ok(static_cast<std::size_t>(n), 1);
  parallel_for(n, exec, [&](Eigen::Index k) {
    try {
      runs[static_cast<std::size_t>(k)] = simulate(samples.col(k));
    } catch (const Error&) {
      ok[static_cast<std::size_t>(k)] = 0;
    }
  });
  ForwardUqResult r;
  r.samples = static_cast<long>(n);
  for (char c : ok) r.failures += c ? 0 : 1;
  if (r.failures * 100 > n)
    fail(ErrorKind::TooManyFailures, "forward_uq: " + std::to_string(r.failures) + " runs failed");
  // Shifted by the first good run so identical runs give exactly zero spread.
  Mat shift, sum, sumsq;
  long good = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (!ok[static_cast<std::size_t>(k)]) continue;
    const Mat& m = runs[static_cast<std::size_t>(k)];
    if (good == 0) {
      shift = m;
      sum = Mat::Zero(m.rows(), m.cols());
      sumsq = Mat::Zero(m.rows(), m.cols());
    }
    require_dims(m.rows() == sum.rows() && m.cols() == sum.cols(), "forward_uq: inconsistent series shape");
    const Mat d = m - shift;
    sum += d;
    sumsq += d.cwiseAbs2();
    ++good;
  }
  const double g = static_cast<double>(good);
  r.mean = shift + sum / g;
  const Mat ss = (sumsq - sum.cwiseAbs2() / g).cwiseMax(0.0);
  r.std = (good > 1 ? ss / (g - 1.0) : ss).cwiseSqrt();
  return r;
}

ForwardUqResult forward_uq(const Vec& mean, const Mat& factor, const std::function<Mat(const Vec&)>& simulate,
                           Eigen::Index n_samples, Exec exec) {
  require_dims(factor.rows() == mean.size() && factor.cols() == mean.size(), "forward_uq: factor shape");
  const Mat eps = sobol_normal_points(static_cast<int>(mean.size()), n_samples);
  const Mat samples = (factor * eps).colwise() + mean;
  return forward_uq_samples(samples, simulate, exec);
}

ForwardUqResult forward_uq(const GaussianModel& posterior, const std::function<Mat(const Vec&)>& simulate,
                           Eigen::Index n_samples, Exec exec) {
  return forward_uq(posterior.mean, posterior.cov.chol(), simulate, n_samples, exec);
}

}  // namespace uqvae
