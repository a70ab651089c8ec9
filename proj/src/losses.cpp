#include "uqvae/losses.hpp"

#include <cmath>

#include "uqvae/error.hpp"

namespace uqvae {

namespace {

Mat checked_factor(const Mat& c, Eigen::Index d, const char* who) {
  require_dims(c.rows() == d && c.cols() == d, std::string(who) + ": C must be D x D");
  for (Eigen::Index i = 0; i < d; ++i)
    if (!(c(i, i) > 0.0) || !std::isfinite(c(i, i)))
      fail(ErrorKind::SingularC, std::string(who) + ": Cholesky factor needs a positive diagonal");
  Mat l = lower_part(c);
  if (!l.allFinite()) fail(ErrorKind::SingularC, std::string(who) + ": non-finite Cholesky factor");
  return l;
}

void check_problem(const LossProblem& p, const Vec& y, const Vec& mu) {
  if (!p.forward) fail(ErrorKind::ConfigError, "loss: no forward model");
  require_dims(mu.size() == p.param_dim() && p.forward->param_dim() == p.param_dim(), "loss: parameter dimension");
  require_dims(y.size() == p.obs_dim() && p.forward->obs_dim() == p.obs_dim(), "loss: observation dimension");
}

// Forward-mode pieces shared by value and gradient.
struct ThetaPieces {
  ThetaLossTerms terms;
  Mat l, x, z, u, wr, wk;
  Vec zd;
};

ThetaPieces theta_pieces(const LossProblem& p, const Vec& y, const Vec& mu, const Mat& c, double theta) {
  if (theta == 0.0 || !std::isfinite(theta)) fail(ErrorKind::ConfigError, "loss_theta: theta must be nonzero");
  check_problem(p, y, mu);
  const Eigen::Index d = mu.size();
  ThetaPieces s;
  s.l = checked_factor(c, d, "loss_theta");
  const Mat& lpr = p.prior.cov.chol();
  const Mat& le = p.noise.cov.chol();
  const double t2 = theta * theta;

  s.x = s.l.triangularView<Eigen::Lower>().solve(lpr);
  s.terms.prior_trace = t2 * s.x.squaredNorm();
  s.zd = lpr.triangularView<Eigen::Lower>().solve(mu - p.prior.mean);
  s.terms.prior_mean = s.zd.squaredNorm();
  s.z = lpr.triangularView<Eigen::Lower>().solve(s.l);
  s.terms.spread_trace = t2 * s.z.squaredNorm();

  s.u.resize(d, d + 1);
  s.u.col(0) = mu;
  for (Eigen::Index k = 0; k < d; ++k) s.u.col(k + 1) = mu + theta * s.l.col(k);
  const long before = p.forward->calls();
  const Mat fu = p.forward->eval_batch(s.u);
  s.terms.forward_calls = p.forward->calls() - before;

  const Vec r = y - p.noise.mean - fu.col(0);
  const Vec zr = le.triangularView<Eigen::Lower>().solve(r);
  s.terms.data_fit = zr.squaredNorm();
  const Mat diff = fu.rightCols(d).colwise() - fu.col(0);
  const Mat zdiff = le.triangularView<Eigen::Lower>().solve(diff);
  s.terms.perturbation = zdiff.squaredNorm();

  s.wr = le.transpose().triangularView<Eigen::Upper>().solve(zr);
  s.wk = 2.0 * le.transpose().triangularView<Eigen::Upper>().solve(zdiff);
  return s;
}

}  // namespace

ThetaLossTerms loss_theta_terms(const LossProblem& p, const Vec& y, const Vec& mu, const Mat& c, double theta) {
  return theta_pieces(p, y, mu, c, theta).terms;
}

LossEval loss_theta(const LossProblem& p, const Vec& y, const Vec& mu, const Mat& c, double theta,
                    bool with_gradient) {
  ThetaPieces s = theta_pieces(p, y, mu, c, theta);
  LossEval out;
  out.value = s.terms.total();
  out.forward_calls = s.terms.forward_calls;
  if (!with_gradient) return out;

  const Eigen::Index d = mu.size();
  const Mat& lpr = p.prior.cov.chol();
  const double t2 = theta * theta;
  const auto lt = s.l.transpose().triangularView<Eigen::Upper>();
  const auto lprt = lpr.transpose().triangularView<Eigen::Upper>();

  out.dmu = 2.0 * lprt.solve(s.zd);
  out.dC = -2.0 * t2 * lt.solve(Mat(s.x * s.x.transpose())) + 2.0 * t2 * lprt.solve(s.z);

  Mat cot(p.obs_dim(), d + 1);
  cot.col(0) = -2.0 * s.wr - s.wk.rowwise().sum();
  cot.rightCols(d) = s.wk;
  const Mat g = p.forward->vjp_batch(s.u, cot);
  out.dmu += g.rowwise().sum();
  out.dC += theta * g.rightCols(d);
  out.dC = lower_part(out.dC);
  return out;
}

double alpha_sample_mean(const LossProblem& p, const Vec& y, const Vec& mu, const Mat& c, const Mat& eps) {
  check_problem(p, y, mu);
  require_dims(eps.rows() == mu.size() && eps.cols() >= 1 && c.rows() == mu.size() && c.cols() == mu.size(),
               "alpha_sample_mean: shapes");
  const Mat u = (lower_part(c) * eps).colwise() + mu;
  const Mat r = (-p.forward->eval_batch(u)).colwise() + (y - p.noise.mean);
  const Mat zr = p.noise.cov.chol().triangularView<Eigen::Lower>().solve(r);
  return zr.squaredNorm() / static_cast<double>(eps.cols());
}

LossEval loss_alpha(const LossProblem& p, const Vec& y, const Vec& mu, const Mat& c, double alpha, const Mat& eps,
                    bool with_gradient) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorKind::ConfigError, "loss_alpha: alpha must lie in (0,1)");
  check_problem(p, y, mu);
  const Eigen::Index d = mu.size();
  const Eigen::Index k = eps.cols();
  require_dims(eps.rows() == d && k >= 1, "loss_alpha: eps must be D x K with K >= 1");
  const Mat l = checked_factor(c, d, "loss_alpha");
  const Mat& lpr = p.prior.cov.chol();
  const Mat& le = p.noise.cov.chol();
  const Vec delta = mu - p.prior.mean;

  const Vec w = l.triangularView<Eigen::Lower>().solve(delta);
  const Mat x = l.triangularView<Eigen::Lower>().solve(lpr);
  const Vec zd = lpr.triangularView<Eigen::Lower>().solve(delta);
  const Mat z = lpr.triangularView<Eigen::Lower>().solve(l);

  const Mat u = (l * eps).colwise() + mu;
  const long before = p.forward->calls();
  const Mat fu = p.forward->eval_batch(u);
  LossEval out;
  out.forward_calls = p.forward->calls() - before;
  const Mat r = (-fu).colwise() + (y - p.noise.mean);
  const Mat zr = le.triangularView<Eigen::Lower>().solve(r);

  const double kk = static_cast<double>(k);
  out.value = (1.0 - alpha) * (w.squaredNorm() + x.squaredNorm()) + alpha * (zd.squaredNorm() + z.squaredNorm()) +
              alpha * zr.squaredNorm() / kk;
  if (!with_gradient) return out;

  const auto lt = l.transpose().triangularView<Eigen::Upper>();
  const auto lprt = lpr.transpose().triangularView<Eigen::Upper>();
  out.dmu = 2.0 * (1.0 - alpha) * lt.solve(w) + 2.0 * alpha * lprt.solve(zd);
  out.dC = -2.0 * (1.0 - alpha) * lt.solve(Mat(w * w.transpose() + x * x.transpose())) + 2.0 * alpha * lprt.solve(z);

  const Mat cot = (-2.0 * alpha / kk) * le.transpose().triangularView<Eigen::Upper>().solve(zr);
  const Mat g = p.forward->vjp_batch(u, cot);
  out.dmu += g.rowwise().sum();
  out.dC += g * eps.transpose();
  out.dC = lower_part(out.dC);
  return out;
}

LossEval loss_alpha_affine(const AffineForward& fwd, const GaussianModel& prior, const GaussianModel& noise,
                           const Vec& y, const Vec& mu, const Mat& c, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorKind::ConfigError, "loss_alpha: alpha must lie in (0,1)");
  const Eigen::Index d = mu.size();
  require_dims(prior.dim() == d && fwd.F.cols() == d && fwd.F.rows() == y.size() && fwd.f.size() == y.size() &&
                   noise.dim() == y.size(),
               "loss_alpha_affine: dimension mismatch");
  const Mat l = checked_factor(c, d, "loss_alpha_affine");
  const Mat& lpr = prior.cov.chol();
  const Mat& le = noise.cov.chol();
  const Vec delta = mu - prior.mean;

  const Vec w = l.triangularView<Eigen::Lower>().solve(delta);
  const Mat x = l.triangularView<Eigen::Lower>().solve(lpr);
  const Vec zd = lpr.triangularView<Eigen::Lower>().solve(delta);
  const Mat z = lpr.triangularView<Eigen::Lower>().solve(l);
  const Vec r = y - noise.mean - fwd.F * mu - fwd.f;
  const Vec zr = le.triangularView<Eigen::Lower>().solve(r);
  const Mat zf = le.triangularView<Eigen::Lower>().solve(fwd.F);
  const Mat zfl = zf * l;

  LossEval out;
  out.value = (1.0 - alpha) * (w.squaredNorm() + x.squaredNorm()) + alpha * (zd.squaredNorm() + z.squaredNorm()) +
              alpha * (zr.squaredNorm() + zfl.squaredNorm());
  const auto lt = l.transpose().triangularView<Eigen::Upper>();
  const auto lprt = lpr.transpose().triangularView<Eigen::Upper>();
  out.dmu = 2.0 * (1.0 - alpha) * lt.solve(w) + 2.0 * alpha * lprt.solve(zd) - 2.0 * alpha * zf.transpose() * zr;
  out.dC = -2.0 * (1.0 - alpha) * lt.solve(Mat(w * w.transpose() + x * x.transpose())) + 2.0 * alpha * lprt.solve(z) +
           2.0 * alpha * zf.transpose() * zfl;
  out.dC = lower_part(out.dC);
  return out;
}

namespace {

// halfᵀ half with its Cholesky factor taken from a QR of half, so squaring the
// condition number never reaches a fresh factorization.
SPDMatrix gram(const Mat& half) {
  const Eigen::HouseholderQR<Mat> qr(half);
  Mat l = qr.matrixQR().triangularView<Eigen::Upper>().transpose();
  for (Eigen::Index j = 0; j < l.cols(); ++j)
    if (l(j, j) < 0.0) l.col(j) = -l.col(j);
  return SPDMatrix::from_cholesky(std::move(l));
}

}  // namespace

PosteriorEstimate recover_posterior_theta(const Vec& mu_hat, const Mat& c_hat, const SPDMatrix& gamma_pr) {
  const Eigen::Index d = mu_hat.size();
  require_dims(gamma_pr.dim() == d, "recover_posterior_theta: prior dimension");
  const Mat l = checked_factor(c_hat, d, "recover_posterior_theta");
  const Mat gamma_hat = l * l.transpose();
  const Mat half = gamma_pr.chol().triangularView<Eigen::Lower>().solve(gamma_hat);
  return {mu_hat, gram(half)};
}

PosteriorEstimate recover_posterior_alpha(const Vec& mu_hat, const SPDMatrix& gamma_hat, const SPDMatrix& gamma_lap,
                                          const Vec& mu_pr, const SPDMatrix& gamma_pr, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorKind::ConfigError, "recover_posterior_alpha: alpha must lie in (0,1)");
  const Eigen::Index d = mu_hat.size();
  require_dims(gamma_hat.dim() == d && gamma_lap.dim() == d && mu_pr.size() == d && gamma_pr.dim() == d,
               "recover_posterior_alpha: dimension mismatch");
  const double ratio = (1.0 - alpha) / alpha;
  const Vec delta = mu_hat - mu_pr;
  const SPDMatrix a(ratio * (delta * delta.transpose() + gamma_pr.base()));
  const Mat half = a.chol().triangularView<Eigen::Lower>().solve(gamma_hat.base());
  PosteriorEstimate out;
  out.mean = ratio * gamma_lap.base() * gamma_hat.solve(delta) + mu_hat;
  try {
    out.cov = gram(half);
  } catch (const Error&) {
    fail(ErrorKind::SingularGamma, "recover_posterior_alpha: recovered covariance is not SPD");
  }
  return out;
}

DecoderErrorModel decoder_error_stats(const Mat& residuals) {
  const Eigen::Index o = residuals.rows(), n = residuals.cols();
  if (n < o + 1)
    fail(ErrorKind::InsufficientSamples, "decoder_error_stats: need at least O+1 = " + std::to_string(o + 1) +
                                             " test samples, got " + std::to_string(n));
  DecoderErrorModel out;
  out.mean = residuals.rowwise().mean();
  const Mat centered = residuals.colwise() - out.mean;
  Mat cov = symmetrize(centered * centered.transpose() / static_cast<double>(n - 1));
  double jitter = 0.0;
  for (int attempt = 0; attempt < 12; ++attempt) {
    try {
      out.cov = SPDMatrix(cov + jitter * Mat::Identity(o, o));
      return out;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NotPositiveDefinite) throw;
      jitter = jitter == 0.0 ? 1e-12 : jitter * 10.0;
    }
  }
  fail(ErrorKind::NotPositiveDefinite, "decoder_error_stats: residual covariance could not be regularized");
}

DecoderErrorModel decoder_error_stats(const ForwardModel& decoder, const ForwardModel& forward, const Mat& params) {
  require_dims(decoder.obs_dim() == forward.obs_dim() && decoder.param_dim() == forward.param_dim() &&
                   params.rows() == forward.param_dim(),
               "decoder_error_stats: dimension mismatch");
  if (params.cols() < forward.obs_dim() + 1) return decoder_error_stats(Mat(forward.obs_dim(), params.cols()));
  return decoder_error_stats(forward.eval_batch(params) - decoder.eval_batch(params));
}

GaussianModel combine_noise(const GaussianModel& noise, const DecoderErrorModel& dec) {
  require_dims(noise.dim() == dec.mean.size(), "combine_noise: dimension mismatch");
  return GaussianModel(noise.mean + dec.mean, SPDMatrix(noise.cov.base() + dec.cov.base()));
}

Vec pack_mean_chol(const Vec& mu, const Mat& c) {
  const Eigen::Index d = mu.size();
  require_dims(c.rows() == d && c.cols() == d, "pack_mean_chol: C shape");
  Vec x(d + d * (d + 1) / 2);
  x.head(d) = mu;
  Eigen::Index k = d;
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = j; i < d; ++i) x[k++] = c(i, j);
  return x;
}

void unpack_mean_chol(const Vec& x, Eigen::Index d, Vec& mu, Mat& c) {
  require_dims(x.size() == d + d * (d + 1) / 2, "unpack_mean_chol: length");
  mu = x.head(d);
  c = Mat::Zero(d, d);
  Eigen::Index k = d;
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = j; i < d; ++i) c(i, j) = x[k++];
}

DirectResult minimize_loss_theta(const LossProblem& p, const Vec& y, double theta, const Vec& mu0, const Mat& c0,
                                 const LbfgsOptions& opt) {
  const Eigen::Index d = mu0.size();
  // In (μ, θC) all curvatures are O(1), while C itself lives at scale 1/θ in the loss.
  Objective fn = [&](const Vec& x, Vec& grad) {
    Vec mu;
    Mat scaled;
    unpack_mean_chol(x, d, mu, scaled);
    LossEval e = loss_theta(p, y, mu, scaled / theta, theta, true);
    grad = pack_mean_chol(e.dmu, e.dC / theta);
    return e.value;
  };
  LbfgsResult r = lbfgs_minimize(fn, pack_mean_chol(mu0, theta * lower_part(c0)), opt);
  DirectResult out;
  Mat scaled;
  unpack_mean_chol(r.x, d, out.mu, scaled);
  out.C = scaled / theta;
  out.value = r.f;
  out.iterations = r.iterations;
  out.converged = r.converged;
  return out;
}

DirectResult minimize_loss_alpha_affine(const AffineForward& fwd, const GaussianModel& prior,
                                        const GaussianModel& noise, const Vec& y, double alpha, const Vec& mu0,
                                        const Mat& c0, const LbfgsOptions& opt) {
  const Eigen::Index d = mu0.size();
  Objective fn = [&](const Vec& x, Vec& grad) {
    Vec mu;
    Mat c;
    unpack_mean_chol(x, d, mu, c);
    LossEval e = loss_alpha_affine(fwd, prior, noise, y, mu, c, alpha);
    grad = pack_mean_chol(e.dmu, e.dC);
    return e.value;
  };
  LbfgsResult r = lbfgs_minimize(fn, pack_mean_chol(mu0, lower_part(c0)), opt);
  DirectResult out;
  unpack_mean_chol(r.x, d, out.mu, out.C);
  out.value = r.f;
  out.iterations = r.iterations;
  out.converged = r.converged;
  return out;
}

}  // namespace uqvae
