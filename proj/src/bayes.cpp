#include "uqvae/bayes.hpp"

#include <cmath>

#include "uqvae/error.hpp"
#include "uqvae/optim.hpp"

namespace uqvae {

GaussianModel::GaussianModel(Vec m, SPDMatrix c) : mean(std::move(m)), cov(std::move(c)) {
  require_dims(mean.size() == cov.dim(), "GaussianModel: mean/covariance size mismatch");
}

SPDMatrix laplace_covariance(const Mat& jac, const GaussianModel& prior, const GaussianModel& noise) {
  require_dims(jac.rows() == noise.dim() && jac.cols() == prior.dim(), "laplace_covariance: Jacobian shape");
  Mat precision = jac.transpose() * noise.cov.solve(jac) + prior.cov.inverse();
  return SPDMatrix(SPDMatrix(symmetrize(precision)).inverse());
}

MapLaplace map_laplace_affine(const AffineForward& fwd, const GaussianModel& prior, const GaussianModel& noise,
                              const Vec& y) {
  require_dims(fwd.F.rows() == noise.dim() && fwd.F.cols() == prior.dim() && fwd.f.size() == noise.dim() &&
                   y.size() == noise.dim(),
               "map_laplace_affine: dimension mismatch");
  SPDMatrix lap = laplace_covariance(fwd.F, prior, noise);
  Vec rhs = fwd.F.transpose() * noise.cov.solve(Vec(y - fwd.f - noise.mean)) + prior.cov.solve(prior.mean);
  return {lap.base() * rhs, lap};
}

double neg_log_posterior(const ForwardModel& fwd, const GaussianModel& prior, const GaussianModel& noise,
                         const Vec& y, const Vec& u) {
  require_dims(u.size() == prior.dim() && y.size() == noise.dim(), "neg_log_posterior: dimension mismatch");
  return mahalanobis_sq(y - fwd.eval(u) - noise.mean, noise.cov) + mahalanobis_sq(u - prior.mean, prior.cov);
}

Vec grad_neg_log_posterior(const ForwardModel& fwd, const GaussianModel& prior, const GaussianModel& noise,
                           const Vec& y, const Vec& u) {
  Vec r = y - fwd.eval(u) - noise.mean;
  return -2.0 * fwd.vjp(u, noise.cov.solve(r)) + 2.0 * prior.cov.solve(Vec(u - prior.mean));
}

MapLaplace map_laplace(const ForwardModel& fwd, const GaussianModel& prior, const GaussianModel& noise,
                       const Vec& y) {
  Objective obj = [&](const Vec& u, Vec& g) {
    Vec r = y - fwd.eval(u) - noise.mean;
    Vec w = noise.cov.solve(r);
    Vec du = u - prior.mean;
    Vec pu = prior.cov.solve(du);
    g = -2.0 * fwd.vjp(u, w) + 2.0 * pu;
    return r.dot(w) + du.dot(pu);
  };
  LbfgsOptions opt;
  opt.grad_tol = 1e-9;
  LbfgsResult res = lbfgs_minimize(obj, prior.mean, opt);
  return {res.x, laplace_covariance(fwd.jacobian(res.x), prior, noise)};
}

NormalizationMaps NormalizationMaps::identity(Eigen::Index dim_u, Eigen::Index dim_y) {
  return {Vec::Ones(dim_u), Vec::Zero(dim_u), Vec::Ones(dim_y), Vec::Zero(dim_y)};
}

namespace {

// Affine map x ↦ x·scale + shift sending [lo, hi] onto [0, 1].
void unit_map(const Mat& data, NormalizationMode mode, Vec& scale, Vec& shift, const char* what) {
  const Eigen::Index n = data.cols();
  scale.resize(n);
  shift.resize(n);
  if (mode == NormalizationMode::GlobalScalar) {
    const double lo = data.minCoeff(), hi = data.maxCoeff();
    if (!(hi > lo)) fail(ErrorKind::DegenerateSpread, std::string("build_normalization: constant ") + what);
    scale.setConstant(1.0 / (hi - lo));
    shift.setConstant(-lo / (hi - lo));
    return;
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    const double lo = data.col(j).minCoeff(), hi = data.col(j).maxCoeff();
    if (!(hi > lo))
      fail(ErrorKind::DegenerateSpread,
           std::string("build_normalization: constant ") + what + " component " + std::to_string(j));
    scale[j] = 1.0 / (hi - lo);
    shift[j] = -lo / (hi - lo);
  }
}

}  // namespace

NormalizationMaps build_normalization(const Dataset& ds, NormalizationMode mode) {
  if (ds.size() < 2) fail(ErrorKind::InsufficientSamples, "build_normalization: need at least two samples");
  NormalizationMaps m;
  unit_map(ds.params, mode, m.a, m.b, "parameters");
  unit_map(ds.noisy_obs, mode, m.c, m.d, "observations");
  return m;
}

std::pair<GaussianModel, GaussianModel> normalize_models(const GaussianModel& prior, const GaussianModel& noise,
                                                         const NormalizationMaps& maps) {
  require_dims(maps.a.size() == prior.dim() && maps.c.size() == noise.dim(), "normalize_models: map size");
  GaussianModel p(prior.mean.cwiseProduct(maps.a) + maps.b,
                  SPDMatrix(prior.cov.base().cwiseProduct(maps.a * maps.a.transpose())));
  GaussianModel e(noise.mean.cwiseProduct(maps.c),
                  SPDMatrix(noise.cov.base().cwiseProduct(maps.c * maps.c.transpose())));
  return {std::move(p), std::move(e)};
}

std::pair<Vec, SPDMatrix> denormalize_posterior(const Vec& mu_bar, const SPDMatrix& gamma_bar,
                                                const NormalizationMaps& maps) {
  require_dims(mu_bar.size() == maps.a.size() && gamma_bar.dim() == maps.a.size(),
               "denormalize_posterior: size mismatch");
  Vec inv_a = maps.a.cwiseInverse();
  Vec mean = (mu_bar - maps.b).cwiseProduct(inv_a);
  // Scale the factor rather than refactoring, which can fail for ill-conditioned Γ.
  if ((inv_a.array() > 0.0).all()) return {std::move(mean), SPDMatrix::from_cholesky(inv_a.asDiagonal() * gamma_bar.chol())};
  return {std::move(mean), SPDMatrix(gamma_bar.base().cwiseProduct(inv_a * inv_a.transpose()))};
}

SPDMatrix noise_cov_from_dataset(const Mat& clean_obs, double eta, Eigen::Index group_size) {
  if (!(eta > 0.0)) fail(ErrorKind::ZeroSignal, "noise_cov_from_dataset: eta must be positive");
  const Eigen::Index o = clean_obs.cols();
  const Eigen::Index g = group_size <= 0 ? 1 : group_size;
  if (o % g != 0) fail(ErrorKind::ConfigError, "noise_cov_from_dataset: group size does not divide O");
  Vec diag(o);
  for (Eigen::Index start = 0; start < o; start += g) {
    const double mx = clean_obs.middleCols(start, g).cwiseAbs().maxCoeff();
    if (!(mx > 0.0)) fail(ErrorKind::ZeroSignal, "noise_cov_from_dataset: zero observation block");
    diag.segment(start, g).setConstant((eta * mx) * (eta * mx));
  }
  return SPDMatrix::diagonal(diag);
}

Vec rel_error_vec(const Vec& estimate, const Vec& reference) {
  require_dims(estimate.size() == reference.size(), "rel_error_vec: size mismatch");
  const double scale = reference.lpNorm<Eigen::Infinity>();
  if (!(scale > 0.0)) fail(ErrorKind::ZeroReference, "rel_error_vec: reference is zero");
  return (estimate - reference).cwiseAbs() / scale;
}

Vec rel_error_var(const SPDMatrix& gamma_est, const Vec& var_ref) {
  return rel_error_vec(gamma_est.base().diagonal(), var_ref);
}

}  // namespace uqvae
