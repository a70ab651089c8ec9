#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "uqvae/forward_model.hpp"
#include "uqvae/linalg.hpp"

namespace uqvae {

struct GaussianModel {
  Vec mean;
  SPDMatrix cov;

  GaussianModel() = default;
  GaussianModel(Vec m, SPDMatrix c);
  Eigen::Index dim() const noexcept { return mean.size(); }
};

struct AffineForward {
  Mat F;
  Vec f;
};

struct MapLaplace {
  Vec u_map;
  SPDMatrix gamma_lap;
};

MapLaplace map_laplace_affine(const AffineForward& fwd, const GaussianModel& prior,
                              const GaussianModel& noise, const Vec& y);

// (Jᵀ Γ_E⁻¹ J + Γ_pr⁻¹)⁻¹
SPDMatrix laplace_covariance(const Mat& jac, const GaussianModel& prior, const GaussianModel& noise);

double neg_log_posterior(const ForwardModel& fwd, const GaussianModel& prior, const GaussianModel& noise,
                         const Vec& y, const Vec& u);
Vec grad_neg_log_posterior(const ForwardModel& fwd, const GaussianModel& prior, const GaussianModel& noise,
                           const Vec& y, const Vec& u);

// MAP point by L-BFGS started at the prior mean, covariance from the Jacobian there.
MapLaplace map_laplace(const ForwardModel& fwd, const GaussianModel& prior, const GaussianModel& noise,
                       const Vec& y);

// Rows are samples.
struct Dataset {
  Mat params;
  Mat clean_obs;
  Mat noisy_obs;
  std::uint64_t seed = 0;
  std::string model;
  double eta = 0.0;

  Eigen::Index size() const noexcept { return params.rows(); }
  Eigen::Index train_count() const noexcept { return (9 * size()) / 10; }
};

enum class NormalizationMode { GlobalScalar, PerComponent };

// ū = u ⊙ a + b, ȳ = y ⊙ c + d
struct NormalizationMaps {
  Vec a, b, c, d;

  static NormalizationMaps identity(Eigen::Index dim_u, Eigen::Index dim_y);
  Vec param_to_normal(const Vec& u) const { return u.cwiseProduct(a) + b; }
  Vec param_from_normal(const Vec& ub) const { return (ub - b).cwiseQuotient(a); }
  Vec obs_to_normal(const Vec& y) const { return y.cwiseProduct(c) + d; }
  Vec obs_from_normal(const Vec& yb) const { return (yb - d).cwiseQuotient(c); }
};

NormalizationMaps build_normalization(const Dataset& ds, NormalizationMode mode);

std::pair<GaussianModel, GaussianModel> normalize_models(const GaussianModel& prior, const GaussianModel& noise,
                                                         const NormalizationMaps& maps);

std::pair<Vec, SPDMatrix> denormalize_posterior(const Vec& mu_bar, const SPDMatrix& gamma_bar,
                                                const NormalizationMaps& maps);

// group_size 0 pools each observation index on its own; otherwise contiguous blocks of group_size.
SPDMatrix noise_cov_from_dataset(const Mat& clean_obs, double eta, Eigen::Index group_size = 0);

Vec rel_error_vec(const Vec& estimate, const Vec& reference);
Vec rel_error_var(const SPDMatrix& gamma_est, const Vec& var_ref);

}  // namespace uqvae
