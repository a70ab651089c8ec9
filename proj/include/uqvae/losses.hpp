#pragma once

#include <cstdint>
#include <memory>

#include "uqvae/bayes.hpp"
#include "uqvae/forward_model.hpp"
#include "uqvae/linalg.hpp"
#include "uqvae/optim.hpp"

namespace uqvae {

// Everything a per-observation loss needs besides y. Noise may already include
// the decoder error (see combine_noise).
struct LossProblem {
  std::shared_ptr<const ForwardModel> forward;
  GaussianModel prior;
  GaussianModel noise;

  Eigen::Index param_dim() const { return prior.dim(); }
  Eigen::Index obs_dim() const { return noise.dim(); }
};

struct LossEval {
  double value = 0.0;
  Vec dmu;
  Mat dC;  // lower triangle only
  long forward_calls = 0;
};

struct ThetaLossTerms {
  double prior_trace = 0.0;     // θ² tr(Γ⁻¹ Γ_pr)
  double prior_mean = 0.0;      // ‖μ − μ_pr‖²_{Γ_pr⁻¹}
  double spread_trace = 0.0;    // θ² tr(Γ_pr⁻¹ Γ)
  double data_fit = 0.0;        // ‖y − μ_E − F(μ)‖²_{Γ_E⁻¹}
  double perturbation = 0.0;    // Σ_k ‖F(μ + θ C_k) − F(μ)‖²_{Γ_E⁻¹}
  long forward_calls = 0;

  double total() const { return prior_trace + prior_mean + spread_trace + data_fit + perturbation; }
};

ThetaLossTerms loss_theta_terms(const LossProblem& p, const Vec& y, const Vec& mu, const Mat& c, double theta);
LossEval loss_theta(const LossProblem& p, const Vec& y, const Vec& mu, const Mat& c, double theta,
                    bool with_gradient = true);

// (1/K) Σ_k ‖y − μ_E − F(μ + C ε_k)‖²_{Γ_E⁻¹}; C may be singular here.
double alpha_sample_mean(const LossProblem& p, const Vec& y, const Vec& mu, const Mat& c, const Mat& eps);

// K-sample estimate with u_k = μ + C ε_k, ε is D × K.
LossEval loss_alpha(const LossProblem& p, const Vec& y, const Vec& mu, const Mat& c, double alpha, const Mat& eps,
                    bool with_gradient = true);
// Closed-form expectation for an affine map.
LossEval loss_alpha_affine(const AffineForward& fwd, const GaussianModel& prior, const GaussianModel& noise,
                           const Vec& y, const Vec& mu, const Mat& c, double alpha);

struct PosteriorEstimate {
  Vec mean;
  SPDMatrix cov;
};

// μ_post = μ̂, Γ_post = Γ̂ Γ_pr⁻¹ Γ̂.
PosteriorEstimate recover_posterior_theta(const Vec& mu_hat, const Mat& c_hat, const SPDMatrix& gamma_pr);
PosteriorEstimate recover_posterior_alpha(const Vec& mu_hat, const SPDMatrix& gamma_hat, const SPDMatrix& gamma_lap,
                                          const Vec& mu_pr, const SPDMatrix& gamma_pr, double alpha);

struct DecoderErrorModel {
  Vec mean;
  SPDMatrix cov;
};

// Residual statistics of F(u) − ψ(u) over the columns of params.
DecoderErrorModel decoder_error_stats(const ForwardModel& decoder, const ForwardModel& forward, const Mat& params);
// Same statistics from precomputed residual columns.
DecoderErrorModel decoder_error_stats(const Mat& residuals);
GaussianModel combine_noise(const GaussianModel& noise, const DecoderErrorModel& dec);

// Packing of (μ, lower triangle of C) into a flat vector, column by column.
Vec pack_mean_chol(const Vec& mu, const Mat& c);
void unpack_mean_chol(const Vec& x, Eigen::Index d, Vec& mu, Mat& c);

struct DirectResult {
  Vec mu;
  Mat C;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

// L-BFGS on L_θ in the scaled variables (μ, θC), starting from (mu0, c0).
DirectResult minimize_loss_theta(const LossProblem& p, const Vec& y, double theta, const Vec& mu0, const Mat& c0,
                                 const LbfgsOptions& opt = {});
DirectResult minimize_loss_alpha_affine(const AffineForward& fwd, const GaussianModel& prior,
                                        const GaussianModel& noise, const Vec& y, double alpha, const Vec& mu0,
                                        const Mat& c0, const LbfgsOptions& opt = {});

}  // namespace uqvae
