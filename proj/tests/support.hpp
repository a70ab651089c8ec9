#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>

#include "uqvae/bayes.hpp"
#include "uqvae/forward_model.hpp"
#include "uqvae/linalg.hpp"
#include "uqvae/losses.hpp"

namespace testing {

using uqvae::Mat;
using uqvae::Vec;

inline Mat random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Mat m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = n(rng);
  return m;
}

inline Vec random_vector(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
  return random_matrix(n, 1, rng, scale).col(0);
}

// Well conditioned SPD: Q diag(λ) Qᵀ with λ in [lo, hi].
inline Mat random_spd(Eigen::Index n, std::mt19937_64& rng, double lo = 0.5, double hi = 2.0) {
  const Mat q = Eigen::HouseholderQR<Mat>(random_matrix(n, n, rng)).householderQ();
  std::uniform_real_distribution<double> u(lo, hi);
  Vec lam(n);
  for (Eigen::Index i = 0; i < n; ++i) lam[i] = u(rng);
  Mat a = q * lam.asDiagonal() * q.transpose();
  return 0.5 * (a + a.transpose());
}

inline Mat random_lower(Eigen::Index n, std::mt19937_64& rng, double diag_lo = 0.5, double diag_hi = 1.5) {
  Mat l = random_matrix(n, n, rng, 0.3).triangularView<Eigen::StrictlyLower>();
  std::uniform_real_distribution<double> u(diag_lo, diag_hi);
  for (Eigen::Index i = 0; i < n; ++i) l(i, i) = u(rng);
  return l;
}

struct AffineInstance {
  uqvae::AffineForward fwd;
  std::shared_ptr<uqvae::AffineForwardModel> model;
  uqvae::GaussianModel prior, noise;
  Vec y;
};

inline AffineInstance random_affine(Eigen::Index d, Eigen::Index o, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  AffineInstance a;
  a.fwd.F = random_matrix(o, d, rng);
  a.fwd.f = random_vector(o, rng);
  a.model = std::make_shared<uqvae::AffineForwardModel>(a.fwd.F, a.fwd.f);
  a.prior = uqvae::GaussianModel(random_vector(d, rng), uqvae::SPDMatrix(random_spd(d, rng)));
  a.noise = uqvae::GaussianModel(random_vector(o, rng, 0.1), uqvae::SPDMatrix(random_spd(o, rng, 0.2, 1.0)));
  a.y = random_vector(o, rng, 2.0);
  return a;
}

inline double rel_inf(const Vec& a, const Vec& ref) {
  return (a - ref).lpNorm<Eigen::Infinity>() / ref.lpNorm<Eigen::Infinity>();
}

inline double rel_fro(const Mat& a, const Mat& ref) { return (a - ref).norm() / ref.norm(); }

// Central differences of a scalar function.
template <class F>
Vec fd_gradient(F&& f, const Vec& x, double h) {
  Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

// max_i |a_i − b_i| / max(|b|_∞, floor)
inline double max_rel_err(const Vec& a, const Vec& b, double floor = 1e-12) {
  return (a - b).lpNorm<Eigen::Infinity>() / std::max(b.lpNorm<Eigen::Infinity>(), floor);
}

}  // namespace testing

namespace testing {

// Straight-line affine posterior: Γ = (FᵀΓ_E⁻¹F + Γ_pr⁻¹)⁻¹, u = Γ(FᵀΓ_E⁻¹(y − f − μ_E) + Γ_pr⁻¹μ_pr).
struct AffinePosterior {
  Vec mean;
  Mat cov;
};

inline AffinePosterior affine_posterior(const AffineInstance& a) {
  const Mat ge_inv = a.noise.cov.base().inverse();
  const Mat gp_inv = a.prior.cov.base().inverse();
  AffinePosterior p;
  p.cov = (a.fwd.F.transpose() * ge_inv * a.fwd.F + gp_inv).inverse();
  p.mean = p.cov * (a.fwd.F.transpose() * ge_inv * (a.y - a.fwd.f - a.noise.mean) + gp_inv * a.prior.mean);
  return p;
}

inline Mat sym_sqrt(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a);
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace testing

namespace testing {

// Linear-Gaussian problem with data drawn from the model, so the posterior is not
// far out in the prior tail.
inline AffineInstance consistent_affine(Eigen::Index d, Eigen::Index o, std::uint64_t seed, double noise_sd = 0.5) {
  std::mt19937_64 rng(seed);
  AffineInstance a;
  a.fwd.F = random_matrix(o, d, rng, 1.0 / std::sqrt(static_cast<double>(d)));
  a.fwd.f = random_vector(o, rng, 0.1);
  a.model = std::make_shared<uqvae::AffineForwardModel>(a.fwd.F, a.fwd.f);
  a.prior = uqvae::GaussianModel(random_vector(d, rng, 0.5), uqvae::SPDMatrix(random_spd(d, rng, 0.5, 1.5)));
  a.noise = uqvae::GaussianModel(Vec::Zero(o), uqvae::SPDMatrix(Mat::Identity(o, o) * noise_sd * noise_sd));
  const Vec u = a.prior.mean + a.prior.cov.chol() * random_vector(d, rng);
  a.y = a.fwd.F * u + a.fwd.f + noise_sd * random_vector(o, rng);
  return a;
}

}  // namespace testing
