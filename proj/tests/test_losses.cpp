#include <doctest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "uqvae/error.hpp"
#include "uqvae/losses.hpp"
#include "uqvae/nnet.hpp"
#include "uqvae/qmc.hpp"

using namespace uqvae;
using namespace testing;

namespace {

LossProblem problem_of(const AffineInstance& a) { return {a.model, a.prior, a.noise}; }

LossProblem exp_problem(Eigen::Index d, std::uint64_t seed, Vec& y) {
  std::mt19937_64 rng(seed);
  GaussianModel prior(Vec::Constant(d, -0.5) + random_vector(d, rng, 0.2), SPDMatrix(random_spd(d, rng, 0.3, 1.0)));
  GaussianModel noise(random_vector(d, rng, 0.01), SPDMatrix(random_spd(d, rng, 0.05, 0.2)));
  y = random_vector(d, rng, 0.3).array().exp();
  return {std::make_shared<ExpForward>(d), prior, noise};
}

Vec theta_flat_grad(const LossProblem& p, const Vec& y, const Vec& mu, const Mat& c, double theta) {
  LossEval e = loss_theta(p, y, mu, c, theta);
  return pack_mean_chol(e.dmu, e.dC);
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("theta loss on the scalar identity instance is 3 theta^2") {
  auto id = std::make_shared<AffineForwardModel>(Mat::Identity(1, 1), Vec::Zero(1));
  LossProblem p{id, GaussianModel(Vec::Zero(1), SPDMatrix::identity(1)), GaussianModel(Vec::Zero(1), SPDMatrix::identity(1))};
  const LossEval e = loss_theta(p, Vec::Zero(1), Vec::Zero(1), Mat::Identity(1, 1), 1e-4, false);
  CHECK(e.value == doctest::Approx(3e-8).epsilon(1e-12));
  CHECK(e.forward_calls == 2);
}

TEST_CASE("perturbation term of an affine map equals theta^2 tr(Ge^-1 F G F^T)") {
  for (double theta : {1e-2, 1e-4}) {
    const AffineInstance a = random_affine(5, 7, 11);
    std::mt19937_64 rng(3);
    const Mat c = random_lower(5, rng);
    const Vec mu = Vec::Zero(5);
    const ThetaLossTerms t = loss_theta_terms(problem_of(a), a.y, mu, c, theta);
    const Mat g = c * c.transpose();
    const double expect = theta * theta * (a.noise.cov.base().inverse() * a.fwd.F * g * a.fwd.F.transpose()).trace();
    // Differences F(μ + θC_k) − F(μ) lose about log10(1/θ) digits to cancellation.
    CHECK(std::abs(t.perturbation - expect) / expect < 1e-12 / theta);
  }
}

TEST_CASE("theta loss terms match a straight-line recomputation for the exp map") {
  Vec y;
  const LossProblem p = exp_problem(3, 5, y);
  std::mt19937_64 rng(8);
  const Vec mu = random_vector(3, rng, 0.5);
  const Mat c = random_lower(3, rng);
  const double theta = 1e-3;
  const ThetaLossTerms t = loss_theta_terms(p, y, mu, c, theta);

  const Mat g = c * c.transpose();
  const Mat gpr = p.prior.cov.base(), ge = p.noise.cov.base();
  auto f = [](const Vec& u) { return Vec(u.array().exp()); };
  const Vec r = y - p.noise.mean - f(mu);
  double pert = 0.0;
  for (int k = 0; k < 3; ++k) {
    const Vec dk = f(mu + theta * c.col(k)) - f(mu);
    pert += dk.dot(ge.inverse() * dk);
  }
  CHECK(t.prior_trace == doctest::Approx(theta * theta * (g.inverse() * gpr).trace()).epsilon(1e-10));
  CHECK(t.prior_mean == doctest::Approx((mu - p.prior.mean).dot(gpr.inverse() * (mu - p.prior.mean))).epsilon(1e-10));
  CHECK(t.spread_trace == doctest::Approx(theta * theta * (gpr.inverse() * g).trace()).epsilon(1e-10));
  CHECK(t.data_fit == doctest::Approx(r.dot(ge.inverse() * r)).epsilon(1e-10));
  CHECK(t.perturbation == doctest::Approx(pert).epsilon(1e-8));
  CHECK(t.forward_calls == 4);
}

TEST_CASE("theta loss makes exactly D+1 forward calls") {
  for (Eigen::Index d : {1, 4, 9}) {
    Vec y;
    const LossProblem p = exp_problem(d, 100 + static_cast<std::uint64_t>(d), y);
    p.forward->reset_calls();
    std::mt19937_64 rng(1);
    loss_theta(p, y, p.prior.mean, random_lower(d, rng), 1e-4, false);
    CHECK(p.forward->calls() == d + 1);
  }
}

TEST_CASE("theta loss rejects a zero diagonal in C") {
  const AffineInstance a = random_affine(3, 4, 2);
  Mat c = Mat::Identity(3, 3);
  c(1, 1) = 0.0;
  CHECK_THROWS_AS(loss_theta(problem_of(a), a.y, a.prior.mean, c, 1e-4), Error);
  try {
    loss_theta(problem_of(a), a.y, a.prior.mean, c, 1e-4);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SingularC);
  }
}

TEST_CASE("theta gradient is zero at the affine stationary point") {
  const AffineInstance a = random_affine(5, 7, 21);
  const AffinePosterior post = affine_posterior(a);
  const Mat lpr = a.prior.cov.chol();
  const Mat x = lpr.triangularView<Eigen::Lower>().solve(
      Mat(lpr.triangularView<Eigen::Lower>().solve(post.cov).transpose()));
  const Mat gamma_hat = lpr * sym_sqrt(0.5 * (x + x.transpose())) * lpr.transpose();
  const Mat c_hat = Eigen::LLT<Mat>(gamma_hat).matrixL();
  const LossEval e = loss_theta(problem_of(a), a.y, post.mean, c_hat, 1e-4);
  CHECK(e.dmu.norm() < 1e-8);
  CHECK(e.dC.norm() < 1e-8);
}

TEST_CASE("theta gradient matches central differences on non-affine instances") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Vec y;
    const LossProblem p = exp_problem(3, 40 + seed, y);
    std::mt19937_64 rng(seed);
    const Vec mu = p.prior.mean + random_vector(3, rng, 0.3);
    const Mat c = random_lower(3, rng);
    const double theta = 1e-2;
    const Vec x = pack_mean_chol(mu, c);
    auto f = [&](const Vec& z) {
      Vec m;
      Mat cc;
      unpack_mean_chol(z, 3, m, cc);
      return loss_theta(p, y, m, cc, theta, false).value;
    };
    const Vec g = theta_flat_grad(p, y, mu, c, theta);
    CHECK(max_rel_err(g, fd_gradient(f, x, 1e-6)) < 1e-4);
  }
}

TEST_CASE("trace-term gradients scale with theta squared") {
  auto cst = std::make_shared<ConstantForward>(3, Vec::Ones(2));
  std::mt19937_64 rng(4);
  LossProblem p{cst, GaussianModel(Vec::Zero(3), SPDMatrix(random_spd(3, rng))),
                GaussianModel(Vec::Zero(2), SPDMatrix::identity(2))};
  const Mat c = random_lower(3, rng);
  const Mat g1 = loss_theta(p, Vec::Ones(2), Vec::Zero(3), c, 2e-3).dC;
  const Mat g2 = loss_theta(p, Vec::Ones(2), Vec::Zero(3), c, 1e-3).dC;
  CHECK(rel_fro(g2 * 4.0, g1) < 1e-12);
}

TEST_CASE("theta recovery: fixed point and scalar value") {
  std::mt19937_64 rng(9);
  const Mat gpr = random_spd(4, rng);
  const Mat c_pr = Eigen::LLT<Mat>(gpr).matrixL();
  const PosteriorEstimate p = recover_posterior_theta(Vec::Zero(4), c_pr, SPDMatrix(gpr));
  CHECK(rel_fro(p.cov.base(), gpr) < 1e-12);
  const PosteriorEstimate s =
      recover_posterior_theta(Vec::Ones(1), Mat::Constant(1, 1, std::sqrt(2.0)), SPDMatrix(Mat::Constant(1, 1, 4.0)));
  CHECK(s.cov.base()(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(s.mean[0] == 1.0);
}

TEST_CASE("theta recovery is SPD for random invertible factors") {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 50; ++t) {
    const Mat c = random_lower(6, rng, 0.05, 3.0);
    const SPDMatrix gpr(random_spd(6, rng, 0.1, 10.0));
    const PosteriorEstimate p = recover_posterior_theta(Vec::Zero(6), c, gpr);
    CHECK(Eigen::SelfAdjointEigenSolver<Mat>(p.cov.base()).eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("alpha recovery reduces to the theta form at alpha one half with mu at the prior mean") {
  std::mt19937_64 rng(12);
  const SPDMatrix gpr(random_spd(3, rng)), ghat(random_spd(3, rng)), glap(random_spd(3, rng));
  const Vec mu = random_vector(3, rng);
  const PosteriorEstimate p = recover_posterior_alpha(mu, ghat, glap, mu, gpr, 0.5);
  const Mat expect = ghat.base() * gpr.base().inverse() * ghat.base();
  CHECK(rel_fro(p.cov.base(), expect) < 1e-12);
  CHECK(max_rel_err(p.mean, mu) < 1e-15);
  const PosteriorEstimate s = recover_posterior_alpha(Vec::Zero(1), SPDMatrix(Mat::Constant(1, 1, 2.0)),
                                                      SPDMatrix(Mat::Constant(1, 1, 1.0)), Vec::Zero(1),
                                                      SPDMatrix(Mat::Constant(1, 1, 4.0)), 0.5);
  CHECK(s.cov.base()(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("alpha sample term with zero spread is the data misfit at mu") {
  Vec y;
  const LossProblem p = exp_problem(3, 77, y);
  const Vec mu = p.prior.mean;
  const Mat eps = sobol_normal_points(3, 64);
  const Vec r = y - p.noise.mean - mu.array().exp().matrix();
  const double misfit = r.dot(p.noise.cov.base().inverse() * r);
  CHECK(alpha_sample_mean(p, y, mu, Mat::Zero(3, 3), eps) == doctest::Approx(misfit).epsilon(1e-12));
}

TEST_CASE("alpha sample term converges to the affine expectation") {
  const AffineInstance a = random_affine(4, 5, 31);
  std::mt19937_64 rng(2);
  const Mat c = random_lower(4, rng);
  const Vec mu = random_vector(4, rng);
  const Mat eps = sobol_normal_points(4, 1 << 14);
  const Vec r = a.y - a.noise.mean - a.fwd.F * mu - a.fwd.f;
  const Mat ge_inv = a.noise.cov.base().inverse();
  const double exact = r.dot(ge_inv * r) + (ge_inv * a.fwd.F * c * c.transpose() * a.fwd.F.transpose()).trace();
  const double est = alpha_sample_mean(problem_of(a), a.y, mu, c, eps);
  CHECK(std::abs(est - exact) / exact < 0.02);
}

TEST_CASE("alpha loss on the scalar identity instance") {
  auto id = std::make_shared<AffineForwardModel>(Mat::Identity(1, 1), Vec::Zero(1));
  const double gpr = 3.0, mu_pr = 0.5, mu = 1.5, c = 2.0;
  LossProblem p{id, GaussianModel(Vec::Constant(1, mu_pr), SPDMatrix(Mat::Constant(1, 1, gpr))),
                GaussianModel(Vec::Zero(1), SPDMatrix::identity(1))};
  const Mat eps = Mat::Zero(1, 1);
  const double g = c * c;
  const double first_two = 0.5 * ((mu - mu_pr) * (mu - mu_pr) / g + gpr / g) +
                           0.5 * ((mu - mu_pr) * (mu - mu_pr) / gpr + g / gpr);
  const double y = 0.25;
  const LossEval e = loss_alpha(p, Vec::Constant(1, y), Vec::Constant(1, mu), Mat::Constant(1, 1, c), 0.5, eps, false);
  CHECK(e.value == doctest::Approx(first_two + 0.5 * (y - mu) * (y - mu)).epsilon(1e-14));
  CHECK(e.forward_calls == 1);
}

TEST_CASE("alpha loss makes exactly K forward calls") {
  Vec y;
  const LossProblem p = exp_problem(4, 3, y);
  p.forward->reset_calls();
  loss_alpha(p, y, p.prior.mean, Mat::Identity(4, 4), 0.5, sobol_normal_points(4, 300), true);
  CHECK(p.forward->calls() == 300);
}

TEST_CASE("alpha gradients match central differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Vec y;
    const LossProblem p = exp_problem(3, 60 + seed, y);
    std::mt19937_64 rng(seed + 1);
    const Vec mu = p.prior.mean + random_vector(3, rng, 0.3);
    const Mat c = random_lower(3, rng, 0.2, 0.6);
    const Mat eps = sobol_normal_points(3, 32);
    const double alpha = 0.3;
    auto f = [&](const Vec& z) {
      Vec m;
      Mat cc;
      unpack_mean_chol(z, 3, m, cc);
      return loss_alpha(p, y, m, cc, alpha, eps, false).value;
    };
    const LossEval e = loss_alpha(p, y, mu, c, alpha, eps);
    CHECK(max_rel_err(pack_mean_chol(e.dmu, e.dC), fd_gradient(f, pack_mean_chol(mu, c), 1e-6)) < 1e-4);

    const AffineInstance a = random_affine(3, 4, seed + 200);
    auto fa = [&](const Vec& z) {
      Vec m;
      Mat cc;
      unpack_mean_chol(z, 3, m, cc);
      return loss_alpha_affine(a.fwd, a.prior, a.noise, a.y, m, cc, alpha).value;
    };
    const LossEval ea = loss_alpha_affine(a.fwd, a.prior, a.noise, a.y, mu, c, alpha);
    CHECK(max_rel_err(pack_mean_chol(ea.dmu, ea.dC), fd_gradient(fa, pack_mean_chol(mu, c), 1e-6)) < 1e-4);
  }
}

TEST_CASE("direct theta minimization from random starts recovers the affine posterior") {
  const AffineInstance a = random_affine(3, 4, 5);
  const AffinePosterior post = affine_posterior(a);
  std::mt19937_64 rng(6);
  for (int t = 0; t < 3; ++t) {
    const Vec mu0 = a.prior.mean + random_vector(3, rng);
    const Mat c0 = random_lower(3, rng);
    const DirectResult r = minimize_loss_theta(problem_of(a), a.y, 1e-4, mu0, c0);
    const PosteriorEstimate p = recover_posterior_theta(r.mu, r.C, a.prior.cov);
    CHECK(rel_inf(p.mean, post.mean) < 1e-3);
    CHECK(rel_fro(p.cov.base(), post.cov) < 1e-2);
  }
}

TEST_CASE("direct alpha minimization recovers the affine posterior") {
  const AffineInstance a = random_affine(3, 4, 15);
  const AffinePosterior post = affine_posterior(a);
  const Mat c_pr = a.prior.cov.chol();
  for (double alpha : {0.3, 0.5, 0.8}) {
    const DirectResult r = minimize_loss_alpha_affine(a.fwd, a.prior, a.noise, a.y, alpha, a.prior.mean, c_pr);
    const PosteriorEstimate p = recover_posterior_alpha(r.mu, SPDMatrix(r.C * r.C.transpose()), SPDMatrix(post.cov),
                                                        a.prior.mean, a.prior.cov, alpha);
    CHECK(rel_inf(p.mean, post.mean) < 1e-3);
    CHECK(rel_fro(p.cov.base(), post.cov) < 1e-2);
  }
}

TEST_CASE("decoder error statistics") {
  std::mt19937_64 rng(13);
  const Mat params = random_matrix(3, 40, rng);
  const Mat a = random_matrix(4, 3, rng);
  AffineForwardModel truth(a, Vec::Zero(4));

  SUBCASE("exact decoder") {
    const DecoderErrorModel m = decoder_error_stats(truth, truth, params);
    CHECK(m.mean.norm() == 0.0);
    CHECK(m.cov.base().diagonal().maxCoeff() <= 1e-10);
  }
  SUBCASE("biased decoder") {
    const Vec v = random_vector(4, rng);
    AffineForwardModel biased(a, -v);
    const DecoderErrorModel m = decoder_error_stats(biased, truth, params);
    CHECK(max_rel_err(m.mean, v) < 1e-12);
    CHECK(m.cov.base().cwiseAbs().maxCoeff() <= 1e-10);
  }
  SUBCASE("two-pass covariance oracle") {
    AffineForwardModel other(random_matrix(4, 3, rng), random_vector(4, rng));
    const DecoderErrorModel m = decoder_error_stats(other, truth, params);
    const Mat r = truth.eval_batch(params) - other.eval_batch(params);
    Vec mean = Vec::Zero(4);
    for (Eigen::Index k = 0; k < r.cols(); ++k) mean += r.col(k);
    mean /= static_cast<double>(r.cols());
    Mat cov = Mat::Zero(4, 4);
    for (Eigen::Index k = 0; k < r.cols(); ++k) cov += (r.col(k) - mean) * (r.col(k) - mean).transpose();
    cov /= static_cast<double>(r.cols() - 1);
    CHECK(max_rel_err(m.mean, mean) < 1e-12);
    CHECK(rel_fro(m.cov.base(), cov) < 1e-12);
  }
  SUBCASE("too few samples") { CHECK_THROWS_AS(decoder_error_stats(truth, truth, params.leftCols(4)), Error); }
}

}  // TEST_SUITE
