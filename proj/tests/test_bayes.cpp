#include <doctest.h>

#include <random>

#include "support.hpp"
#include "uqvae/bayes.hpp"
#include "uqvae/error.hpp"
#include "uqvae/optim.hpp"

using namespace uqvae;
using namespace testing;

namespace {

GaussianModel unit(Eigen::Index d) { return GaussianModel(Vec::Zero(d), SPDMatrix::identity(d)); }

Dataset dataset_from(const Mat& params, const Mat& noisy) {
  Dataset ds;
  ds.params = params;
  ds.clean_obs = noisy;
  ds.noisy_obs = noisy;
  return ds;
}

}  // namespace

TEST_SUITE("bayes") {

TEST_CASE("affine MAP and Laplace hand cases") {
  AffineForward id{Mat::Identity(1, 1), Vec::Zero(1)};
  const MapLaplace r = map_laplace_affine(id, unit(1), unit(1), Vec::Constant(1, 2.0));
  CHECK(r.u_map[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.gamma_lap.base()(0, 0) == doctest::Approx(0.5).epsilon(1e-15));

  std::mt19937_64 rng(1);
  const GaussianModel prior(random_vector(3, rng), SPDMatrix(random_spd(3, rng)));
  AffineForward zero{Mat::Zero(2, 3), Vec::Ones(2)};
  const MapLaplace z = map_laplace_affine(zero, prior, unit(2), Vec::Ones(2));
  CHECK(max_rel_err(z.u_map, prior.mean) < 1e-14);
  CHECK(rel_fro(z.gamma_lap.base(), prior.cov.base()) < 1e-14);
}

TEST_CASE("affine MAP agrees with the straight-line formula and an independent minimizer") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const AffineInstance a = random_affine(4, 6, seed);
    const MapLaplace r = map_laplace_affine(a.fwd, a.prior, a.noise, a.y);
    const AffinePosterior oracle = affine_posterior(a);
    CHECK(rel_inf(r.u_map, oracle.mean) < 1e-10);
    CHECK(rel_fro(r.gamma_lap.base().inverse(), oracle.cov.inverse()) < 1e-10);

    // Plain gradient descent on the quadratic, independent of the library optimizer.
    const Mat h = 2.0 * oracle.cov.inverse();
    const double step = 1.0 / Eigen::SelfAdjointEigenSolver<Mat>(h).eigenvalues().maxCoeff();
    Vec u = a.prior.mean;
    for (int it = 0; it < 100000; ++it) {
      const Vec g = grad_neg_log_posterior(*a.model, a.prior, a.noise, a.y, u);
      if (g.norm() < 1e-12) break;
      u -= step * g;
    }
    CHECK(rel_inf(r.u_map, u) < 1e-6);
    CHECK(grad_neg_log_posterior(*a.model, a.prior, a.noise, a.y, r.u_map).norm() /
              grad_neg_log_posterior(*a.model, a.prior, a.noise, a.y, a.prior.mean).norm() <
          1e-8);
  }
  const AffineInstance a = random_affine(3, 4, 9);
  CHECK_THROWS_AS(map_laplace_affine(a.fwd, unit(2), a.noise, a.y), Error);
}

TEST_CASE("neg_log_posterior") {
  const AffineInstance a = random_affine(3, 5, 2);
  const Vec y0 = a.model->eval(a.prior.mean) + a.noise.mean;
  CHECK(neg_log_posterior(*a.model, a.prior, a.noise, y0, a.prior.mean) == doctest::Approx(0.0));

  AffineForwardModel id(Mat::Identity(1, 1), Vec::Zero(1));
  CHECK(neg_log_posterior(id, unit(1), unit(1), Vec::Zero(1), Vec::Ones(1)) == doctest::Approx(2.0));

  std::mt19937_64 rng(3);
  const Vec u = random_vector(3, rng);
  const Vec r = a.y - a.fwd.F * u - a.fwd.f - a.noise.mean;
  const Vec du = u - a.prior.mean;
  const double dense = r.dot(a.noise.cov.base().inverse() * r) + du.dot(a.prior.cov.base().inverse() * du);
  CHECK(neg_log_posterior(*a.model, a.prior, a.noise, a.y, u) == doctest::Approx(dense).epsilon(1e-12));
}

TEST_CASE("neg_log_posterior is convex along lines for affine maps") {
  std::mt19937_64 rng(4);
  const AffineInstance a = random_affine(4, 3, 4);
  for (int t = 0; t < 50; ++t) {
    const Vec u = random_vector(4, rng, 3.0), dir = random_vector(4, rng);
    const double h = 0.1;
    const double second = neg_log_posterior(*a.model, a.prior, a.noise, a.y, u + h * dir) -
                          2.0 * neg_log_posterior(*a.model, a.prior, a.noise, a.y, u) +
                          neg_log_posterior(*a.model, a.prior, a.noise, a.y, u - h * dir);
    CHECK(second >= -1e-10);
  }
}

TEST_CASE("map_laplace for a nonlinear map stationary point") {
  ExpForward f(3);
  std::mt19937_64 rng(5);
  const GaussianModel prior(Vec::Constant(3, -1.0), SPDMatrix(random_spd(3, rng)));
  const GaussianModel noise(Vec::Zero(3), SPDMatrix::identity(3));
  const Vec y = random_vector(3, rng, 0.2).array().exp();
  const MapLaplace r = map_laplace(f, prior, noise, y);
  CHECK(grad_neg_log_posterior(f, prior, noise, y, r.u_map).norm() < 1e-6);
  const Mat j = f.jacobian(r.u_map);
  const Mat expect = (j.transpose() * j + prior.cov.base().inverse()).inverse();
  CHECK(rel_fro(r.gamma_lap.base(), expect) < 1e-10);
}

TEST_CASE("build_normalization examples") {
  Mat params(3, 2);
  params << 0.0, 0.5, 1.0, 0.2, 0.3, 0.7;
  const NormalizationMaps g = build_normalization(dataset_from(params, params), NormalizationMode::GlobalScalar);
  CHECK(g.a == Vec::Ones(2));
  CHECK(g.b == Vec::Zero(2));

  Mat one(2, 1);
  one << -1.0, 3.0;
  const NormalizationMaps p = build_normalization(dataset_from(one, one), NormalizationMode::PerComponent);
  CHECK(p.a[0] == 0.25);
  CHECK(p.b[0] == 0.25);

  CHECK_THROWS_AS(build_normalization(dataset_from(Mat::Ones(4, 2), Mat::Ones(4, 2)), NormalizationMode::GlobalScalar),
                  Error);
  CHECK_THROWS_AS(build_normalization(dataset_from(Mat::Ones(1, 2), Mat::Ones(1, 2)), NormalizationMode::PerComponent),
                  Error);
}

TEST_CASE("normalized datasets lie in the unit interval with attained bounds") {
  std::mt19937_64 rng(6);
  for (auto mode : {NormalizationMode::GlobalScalar, NormalizationMode::PerComponent}) {
    const Mat u = random_matrix(50, 4, rng, 3.0);
    const Mat y = random_matrix(50, 6, rng, 10.0);
    const NormalizationMaps m = build_normalization(dataset_from(u, y), mode);
    Mat ub(50, 4), yb(50, 6);
    for (Eigen::Index i = 0; i < 50; ++i) {
      ub.row(i) = m.param_to_normal(u.row(i).transpose()).transpose();
      yb.row(i) = m.obs_to_normal(y.row(i).transpose()).transpose();
    }
    CHECK(ub.minCoeff() >= -1e-14);
    CHECK(ub.maxCoeff() <= 1.0 + 1e-14);
    CHECK(ub.minCoeff() == doctest::Approx(0.0));
    CHECK(ub.maxCoeff() == doctest::Approx(1.0));
    CHECK(yb.minCoeff() == doctest::Approx(0.0));
    CHECK(yb.maxCoeff() == doctest::Approx(1.0));
    if (mode == NormalizationMode::PerComponent)
      for (Eigen::Index j = 0; j < 4; ++j) {
        CHECK(ub.col(j).minCoeff() == doctest::Approx(0.0));
        CHECK(ub.col(j).maxCoeff() == doctest::Approx(1.0));
      }
  }
}

TEST_CASE("normalize_models and its inverse") {
  std::mt19937_64 rng(7);
  const GaussianModel prior(random_vector(3, rng), SPDMatrix(random_spd(3, rng)));
  const GaussianModel noise(random_vector(2, rng), SPDMatrix(random_spd(2, rng)));
  const auto [p0, n0] = normalize_models(prior, noise, NormalizationMaps::identity(3, 2));
  CHECK(p0.mean == prior.mean);
  CHECK(n0.cov.base() == noise.cov.base());

  NormalizationMaps twice = NormalizationMaps::identity(3, 2);
  twice.a.setConstant(2.0);
  const auto [p2, n2] = normalize_models(unit(3), noise, twice);
  CHECK(p2.cov.base() == 4.0 * Mat::Identity(3, 3));

  NormalizationMaps m;
  m.a = random_vector(3, rng);
  m.b = random_vector(3, rng);
  m.c = random_vector(2, rng);
  m.d = random_vector(2, rng);
  const auto [pb, nb] = normalize_models(prior, noise, m);
  CHECK(max_rel_err(nb.mean, noise.mean.cwiseProduct(m.c)) < 1e-15);
  const auto [mu, gamma] = denormalize_posterior(pb.mean, pb.cov, m);
  CHECK(max_rel_err(mu, prior.mean) < 1e-12);
  CHECK(rel_fro(gamma.base(), prior.cov.base()) < 1e-12);
  CHECK(max_rel_err(m.param_from_normal(m.param_to_normal(prior.mean)), prior.mean) < 1e-12);
}

TEST_CASE("normalized prior covariance matches transformed samples") {
  std::mt19937_64 rng(8);
  const GaussianModel prior(random_vector(3, rng), SPDMatrix(random_spd(3, rng)));
  NormalizationMaps m = NormalizationMaps::identity(3, 1);
  m.a = Vec(Eigen::Vector3d(0.5, 2.0, -1.5));
  m.b = Vec(Eigen::Vector3d(1.0, -0.3, 0.2));
  const auto [pb, nb] = normalize_models(prior, unit(1), m);
  const Eigen::Index n = 100000;
  const Mat z = random_matrix(3, n, rng);
  Mat s(3, n);
  for (Eigen::Index k = 0; k < n; ++k) s.col(k) = m.param_to_normal(prior.mean + prior.cov.chol() * z.col(k));
  const Vec mean = s.rowwise().mean();
  const Mat centered = s.colwise() - mean;
  const Mat cov = centered * centered.transpose() / static_cast<double>(n - 1);
  for (Eigen::Index i = 0; i < 3; ++i) {
    const double sd = std::sqrt(pb.cov.base()(i, i));
    CHECK(std::abs(mean[i] - pb.mean[i]) < 3.0 * sd / std::sqrt(static_cast<double>(n)));
    for (Eigen::Index j = 0; j < 3; ++j) {
      // Var of the sample covariance entry is (Σ_ii Σ_jj + Σ_ij²)/n.
      const Mat& g = pb.cov.base();
      const double se = std::sqrt((g(i, i) * g(j, j) + g(i, j) * g(i, j)) / static_cast<double>(n));
      CHECK(std::abs(cov(i, j) - g(i, j)) < 3.0 * se);
    }
  }
}

TEST_CASE("noise covariance from a dataset") {
  CHECK((noise_cov_from_dataset(Mat::Constant(4, 3, 10.0), 0.01).base().diagonal() - Vec::Constant(3, 0.01))
            .norm() < 1e-15);
  Mat single(3, 1);
  single << -100.0, 20.0, 5.0;
  CHECK(noise_cov_from_dataset(single, 0.05).base()(0, 0) == doctest::Approx(25.0).epsilon(1e-14));
  Mat grouped(1, 6);
  grouped << 1, 2, 3, 10, 20, 30;
  Vec expect(6);
  expect << 9, 9, 9, 900, 900, 900;
  CHECK((noise_cov_from_dataset(grouped, 1.0, 3).base().diagonal() - expect).norm() < 1e-12);
  CHECK(noise_cov_from_dataset(grouped, 1.0, 3).base().isDiagonal());
  CHECK_THROWS_AS(noise_cov_from_dataset(grouped, 0.0), Error);
  CHECK_THROWS_AS(noise_cov_from_dataset(Mat::Zero(3, 2), 0.1), Error);
}

TEST_CASE("relative error metrics") {
  CHECK(rel_error_vec(Vec::Ones(3), Vec::Ones(3)).norm() == 0.0);
  CHECK((rel_error_vec(Eigen::Vector2d(1, 2), Eigen::Vector2d(0, 4)) - Eigen::Vector2d(0.25, 0.5)).norm() < 1e-16);
  CHECK_THROWS_AS(rel_error_vec(Vec::Ones(2), Vec::Zero(2)), Error);
  std::mt19937_64 rng(9);
  const Vec e = random_vector(5, rng), r = random_vector(5, rng);
  CHECK((rel_error_vec(e, r) - ((e - r).cwiseAbs() / r.lpNorm<Eigen::Infinity>())).norm() < 1e-15);

  const SPDMatrix g(random_spd(2, rng));
  CHECK(rel_error_var(g, g.base().diagonal()).norm() == 0.0);
  const SPDMatrix d = SPDMatrix::diagonal(Eigen::Vector2d(1, 3));
  CHECK((rel_error_var(d, Eigen::Vector2d(2, 4)) - Eigen::Vector2d(0.25, 0.25)).norm() < 1e-15);
  const Vec v = random_vector(2, rng).cwiseAbs();
  CHECK((rel_error_var(g, v) - (g.base().diagonal() - v).cwiseAbs() / v.maxCoeff()).norm() < 1e-15);
}

}  // TEST_SUITE
