#include <doctest.h>

#include <random>

#include "support.hpp"
#include "uqvae/error.hpp"
#include "uqvae/linalg.hpp"
#include "uqvae/poisson.hpp"

using namespace uqvae;
using namespace testing;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an uqvae::Error");
  return ErrorKind::ConfigError;
}

}  // namespace

TEST_SUITE("linalg") {

TEST_CASE("cholesky hand cases") {
  CHECK(cholesky(Mat::Identity(3, 3)).isApprox(Mat::Identity(3, 3)));
  Mat a(2, 2);
  a << 4, 2, 2, 3;
  Mat expect(2, 2);
  expect << 2, 0, 1, std::sqrt(2.0);
  CHECK((cholesky(a) - expect).norm() < 1e-15);
}

TEST_CASE("cholesky reconstructs random SPD matrices") {
  std::mt19937_64 rng(1);
  for (Eigen::Index d : {1, 2, 8, 20, 50}) {
    const Mat b = random_matrix(d, d, rng);
    const Mat a = b * b.transpose() + Mat::Identity(d, d);
    const Mat l = cholesky(a);
    CHECK(rel_fro(l * l.transpose(), a) < 1e-10);
    CHECK(l.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().norm() == 0.0);
    CHECK(l.diagonal().minCoeff() > 0.0);
  }
}

TEST_CASE("cholesky round trip on lower factors") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    const Mat l = random_lower(10, rng);
    CHECK(rel_fro(cholesky(l * l.transpose()), l) < 1e-10);
  }
}

TEST_CASE("cholesky rejects singular and indefinite input") {
  Mat a(2, 2);
  a << 1, 1, 1, 1;
  CHECK(kind_of([&] { cholesky(a); }) == ErrorKind::NotPositiveDefinite);
  a << 1, 0, 0, -1;
  CHECK(kind_of([&] { cholesky(a); }) == ErrorKind::NotPositiveDefinite);
}

TEST_CASE("SPDMatrix invariants hold for random inputs") {
  std::mt19937_64 rng(3);
  for (Eigen::Index d = 1; d <= 50; d += 7) {
    const SPDMatrix s(random_spd(d, rng, 0.01, 100.0));
    CHECK(rel_fro(s.chol() * s.chol().transpose(), s.base()) < 1e-10);
    CHECK(is_symmetric(s.base()));
    CHECK(s.log_det() == doctest::Approx(std::log(s.base().determinant())).epsilon(1e-8));
  }
}

TEST_CASE("solve_spd") {
  const Mat b = Mat::Random(3, 2);
  CHECK(solve_spd(SPDMatrix::identity(3), b).isApprox(b));
  Vec rhs(2);
  rhs << 2, 4;
  Vec d(2);
  d << 2, 4;
  CHECK((SPDMatrix::diagonal(d).solve(rhs) - Vec::Ones(2)).norm() < 1e-15);
  std::mt19937_64 rng(4);
  const SPDMatrix a(random_spd(12, rng));
  const Mat bb = random_matrix(12, 5, rng);
  const Mat x = solve_spd(a, bb);
  CHECK(rel_fro(a.base() * x, bb) < 1e-8);
  CHECK(kind_of([&] { solve_spd(a, Mat::Ones(3, 1)); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("sym_eig hand cases and reconstruction") {
  const SymEig e = sym_eig(Vec(Eigen::Vector3d(3, 1, 2)).asDiagonal().toDenseMatrix());
  CHECK((e.values - Eigen::Vector3d(1, 2, 3)).norm() < 1e-14);
  CHECK((e.vectors.cwiseAbs() * Eigen::Vector3d(1, 2, 3) - Eigen::Vector3d(3, 1, 2)).norm() < 1e-14);
  Mat a(2, 2);
  a << 2, 1, 1, 2;
  CHECK((sym_eig(a).values - Eigen::Vector2d(1, 3)).norm() < 1e-14);

  std::mt19937_64 rng(5);
  const Mat r = random_matrix(10, 10, rng);
  const Mat s = 0.5 * (r + r.transpose());
  const SymEig es = sym_eig(s);
  CHECK((es.vectors.transpose() * es.vectors - Mat::Identity(10, 10)).norm() < 1e-8);
  CHECK(rel_fro(es.vectors * es.values.asDiagonal() * es.vectors.transpose(), s) < 1e-8);
  for (Eigen::Index i = 1; i < 10; ++i) CHECK(es.values[i - 1] <= es.values[i]);
}

TEST_CASE("generalized fractional inverse power") {
  CHECK((generalized_fractional_inverse_power(2.0 * Mat::Identity(3, 3), SPDMatrix::identity(3), 1.0).base() -
         0.5 * Mat::Identity(3, 3))
            .norm() < 1e-14);
  const Mat k = Vec(Eigen::Vector2d(1, 4)).asDiagonal();
  CHECK((generalized_fractional_inverse_power(k, SPDMatrix::identity(2), 0.5).base().diagonal() -
         Eigen::Vector2d(1, 0.5))
            .norm() < 1e-14);

  std::mt19937_64 rng(6);
  const Mat kk = random_spd(6, rng);
  CHECK(rel_fro(generalized_fractional_inverse_power(kk, SPDMatrix::identity(6), 1.0).base(), kk.inverse()) < 1e-8);

  CHECK(kind_of([&] { generalized_fractional_inverse_power(-Mat::Identity(2, 2), SPDMatrix::identity(2), 1.0); }) ==
        ErrorKind::NonPositiveSpectrum);
}

TEST_CASE("fractional power semigroup on a finite-element operator") {
  const PoissonMesh mesh(3);
  const Mat m = fem_mass(mesh);
  const Mat op = 0.1 * fem_stiffness(mesh, Vec::Zero(mesh.node_count())) + 0.5 * m;
  const SPDMatrix mm(m);
  const Mat g1 = generalized_fractional_inverse_power(op, mm, 1.0).base();
  const Mat g_half = generalized_fractional_inverse_power(op, mm, 0.5).base();
  const Mat g32 = generalized_fractional_inverse_power(op, mm, 1.5).base();
  CHECK(rel_fro(g_half * m * g_half, g1) < 1e-8);
  CHECK(rel_fro(g1 * m * g_half, g32) < 1e-8);
  CHECK(Eigen::SelfAdjointEigenSolver<Mat>(g32).eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("mahalanobis_sq") {
  CHECK(mahalanobis_sq(Vec::Zero(2), SPDMatrix::identity(2)) == 0.0);
  CHECK(mahalanobis_sq(Vec::Constant(1, 3.0), SPDMatrix(Mat::Constant(1, 1, 9.0))) == doctest::Approx(1.0));
  std::mt19937_64 rng(7);
  for (int t = 0; t < 10; ++t) {
    const SPDMatrix g(random_spd(7, rng));
    const Vec v = random_vector(7, rng);
    const double m = mahalanobis_sq(v, g);
    CHECK(m == doctest::Approx(v.dot(g.base().inverse() * v)).epsilon(1e-10));
    CHECK(m == doctest::Approx(solve_lower(g.chol(), v).squaredNorm()).epsilon(1e-10));
  }
  CHECK(kind_of([] { mahalanobis_sq(Vec::Zero(3), SPDMatrix::identity(2)); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("trace_solve and triangular solves") {
  std::mt19937_64 rng(8);
  const SPDMatrix g(random_spd(5, rng));
  const Mat b = random_matrix(5, 5, rng);
  CHECK(trace_solve(g, b) == doctest::Approx((g.base().inverse() * b).trace()).epsilon(1e-10));
  const Mat l = random_lower(5, rng);
  CHECK(rel_fro(l * solve_lower(l, b), b) < 1e-12);
  CHECK(rel_fro(l.transpose() * solve_lower_transposed(l, b), b) < 1e-12);
}

}  // TEST_SUITE
