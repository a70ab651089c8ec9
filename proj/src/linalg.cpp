#include "uqvae/linalg.hpp"

#include <cmath>
#include <string>

#include "uqvae/error.hpp"

namespace uqvae {

bool is_symmetric(const Mat& a, double rel_tol) {
  if (a.rows() != a.cols()) return false;
  if (a.size() == 0) return true;
  const double scale = std::max(1e-300, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

Mat cholesky(const Mat& a) {
  require_dims(a.rows() == a.cols(), "cholesky: matrix not square");
  if (!is_symmetric(a)) fail(ErrorKind::NotPositiveDefinite, "cholesky: matrix not symmetric");
  const Eigen::Index n = a.rows();
  Mat l = Mat::Zero(n, n);
  if (n == 0) return l;
  const double tol = 1e-14 * a.diagonal().cwiseAbs().maxCoeff();
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > tol)) {
      fail(ErrorKind::NotPositiveDefinite,
           "cholesky: pivot " + std::to_string(j) + " = " + std::to_string(d));
    }
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / ljj;
    }
  }
  return l;
}

SPDMatrix::SPDMatrix(Mat base) : base_(std::move(base)) {
  chol_ = cholesky(base_);
  base_ = symmetrize(base_);
}

SPDMatrix SPDMatrix::from_cholesky(Mat lower) {
  require_dims(lower.rows() == lower.cols(), "from_cholesky: not square");
  SPDMatrix s;
  for (Eigen::Index i = 0; i < lower.rows(); ++i) {
    if (!(lower(i, i) > 0.0) || !std::isfinite(lower(i, i)))
      fail(ErrorKind::SingularC, "from_cholesky: non-positive diagonal");
  }
  s.chol_ = lower.triangularView<Eigen::Lower>();
  s.base_ = s.chol_ * s.chol_.transpose();
  return s;
}

SPDMatrix SPDMatrix::identity(Eigen::Index n) { return from_cholesky(Mat::Identity(n, n)); }

SPDMatrix SPDMatrix::diagonal(const Vec& d) {
  return from_cholesky(Mat(d.cwiseSqrt().asDiagonal()));
}

Mat SPDMatrix::solve(const Mat& b) const {
  require_dims(b.rows() == dim(), "solve_spd: row mismatch");
  return solve_lower_transposed(chol_, solve_lower(chol_, b));
}

Vec SPDMatrix::solve(const Vec& b) const {
  require_dims(b.size() == dim(), "solve_spd: length mismatch");
  Vec x = chol_.triangularView<Eigen::Lower>().solve(b);
  chol_.triangularView<Eigen::Lower>().transpose().solveInPlace(x);
  return x;
}

Mat SPDMatrix::inverse() const { return symmetrize(solve(Mat(Mat::Identity(dim(), dim())))); }

double SPDMatrix::log_det() const { return 2.0 * chol_.diagonal().array().log().sum(); }

Mat solve_spd(const SPDMatrix& a, const Mat& b) { return a.solve(b); }

Mat solve_lower(const Mat& lower, const Mat& b) {
  require_dims(lower.rows() == b.rows(), "solve_lower: row mismatch");
  return lower.triangularView<Eigen::Lower>().solve(b);
}

Mat solve_lower_transposed(const Mat& lower, const Mat& b) {
  require_dims(lower.rows() == b.rows(), "solve_lower_transposed: row mismatch");
  return lower.triangularView<Eigen::Lower>().transpose().solve(b);
}

SymEig sym_eig(const Mat& a) {
  require_dims(a.rows() == a.cols(), "sym_eig: not square");
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(a));
  if (es.info() != Eigen::Success) fail(ErrorKind::NoConvergence, "sym_eig: solver did not converge");
  return {es.eigenvalues(), es.eigenvectors()};
}

SPDMatrix generalized_fractional_inverse_power(const Mat& k, const SPDMatrix& m, double xi) {
  require_dims(k.rows() == m.dim() && k.cols() == m.dim(), "fractional power: size mismatch");
  if (!(xi > 0.0)) fail(ErrorKind::ConfigError, "fractional power: xi must be positive");
  const Mat& l = m.chol();
  // C = L⁻¹ K L⁻ᵀ
  Mat c = solve_lower(l, solve_lower(l, k).transpose());
  SymEig eig = sym_eig(c);
  if (!(eig.values.minCoeff() > 0.0))
    fail(ErrorKind::NonPositiveSpectrum, "fractional power: non-positive generalized eigenvalue");
  Mat v = solve_lower_transposed(l, eig.vectors);
  Vec scale = eig.values.array().pow(-xi);
  return SPDMatrix(symmetrize(v * scale.asDiagonal() * v.transpose()));
}

double mahalanobis_sq(const Vec& v, const SPDMatrix& g) {
  require_dims(v.size() == g.dim(), "mahalanobis_sq: length mismatch");
  Vec z = g.chol().triangularView<Eigen::Lower>().solve(v);
  return z.squaredNorm();
}

double trace_solve(const SPDMatrix& g, const Mat& b) { return g.solve(b).trace(); }

Mat symmetrize(const Mat& a) { return 0.5 * (a + a.transpose()); }

Mat lower_part(const Mat& a) { return a.triangularView<Eigen::Lower>(); }

}  // namespace uqvae
