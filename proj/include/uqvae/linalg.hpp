#pragma once

#include <Eigen/Dense>

namespace uqvae {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Cholesky factor L (lower, positive diagonal) with L Lᵀ = A.
// Throws NotPositiveDefinite when a pivot falls below 1e-14 * max|diag(A)|.
Mat cholesky(const Mat& a);

bool is_symmetric(const Mat& a, double rel_tol = 1e-10);

class SPDMatrix {
 public:
  SPDMatrix() = default;
  explicit SPDMatrix(Mat base);
  static SPDMatrix from_cholesky(Mat lower);
  static SPDMatrix identity(Eigen::Index n);
  static SPDMatrix diagonal(const Vec& d);

  const Mat& base() const noexcept { return base_; }
  const Mat& chol() const noexcept { return chol_; }
  Eigen::Index dim() const noexcept { return base_.rows(); }

  Mat solve(const Mat& b) const;
  Vec solve(const Vec& b) const;
  Mat inverse() const;
  double log_det() const;

 private:
  Mat base_;
  Mat chol_;
};

Mat solve_spd(const SPDMatrix& a, const Mat& b);

// Solves L x = b / Lᵀ x = b for lower-triangular L.
Mat solve_lower(const Mat& lower, const Mat& b);
Mat solve_lower_transposed(const Mat& lower, const Mat& b);

struct SymEig {
  Vec values;   // ascending
  Mat vectors;  // columns orthonormal
};

SymEig sym_eig(const Mat& a);

// Γ = V diag(λ^-xi) Vᵀ for K v = λ M v, vᵀ M v = 1.
SPDMatrix generalized_fractional_inverse_power(const Mat& k, const SPDMatrix& m, double xi);

double mahalanobis_sq(const Vec& v, const SPDMatrix& g);

// tr(G⁻¹ B)
double trace_solve(const SPDMatrix& g, const Mat& b);

Mat symmetrize(const Mat& a);
Mat lower_part(const Mat& a);

}  // namespace uqvae
