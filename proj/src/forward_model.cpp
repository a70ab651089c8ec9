#include "uqvae/forward_model.hpp"

#include <cmath>

#include "uqvae/error.hpp"

namespace uqvae {

Vec ForwardModel::eval(const Vec& u) const {
  require_dims(u.size() == param_dim(), name() + ": parameter length mismatch");
  calls_.fetch_add(1, std::memory_order_relaxed);
  Vec y = eval_impl(u);
  if (y.size() != obs_dim()) fail(ErrorKind::ForwardFailure, name() + ": wrong output length");
  if (!y.allFinite()) fail(ErrorKind::ForwardFailure, name() + ": non-finite output");
  return y;
}

Mat ForwardModel::eval_batch(const Mat& us) const {
  require_dims(us.rows() == param_dim(), name() + ": parameter length mismatch");
  calls_.fetch_add(us.cols(), std::memory_order_relaxed);
  Mat ys = eval_batch_impl(us);
  if (ys.rows() != obs_dim() || ys.cols() != us.cols())
    fail(ErrorKind::ForwardFailure, name() + ": wrong batch output shape");
  if (!ys.allFinite()) fail(ErrorKind::ForwardFailure, name() + ": non-finite output");
  return ys;
}

Mat ForwardModel::eval_batch_impl(const Mat& us) const {
  Mat ys(obs_dim(), us.cols());
  for (Eigen::Index k = 0; k < us.cols(); ++k) ys.col(k) = eval_impl(us.col(k));
  return ys;
}

Mat ForwardModel::vjp_batch(const Mat& us, const Mat& ws) const {
  require_dims(us.rows() == param_dim() && ws.rows() == obs_dim() && us.cols() == ws.cols(),
               name() + ": vjp batch shape mismatch");
  if (jacobian_kind() == JacobianKind::Analytic) return vjp_batch_impl(us, ws);
  Mat out(param_dim(), us.cols());
  for (Eigen::Index k = 0; k < us.cols(); ++k) out.col(k) = vjp(us.col(k), ws.col(k));
  return out;
}

Mat ForwardModel::vjp_batch_impl(const Mat& us, const Mat& ws) const {
  Mat out(param_dim(), us.cols());
  for (Eigen::Index k = 0; k < us.cols(); ++k) out.col(k) = vjp_impl(us.col(k), ws.col(k));
  return out;
}

Mat ForwardModel::jacobian(const Vec& u) const {
  require_dims(u.size() == param_dim(), name() + ": parameter length mismatch");
  switch (jacobian_kind()) {
    case JacobianKind::Analytic: return jacobian_impl(u);
    case JacobianKind::FiniteDifference: return finite_difference_jacobian(*this, u);
    case JacobianKind::None: break;
  }
  fail(ErrorKind::ForwardFailure, name() + ": no Jacobian available");
}

Vec ForwardModel::vjp(const Vec& u, const Vec& w) const {
  require_dims(w.size() == obs_dim(), name() + ": cotangent length mismatch");
  if (jacobian_kind() == JacobianKind::Analytic) return vjp_impl(u, w);
  return jacobian(u).transpose() * w;
}

Mat ForwardModel::jacobian_impl(const Vec& u) const { return finite_difference_jacobian(*this, u); }

Vec ForwardModel::vjp_impl(const Vec& u, const Vec& w) const {
  return jacobian_impl(u).transpose() * w;
}

Mat finite_difference_jacobian(const ForwardModel& f, const Vec& u, double h) {
  Mat j(f.obs_dim(), f.param_dim());
  Vec up = u, um = u;
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    up[k] = u[k] + h;
    um[k] = u[k] - h;
    j.col(k) = (f.eval(up) - f.eval(um)) / (2.0 * h);
    up[k] = um[k] = u[k];
  }
  return j;
}

ExpForward::ExpForward(Eigen::Index d) : d_(d) {
  if (d < 1) fail(ErrorKind::ConfigError, "exp map needs D >= 1");
}

Vec ExpForward::eval_impl(const Vec& u) const {
  if (u.maxCoeff() > 700.0) fail(ErrorKind::ForwardFailure, "exp map overflow");
  return u.array().exp();
}

Mat ExpForward::jacobian_impl(const Vec& u) const { return Mat(u.array().exp().matrix().asDiagonal()); }

Vec ExpForward::vjp_impl(const Vec& u, const Vec& w) const { return u.array().exp() * w.array(); }

AffineForwardModel::AffineForwardModel(Mat a, Vec f) : a_(std::move(a)), f_(std::move(f)) {
  require_dims(a_.rows() == f_.size(), "affine map: offset length mismatch");
}

Vec AffineForwardModel::eval_impl(const Vec& u) const { return a_ * u + f_; }

ConstantForward::ConstantForward(Eigen::Index d, Vec value) : d_(d), value_(std::move(value)) {}

NormalizedForward::NormalizedForward(std::shared_ptr<const ForwardModel> inner, Vec a, Vec b, Vec c,
                                     Vec d)
    : inner_(std::move(inner)), a_(std::move(a)), b_(std::move(b)), c_(std::move(c)), d_(std::move(d)) {
  require_dims(a_.size() == inner_->param_dim() && b_.size() == a_.size(),
               "normalized forward: parameter map size");
  require_dims(c_.size() == inner_->obs_dim() && d_.size() == c_.size(),
               "normalized forward: observation map size");
}

Vec NormalizedForward::eval_impl(const Vec& u) const {
  Vec raw = (u - b_).cwiseQuotient(a_);
  return c_.cwiseProduct(inner_->eval(raw)) + d_;
}

Mat NormalizedForward::jacobian_impl(const Vec& u) const {
  Vec raw = (u - b_).cwiseQuotient(a_);
  return c_.asDiagonal() * inner_->jacobian(raw) * a_.cwiseInverse().asDiagonal();
}

Vec NormalizedForward::vjp_impl(const Vec& u, const Vec& w) const {
  Vec raw = (u - b_).cwiseQuotient(a_);
  return inner_->vjp(raw, c_.cwiseProduct(w)).cwiseQuotient(a_);
}

Mat NormalizedForward::to_raw(const Mat& us) const {
  return (us.colwise() - b_).array().colwise() / a_.array();
}

Mat NormalizedForward::eval_batch_impl(const Mat& us) const {
  Mat ys = inner_->eval_batch(to_raw(us));
  return (ys.array().colwise() * c_.array()).matrix().colwise() + d_;
}

Mat NormalizedForward::vjp_batch_impl(const Mat& us, const Mat& ws) const {
  Mat g = inner_->vjp_batch(to_raw(us), ws.array().colwise() * c_.array());
  return g.array().colwise() / a_.array();
}

}  // namespace uqvae
