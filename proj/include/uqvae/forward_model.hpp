#pragma once

#include <atomic>
#include <memory>
#include <string>

#include "uqvae/linalg.hpp"

namespace uqvae {

enum class JacobianKind { Analytic, FiniteDifference, None };

// y = F(u). eval() is the only way to run the model and bumps the call counter
// exactly once; finite-difference Jacobians go through eval() too.
class ForwardModel {
 public:
  virtual ~ForwardModel() = default;

  virtual Eigen::Index param_dim() const = 0;
  virtual Eigen::Index obs_dim() const = 0;
  virtual JacobianKind jacobian_kind() const { return JacobianKind::FiniteDifference; }
  virtual std::string name() const = 0;

  Vec eval(const Vec& u) const;
  // Columns of us are parameter vectors; counts one call per column.
  Mat eval_batch(const Mat& us) const;
  Mat jacobian(const Vec& u) const;
  // Jᵀ w without forming J when the model supports it.
  Vec vjp(const Vec& u, const Vec& w) const;
  // Column k is J(us_k)ᵀ ws_k.
  Mat vjp_batch(const Mat& us, const Mat& ws) const;

  long calls() const noexcept { return calls_.load(std::memory_order_relaxed); }
  void reset_calls() const noexcept { calls_.store(0, std::memory_order_relaxed); }

  static constexpr double fd_step = 1e-5;

 protected:
  virtual Vec eval_impl(const Vec& u) const = 0;
  virtual Mat jacobian_impl(const Vec& u) const;
  virtual Vec vjp_impl(const Vec& u, const Vec& w) const;
  virtual Mat eval_batch_impl(const Mat& us) const;
  virtual Mat vjp_batch_impl(const Mat& us, const Mat& ws) const;

 private:
  mutable std::atomic<long> calls_{0};
};

Mat finite_difference_jacobian(const ForwardModel& f, const Vec& u, double h = ForwardModel::fd_step);

class ExpForward final : public ForwardModel {
 public:
  explicit ExpForward(Eigen::Index d);
  Eigen::Index param_dim() const override { return d_; }
  Eigen::Index obs_dim() const override { return d_; }
  JacobianKind jacobian_kind() const override { return JacobianKind::Analytic; }
  std::string name() const override { return "exp"; }

 protected:
  Vec eval_impl(const Vec& u) const override;
  Mat jacobian_impl(const Vec& u) const override;
  Vec vjp_impl(const Vec& u, const Vec& w) const override;

 private:
  Eigen::Index d_;
};

// F(u) = A u + f
class AffineForwardModel final : public ForwardModel {
 public:
  AffineForwardModel(Mat a, Vec f);
  Eigen::Index param_dim() const override { return a_.cols(); }
  Eigen::Index obs_dim() const override { return a_.rows(); }
  JacobianKind jacobian_kind() const override { return JacobianKind::Analytic; }
  std::string name() const override { return "affine"; }
  const Mat& matrix() const noexcept { return a_; }
  const Vec& offset() const noexcept { return f_; }

 protected:
  Vec eval_impl(const Vec& u) const override;
  Mat jacobian_impl(const Vec&) const override { return a_; }
  Vec vjp_impl(const Vec&, const Vec& w) const override { return a_.transpose() * w; }

 private:
  Mat a_;
  Vec f_;
};

// Constant map, carries no information about u.
class ConstantForward final : public ForwardModel {
 public:
  ConstantForward(Eigen::Index d, Vec value);
  Eigen::Index param_dim() const override { return d_; }
  Eigen::Index obs_dim() const override { return value_.size(); }
  JacobianKind jacobian_kind() const override { return JacobianKind::Analytic; }
  std::string name() const override { return "constant"; }

 protected:
  Vec eval_impl(const Vec&) const override { return value_; }
  Mat jacobian_impl(const Vec&) const override { return Mat::Zero(value_.size(), d_); }

 private:
  Eigen::Index d_;
  Vec value_;
};

// F̄(ū) = c ⊙ F((ū − b) ⊘ a) + d, the map seen in normalized coordinates.
class NormalizedForward final : public ForwardModel {
 public:
  NormalizedForward(std::shared_ptr<const ForwardModel> inner, Vec a, Vec b, Vec c, Vec d);
  Eigen::Index param_dim() const override { return inner_->param_dim(); }
  Eigen::Index obs_dim() const override { return inner_->obs_dim(); }
  JacobianKind jacobian_kind() const override { return inner_->jacobian_kind(); }
  std::string name() const override { return "normalized(" + inner_->name() + ")"; }

 protected:
  Vec eval_impl(const Vec& u) const override;
  Mat jacobian_impl(const Vec& u) const override;
  Vec vjp_impl(const Vec& u, const Vec& w) const override;
  Mat eval_batch_impl(const Mat& us) const override;
  Mat vjp_batch_impl(const Mat& us, const Mat& ws) const override;

 private:
  Mat to_raw(const Mat& us) const;

  std::shared_ptr<const ForwardModel> inner_;
  Vec a_, b_, c_, d_;
};

}  // namespace uqvae
