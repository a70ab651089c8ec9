#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "uqvae/forward_model.hpp"
#include "uqvae/linalg.hpp"

namespace uqvae {

// Hidden layers use ReLU, the output layer is linear.
struct MLPSpec {
  Eigen::Index input_dim = 1;
  Eigen::Index hidden_layers = 0;
  Eigen::Index hidden_width = 1;
  Eigen::Index output_dim = 1;

  void validate() const;
  bool operator==(const MLPSpec&) const = default;
};

struct DenseLayer {
  Mat W;  // out × in
  Vec b;
};

struct MLPParams {
  std::vector<DenseLayer> layers;

  static MLPParams zeros(const MLPSpec& spec);
  MLPParams zeros_like() const;
  MLPSpec spec() const;
  Eigen::Index input_dim() const { return layers.front().W.cols(); }
  Eigen::Index output_dim() const { return layers.back().W.rows(); }
  Eigen::Index param_count() const;
  void add_scaled(const MLPParams& other, double scale);
  void scale(double s);
  Vec flatten() const;
  void unflatten(const Vec& flat);
  bool all_finite() const;
};

struct MLPTape {
  std::vector<Mat> inputs;   // input of each layer, columns are samples
  std::vector<Mat> preacts;  // pre-activation of each hidden layer
};

// Columns of x are samples.
Mat mlp_forward(const MLPParams& params, const Mat& x, MLPTape* tape = nullptr);
Vec mlp_forward(const MLPParams& params, const Vec& x);

struct MLPGradient {
  MLPParams dparams;  // summed over the batch
  Mat dx;
};

MLPGradient mlp_backward(const MLPParams& params, const MLPTape& tape, const Mat& dy);

struct AdamState {
  MLPParams m, v;
  long step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_params(const MLPParams& p, double lr = 1e-3);
};

void adam_step(MLPParams& params, const MLPParams& grads, AdamState& state);

MLPParams init_xavier(const MLPSpec& spec, std::uint64_t seed);

// Head layout: [μ (D), log diag C (D), strict lower triangle of C row by row].
inline Eigen::Index head_size(Eigen::Index d) { return d + d * (d + 1) / 2; }

struct EncoderOutput {
  Vec mu;
  Vec sigma_raw;
  Vec l_raw;
  Mat C;
};

EncoderOutput decode_head(const Vec& raw, Eigen::Index d);
Vec encode_head(const Vec& mu, const Mat& c_lower);
// Gradient w.r.t. the raw head from gradients w.r.t. μ and the lower triangle of C.
Vec head_backward(const EncoderOutput& out, const Vec& dmu, const Mat& dc);

// Last-layer weights scaled by 1e-4 and biases set so that a zero input decodes to (μ_pr, C_pr).
MLPParams init_encoder(const MLPSpec& spec, const Vec& mu_pr, const Mat& c_pr, std::uint64_t seed);

// A trained network used as the forward map.
class MlpForward final : public ForwardModel {
 public:
  explicit MlpForward(MLPParams params);
  Eigen::Index param_dim() const override { return params_.input_dim(); }
  Eigen::Index obs_dim() const override { return params_.output_dim(); }
  JacobianKind jacobian_kind() const override { return JacobianKind::Analytic; }
  std::string name() const override { return "decoder"; }
  const MLPParams& params() const noexcept { return params_; }

 protected:
  Vec eval_impl(const Vec& u) const override;
  Mat eval_batch_impl(const Mat& us) const override;
  Mat jacobian_impl(const Vec& u) const override;
  Vec vjp_impl(const Vec& u, const Vec& w) const override;
  Mat vjp_batch_impl(const Mat& us, const Mat& ws) const override;

 private:
  MLPParams params_;
};

}  // namespace uqvae
