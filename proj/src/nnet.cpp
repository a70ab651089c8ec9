#include "uqvae/nnet.hpp"

#include <cmath>
#include <random>

#include "uqvae/error.hpp"

namespace uqvae {

void MLPSpec::validate() const {
  if (input_dim < 1 || output_dim < 1 || hidden_layers < 0 || (hidden_layers > 0 && hidden_width < 1))
    fail(ErrorKind::DimensionMismatch, "MLPSpec: dimensions must be >= 1");
}

MLPParams MLPParams::zeros(const MLPSpec& spec) {
  spec.validate();
  MLPParams p;
  Eigen::Index in = spec.input_dim;
  for (Eigen::Index l = 0; l < spec.hidden_layers; ++l) {
    p.layers.push_back({Mat::Zero(spec.hidden_width, in), Vec::Zero(spec.hidden_width)});
    in = spec.hidden_width;
  }
  p.layers.push_back({Mat::Zero(spec.output_dim, in), Vec::Zero(spec.output_dim)});
  return p;
}

MLPParams MLPParams::zeros_like() const {
  MLPParams p;
  for (const auto& l : layers) p.layers.push_back({Mat::Zero(l.W.rows(), l.W.cols()), Vec::Zero(l.b.size())});
  return p;
}

MLPSpec MLPParams::spec() const {
  MLPSpec s;
  s.input_dim = input_dim();
  s.output_dim = output_dim();
  s.hidden_layers = static_cast<Eigen::Index>(layers.size()) - 1;
  s.hidden_width = s.hidden_layers > 0 ? layers.front().W.rows() : 1;
  return s;
}

Eigen::Index MLPParams::param_count() const {
  Eigen::Index n = 0;
  for (const auto& l : layers) n += l.W.size() + l.b.size();
  return n;
}

void MLPParams::add_scaled(const MLPParams& other, double s) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].W += s * other.layers[i].W;
    layers[i].b += s * other.layers[i].b;
  }
}

void MLPParams::scale(double s) {
  for (auto& l : layers) {
    l.W *= s;
    l.b *= s;
  }
}

Vec MLPParams::flatten() const {
  Vec flat(param_count());
  Eigen::Index k = 0;
  for (const auto& l : layers) {
    flat.segment(k, l.W.size()) = Eigen::Map<const Vec>(l.W.data(), l.W.size());
    k += l.W.size();
    flat.segment(k, l.b.size()) = l.b;
    k += l.b.size();
  }
  return flat;
}

void MLPParams::unflatten(const Vec& flat) {
  require_dims(flat.size() == param_count(), "MLPParams::unflatten: size mismatch");
  Eigen::Index k = 0;
  for (auto& l : layers) {
    Eigen::Map<Vec>(l.W.data(), l.W.size()) = flat.segment(k, l.W.size());
    k += l.W.size();
    l.b = flat.segment(k, l.b.size());
    k += l.b.size();
  }
}

bool MLPParams::all_finite() const {
  for (const auto& l : layers)
    if (!l.W.allFinite() || !l.b.allFinite()) return false;
  return true;
}

Mat mlp_forward(const MLPParams& params, const Mat& x, MLPTape* tape) {
  require_dims(x.rows() == params.input_dim(), "mlp_forward: input length mismatch");
  if (tape) {
    tape->inputs.clear();
    tape->preacts.clear();
  }
  Mat a = x;
  const std::size_t n = params.layers.size();
  for (std::size_t i = 0; i < n; ++i) {
    const DenseLayer& l = params.layers[i];
    Mat z = l.W * a;
    z.colwise() += l.b;
    if (tape) tape->inputs.push_back(a);
    if (i + 1 < n) {
      if (tape) tape->preacts.push_back(z);
      a = z.cwiseMax(0.0);
    } else {
      a = std::move(z);
    }
  }
  if (!a.allFinite()) fail(ErrorKind::NonFiniteActivation, "mlp_forward: non-finite output");
  return a;
}

Vec mlp_forward(const MLPParams& params, const Vec& x) {
  Mat out = mlp_forward(params, Mat(x), nullptr);
  return out.col(0);
}

MLPGradient mlp_backward(const MLPParams& params, const MLPTape& tape, const Mat& dy) {
  const std::size_t n = params.layers.size();
  if (tape.inputs.size() != n || tape.preacts.size() + 1 != n)
    fail(ErrorKind::TapeMismatch, "mlp_backward: tape depth does not match network");
  if (dy.rows() != params.output_dim() || dy.cols() != tape.inputs.front().cols())
    fail(ErrorKind::TapeMismatch, "mlp_backward: cotangent shape does not match tape");
  MLPGradient g;
  g.dparams = params.zeros_like();
  Mat delta = dy;
  for (std::size_t ii = n; ii-- > 0;) {
    const DenseLayer& l = params.layers[ii];
    if (tape.inputs[ii].rows() != l.W.cols()) fail(ErrorKind::TapeMismatch, "mlp_backward: layer shape");
    g.dparams.layers[ii].W = delta * tape.inputs[ii].transpose();
    g.dparams.layers[ii].b = delta.rowwise().sum();
    Mat da = l.W.transpose() * delta;
    if (ii > 0) {
      // ReLU derivative, taken as 0 at exactly 0.
      delta = da.cwiseProduct((tape.preacts[ii - 1].array() > 0.0).cast<double>().matrix());
    } else {
      g.dx = std::move(da);
    }
  }
  return g;
}

AdamState AdamState::for_params(const MLPParams& p, double lr) {
  AdamState s;
  s.m = p.zeros_like();
  s.v = p.zeros_like();
  s.lr = lr;
  return s;
}

void adam_step(MLPParams& params, const MLPParams& grads, AdamState& s) {
  if (s.m.layers.empty()) {
    s.m = params.zeros_like();
    s.v = params.zeros_like();
  }
  ++s.step;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = s.beta1 * m + (1.0 - s.beta1) * g;
    v = s.beta2 * v + (1.0 - s.beta2) * g.cwiseAbs2();
    p.array() -= s.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + s.eps);
  };
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    update(params.layers[i].W, grads.layers[i].W, s.m.layers[i].W, s.v.layers[i].W);
    update(params.layers[i].b, grads.layers[i].b, s.m.layers[i].b, s.v.layers[i].b);
  }
}

MLPParams init_xavier(const MLPSpec& spec, std::uint64_t seed) {
  MLPParams p = MLPParams::zeros(spec);
  std::mt19937_64 rng(seed);
  for (auto& l : p.layers) {
    const double bound = std::sqrt(6.0 / static_cast<double>(l.W.rows() + l.W.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index j = 0; j < l.W.cols(); ++j)
      for (Eigen::Index i = 0; i < l.W.rows(); ++i) l.W(i, j) = dist(rng);
  }
  return p;
}

EncoderOutput decode_head(const Vec& raw, Eigen::Index d) {
  require_dims(d >= 1 && raw.size() == head_size(d), "decode_head: raw length must be D + D(D+1)/2");
  EncoderOutput out;
  out.mu = raw.head(d);
  out.sigma_raw = raw.segment(d, d);
  out.l_raw = raw.tail(d * (d - 1) / 2);
  out.C = Mat::Zero(d, d);
  Eigen::Index k = 0;
  for (Eigen::Index i = 1; i < d; ++i)
    for (Eigen::Index j = 0; j < i; ++j) out.C(i, j) = out.l_raw[k++];
  out.C.diagonal() = out.sigma_raw.array().exp();
  return out;
}

Vec encode_head(const Vec& mu, const Mat& c) {
  const Eigen::Index d = mu.size();
  require_dims(c.rows() == d && c.cols() == d, "encode_head: C shape");
  Vec raw(head_size(d));
  raw.head(d) = mu;
  for (Eigen::Index i = 0; i < d; ++i) {
    if (!(c(i, i) > 0.0)) fail(ErrorKind::SingularC, "encode_head: C diagonal must be positive");
    raw[d + i] = std::log(c(i, i));
  }
  Eigen::Index k = 2 * d;
  for (Eigen::Index i = 1; i < d; ++i)
    for (Eigen::Index j = 0; j < i; ++j) raw[k++] = c(i, j);
  return raw;
}

Vec head_backward(const EncoderOutput& out, const Vec& dmu, const Mat& dc) {
  const Eigen::Index d = out.mu.size();
  Vec draw(head_size(d));
  draw.head(d) = dmu;
  for (Eigen::Index i = 0; i < d; ++i) draw[d + i] = dc(i, i) * out.C(i, i);
  Eigen::Index k = 2 * d;
  for (Eigen::Index i = 1; i < d; ++i)
    for (Eigen::Index j = 0; j < i; ++j) draw[k++] = dc(i, j);
  return draw;
}

MLPParams init_encoder(const MLPSpec& spec, const Vec& mu_pr, const Mat& c_pr, std::uint64_t seed) {
  require_dims(spec.output_dim == head_size(mu_pr.size()), "init_encoder: output_dim must be D + D(D+1)/2");
  MLPParams p = init_xavier(spec, seed);
  p.layers.back().W *= 1e-4;
  p.layers.back().b = encode_head(mu_pr, c_pr);
  return p;
}

MlpForward::MlpForward(MLPParams params) : params_(std::move(params)) {}

Vec MlpForward::eval_impl(const Vec& u) const { return mlp_forward(params_, u); }

Mat MlpForward::eval_batch_impl(const Mat& us) const { return mlp_forward(params_, us, nullptr); }

Mat MlpForward::jacobian_impl(const Vec& u) const {
  const Eigen::Index o = obs_dim();
  MLPTape tape;
  mlp_forward(params_, Mat(u.replicate(1, o)), &tape);
  // Column i of dx is Jᵀ e_i.
  return mlp_backward(params_, tape, Mat::Identity(o, o)).dx.transpose();
}

Vec MlpForward::vjp_impl(const Vec& u, const Vec& w) const { return vjp_batch_impl(Mat(u), Mat(w)).col(0); }

Mat MlpForward::vjp_batch_impl(const Mat& us, const Mat& ws) const {
  MLPTape tape;
  mlp_forward(params_, us, &tape);
  return mlp_backward(params_, tape, ws).dx;
}

}  // namespace uqvae
