#include <doctest.h>

#include <random>

#include "support.hpp"
#include "uqvae/error.hpp"
#include "uqvae/nnet.hpp"

using namespace uqvae;
using namespace testing;

namespace {

// Straight-line re-evaluation of the affine + ReLU chain.
Vec naive_forward(const MLPParams& p, const Vec& x) {
  Vec h = x;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    Vec z = p.layers[l].b;
    for (Eigen::Index i = 0; i < z.size(); ++i)
      for (Eigen::Index j = 0; j < h.size(); ++j) z[i] += p.layers[l].W(i, j) * h[j];
    if (l + 1 < p.layers.size())
      for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = z[i] > 0.0 ? z[i] : 0.0;
    h = z;
  }
  return h;
}

MLPParams random_params(const MLPSpec& s, std::mt19937_64& rng) {
  MLPParams p = MLPParams::zeros(s);
  for (auto& l : p.layers) {
    l.W = random_matrix(l.W.rows(), l.W.cols(), rng, 0.7);
    l.b = random_vector(l.b.size(), rng, 0.3);
  }
  return p;
}

// Max relative error; entries where |fd| < 1e-8 are compared absolutely.
double grad_err(const Vec& g, const Vec& fd) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double diff = std::abs(g[i] - fd[i]);
    worst = std::max(worst, std::abs(fd[i]) < 1e-8 ? diff : diff / std::abs(fd[i]));
  }
  return worst;
}

}  // namespace

TEST_SUITE("nnet") {

TEST_CASE("linear layer forward and backward") {
  MLPParams p = MLPParams::zeros({3, 0, 1, 3});
  p.layers[0].W = Mat::Identity(3, 3);
  const Vec x(Eigen::Vector3d(1, -2, 3));
  CHECK(mlp_forward(p, x) == x);

  std::mt19937_64 rng(1);
  MLPParams q = random_params({3, 0, 1, 2}, rng);
  MLPTape tape;
  mlp_forward(q, Mat(x), &tape);
  for (int i = 0; i < 2; ++i) {
    const Vec e = Vec::Unit(2, i);
    const MLPGradient g = mlp_backward(q, tape, e);
    CHECK((g.dparams.layers[0].W - e * x.transpose()).norm() == 0.0);
    CHECK(g.dparams.layers[0].b == e);
    CHECK((g.dx.col(0) - q.layers[0].W.transpose() * e).norm() < 1e-15);
  }
  const MLPGradient z = mlp_backward(q, tape, Mat::Zero(2, 1));
  CHECK(z.dparams.flatten().norm() == 0.0);
  CHECK(z.dx.norm() == 0.0);
}

TEST_CASE("dead ReLU layer passes only the output bias") {
  MLPParams p = MLPParams::zeros({2, 1, 4, 3});
  p.layers[0].W.setConstant(-1.0);
  p.layers[1].W.setConstant(5.0);
  p.layers[1].b = Vec(Eigen::Vector3d(0.1, 0.2, 0.3));
  CHECK(mlp_forward(p, Vec(Eigen::Vector2d(1.0, 2.0))) == p.layers[1].b);
}

TEST_CASE("forward matches a straight-line oracle") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 10; ++t) {
    const MLPParams p = random_params({4, 3, 9, 5}, rng);
    const Vec x = random_vector(4, rng);
    CHECK((mlp_forward(p, x) - naive_forward(p, x)).norm() < 1e-12);
    CHECK(mlp_forward(p, x) == mlp_forward(p, x));
  }
}

TEST_CASE("forward rejects wrong input size and non-finite activations") {
  const MLPParams p = MLPParams::zeros({3, 1, 2, 1});
  CHECK_THROWS_AS(mlp_forward(p, Vec(Vec::Zero(2))), Error);
  Vec x = Vec::Zero(3);
  x[0] = std::numeric_limits<double>::infinity();
  MLPParams q = p;
  q.layers[0].W.setOnes();
  CHECK_THROWS_AS(mlp_forward(q, x), Error);
}

TEST_CASE("backward rejects a tape from another network") {
  const MLPParams a = MLPParams::zeros({3, 1, 2, 1});
  const MLPParams b = MLPParams::zeros({3, 2, 2, 1});
  MLPTape tape;
  mlp_forward(a, Mat::Zero(3, 1), &tape);
  CHECK_THROWS_AS(mlp_backward(b, tape, Mat::Zero(1, 1)), Error);
}

TEST_CASE("backward matches central differences over 20 random networks") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> layers(0, 3), width(2, 32);
  for (int t = 0; t < 20; ++t) {
    const MLPSpec s{3, layers(rng), width(rng), 4};
    MLPParams p = random_params(s, rng);
    const Mat x = random_matrix(3, 2, rng);
    const Mat w = random_matrix(4, 2, rng);
    MLPTape tape;
    mlp_forward(p, x, &tape);
    const MLPGradient g = mlp_backward(p, tape, w);

    const Vec theta = p.flatten();
    auto by_params = [&](const Vec& th) {
      MLPParams q = p;
      q.unflatten(th);
      return (w.array() * mlp_forward(q, x).array()).sum();
    };
    CHECK(grad_err(g.dparams.flatten(), fd_gradient(by_params, theta, 1e-5)) < 1e-5);

    auto by_input = [&](const Vec& xv) {
      return (w.array() * mlp_forward(p, Mat(xv.reshaped(3, 2))).array()).sum();
    };
    CHECK(grad_err(g.dx.reshaped(), fd_gradient(by_input, x.reshaped(), 1e-5)) < 1e-5);
  }
}

TEST_CASE("adam step") {
  std::mt19937_64 rng(4);
  MLPParams p = random_params({2, 1, 3, 2}, rng);
  SUBCASE("zero gradient leaves params unchanged") {
    AdamState st = AdamState::for_params(p);
    const Vec before = p.flatten();
    adam_step(p, p.zeros_like(), st);
    CHECK(p.flatten() == before);
    CHECK(st.step == 1);
  }
  SUBCASE("first step moves by lr against the gradient sign") {
    AdamState st = AdamState::for_params(p, 0.01);
    MLPParams g = random_params({2, 1, 3, 2}, rng);
    const Vec before = p.flatten(), gv = g.flatten();
    adam_step(p, g, st);
    const Vec step = p.flatten() - before;
    // m̂ = g, v̂ = g², so the update is −lr g / (|g| + ε).
    const Vec expect = -0.01 * gv.array() / (gv.array().abs() + 1e-8);
    CHECK((step - expect).lpNorm<Eigen::Infinity>() < 1e-12);
  }
  SUBCASE("quadratic converges towards the target") {
    MLPParams x = MLPParams::zeros({1, 0, 1, 1});
    const double target = 3.0;
    AdamState st = AdamState::for_params(x, 0.1);
    double prev = 1e300;
    for (int it = 0; it < 200; ++it) {
      MLPParams g = x.zeros_like();
      g.layers[0].b[0] = 2.0 * (x.layers[0].b[0] - target);
      adam_step(x, g, st);
      const double dist = std::abs(x.layers[0].b[0] - target);
      if (it >= 5 && it < 25) CHECK(dist < prev);
      prev = dist;
    }
    CHECK(std::abs(x.layers[0].b[0] - target) < 0.1);
  }
}

TEST_CASE("decode_head examples") {
  const EncoderOutput a = decode_head(Vec(Eigen::Vector2d(0.5, 0.0)), 1);
  CHECK(a.mu[0] == 0.5);
  CHECK(a.C(0, 0) == 1.0);
  Vec raw = Vec::Zero(5);
  raw[4] = 3.0;
  const EncoderOutput b = decode_head(raw, 2);
  Mat expect(2, 2);
  expect << 1, 0, 3, 1;
  CHECK(b.C == expect);
  CHECK_THROWS_AS(decode_head(Vec::Zero(4), 2), Error);
}

TEST_CASE("decode_head always yields a valid Cholesky factor") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 1000; ++t) {
    const Eigen::Index d = 1 + t % 6;
    const Vec raw = random_vector(head_size(d), rng, 1.5);
    const EncoderOutput out = decode_head(raw, d);
    CHECK(out.C.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().norm() == 0.0);
    CHECK((out.C.diagonal() - out.sigma_raw.array().exp().matrix()).norm() == 0.0);
    CHECK_NOTHROW(SPDMatrix(out.C * out.C.transpose()));
    CHECK(encode_head(out.mu, out.C).isApprox(raw, 1e-12));
  }
}

TEST_CASE("head_backward matches central differences") {
  std::mt19937_64 rng(6);
  const Eigen::Index d = 4;
  const Vec raw = random_vector(head_size(d), rng);
  const Vec wmu = random_vector(d, rng);
  const Mat wc = random_lower(d, rng);
  auto f = [&](const Vec& r) {
    const EncoderOutput o = decode_head(r, d);
    return wmu.dot(o.mu) + (wc.array() * o.C.array()).sum();
  };
  const Vec g = head_backward(decode_head(raw, d), wmu, wc);
  CHECK(max_rel_err(g, fd_gradient(f, raw, 1e-6)) < 1e-8);
}

TEST_CASE("init_encoder decodes the prior") {
  std::mt19937_64 rng(7);
  const Eigen::Index d = 3;
  const Vec mu_pr = random_vector(d, rng);
  const Mat c_pr = random_lower(d, rng);
  const MLPSpec s{6, 2, 16, head_size(d)};
  const MLPParams p = init_encoder(s, mu_pr, c_pr, 11);
  const EncoderOutput at_zero = decode_head(mlp_forward(p, Vec(Vec::Zero(6))), d);
  CHECK((at_zero.mu - mu_pr).norm() == 0.0);
  CHECK((at_zero.C - c_pr).lpNorm<Eigen::Infinity>() < 1e-15);
  for (int t = 0; t < 20; ++t) {
    const EncoderOutput o = decode_head(mlp_forward(p, random_vector(6, rng)), d);
    CHECK((o.mu - mu_pr).lpNorm<Eigen::Infinity>() < 1e-3);
    CHECK((o.C - c_pr).lpNorm<Eigen::Infinity>() < 1e-3);
  }
  const MLPParams q = init_encoder({2, 1, 4, head_size(2)}, Vec::Zero(2), Mat::Identity(2, 2), 1);
  CHECK(q.layers.back().b.norm() == 0.0);
  CHECK_THROWS_AS(init_encoder({2, 1, 4, 7}, Vec::Zero(3), Mat::Identity(3, 3), 1), Error);
}

TEST_CASE("xavier bounds") {
  const MLPParams p = init_xavier({5, 2, 11, 3}, 9);
  for (const auto& l : p.layers) {
    const double bound = std::sqrt(6.0 / static_cast<double>(l.W.rows() + l.W.cols()));
    CHECK(l.W.cwiseAbs().maxCoeff() <= bound);
    CHECK(l.b.norm() == 0.0);
  }
  CHECK(init_xavier({5, 2, 11, 3}, 9).flatten() == p.flatten());
}

TEST_CASE("MlpForward Jacobian and vjp agree with the network backward") {
  std::mt19937_64 rng(8);
  MlpForward f(random_params({3, 2, 8, 4}, rng));
  const Vec u = random_vector(3, rng);
  const Mat j = f.jacobian(u);
  const Mat fd = finite_difference_jacobian(f, u, 1e-6);
  CHECK(rel_fro(j, fd) < 1e-7);
  const Vec w = random_vector(4, rng);
  CHECK((f.vjp(u, w) - j.transpose() * w).norm() < 1e-12);
}

}  // TEST_SUITE
