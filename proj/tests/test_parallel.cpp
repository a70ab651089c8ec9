#include <doctest.h>

#include <random>

#include "support.hpp"
#include "uqvae/error.hpp"
#include "uqvae/parallel.hpp"

using namespace uqvae;
using namespace testing;

namespace {

// Fails for any parameter whose first coordinate is negative.
class SignGuard final : public ForwardModel {
 public:
  explicit SignGuard(Eigen::Index d) : d_(d) {}
  Eigen::Index param_dim() const override { return d_; }
  Eigen::Index obs_dim() const override { return d_; }
  std::string name() const override { return "sign_guard"; }

 protected:
  Vec eval_impl(const Vec& u) const override {
    if (u[0] < 0.0) fail(ErrorKind::ForwardFailure, "negative");
    return u.array().square();
  }

 private:
  Eigen::Index d_;
};

}  // namespace

TEST_SUITE("parallel") {

TEST_CASE("batch forward matches serial evaluation") {
  std::mt19937_64 rng(1);
  ExpForward f(4);
  const Mat us = random_matrix(4, 257, rng);
  const BatchEvalResult s = batch_forward(f, us, Exec::Serial);
  const BatchEvalResult p = batch_forward(f, us, Exec::Parallel);
  CHECK(s.y == p.y);
  CHECK(s.y == Mat(us.array().exp()));
  CHECK(p.failures == 0);
}

TEST_CASE("batch forward failure handling") {
  SignGuard g(2);
  Mat us(2, 4);
  us << 1, -1, 2, -2, 0, 0, 0, 0;
  for (Exec e : {Exec::Serial, Exec::Parallel}) {
    const BatchEvalResult r = batch_forward(g, us, e, true);
    CHECK(r.failures == 2);
    CHECK(r.ok == std::vector<char>{1, 0, 1, 0});
    CHECK(std::isnan(r.y(0, 1)));
    CHECK(r.y(0, 2) == 4.0);
    CHECK_THROWS_AS(batch_forward(g, us, e, false), Error);
  }
}

TEST_CASE("log likelihoods match a direct inverse") {
  std::mt19937_64 rng(2);
  const Mat fu = random_matrix(5, 300, rng);
  const Vec y = random_vector(5, rng), m = random_vector(5, rng);
  const Mat cov = random_spd(5, rng);
  const Mat inv = cov.inverse();
  const Mat l = cov.llt().matrixL();
  const Vec s = gaussian_log_likelihoods(fu, y, m, l, Exec::Serial);
  const Vec p = gaussian_log_likelihoods(fu, y, m, l, Exec::Parallel);
  CHECK(s == p);
  for (Eigen::Index k = 0; k < fu.cols(); ++k) {
    const Vec r = y - m - fu.col(k);
    CHECK(s[k] == doctest::Approx(-0.5 * r.dot(inv * r)).epsilon(1e-11));
  }
}

TEST_CASE("thread count control") {
  const int before = max_threads();
  set_threads(1);
  CHECK(max_threads() == 1);
  set_threads(before);
  CHECK(max_threads() == before);
}

}  // TEST_SUITE
