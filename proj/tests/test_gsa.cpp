#include <doctest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"
#include "uqvae/error.hpp"
#include "uqvae/gsa.hpp"

using namespace uqvae;
using namespace testing;

namespace {

constexpr double kPi = std::numbers::pi;

// Closed-form Ishigami totals for f = sin x1 + a sin² x2 + b x3⁴ sin x1 on [−π, π]³.
Vec ishigami_totals(double a, double b) {
  const double v1 = 0.5 * std::pow(1.0 + b * std::pow(kPi, 4) / 5.0, 2);
  const double v2 = a * a / 8.0;
  const double v13 = b * b * std::pow(kPi, 8) * (1.0 / 18.0 - 1.0 / 50.0);
  const double v = v1 + v2 + v13;
  return Vec(Eigen::Vector3d((v1 + v13) / v, v2 / v, v13 / v));
}

class Ishigami final : public ForwardModel {
 public:
  explicit Ishigami(std::array<int, 3> order = {0, 1, 2}) : order_(order) {}
  Eigen::Index param_dim() const override { return 3; }
  Eigen::Index obs_dim() const override { return 1; }
  std::string name() const override { return "ishigami"; }

 protected:
  Vec eval_impl(const Vec& u) const override {
    const double x1 = u[order_[0]], x2 = u[order_[1]], x3 = u[order_[2]];
    return Vec::Constant(1, std::sin(x1) + 7.0 * std::sin(x2) * std::sin(x2) + 0.1 * std::pow(x3, 4) * std::sin(x1));
  }

 private:
  std::array<int, 3> order_;
};

GsaPlan box(int k, double lo, double hi, Eigen::Index n) {
  GsaPlan p;
  for (int i = 0; i < k; ++i) p.ranges.push_back({"u" + std::to_string(i), lo, hi});
  p.base_samples = n;
  return p;
}

}  // namespace

TEST_SUITE("gsa") {

TEST_CASE("closed-form Ishigami totals") {
  const Vec t = ishigami_totals(7.0, 0.1);
  CHECK(t[0] == doctest::Approx(0.5576).epsilon(1e-3));
  CHECK(t[1] == doctest::Approx(0.4424).epsilon(1e-3));
  CHECK(t[2] == doctest::Approx(0.2437).epsilon(1e-3));
}

TEST_CASE("saltelli sample layout") {
  CHECK(box(1, 0, 1, 2).row_count() == 8);
  CHECK(saltelli_sample(box(1, 0, 1, 2), 0).rows() == 8);
  const GsaPlan plan = box(3, -2.0, 5.0, 64);
  const Mat rows = saltelli_sample(plan, 3);
  CHECK(rows.rows() == plan.row_count());
  CHECK(rows.minCoeff() >= -2.0);
  CHECK(rows.maxCoeff() <= 5.0);
  const Mat a = rows.topRows(64), b = rows.middleRows(64, 64);
  for (int i = 0; i < 3; ++i) {
    const Mat ab = rows.middleRows((2 + i) * 64, 64);
    const Mat ba = rows.middleRows((5 + i) * 64, 64);
    for (int j = 0; j < 3; ++j) {
      CHECK(ab.col(j) == (j == i ? b.col(j) : a.col(j)));
      CHECK(ba.col(j) == (j == i ? a.col(j) : b.col(j)));
    }
  }
  CHECK(saltelli_sample(plan, 3) == rows);
  CHECK(saltelli_sample(plan, 4) != rows);
  GsaPlan bad = plan;
  bad.ranges[1].high = bad.ranges[1].low;
  CHECK_THROWS_AS(saltelli_sample(bad, 0), Error);
}

TEST_CASE("Ishigami totals at N = 2^12") {
  GsaPlan plan = box(3, -kPi, kPi, 4096);
  const SobolIndices s = run_gsa(plan, Ishigami(), 0);
  const Vec oracle = ishigami_totals(7.0, 0.1);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(s.total(i, 0) - oracle[i]) < 0.02);
  CHECK(select_parameters(s, 0.1) == std::vector<int>{0, 1, 2});
}

TEST_CASE("permuting parameters permutes the totals") {
  GsaPlan plan = box(3, -kPi, kPi, 4096);
  const SobolIndices s = run_gsa(plan, Ishigami(), 0);
  // Model reads (x1, x2, x3) from input slots (2, 0, 1).
  const SobolIndices p = run_gsa(plan, Ishigami({2, 0, 1}), 0);
  const Vec oracle = ishigami_totals(7.0, 0.1);
  CHECK(std::abs(p.total(2, 0) - oracle[0]) < 0.02);
  CHECK(std::abs(p.total(0, 0) - oracle[1]) < 0.02);
  CHECK(std::abs(p.total(1, 0) - oracle[2]) < 0.02);
  CHECK(std::abs(p.total(2, 0) - s.total(0, 0)) < 0.02);
}

TEST_CASE("additive model equipartition and single-variable dependence") {
  const GsaPlan plan = box(4, 0.0, 1.0, 4096);
  const Mat rows = saltelli_sample(plan, 1);
  Mat out(rows.rows(), 2);
  out.col(0) = rows.rowwise().sum();
  out.col(1) = rows.col(0).array().square();
  const SobolIndices s = total_sobol_indices(out, plan);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(s.total(i, 0) - 0.25) < 0.02);
  CHECK(std::abs(s.total(0, 1) - 1.0) < 0.02);
  for (int i = 1; i < 4; ++i) CHECK(std::abs(s.total(i, 1)) < 0.02);
}

TEST_CASE("zero-variance outputs are undefined, not errors") {
  const GsaPlan plan = box(2, 0.0, 1.0, 128);
  Mat out = Mat::Ones(plan.row_count(), 2);
  out.col(1) = saltelli_sample(plan, 0).col(0);
  const SobolIndices s = total_sobol_indices(out, plan);
  CHECK(s.defined[0] == 0);
  CHECK(std::isnan(s.total(0, 0)));
  CHECK(s.defined[1] == 1);
  CHECK(select_parameters(s, 0.1) == std::vector<int>{0});
  CHECK_THROWS_AS(total_sobol_indices(Mat::Ones(3, 1), plan), Error);
}

TEST_CASE("selection threshold semantics") {
  SobolIndices s;
  s.total = Mat::Zero(3, 2);
  CHECK(select_parameters(s).empty());
  s.total(1, 1) = 0.5;
  CHECK(select_parameters(s) == std::vector<int>{1});
  s.total(2, 0) = 0.1;
  CHECK(select_parameters(s, 0.1) == std::vector<int>{1});
  s.total(2, 0) = std::nextafter(0.1, 1.0);
  CHECK(select_parameters(s, 0.1) == std::vector<int>{1, 2});
}

TEST_CASE("display clipping leaves stored values alone") {
  Mat t(1, 3);
  t << -0.2, 0.5, 1.3;
  int clipped = 0;
  const Mat d = clipped_for_display(t, &clipped);
  CHECK(clipped == 2);
  CHECK(d(0, 0) == -0.05);
  CHECK(d(0, 2) == 1.05);
  CHECK(t(0, 0) == -0.2);
}

}  // TEST_SUITE
