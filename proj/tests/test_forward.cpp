#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "support.hpp"
#include "uqvae/cardio.hpp"
#include "uqvae/error.hpp"
#include "uqvae/forward_model.hpp"
#include "uqvae/poisson.hpp"

using namespace uqvae;
using namespace testing;

namespace {

CardioSimOptions desk_options() {
  CardioSimOptions o;
  o.dt = 2e-3;
  o.samples_per_beat = 400;
  return o;
}

double rel_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-12); }

// Nodal max error of the u ≡ 0 solution against (17/32) sin(2πx) sin(2πy).
double manufactured_error(int n) {
  const PoissonMesh mesh(n);
  const Vec y = poisson_solve(mesh, Vec::Zero(mesh.node_count()));
  double err = 0.0;
  for (Eigen::Index k = 0; k < mesh.node_count(); ++k) {
    const auto& p = mesh.nodes[static_cast<std::size_t>(k)];
    const double exact = 17.0 / 32.0 * std::sin(2 * std::numbers::pi * p[0]) * std::sin(2 * std::numbers::pi * p[1]);
    err = std::max(err, std::abs(y[k] - exact));
  }
  return err;
}

}  // namespace

TEST_SUITE("forward") {

TEST_CASE("exp map") {
  ExpForward f(4);
  CHECK(f.eval(Vec::Zero(4)) == Vec::Ones(4));
  CHECK((f.eval(Vec::Constant(4, -3.0)).array() - std::exp(-3.0)).abs().maxCoeff() < 1e-16);
  CHECK(f.eval(Vec::Constant(4, -3.0))[0] == doctest::Approx(0.0498).epsilon(1e-3));
  std::mt19937_64 rng(1);
  const Vec u = random_vector(4, rng);
  CHECK(rel_fro(f.jacobian(u), finite_difference_jacobian(f, u, 1e-6)) < 1e-6);
  CHECK_THROWS_AS(f.eval(Vec::Constant(4, 800.0)), Error);
}

TEST_CASE("call counter counts one per evaluation") {
  ExpForward f(3);
  f.reset_calls();
  f.eval(Vec::Zero(3));
  f.eval_batch(Mat::Zero(3, 7));
  CHECK(f.calls() == 8);
  AffineForwardModel a(Mat::Identity(2, 2), Vec::Zero(2));
  a.vjp(Vec::Zero(2), Vec::Ones(2));
  a.jacobian(Vec::Zero(2));
  CHECK(a.calls() == 0);
}

TEST_CASE("normalized forward is the map seen in normalized coordinates") {
  auto inner = std::make_shared<ExpForward>(2);
  const Vec a(Eigen::Vector2d(0.5, 2.0)), b(Eigen::Vector2d(0.1, -0.2)), c(Eigen::Vector2d(3.0, 0.25)),
      d(Eigen::Vector2d(-1.0, 0.4));
  NormalizedForward nf(inner, a, b, c, d);
  const Vec ub(Eigen::Vector2d(0.3, 0.7));
  const Vec u = (ub - b).cwiseQuotient(a);
  CHECK((nf.eval(ub) - (inner->eval(u).cwiseProduct(c) + d)).norm() < 1e-14);
  CHECK(rel_fro(nf.jacobian(ub), finite_difference_jacobian(nf, ub, 1e-6)) < 1e-7);
}

TEST_CASE("finite-element mesh and matrices") {
  const PoissonMesh mesh(5);
  CHECK(mesh.node_count() == 25);
  CHECK(mesh.triangles.size() == 32);
  const Mat m = fem_mass(mesh);
  CHECK(m.sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(is_symmetric(m));
  const Mat k = fem_stiffness(mesh, Vec::Zero(25));
  CHECK((k * Vec::Ones(25)).norm() < 1e-13);
  // Boundary mass integrates 1 over the perimeter.
  CHECK(fem_boundary_mass(mesh).sum() == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("poisson solution converges at second order on the manufactured case") {
  const double e9 = manufactured_error(9), e17 = manufactured_error(17), e33 = manufactured_error(33);
  CHECK(e17 < e9);
  CHECK(e33 < e17);
  CHECK(std::log2(e9 / e17) >= 1.9);
  CHECK(std::log2(e17 / e33) >= 1.9);
}

TEST_CASE("poisson symmetry and scaling") {
  const PoissonMesh mesh(9);
  std::mt19937_64 rng(2);
  Vec u = random_vector(81, rng, 0.5);
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < i; ++j) u[i + 9 * j] = u[j + 9 * i];
  const Vec y = poisson_solve(mesh, u);
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) CHECK(std::abs(y[i + 9 * j] - y[j + 9 * i]) < 1e-10);

  PoissonSetup s;
  s.n = 9;
  PoissonForward f(s);
  const Vec v = random_vector(81, rng, 0.5);
  const double c = 0.7;
  CHECK((f.eval(v.array() + c).matrix() - std::exp(-c) * f.eval(v)).norm() < 1e-8 * f.eval(v).norm());
}

TEST_CASE("poisson observations") {
  PoissonSetup s;
  s.n = 9;
  PoissonForward f(s);
  CHECK(f.obs_dim() == 20);
  for (const auto& p : f.points()) {
    CHECK(p[0] > 0.0);
    CHECK(p[0] < 1.0);
    CHECK(p[1] > 0.0);
    CHECK(p[1] < 1.0);
  }
  // Direct FE oracle: interpolate the nodal solution by hand.
  const Vec nodal = poisson_solve(f.mesh(), Vec::Zero(81));
  const Vec y = f.eval(Vec::Zero(81));
  for (std::size_t k = 0; k < f.points().size(); ++k) {
    const auto [idx, w] = f.mesh().locate(f.points()[k]);
    const double expect = w[0] * nodal[idx[0]] + w[1] * nodal[idx[1]] + w[2] * nodal[idx[2]];
    CHECK(y[static_cast<Eigen::Index>(k)] == doctest::Approx(expect).epsilon(1e-14));
  }
  PoissonSetup s2 = s;
  s2.obs_seed = 1;
  CHECK((PoissonForward(s2).eval(Vec::Zero(81)) - y).norm() > 1e-3);
}

TEST_CASE("poisson prior") {
  SUBCASE("mass-dominated limit") {
    PoissonSetup s;
    s.n = 5;
    s.gamma = 1e-12;
    s.beta = 0.0;
    s.xi = 1.0;
    const GaussianModel p = poisson_prior(s);
    const Mat direct = (s.delta * fem_mass(PoissonMesh(5))).inverse();
    CHECK(rel_fro(p.cov.base(), direct) < 1e-8);
    CHECK(p.mean.norm() == 0.0);
  }
  SUBCASE("boundary variance exceeds interior variance for small beta") {
    PoissonSetup s;
    s.n = 9;
    s.beta = 0.0;
    const GaussianModel p = poisson_prior(s);
    const Vec var = p.cov.base().diagonal();
    CHECK(var[0] / var[4 + 9 * 4] > 1.0);
    CHECK(var[4] / var[4 + 9 * 4] > 1.0);
    CHECK(is_symmetric(p.cov.base()));
  }
  SUBCASE("negative beta selects sqrt(gamma delta)") {
    PoissonSetup s;
    CHECK(s.robin_coefficient() == doctest::Approx(std::sqrt(0.05)));
    s.beta = 0.3;
    CHECK(s.robin_coefficient() == 0.3);
  }
}

TEST_CASE("valve law") {
  CHECK(valve_flux(0.0, 0.0075, 75006.2) == 0.0);
  CHECK(valve_resistance(1e8, 0.0075, 75006.2) == doctest::Approx(0.0075).epsilon(1e-6));
  CHECK(valve_resistance(-1e8, 0.0075, 75006.2) == doctest::Approx(75006.2).epsilon(1e-6));
  double prev = valve_resistance(-50.0, 0.0075, 75006.2);
  for (double dp = -50.0; dp <= 50.0; dp += 0.01) {
    const double r = valve_resistance(dp, 0.0075, 75006.2);
    CHECK(r <= prev);
    CHECK(r >= 0.0075);
    CHECK(r <= 75006.2);
    prev = r;
  }
}

TEST_CASE("activation ramp end points") {
  const CardioParams p = CardioParams::reference();
  const double t_hb = p.period();
  CHECK(chamber_activation(p.LV.tC * t_hb, p.LV, t_hb) == doctest::Approx(0.0));
  CHECK(chamber_activation((p.LV.tC + p.LV.TC) * t_hb, p.LV, t_hb) == doctest::Approx(1.0));
  CHECK(chamber_activation(p.LA.tC * t_hb, p.LA, t_hb) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(chamber_activation((p.LA.tC + p.LA.TC) * t_hb, p.LA, t_hb) == doctest::Approx(1.0));
}

TEST_CASE("reference heartbeat matches the clinical table") {
  const CardioParams p = CardioParams::reference();
  const CardioTrajectory traj = cardio_simulate(p);
  CHECK(traj.periodic());
  const CardioOutputs out = cardio_outputs(traj);
  for (std::size_t i = 0; i < 28; ++i) {
    const std::string& name = cardio_output_names()[i];
    const OutputRange r = cardio_output_range(name);
    const double v = out.values[static_cast<Eigen::Index>(i)];
    INFO(name, " = ", v);
    CHECK(v >= r.low);
    CHECK(v <= r.high);
    if (std::isfinite(r.model_value)) CHECK(rel_diff(v, r.model_value) < 0.10);
  }
  CHECK(rel_diff(out.get("LV_EF"), 57.2) < 0.10);
  CHECK(rel_diff(out.get("CI"), 2.8) < 0.10);
  CHECK(rel_diff(out.get("SAP_max"), 112.2) < 0.10);
  CHECK(rel_diff(out.get("SVR"), 15.7) < 0.10);
  CHECK(rel_diff(out.get("PVR"), 1.9) < 0.10);
  CHECK(out.get("LV_EF") > 0.0);
  CHECK(out.get("LV_EF") < 100.0);
}

TEST_CASE("blood volume is conserved along the flow") {
  const CardioParams p = CardioParams::reference();
  const CardioTrajectory traj = cardio_simulate(p);
  double lo = 1e300, hi = -1e300;
  for (Eigen::Index i = 0; i < traj.states.rows(); ++i) {
    CardioState x;
    for (int s = 0; s < kCardioStates; ++s) x[s] = traj.states(i, s);
    const double v = cardio_blood_volume(x, p);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(hi - lo < 0.1);
  CHECK((hi - lo) / hi < 1e-3);
  const double initial = cardio_blood_volume(cardio_default_initial_state(), p);
  CHECK(std::abs(hi - initial) / initial < 25 * 1e-3);
}

TEST_CASE("right-hand side conserves volume analytically") {
  const CardioParams p = CardioParams::reference();
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    CardioState x = cardio_default_initial_state();
    for (auto& v : x) v += std::uniform_real_distribution<double>(-5, 5)(rng);
    const CardioState dx = cardio_rhs(0.37 * t, x, p);
    const double dv = dx[V_LA] + dx[V_LV] + dx[V_RA] + dx[V_RV] + p.C_AR_SYS * dx[P_AR_SYS] +
                      p.C_VEN_SYS * dx[P_VEN_SYS] + p.C_AR_PUL * dx[P_AR_PUL] + p.C_VEN_PUL * dx[P_VEN_PUL];
    CHECK(std::abs(dv) < 1e-9);
  }
}

TEST_CASE("random parameter draws within 25 percent stay physiologic") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> f(0.75, 1.25);
  for (int t = 0; t < 50; ++t) {
    CardioParams p = CardioParams::reference();
    for (const auto& name : CardioParams::gsa_names()) p.set(name, p.get(name) * f(rng));
    const CardioTrajectory traj = cardio_simulate(p, desk_options());
    CHECK(traj.states.allFinite());
    CHECK(traj.states.leftCols(4).minCoeff() > 0.0);
  }
}

TEST_CASE("cardio outputs on a constant trajectory") {
  CardioTrajectory traj;
  const Eigen::Index n = 11;
  traj.t = Vec::LinSpaced(n, 0.0, 0.8);
  traj.states = Mat::Constant(n, kCardioStates, 50.0);
  traj.pressures = Mat::Constant(n, 4, 10.0);
  traj.fluxes = Mat::Constant(n, 5, 80.0);
  traj.hr = 75.0;
  const CardioOutputs out = cardio_outputs(traj, 2.0);
  CHECK(out.get("LA_Pmax") == out.get("LA_Pmin"));
  CHECK(out.get("LA_Pmax") == out.get("LA_Pmean"));
  CHECK(out.get("PAP_max") == out.get("PAP_mean"));
  CHECK(out.get("LA_I_Vmax") == 25.0);
  traj.t = Vec::Zero(1);
  CHECK_THROWS_AS(cardio_outputs(traj), Error);
}

TEST_CASE("septal defect") {
  const CardioParams healthy = CardioParams::reference();
  CardioParams open = healthy;
  open.vsd = true;
  open.r_VSD = 0.9;
  const CardioOutputs o = cardio_outputs(cardio_simulate(open, desk_options()));
  CHECK(o.get("Q_P") / o.get("Q_S") > 1.0);

  CardioParams tiny = healthy;
  tiny.vsd = true;
  tiny.r_VSD = 0.01;
  const Vec a = cardio_outputs(cardio_simulate(tiny, desk_options())).values;
  const Vec b = cardio_outputs(cardio_simulate(healthy, desk_options())).values;
  for (Eigen::Index i = 0; i < a.size(); ++i) CHECK(rel_diff(a[i], b[i]) < 0.005);
  CHECK(tiny.r_vsd_resistance() == doctest::Approx(healthy.R_min * std::pow(1.5 / 0.01, 4)));
}

TEST_CASE("cardio forward over log parameters") {
  CardioForward f(CardioParams::reference(), {"EA_LV", "R_AR_SYS", "HR"}, {"SAP_max", "LV_EF"}, desk_options());
  CHECK(f.param_dim() == 3);
  CHECK(f.obs_dim() == 2);
  const Vec ref = f.reference_log_params();
  CHECK(std::exp(ref[2]) == doctest::Approx(75.0));
  const Vec y = f.eval(ref);
  const CardioOutputs direct = cardio_outputs(cardio_simulate(CardioParams::reference(), desk_options()));
  CHECK(y[0] == doctest::Approx(direct.get("SAP_max")).epsilon(1e-14));
  CHECK_THROWS_AS(CardioForward(CardioParams::reference(), {"nope"}, {"SAP_max"}), Error);
}

TEST_CASE("log-uniform prior variance") {
  const std::vector<ParamRange> r = {{"EA_LV", 0.5, 2.0}};
  CHECK(log_uniform_prior_variance(r)[0] == doctest::Approx(std::pow(std::log(4.0), 2) / 12.0));
}

}  // TEST_SUITE
