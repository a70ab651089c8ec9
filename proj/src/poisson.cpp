#include "uqvae/poisson.hpp"

#include <array>
#include <cmath>
#include <random>

#include "uqvae/error.hpp"

namespace uqvae {

double PoissonSetup::robin_coefficient() const { return beta >= 0.0 ? beta : std::sqrt(gamma * delta); }

std::vector<Point2> PoissonSetup::observation_points() const {
  if (!obs_points.empty()) return obs_points;
  if (obs_count < 1) fail(ErrorKind::ConfigError, "poisson: obs_count must be >= 1");
  std::mt19937_64 rng(obs_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Point2> pts;
  while (static_cast<Eigen::Index>(pts.size()) < obs_count) {
    const double x = unit(rng), y = unit(rng);
    if (x > 0.0 && y > 0.0) pts.push_back({x, y});
  }
  return pts;
}

PoissonMesh::PoissonMesh(int n_) : n(n_) {
  if (n < 3) fail(ErrorKind::ConfigError, "poisson: grid needs n >= 3");
  h = 1.0 / (n - 1);
  nodes.reserve(static_cast<std::size_t>(n * n));
  on_boundary.reserve(static_cast<std::size_t>(n * n));
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      nodes.push_back({i * h, j * h});
      on_boundary.push_back(i == 0 || j == 0 || i == n - 1 || j == n - 1);
    }
  for (int j = 0; j + 1 < n; ++j)
    for (int i = 0; i + 1 < n; ++i) {
      const int a = i + n * j, b = a + 1, c = a + 1 + n, d = a + n;
      triangles.push_back({a, b, c});
      triangles.push_back({a, c, d});
    }
}

std::pair<std::array<int, 3>, std::array<double, 3>> PoissonMesh::locate(const Point2& p) const {
  if (!(p[0] >= 0.0 && p[0] <= 1.0 && p[1] >= 0.0 && p[1] <= 1.0))
    fail(ErrorKind::ConfigError, "poisson: observation point outside the unit square");
  const int i = std::min(static_cast<int>(p[0] / h), n - 2);
  const int j = std::min(static_cast<int>(p[1] / h), n - 2);
  const double s = p[0] / h - i, t = p[1] / h - j;
  const int a = i + n * j, b = a + 1, c = a + 1 + n, d = a + n;
  if (s >= t) return {{a, b, c}, {1.0 - s, s - t, t}};
  return {{a, c, d}, {1.0 - t, s, t - s}};
}

namespace {

struct ElementGeometry {
  double area;
  std::array<double, 3> bx, by;  // area-scaled basis gradients
};

ElementGeometry geometry(const PoissonMesh& mesh, const std::array<int, 3>& tri) {
  ElementGeometry g{};
  for (int k = 0; k < 3; ++k) {
    const Point2& pj = mesh.nodes[static_cast<std::size_t>(tri[(k + 1) % 3])];
    const Point2& pk = mesh.nodes[static_cast<std::size_t>(tri[(k + 2) % 3])];
    g.bx[k] = pj[1] - pk[1];
    g.by[k] = pk[0] - pj[0];
  }
  const Point2& p0 = mesh.nodes[static_cast<std::size_t>(tri[0])];
  const Point2& p1 = mesh.nodes[static_cast<std::size_t>(tri[1])];
  const Point2& p2 = mesh.nodes[static_cast<std::size_t>(tri[2])];
  g.area = 0.5 * std::abs((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]));
  return g;
}

}  // namespace

Mat fem_mass(const PoissonMesh& mesh) {
  const Eigen::Index nn = mesh.node_count();
  Mat m = Mat::Zero(nn, nn);
  for (const auto& tri : mesh.triangles) {
    const double a = geometry(mesh, tri).area;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) m(tri[r], tri[c]) += a / 12.0 * (r == c ? 2.0 : 1.0);
  }
  return m;
}

Mat fem_stiffness(const PoissonMesh& mesh, const Vec& log_coef) {
  const Eigen::Index nn = mesh.node_count();
  require_dims(log_coef.size() == nn, "fem_stiffness: coefficient length");
  Mat k = Mat::Zero(nn, nn);
  for (const auto& tri : mesh.triangles) {
    const ElementGeometry g = geometry(mesh, tri);
    const double kappa = std::exp((log_coef[tri[0]] + log_coef[tri[1]] + log_coef[tri[2]]) / 3.0);
    const double s = kappa / (4.0 * g.area);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) k(tri[r], tri[c]) += s * (g.bx[r] * g.bx[c] + g.by[r] * g.by[c]);
  }
  return k;
}

Mat fem_boundary_mass(const PoissonMesh& mesh) {
  const Eigen::Index nn = mesh.node_count();
  Mat b = Mat::Zero(nn, nn);
  const int n = mesh.n;
  auto edge = [&](int p, int q) {
    const double len = mesh.h;
    b(p, p) += len / 3.0;
    b(q, q) += len / 3.0;
    b(p, q) += len / 6.0;
    b(q, p) += len / 6.0;
  };
  for (int i = 0; i + 1 < n; ++i) {
    edge(i, i + 1);                                  // bottom
    edge(i + n * (n - 1), i + 1 + n * (n - 1));      // top
    edge(n * i, n * (i + 1));                        // left
    edge(n - 1 + n * i, n - 1 + n * (i + 1));        // right
  }
  return b;
}

double poisson_source(const Point2& x) {
  return 17.0 / 4.0 * M_PI * M_PI * std::sin(2.0 * M_PI * x[0]) * std::sin(2.0 * M_PI * x[1]);
}

Vec fem_load(const PoissonMesh& mesh) {
  // Degree-5 rule (7 points, barycentric coordinates and weights).
  static constexpr double a1 = 0.059715871789770, b1 = 0.470142064105115, w1 = 0.132394152788506;
  static constexpr double a2 = 0.797426985353087, b2 = 0.101286507323456, w2 = 0.125939180544827;
  static constexpr std::array<std::array<double, 4>, 7> rule = {{{1.0 / 3, 1.0 / 3, 1.0 / 3, 0.225},
                                                                 {a1, b1, b1, w1},
                                                                 {b1, a1, b1, w1},
                                                                 {b1, b1, a1, w1},
                                                                 {a2, b2, b2, w2},
                                                                 {b2, a2, b2, w2},
                                                                 {b2, b2, a2, w2}}};
  Vec load = Vec::Zero(mesh.node_count());
  for (const auto& tri : mesh.triangles) {
    const double area = geometry(mesh, tri).area;
    for (const auto& q : rule) {
      Point2 x{0.0, 0.0};
      for (int k = 0; k < 3; ++k) {
        x[0] += q[k] * mesh.nodes[static_cast<std::size_t>(tri[k])][0];
        x[1] += q[k] * mesh.nodes[static_cast<std::size_t>(tri[k])][1];
      }
      const double fx = poisson_source(x) * q[3] * area;
      for (int k = 0; k < 3; ++k) load[tri[k]] += fx * q[k];
    }
  }
  return load;
}

Vec poisson_solve(const PoissonMesh& mesh, const Vec& u) {
  const Eigen::Index nn = mesh.node_count();
  require_dims(u.size() == nn, "poisson_solve: parameter length must be n^2");
  std::vector<Eigen::Index> interior;
  for (Eigen::Index k = 0; k < nn; ++k)
    if (!mesh.on_boundary[static_cast<std::size_t>(k)]) interior.push_back(k);
  const auto ni = static_cast<Eigen::Index>(interior.size());

  const Mat k = fem_stiffness(mesh, u);
  const Vec load = fem_load(mesh);

  Mat a(ni, ni);
  Vec rhs(ni);
  for (Eigen::Index r = 0; r < ni; ++r) {
    rhs[r] = load[interior[static_cast<std::size_t>(r)]];
    for (Eigen::Index c = 0; c < ni; ++c)
      a(r, c) = k(interior[static_cast<std::size_t>(r)], interior[static_cast<std::size_t>(c)]);
  }
  Eigen::LLT<Mat> llt(a);
  if (llt.info() != Eigen::Success) fail(ErrorKind::SolverFailure, "poisson_solve: stiffness not positive definite");
  const Vec sol = llt.solve(rhs);
  if (!sol.allFinite()) fail(ErrorKind::SolverFailure, "poisson_solve: non-finite solution");
  Vec y = Vec::Zero(nn);
  for (Eigen::Index r = 0; r < ni; ++r) y[interior[static_cast<std::size_t>(r)]] = sol[r];
  return y;
}

PoissonForward::PoissonForward(const PoissonSetup& setup) : mesh_(setup.n), points_(setup.observation_points()) {
  for (const auto& p : points_) {
    if (!(p[0] > 0.0 && p[0] < 1.0 && p[1] > 0.0 && p[1] < 1.0))
      fail(ErrorKind::ConfigError, "poisson: observation points must be interior");
    weights_.push_back(mesh_.locate(p));
  }
}

Vec PoissonForward::eval_impl(const Vec& u) const {
  const Vec sol = poisson_solve(mesh_, u);
  Vec y(obs_dim());
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    const auto& [idx, w] = weights_[k];
    y[static_cast<Eigen::Index>(k)] = w[0] * sol[idx[0]] + w[1] * sol[idx[1]] + w[2] * sol[idx[2]];
  }
  return y;
}

GaussianModel poisson_prior(const PoissonSetup& setup) {
  if (!(setup.gamma > 0.0 && setup.delta > 0.0)) fail(ErrorKind::ConfigError, "poisson prior: gamma, delta > 0");
  const PoissonMesh mesh(setup.n);
  const Mat m = fem_mass(mesh);
  const Mat a = setup.gamma * fem_stiffness(mesh, Vec::Zero(mesh.node_count())) + setup.delta * m +
                setup.robin_coefficient() * fem_boundary_mass(mesh);
  return GaussianModel(Vec::Zero(mesh.node_count()),
                       generalized_fractional_inverse_power(symmetrize(a), SPDMatrix(symmetrize(m)), setup.xi));
}

}  // namespace uqvae
