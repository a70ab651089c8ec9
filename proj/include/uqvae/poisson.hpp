#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "uqvae/bayes.hpp"
#include "uqvae/forward_model.hpp"
#include "uqvae/linalg.hpp"

namespace uqvae {

using Point2 = std::array<double, 2>;

struct PoissonSetup {
  int n = 17;  // nodes per side, D = n²
  double gamma = 0.1;
  double delta = 0.5;
  double beta = -1.0;  // negative selects √(γδ)
  double xi = 1.5;
  Eigen::Index obs_count = 20;
  std::uint64_t obs_seed = 0;
  std::vector<Point2> obs_points;  // generated from obs_seed when empty

  double robin_coefficient() const;
  std::vector<Point2> observation_points() const;
};

// Uniform n × n grid on the unit square, each cell cut along its rising diagonal.
struct PoissonMesh {
  int n = 0;
  double h = 0.0;
  std::vector<Point2> nodes;  // index i + n j at (i h, j h)
  std::vector<std::array<int, 3>> triangles;
  std::vector<char> on_boundary;

  explicit PoissonMesh(int n);
  Eigen::Index node_count() const { return static_cast<Eigen::Index>(nodes.size()); }
  // Barycentric weights of p within its triangle, with the vertex indices.
  std::pair<std::array<int, 3>, std::array<double, 3>> locate(const Point2& p) const;
};

Mat fem_mass(const PoissonMesh& mesh);
// Element coefficient exp(mean of the three vertex values of log_coef).
Mat fem_stiffness(const PoissonMesh& mesh, const Vec& log_coef);
Mat fem_boundary_mass(const PoissonMesh& mesh);

double poisson_source(const Point2& x);
// ∫ f φ_i per node by a degree-5 triangle rule.
Vec fem_load(const PoissonMesh& mesh);

// Nodal solution of −∇·(e^u ∇y) = f with y = 0 on the boundary.
Vec poisson_solve(const PoissonMesh& mesh, const Vec& u);

class PoissonForward final : public ForwardModel {
 public:
  explicit PoissonForward(const PoissonSetup& setup);
  Eigen::Index param_dim() const override { return mesh_.node_count(); }
  Eigen::Index obs_dim() const override { return static_cast<Eigen::Index>(weights_.size()); }
  std::string name() const override { return "poisson"; }
  const PoissonMesh& mesh() const noexcept { return mesh_; }
  const std::vector<Point2>& points() const noexcept { return points_; }

 protected:
  Vec eval_impl(const Vec& u) const override;

 private:
  PoissonMesh mesh_;
  std::vector<Point2> points_;
  std::vector<std::pair<std::array<int, 3>, std::array<double, 3>>> weights_;
};

// Zero mean, covariance (γK + δM + βB)^(-ξ) in the M-weighted sense.
GaussianModel poisson_prior(const PoissonSetup& setup);

}  // namespace uqvae
