#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "uqvae/bayes.hpp"
#include "uqvae/linalg.hpp"
#include "uqvae/parallel.hpp"

namespace uqvae {

// Unscrambled Sobol sequence (Joe–Kuo direction numbers), Gray-code order.
// Index 0 is the all-zeros point; the default skip of 1 starts at index 1.
class SobolStream {
 public:
  explicit SobolStream(int dim, std::uint64_t skip = 1);

  static int max_dim();
  int dim() const noexcept { return dim_; }
  std::uint64_t index() const noexcept { return index_; }

  void seek(std::uint64_t index);
  Vec next();
  // dim × n block of consecutive points.
  Mat take(Eigen::Index n);

 private:
  int dim_;
  std::uint64_t index_ = 0;
  std::vector<std::array<std::uint32_t, 32>> v_;
  std::vector<std::uint32_t> x_;
};

double inverse_normal_cdf(double p);
double normal_cdf(double x);

// mean + chol · Φ⁻¹(p); p must lie strictly inside (0,1).
Vec gaussian_from_uniform(const Vec& p, const GaussianModel& model);

// dim × n standard-normal points Φ⁻¹(sobol) starting at `skip`.
Mat sobol_normal_points(int dim, Eigen::Index n, std::uint64_t skip = 1);

struct OracleResult {
  Vec mean;
  Mat cov;
  double ess = 0.0;
  long n_points = 0;
  double runtime_seconds = 0.0;
};

// Self-normalized weighted moments of the columns of us with log-weights lw.
OracleResult weighted_moments(const Mat& us, const Vec& log_weights);

// Prior draws and their forward images, shared by many oracle calls.
struct PriorSampleBank {
  Mat u;      // D × N
  Mat fu;     // O × N
  std::vector<char> ok;

  static PriorSampleBank build(const ForwardModel& fwd, const GaussianModel& prior, Eigen::Index n_points,
                               Exec exec = Exec::Parallel, std::uint64_t skip = 1);
  Eigen::Index size() const { return u.cols(); }
};

OracleResult posterior_oracle(const PriorSampleBank& bank, const Vec& y, const GaussianModel& noise,
                              Exec exec = Exec::Parallel);
OracleResult posterior_oracle(const Vec& y, const ForwardModel& fwd, const GaussianModel& prior,
                              const GaussianModel& noise, Eigen::Index n_points, Exec exec = Exec::Parallel);

struct ForwardUqResult {
  Mat mean;  // time × series
  Mat std;
  long samples = 0;
  long failures = 0;
};

// simulate(u) returns a time × series matrix; pointwise mean/std over Sobol draws
// from the posterior. Throws TooManyFailures when more than 1% of runs fail.
ForwardUqResult forward_uq(const GaussianModel& posterior, const std::function<Mat(const Vec&)>& simulate,
                           Eigen::Index n_samples, Exec exec = Exec::Parallel);
// Draws mean + factor·ε; a zero factor gives a zero-width band.
ForwardUqResult forward_uq(const Vec& mean, const Mat& factor, const std::function<Mat(const Vec&)>& simulate,
                           Eigen::Index n_samples, Exec exec = Exec::Parallel);
// Same statistics over caller-supplied samples (columns).
ForwardUqResult forward_uq_samples(const Mat& samples, const std::function<Mat(const Vec&)>& simulate,
                                   Exec exec = Exec::Parallel);

}  // namespace uqvae
