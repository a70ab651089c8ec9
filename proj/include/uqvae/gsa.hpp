#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "uqvae/forward_model.hpp"
#include "uqvae/linalg.hpp"
#include "uqvae/parallel.hpp"

namespace uqvae {

struct Interval {
  std::string name;
  double low = 0.0;
  double high = 1.0;
};

struct GsaPlan {
  std::vector<Interval> ranges;
  Eigen::Index base_samples = 4096;  // N

  Eigen::Index dim() const { return static_cast<Eigen::Index>(ranges.size()); }
  Eigen::Index row_count() const { return 2 * base_samples * (dim() + 1); }
  void validate() const;
};

// Rows in blocks of N: A, B, then A with column i from B for each i, then B with
// column i from A for each i. A and B take the first and last N_u coordinates of
// a 2 N_u dimensional Sobol sequence started at index seed + 1.
Mat saltelli_sample(const GsaPlan& plan, std::uint64_t seed);

struct SobolIndices {
  Mat total;      // N_u × O, NaN where the output has zero variance
  Vec variance;   // per output
  std::vector<char> defined;
};

// outputs: one row per sample row, one column per output.
SobolIndices total_sobol_indices(const Mat& outputs, const GsaPlan& plan);

// Samples, runs the model on every row (columns are parameters) and estimates the indices.
SobolIndices run_gsa(const GsaPlan& plan, const ForwardModel& model, std::uint64_t seed, Exec exec = Exec::Parallel);

std::vector<int> select_parameters(const SobolIndices& s, double threshold = 0.1);

// Display copy clipped to [−0.05, 1.05]; the count of clipped entries is returned.
Mat clipped_for_display(const Mat& total, int* clipped = nullptr);

}  // namespace uqvae
