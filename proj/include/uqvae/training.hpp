#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uqvae/bayes.hpp"
#include "uqvae/losses.hpp"
#include "uqvae/nnet.hpp"
#include "uqvae/parallel.hpp"

namespace uqvae {

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double wall_seconds = 0.0;
  long forward_calls = 0;
};

struct TrainOptions {
  int epochs = 100;
  Eigen::Index batch_size = 32;
  double lr = 1e-3;
  // Exponential decay towards lr_final over the run; <= 0 keeps lr constant.
  double lr_final = 0.0;
  // L_θ gradients in C are O(θ²); the usual 1e-8 swamps them.
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  Exec exec = Exec::Parallel;
};

struct TrainResult {
  MLPParams params;
  std::vector<EpochRecord> log;
};

std::string training_log_csv(const std::vector<EpochRecord>& log);

// First ⌊9M/10⌋ columns train, the rest validate.
Eigen::Index train_split(Eigen::Index m);

double mse(const MLPParams& params, const Mat& inputs, const Mat& targets);

// Columns of inputs/targets are samples (normalized scale).
TrainResult train_decoder(MLPParams init, const Mat& inputs, const Mat& targets, const TrainOptions& opt);

// Per-observation loss seen by the encoder, in normalized coordinates.
class EncoderObjective {
 public:
  virtual ~EncoderObjective() = default;
  virtual Eigen::Index param_dim() const = 0;
  virtual const ForwardModel& forward() const = 0;
  // Called once before each optimizer step.
  virtual void begin_step(long /*step*/) {}
  virtual LossEval eval(const Vec& y, const Vec& mu, const Mat& c, bool with_gradient) const = 0;
};

class ThetaObjective final : public EncoderObjective {
 public:
  ThetaObjective(LossProblem problem, double theta);
  Eigen::Index param_dim() const override { return problem_.param_dim(); }
  const ForwardModel& forward() const override { return *problem_.forward; }
  LossEval eval(const Vec& y, const Vec& mu, const Mat& c, bool with_gradient) const override;
  const LossProblem& problem() const noexcept { return problem_; }

 private:
  LossProblem problem_;
  double theta_;
};

// Draws for step t are Sobol points [1 + tK, 1 + (t+1)K) mapped to N(0, I).
class AlphaObjective final : public EncoderObjective {
 public:
  AlphaObjective(LossProblem problem, double alpha, Eigen::Index k);
  Eigen::Index param_dim() const override { return problem_.param_dim(); }
  const ForwardModel& forward() const override { return *problem_.forward; }
  void begin_step(long step) override;
  LossEval eval(const Vec& y, const Vec& mu, const Mat& c, bool with_gradient) const override;
  const LossProblem& problem() const noexcept { return problem_; }
  Eigen::Index samples() const noexcept { return k_; }

 private:
  LossProblem problem_;
  double alpha_;
  Eigen::Index k_;
  Mat eps_;
};

// Columns of ys are normalized observations.
TrainResult train_encoder(MLPParams init, const Mat& ys, EncoderObjective& objective, const TrainOptions& opt);

// Mean objective value over the columns of ys for a fixed encoder.
double encoder_mean_loss(const MLPParams& params, const Mat& ys, const EncoderObjective& objective, Exec exec);

// Normalized-scale encoder pass and head decode for a single observation.
EncoderOutput encode(const MLPParams& params, const Vec& y_bar);

// Prior draws u, clean F(u) and noisy observations. The noise covariance is built
// from the clean data with η unless fixed_noise is given. Failed forward runs are redrawn.
Dataset generate_dataset(const ForwardModel& fwd, const GaussianModel& prior, Eigen::Index m, double eta,
                         Eigen::Index group_size, std::uint64_t seed, Exec exec = Exec::Parallel,
                         const SPDMatrix* fixed_noise = nullptr);

}  // namespace uqvae
