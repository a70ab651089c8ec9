// Serial reference paths against their OpenMP counterparts. Arg 0 = serial, 1 = parallel.
// Run with OMP_NUM_THREADS set to the thread count of interest.

#include <memory>
#include <random>

#include <benchmark/benchmark.h>

#include "uqvae/cardio.hpp"
#include "uqvae/losses.hpp"
#include "uqvae/nnet.hpp"
#include "uqvae/parallel.hpp"
#include "uqvae/poisson.hpp"
#include "uqvae/qmc.hpp"
#include "uqvae/training.hpp"

using namespace uqvae;

namespace {

Exec exec_of(const benchmark::State& st) { return st.range(0) == 0 ? Exec::Serial : Exec::Parallel; }

Mat gaussian_columns(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  return Mat::NullaryExpr(rows, cols, [&] { return n(rng); });
}

void BM_BatchForwardPoisson(benchmark::State& st) {
  const PoissonForward fwd{PoissonSetup{}};
  const Mat us = gaussian_columns(fwd.param_dim(), 64, 1, 0.3);
  for (auto _ : st) benchmark::DoNotOptimize(batch_forward(fwd, us, exec_of(st)).y.data());
  st.SetItemsProcessed(st.iterations() * us.cols());
}
BENCHMARK(BM_BatchForwardPoisson)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_BatchForwardCardio(benchmark::State& st) {
  CardioSimOptions opt;
  opt.beats = 5;
  opt.dt = 2e-3;
  opt.samples_per_beat = 400;
  const CardioForward fwd(CardioParams::reference(), {"EA_LV", "R_AR_SYS", "C_AR_SYS", "HR"},
                          {"LV_SV", "SAP_max", "SAP_min", "LV_EF"}, opt);
  const Mat us = gaussian_columns(4, 16, 2, 0.05);
  for (auto _ : st) benchmark::DoNotOptimize(batch_forward(fwd, us, exec_of(st)).y.data());
  st.SetItemsProcessed(st.iterations() * us.cols());
}
BENCHMARK(BM_BatchForwardCardio)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_GaussianLogLikelihoods(benchmark::State& st) {
  const Eigen::Index o = 50, n = 1 << 14;
  const Mat fu = gaussian_columns(o, n, 3);
  const Vec y = gaussian_columns(o, 1, 4).col(0);
  const Mat chol = Mat::Identity(o, o) * 0.5;
  for (auto _ : st) benchmark::DoNotOptimize(gaussian_log_likelihoods(fu, y, Vec::Zero(o), chol, exec_of(st)).data());
  st.SetItemsProcessed(st.iterations() * n);
}
BENCHMARK(BM_GaussianLogLikelihoods)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_PosteriorOracleExp(benchmark::State& st) {
  const Eigen::Index d = 10;
  const ExpForward fwd(d);
  const GaussianModel prior(Vec::Zero(d), SPDMatrix::diagonal(Vec::Constant(d, 0.25)));
  const GaussianModel noise(Vec::Zero(d), SPDMatrix::diagonal(Vec::Constant(d, 0.5)));
  const Vec y = Vec::Ones(d);
  for (auto _ : st) benchmark::DoNotOptimize(posterior_oracle(y, fwd, prior, noise, 1 << 14, exec_of(st)).mean.data());
}
BENCHMARK(BM_PosteriorOracleExp)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

// One epoch-sized pass of each encoder loss over 128 observations.
void encoder_loss(benchmark::State& st, bool alpha) {
  const Eigen::Index d = 10;
  const GaussianModel prior(Vec::Zero(d), SPDMatrix::diagonal(Vec::Constant(d, 0.25)));
  const GaussianModel noise(Vec::Zero(d), SPDMatrix::diagonal(Vec::Constant(d, 0.01)));
  const LossProblem lp{std::make_shared<ExpForward>(d), prior, noise};
  std::unique_ptr<EncoderObjective> obj;
  if (alpha) obj = std::make_unique<AlphaObjective>(lp, 0.5, 256);
  else obj = std::make_unique<ThetaObjective>(lp, 1e-3);
  obj->begin_step(0);
  const MLPParams net = init_xavier(MLPSpec{d, 2, 64, head_size(d)}, 5);
  const Mat ys = gaussian_columns(d, 128, 6);
  for (auto _ : st) benchmark::DoNotOptimize(encoder_mean_loss(net, ys, *obj, exec_of(st)));
  st.SetItemsProcessed(st.iterations() * ys.cols());
}
void BM_EncoderLossTheta(benchmark::State& st) { encoder_loss(st, false); }
void BM_EncoderLossAlpha(benchmark::State& st) { encoder_loss(st, true); }
BENCHMARK(BM_EncoderLossTheta)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EncoderLossAlpha)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
