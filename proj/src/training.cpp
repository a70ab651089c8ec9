#include "uqvae/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "uqvae/error.hpp"
#include "uqvae/qmc.hpp"

namespace uqvae {

namespace {

using Clock = std::chrono::steady_clock;

constexpr int kMaxBadSteps = 3;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double lr_at(const TrainOptions& opt, int epoch) {
  if (opt.lr_final <= 0.0 || opt.epochs <= 1) return opt.lr;
  const double f = static_cast<double>(epoch) / static_cast<double>(opt.epochs - 1);
  return opt.lr * std::pow(opt.lr_final / opt.lr, f);
}

std::vector<Eigen::Index> shuffled(Eigen::Index n, std::mt19937_64& rng) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

Mat gather(const Mat& m, const std::vector<Eigen::Index>& idx, std::size_t begin, std::size_t end) {
  Mat out(m.rows(), static_cast<Eigen::Index>(end - begin));
  for (std::size_t k = begin; k < end; ++k) out.col(static_cast<Eigen::Index>(k - begin)) = m.col(idx[k]);
  return out;
}

void check_options(const TrainOptions& opt) {
  if (opt.epochs < 1 || opt.batch_size < 1 || !(opt.lr > 0.0) || !(opt.adam_eps > 0.0))
    fail(ErrorKind::ConfigError, "training: epochs, batch_size, lr and adam_eps must be positive");
}

void note_bad_step(int& bad, const char* who) {
  if (++bad >= kMaxBadSteps)
    fail(ErrorKind::DivergenceDetected, std::string(who) + ": loss non-finite for 3 consecutive steps");
}

}  // namespace

std::string training_log_csv(const std::vector<EpochRecord>& log) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,train_loss,val_loss,wall_seconds,forward_calls_cumulative\n";
  for (const auto& r : log)
    os << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << r.wall_seconds << ',' << r.forward_calls
       << '\n';
  return os.str();
}

Eigen::Index train_split(Eigen::Index m) { return (9 * m) / 10; }

double mse(const MLPParams& params, const Mat& inputs, const Mat& targets) {
  require_dims(inputs.cols() == targets.cols() && targets.rows() == params.output_dim(), "mse: shape mismatch");
  if (inputs.cols() == 0) return std::numeric_limits<double>::quiet_NaN();
  const Mat out = mlp_forward(params, inputs);
  return (out - targets).squaredNorm() / static_cast<double>(targets.size());
}

TrainResult train_decoder(MLPParams init, const Mat& inputs, const Mat& targets, const TrainOptions& opt) {
  check_options(opt);
  require_dims(inputs.cols() == targets.cols() && inputs.rows() == init.input_dim() &&
                   targets.rows() == init.output_dim(),
               "train_decoder: data shape does not match network");
  const Eigen::Index m = inputs.cols();
  const Eigen::Index n_train = train_split(m);
  if (n_train < 1) fail(ErrorKind::InsufficientSamples, "train_decoder: empty training split");
  const Mat x_train = inputs.leftCols(n_train), y_train = targets.leftCols(n_train);
  const Mat x_val = inputs.rightCols(m - n_train), y_val = targets.rightCols(m - n_train);

  TrainResult res{std::move(init), {}};
  AdamState adam = AdamState::for_params(res.params, opt.lr);
  adam.eps = opt.adam_eps;
  std::mt19937_64 rng(opt.seed);
  const auto t0 = Clock::now();
  int bad = 0;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    adam.lr = lr_at(opt, epoch);
    const auto order = shuffled(n_train, rng);
    double sum = 0.0;
    Eigen::Index seen = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opt.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(opt.batch_size));
      const Mat xb = gather(x_train, order, start, end), yb = gather(y_train, order, start, end);
      MLPTape tape;
      double loss = std::numeric_limits<double>::quiet_NaN();
      Mat resid;
      try {
        resid = mlp_forward(res.params, xb, &tape) - yb;
        loss = resid.squaredNorm() / static_cast<double>(resid.size());
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NonFiniteActivation) throw;
      }
      if (!std::isfinite(loss)) {
        note_bad_step(bad, "train_decoder");
        continue;
      }
      bad = 0;
      MLPGradient g = mlp_backward(res.params, tape, resid * (2.0 / static_cast<double>(resid.size())));
      adam_step(res.params, g.dparams, adam);
      sum += loss * static_cast<double>(xb.cols());
      seen += xb.cols();
    }
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.train_loss = seen > 0 ? sum / static_cast<double>(seen) : std::numeric_limits<double>::quiet_NaN();
    rec.val_loss = mse(res.params, x_val, y_val);
    rec.wall_seconds = seconds_since(t0);
    res.log.push_back(rec);
  }
  return res;
}

ThetaObjective::ThetaObjective(LossProblem problem, double theta) : problem_(std::move(problem)), theta_(theta) {
  if (theta == 0.0 || !std::isfinite(theta)) fail(ErrorKind::ConfigError, "theta must be a nonzero number");
}

LossEval ThetaObjective::eval(const Vec& y, const Vec& mu, const Mat& c, bool with_gradient) const {
  return loss_theta(problem_, y, mu, c, theta_, with_gradient);
}

AlphaObjective::AlphaObjective(LossProblem problem, double alpha, Eigen::Index k)
    : problem_(std::move(problem)), alpha_(alpha), k_(k) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorKind::ConfigError, "alpha must lie in (0,1)");
  if (k < 1) fail(ErrorKind::ConfigError, "alpha loss needs K >= 1");
  begin_step(0);
}

void AlphaObjective::begin_step(long step) {
  const auto skip = 1 + static_cast<std::uint64_t>(step) * static_cast<std::uint64_t>(k_);
  eps_ = sobol_normal_points(static_cast<int>(problem_.param_dim()), k_, skip);
}

LossEval AlphaObjective::eval(const Vec& y, const Vec& mu, const Mat& c, bool with_gradient) const {
  return loss_alpha(problem_, y, mu, c, alpha_, eps_, with_gradient);
}

EncoderOutput encode(const MLPParams& params, const Vec& y_bar) {
  const Vec raw = mlp_forward(params, y_bar);
  const auto d = static_cast<Eigen::Index>(std::lround((-3.0 + std::sqrt(9.0 + 8.0 * raw.size())) / 2.0));
  return decode_head(raw, d);
}

double encoder_mean_loss(const MLPParams& params, const Mat& ys, const EncoderObjective& objective, Exec exec) {
  const Eigen::Index n = ys.cols();
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  const Eigen::Index d = objective.param_dim();
  const Mat raw = mlp_forward(params, ys);
  Vec vals(n);
  parallel_for(n, exec, [&](Eigen::Index k) {
    try {
      const EncoderOutput h = decode_head(raw.col(k), d);
      vals[k] = objective.eval(ys.col(k), h.mu, h.C, false).value;
    } catch (const Error&) {
      vals[k] = std::numeric_limits<double>::quiet_NaN();
    }
  });
  return vals.sum() / static_cast<double>(n);
}

TrainResult train_encoder(MLPParams init, const Mat& ys, EncoderObjective& objective, const TrainOptions& opt) {
  check_options(opt);
  const Eigen::Index d = objective.param_dim();
  require_dims(init.output_dim() == head_size(d) && init.input_dim() == ys.rows(),
               "train_encoder: network shape does not match the problem");
  const Eigen::Index m = ys.cols();
  const Eigen::Index n_train = std::max<Eigen::Index>(train_split(m), std::min<Eigen::Index>(m, 1));
  if (n_train < 1) fail(ErrorKind::InsufficientSamples, "train_encoder: empty training split");
  const Mat y_train = ys.leftCols(n_train), y_val = ys.rightCols(m - n_train);

  TrainResult res{std::move(init), {}};
  AdamState adam = AdamState::for_params(res.params, opt.lr);
  adam.eps = opt.adam_eps;
  std::mt19937_64 rng(opt.seed);
  const long calls0 = objective.forward().calls();
  const auto t0 = Clock::now();
  long step = 0;
  int bad = 0;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    adam.lr = lr_at(opt, epoch);
    const auto order = shuffled(n_train, rng);
    double sum = 0.0;
    Eigen::Index seen = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opt.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(opt.batch_size));
      const Mat yb = gather(y_train, order, start, end);
      const Eigen::Index b = yb.cols();
      objective.begin_step(step++);
      MLPTape tape;
      Mat raw;
      try {
        raw = mlp_forward(res.params, yb, &tape);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NonFiniteActivation) throw;
        note_bad_step(bad, "train_encoder");
        continue;
      }
      Mat draw(raw.rows(), b);
      Vec vals(b);
      std::vector<char> misuse(static_cast<std::size_t>(b), 0);
      parallel_for(b, opt.exec, [&](Eigen::Index k) {
        try {
          const EncoderOutput h = decode_head(raw.col(k), d);
          const LossEval e = objective.eval(yb.col(k), h.mu, h.C, true);
          vals[k] = e.value;
          draw.col(k) = head_backward(h, e.dmu, e.dC) / static_cast<double>(b);
        } catch (const Error& e) {
          misuse[static_cast<std::size_t>(k)] = is_config_error(e.kind());
          vals[k] = std::numeric_limits<double>::quiet_NaN();
        }
      });
      // Shape errors are not numerical trouble; replay serially so they surface.
      if (std::find(misuse.begin(), misuse.end(), 1) != misuse.end()) {
        const Eigen::Index k = std::find(misuse.begin(), misuse.end(), 1) - misuse.begin();
        const EncoderOutput h = decode_head(raw.col(k), d);
        objective.eval(yb.col(k), h.mu, h.C, true);
      }
      const double loss = vals.sum() / static_cast<double>(b);
      if (!std::isfinite(loss) || !draw.allFinite()) {
        note_bad_step(bad, "train_encoder");
        continue;
      }
      bad = 0;
      MLPGradient g = mlp_backward(res.params, tape, draw);
      adam_step(res.params, g.dparams, adam);
      sum += loss * static_cast<double>(b);
      seen += b;
    }
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.train_loss = seen > 0 ? sum / static_cast<double>(seen) : std::numeric_limits<double>::quiet_NaN();
    rec.val_loss = encoder_mean_loss(res.params, y_val, objective, opt.exec);
    rec.wall_seconds = seconds_since(t0);
    rec.forward_calls = objective.forward().calls() - calls0;
    res.log.push_back(rec);
  }
  return res;
}

Dataset generate_dataset(const ForwardModel& fwd, const GaussianModel& prior, Eigen::Index m, double eta,
                         Eigen::Index group_size, std::uint64_t seed, Exec exec,
                         const SPDMatrix* fixed_noise) {
  if (m < 1) fail(ErrorKind::ConfigError, "generate_dataset: need at least one sample");
  if (!(eta > 0.0)) fail(ErrorKind::ZeroSignal, "generate_dataset: eta must be positive");
  require_dims(fwd.param_dim() == prior.dim(), "generate_dataset: prior dimension");
  const Eigen::Index d = prior.dim(), o = fwd.obs_dim();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw_params = [&](Eigen::Index n) {
    Mat z(d, n);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < d; ++i) z(i, j) = normal(rng);
    return Mat((prior.cov.chol() * z).colwise() + prior.mean);
  };

  Mat u = draw_params(m);
  BatchEvalResult r = batch_forward(fwd, u, exec, true);
  // Redraw failed runs; a model that fails most of the time is a configuration problem.
  for (int round = 0; r.failures > 0; ++round) {
    if (round >= 20 || r.failures * 2 > m)
      fail(ErrorKind::TooManyFailures, "generate_dataset: " + std::to_string(r.failures) + " of " +
                                           std::to_string(m) + " forward runs failed");
    std::vector<Eigen::Index> bad;
    for (Eigen::Index k = 0; k < m; ++k)
      if (!r.ok[static_cast<std::size_t>(k)]) bad.push_back(k);
    const Mat fresh = draw_params(static_cast<Eigen::Index>(bad.size()));
    for (std::size_t j = 0; j < bad.size(); ++j) u.col(bad[j]) = fresh.col(static_cast<Eigen::Index>(j));
    BatchEvalResult again = batch_forward(fwd, fresh, exec, true);
    r.failures = 0;
    for (std::size_t j = 0; j < bad.size(); ++j) {
      r.y.col(bad[j]) = again.y.col(static_cast<Eigen::Index>(j));
      r.ok[static_cast<std::size_t>(bad[j])] = again.ok[j];
      r.failures += again.ok[j] ? 0 : 1;
    }
  }

  Dataset ds;
  ds.params = u.transpose();
  ds.clean_obs = r.y.transpose();
  ds.seed = seed;
  ds.eta = eta;
  ds.model = fwd.name();
  const SPDMatrix noise = fixed_noise ? *fixed_noise : noise_cov_from_dataset(ds.clean_obs, eta, group_size);
  require_dims(noise.dim() == o, "generate_dataset: noise dimension");
  Mat z(o, m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < o; ++i) z(i, j) = normal(rng);
  ds.noisy_obs = ds.clean_obs + (noise.chol() * z).transpose();
  return ds;
}

}  // namespace uqvae
