#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "uqvae/bayes.hpp"
#include "uqvae/cardio.hpp"
#include "uqvae/io.hpp"
#include "uqvae/nnet.hpp"
#include "uqvae/poisson.hpp"
#include "uqvae/training.hpp"

namespace uqvae {

struct NetConfig {
  Eigen::Index hidden_layers = 2;
  Eigen::Index hidden_width = 64;
  int epochs = 100;
  Eigen::Index batch_size = 32;
  double lr = 1e-3;
  double lr_final = 0.0;
  double adam_eps = 1e-8;

  TrainOptions train_options(std::uint64_t seed) const;
};

struct CardioConfig {
  std::vector<std::string> params;
  std::vector<std::string> outputs;
  std::string ranges = "uniform";  // or "hypertension"
  double spread = 0.25;
  bool vsd = false;
  CardioSimOptions sim;
};

struct RunConfig {
  std::string preset;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  int threads = 0;  // 0 keeps the OpenMP default

  Eigen::Index exp_dim = 5;
  double exp_prior_mean = 0.0;  // i.i.d. Gaussian prior of the exp problem
  double exp_prior_var = 0.25;
  PoissonSetup poisson;
  CardioConfig cardio;

  double eta = 0.01;
  bool pool_noise = false;  // one variance for all outputs
  NormalizationMode normalization = NormalizationMode::PerComponent;
  bool known_map = false;

  std::string loss = "theta";
  double theta = 1e-4;
  double alpha = 0.5;
  Eigen::Index alpha_samples = 4096;

  Eigen::Index decoder_samples = 1024;
  Eigen::Index encoder_samples = 100;
  Eigen::Index test_samples = 20;

  NetConfig decoder;
  NetConfig encoder;

  Eigen::Index oracle_points = 16384;

  std::vector<Eigen::Index> bench_dims{10, 25};
  Eigen::Index bench_test_samples = 100;

  Eigen::Index gsa_base_samples = 256;
  double gsa_threshold = 0.1;
  std::vector<std::string> gsa_params;

  Eigen::Index forward_uq_samples = 256;
  Eigen::Index forward_uq_index = 0;

  Json json;  // fully merged configuration, hashed into the manifest
  std::string hash() const;
};

// Defaults for a preset name: exp, poisson, cardio, cardio_vsd.
Json preset_defaults(const std::string& preset);
// Preset defaults overlaid with the file (if any), then with overrides.
RunConfig load_config(const std::optional<std::filesystem::path>& file, const Json& overrides);
RunConfig config_from_json(const Json& merged);

// Raw-scale forward map and prior for the configured problem.
struct Problem {
  std::shared_ptr<const ForwardModel> forward;
  GaussianModel prior;
  std::vector<std::string> param_names;
  std::vector<std::string> output_names;
  bool log_params = false;  // parameters are logarithms of positive quantities
};

Problem build_problem(const RunConfig& cfg);

// Artifact file names inside the run directory.
namespace artifact {
inline constexpr const char* kDataset = "dataset.jsonl";
inline constexpr const char* kTestSet = "test.jsonl";
inline constexpr const char* kPrior = "prior.json";
inline constexpr const char* kNoise = "noise.json";
inline constexpr const char* kNormalization = "normalization.json";
inline constexpr const char* kDecoder = "decoder.json";
inline constexpr const char* kDecoderLog = "decoder_log.csv";
inline constexpr const char* kDecoderError = "decoder_error.json";
inline constexpr const char* kEncoder = "encoder.json";
inline constexpr const char* kEncoderLog = "encoder_log.csv";
inline constexpr const char* kPosterior = "posterior.json";
inline constexpr const char* kPosteriorTiming = "posterior_timing.csv";
inline constexpr const char* kOracle = "oracle.json";
inline constexpr const char* kOracleErrors = "oracle_errors.csv";
inline constexpr const char* kBenchmark = "benchmark.json";
inline constexpr const char* kBenchmarkCsv = "benchmark.csv";
inline constexpr const char* kGsa = "gsa.json";
inline constexpr const char* kGsaCsv = "gsa.csv";
inline constexpr const char* kForwardUq = "forward_uq.csv";
inline constexpr const char* kManifest = "manifest.json";
}  // namespace artifact

// Each stage reads its inputs from cfg.out, writes its artifacts there and
// records itself in the manifest. The returned JSON is the stage summary.
Json run_generate(const RunConfig& cfg);
Json run_train_decoder(const RunConfig& cfg);
Json run_train_encoder(const RunConfig& cfg);
// Observations come from the test set unless obs_file is given (JSON {"y": [[...], ...]}).
Json run_solve(const RunConfig& cfg, const std::optional<std::filesystem::path>& obs_file = std::nullopt);
Json run_oracle(const RunConfig& cfg, const std::optional<std::filesystem::path>& obs_file = std::nullopt);
Json run_benchmark(const RunConfig& cfg);
Json run_gsa(const RunConfig& cfg);
Json run_forward_uq(const RunConfig& cfg, const std::optional<std::filesystem::path>& posterior_file = std::nullopt);

// Reads observations from {"y": [[...], ...]} or a dataset JSONL (noisy observations).
Mat read_observations(const std::filesystem::path& path);

struct PosteriorRecord {
  Vec mean;
  SPDMatrix cov;
};
std::vector<PosteriorRecord> read_posterior(const std::filesystem::path& path);

// Per-sample max over components of |est − ref| / ‖ref‖∞, and the element-wise variant |est − ref| / |ref|.
double rel_error_inf(const Vec& estimate, const Vec& reference);
double rel_error_elementwise(const Vec& estimate, const Vec& reference);

}  // namespace uqvae
