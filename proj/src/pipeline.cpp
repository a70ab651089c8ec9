#include "uqvae/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "uqvae/error.hpp"
#include "uqvae/gsa.hpp"
#include "uqvae/losses.hpp"
#include "uqvae/parallel.hpp"
#include "uqvae/qmc.hpp"

namespace uqvae {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double average(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

// ---------------------------------------------------------------- config

Json net_json(Eigen::Index layers, Eigen::Index width, int epochs, Eigen::Index batch, double lr, double lr_final,
              double adam_eps = 1e-8) {
  return Json{{"hidden_layers", layers}, {"hidden_width", width}, {"epochs", epochs},  {"batch_size", batch},
              {"lr", lr},                {"lr_final", lr_final},  {"adam_eps", adam_eps}};
}

Json base_defaults() {
  return Json{{"format_version", kFormatVersion},
              {"preset", ""},
              {"seed", 0},
              {"out", "runs/default"},
              {"threads", 0},
              {"eta", 0.01},
              {"pool_noise", false},
              {"normalization", "per_component"},
              {"known_map", false},
              {"loss", "theta"},
              {"theta", 1e-4},
              {"alpha", 0.5},
              {"alpha_samples", 4096},
              {"dataset", {{"decoder_samples", 1024}, {"encoder_samples", 100}, {"test_samples", 20}}},
              {"decoder", net_json(3, 64, 200, 32, 1e-3, 1e-5)},
              {"encoder", net_json(2, 64, 300, 10, 1e-3, 1e-5, 1e-12)},
              {"oracle", {{"points", 16384}}},
              {"benchmark", {{"dims", {10, 25}}, {"test_samples", 100}}},
              {"gsa", {{"base_samples", 256}, {"threshold", 0.1}, {"params", Json::array()}}},
              {"forward_uq", {{"samples", 256}, {"index", 0}}},
              {"problem", Json::object()}};
}

Json cardio_problem(std::vector<std::string> params, std::vector<std::string> outputs, const std::string& ranges,
                    bool vsd) {
  return Json{{"params", params},   {"outputs", outputs}, {"ranges", ranges},         {"spread", 0.25},
              {"vsd", vsd},         {"dt", 2e-3},         {"samples_per_beat", 400}, {"beats", 25}};
}

template <class T>
T get(const Json& j, const std::string& dotted) {
  const Json* node = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key))
      fail(ErrorKind::ConfigError, "config: missing key '" + dotted + "'");
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  try {
    return node->get<T>();
  } catch (const Json::exception& e) {
    fail(ErrorKind::ConfigError, "config: key '" + dotted + "': " + e.what());
  }
}

// Rejects keys in patch that the defaults do not know about.
void check_known_keys(const Json& defaults, const Json& patch, const std::string& path) {
  if (!patch.is_object()) fail(ErrorKind::ConfigError, "config: '" + (path.empty() ? "<root>" : path) + "' must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!defaults.contains(it.key())) fail(ErrorKind::ConfigError, "config: unknown key '" + key + "'");
    if (defaults[it.key()].is_object() && !defaults[it.key()].empty() && it.value().is_object())
      check_known_keys(defaults[it.key()], it.value(), key);
  }
}

NetConfig net_from(const Json& j, const std::string& key) {
  NetConfig n;
  n.hidden_layers = get<Eigen::Index>(j, key + ".hidden_layers");
  n.hidden_width = get<Eigen::Index>(j, key + ".hidden_width");
  n.epochs = get<int>(j, key + ".epochs");
  n.batch_size = get<Eigen::Index>(j, key + ".batch_size");
  n.lr = get<double>(j, key + ".lr");
  n.lr_final = get<double>(j, key + ".lr_final");
  n.adam_eps = get<double>(j, key + ".adam_eps");
  if (n.hidden_layers < 0 || n.hidden_width < 1 || n.epochs < 1 || n.batch_size < 1 || !(n.lr > 0.0) ||
      !(n.adam_eps > 0.0))
    fail(ErrorKind::ConfigError, "config: invalid network settings in '" + key + "'");
  return n;
}

// ---------------------------------------------------------------- run directory state

struct Manifest {
  fs::path path;
  Json doc;

  explicit Manifest(const RunConfig& cfg) : path(cfg.out / artifact::kManifest) {
    if (fs::exists(path)) doc = read_json_file(path);
    if (!doc.is_object() || doc.value("config_hash", "") != cfg.hash()) doc = Json::object();
    doc["format_version"] = kFormatVersion;
    doc["config_hash"] = cfg.hash();
    doc["config"] = cfg.json;
    if (!doc.contains("stages")) doc["stages"] = Json::object();
  }

  void record(const std::string& stage, const Json& summary, const std::vector<std::string>& files) {
    Json entry = summary;
    Json arts = Json::object();
    for (const auto& f : files) arts[f] = sha256_hex(read_text_file(path.parent_path() / f));
    entry["artifacts"] = arts;
    entry["threads"] = max_threads();
    entry["openmp"] = openmp_enabled();
    doc["stages"][stage] = entry;
    write_json_file(path, doc);
  }
};

struct NormalizedSetup {
  NormalizationMaps maps;
  GaussianModel prior;  // raw scale
  GaussianModel noise;
  GaussianModel prior_bar;
  GaussianModel noise_bar;
};

NormalizedSetup load_normalized(const RunConfig& cfg) {
  NormalizedSetup s;
  s.maps = normalization_from_json(read_json_file(cfg.out / artifact::kNormalization));
  s.prior = gaussian_from_json(read_json_file(cfg.out / artifact::kPrior));
  s.noise = gaussian_from_json(read_json_file(cfg.out / artifact::kNoise));
  auto [p, e] = normalize_models(s.prior, s.noise, s.maps);
  s.prior_bar = std::move(p);
  s.noise_bar = std::move(e);
  return s;
}

Dataset load_dataset(const fs::path& p) { return dataset_from_jsonl(read_text_file(p)); }

// Columns are samples.
Mat normalized_params(const Dataset& ds, const NormalizationMaps& m) {
  return ((ds.params.array().rowwise() * m.a.transpose().array()).rowwise() + m.b.transpose().array())
      .matrix()
      .transpose();
}
Mat normalized_obs(const Mat& rows, const NormalizationMaps& m) {
  return ((rows.array().rowwise() * m.c.transpose().array()).rowwise() + m.d.transpose().array())
      .matrix()
      .transpose();
}

// The map the encoder is trained against and the noise it sees, both normalized.
struct EncoderProblem {
  LossProblem problem;
  std::shared_ptr<const ForwardModel> forward_raw;
};

EncoderProblem encoder_problem(const RunConfig& cfg, const NormalizedSetup& s) {
  const Problem prob = build_problem(cfg);
  EncoderProblem ep;
  ep.forward_raw = prob.forward;
  if (cfg.known_map) {
    ep.problem = {std::make_shared<NormalizedForward>(prob.forward, s.maps.a, s.maps.b, s.maps.c, s.maps.d),
                  s.prior_bar, s.noise_bar};
    return ep;
  }
  const fs::path ckpt = cfg.out / artifact::kDecoder;
  if (!fs::exists(ckpt))
    fail(ErrorKind::MissingArtifact, "missing " + ckpt.string() + " (run train-decoder or set known_map)");
  auto decoder = std::make_shared<MlpForward>(params_from_checkpoint(read_json_file(ckpt)));
  const Json err = read_json_file(cfg.out / artifact::kDecoderError);
  DecoderErrorModel dem{vec_from_json(err.at("mean")), SPDMatrix(mat_from_json(err.at("cov")))};
  ep.problem = {decoder, s.prior_bar, combine_noise(s.noise_bar, dem)};
  return ep;
}

std::unique_ptr<EncoderObjective> make_objective(const RunConfig& cfg, const LossProblem& p) {
  if (cfg.loss == "theta") return std::make_unique<ThetaObjective>(p, cfg.theta);
  return std::make_unique<AlphaObjective>(p, cfg.alpha, cfg.alpha_samples);
}

// Normalized-scale encoder pass plus the matching recovery, returned in raw scale.
PosteriorRecord infer(const RunConfig& cfg, const MLPParams& encoder, const NormalizedSetup& s, const LossProblem& lp,
                      const Vec& y) {
  const Vec y_bar = s.maps.obs_to_normal(y);
  const EncoderOutput o = encode(encoder, y_bar);
  PosteriorEstimate est;
  if (cfg.loss == "theta") {
    est = recover_posterior_theta(o.mu, o.C, s.prior_bar.cov);
  } else {
    const SPDMatrix gamma_hat = SPDMatrix::from_cholesky(o.C);
    const SPDMatrix gamma_lap = laplace_covariance(lp.forward->jacobian(o.mu), lp.prior, lp.noise);
    est = recover_posterior_alpha(o.mu, gamma_hat, gamma_lap, s.prior_bar.mean, s.prior_bar.cov, cfg.alpha);
  }
  auto [mean, cov] = denormalize_posterior(est.mean, est.cov, s.maps);
  return {std::move(mean), std::move(cov)};
}

Json posterior_json(const std::vector<PosteriorRecord>& recs) {
  Json arr = Json::array();
  for (std::size_t i = 0; i < recs.size(); ++i)
    arr.push_back(Json{{"index", i}, {"mean", to_json(recs[i].mean)}, {"cov", to_json(recs[i].cov.base())}});
  return Json{{"format_version", kFormatVersion}, {"records", std::move(arr)}};
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

Mat observations_for(const RunConfig& cfg, const std::optional<fs::path>& obs_file) {
  if (obs_file) return read_observations(*obs_file);
  return load_dataset(cfg.out / artifact::kTestSet).noisy_obs;
}

const CardioForward& as_cardio(const Problem& p) {
  const auto* c = dynamic_cast<const CardioForward*>(p.forward.get());
  if (!c) fail(ErrorKind::ConfigError, "this command needs a cardio preset");
  return *c;
}

// F(log u) seen as a function of u, for sampling physical ranges.
class PhysicalInputForward final : public ForwardModel {
 public:
  explicit PhysicalInputForward(std::shared_ptr<const ForwardModel> inner) : inner_(std::move(inner)) {}
  Eigen::Index param_dim() const override { return inner_->param_dim(); }
  Eigen::Index obs_dim() const override { return inner_->obs_dim(); }
  std::string name() const override { return inner_->name(); }

 protected:
  Vec eval_impl(const Vec& u) const override { return inner_->eval(u.array().log().matrix()); }

 private:
  std::shared_ptr<const ForwardModel> inner_;
};

std::vector<ParamRange> scenario_ranges(const CardioConfig& c, const std::vector<std::string>& names) {
  if (c.ranges == "hypertension") return cardio_ranges_hypertension(names);
  return cardio_ranges_uniform(names, c.spread);
}

}  // namespace

// ---------------------------------------------------------------- public config API

TrainOptions NetConfig::train_options(std::uint64_t seed) const {
  TrainOptions o;
  o.epochs = epochs;
  o.batch_size = batch_size;
  o.lr = lr;
  o.lr_final = lr_final;
  o.adam_eps = adam_eps;
  o.seed = seed;
  return o;
}

std::string RunConfig::hash() const { return sha256_hex(json.dump()); }

Json preset_defaults(const std::string& preset) {
  Json j = base_defaults();
  j["preset"] = preset;
  j["out"] = "runs/" + preset;
  if (preset == "exp") {
    j["problem"] = Json{{"dim", 5}, {"prior_mean", 0.0}, {"prior_var", 0.25}};
    j["known_map"] = true;
    j["dataset"] = {{"decoder_samples", 256}, {"encoder_samples", 100}, {"test_samples", 20}};
    j["encoder"] = net_json(3, 256, 300, 10, 3e-3, 1e-5, 1e-12);
  } else if (preset == "poisson") {
    j["problem"] = Json{{"n", 9},        {"obs_count", 20}, {"gamma", 0.1}, {"delta", 0.5},
                        {"beta", -1.0},  {"xi", 1.5},       {"obs_seed", 0}};
    j["pool_noise"] = true;
    j["normalization"] = "global";
    j["decoder"] = net_json(3, 128, 200, 32, 1e-3, 1e-5);
    j["encoder"] = net_json(2, 128, 300, 10, 1e-3, 1e-5, 1e-12);
  } else if (preset == "cardio") {
    j["problem"] = cardio_problem({"EA_LV", "R_AR_SYS", "C_AR_SYS", "R_VEN_SYS", "HR"},
                                  {"CI", "LV_I_ESV", "LV_EF", "LV_Pmax", "SAP_max", "SAP_min"}, "hypertension",
                                  false);
    j["eta"] = 0.05;
  } else if (preset == "cardio_vsd") {
    j["problem"] = cardio_problem(
        {"EB_LV", "EA_RV", "EB_RV", "R_AR_SYS", "C_AR_SYS", "R_VEN_SYS", "R_AR_PUL", "r_VSD", "HR"},
        {"LV_Pmax", "LV_Pmin", "RA_Pmean", "RV_Pmax", "RV_Pmin", "SAP_max", "SAP_min", "PAP_max", "PAP_min",
         "PAP_mean", "PWP_mean", "PVR", "Q_P", "Q_S"},
        "uniform", true);
    j["eta"] = 0.05;
  } else {
    fail(ErrorKind::ConfigError, "unknown preset '" + preset + "' (expected exp, poisson, cardio, cardio_vsd)");
  }
  return j;
}

RunConfig load_config(const std::optional<fs::path>& file, const Json& overrides) {
  Json user = file ? read_json_file(*file) : Json::object();
  if (!user.is_object()) fail(ErrorKind::ConfigError, "config: top level must be an object");
  std::string preset = overrides.contains("preset") ? get<std::string>(overrides, "preset")
                                                    : (user.contains("preset") ? get<std::string>(user, "preset") : "");
  if (preset.empty()) fail(ErrorKind::ConfigError, "config: 'preset' is required");
  Json merged = preset_defaults(preset);
  check_known_keys(merged, user, "");
  check_known_keys(merged, overrides, "");
  merged.merge_patch(user);
  merged.merge_patch(overrides);
  return config_from_json(merged);
}

RunConfig config_from_json(const Json& j) {
  RunConfig c;
  c.json = j;
  if (get<int>(j, "format_version") != kFormatVersion) fail(ErrorKind::ConfigError, "config: unsupported format_version");
  c.preset = get<std::string>(j, "preset");
  c.seed = get<std::uint64_t>(j, "seed");
  c.out = get<std::string>(j, "out");
  c.threads = get<int>(j, "threads");
  c.eta = get<double>(j, "eta");
  if (!(c.eta > 0.0)) fail(ErrorKind::ConfigError, "config: eta must be positive");
  c.pool_noise = get<bool>(j, "pool_noise");
  const auto norm = get<std::string>(j, "normalization");
  if (norm == "global") c.normalization = NormalizationMode::GlobalScalar;
  else if (norm == "per_component") c.normalization = NormalizationMode::PerComponent;
  else fail(ErrorKind::ConfigError, "config: normalization must be 'global' or 'per_component'");
  c.known_map = get<bool>(j, "known_map");
  c.loss = get<std::string>(j, "loss");
  if (c.loss != "theta" && c.loss != "alpha") fail(ErrorKind::ConfigError, "config: loss must be 'theta' or 'alpha'");
  c.theta = get<double>(j, "theta");
  c.alpha = get<double>(j, "alpha");
  c.alpha_samples = get<Eigen::Index>(j, "alpha_samples");
  if (!(c.theta > 0.0)) fail(ErrorKind::ConfigError, "config: theta must be positive");
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) fail(ErrorKind::ConfigError, "config: alpha must lie in (0,1)");
  c.decoder_samples = get<Eigen::Index>(j, "dataset.decoder_samples");
  c.encoder_samples = get<Eigen::Index>(j, "dataset.encoder_samples");
  c.test_samples = get<Eigen::Index>(j, "dataset.test_samples");
  if (c.decoder_samples < 2 || c.encoder_samples < 2 || c.encoder_samples > c.decoder_samples || c.test_samples < 1)
    fail(ErrorKind::ConfigError, "config: dataset sizes need 2 <= encoder_samples <= decoder_samples, test_samples >= 1");
  c.decoder = net_from(j, "decoder");
  c.encoder = net_from(j, "encoder");
  c.oracle_points = get<Eigen::Index>(j, "oracle.points");
  c.bench_dims = get<std::vector<Eigen::Index>>(j, "benchmark.dims");
  c.bench_test_samples = get<Eigen::Index>(j, "benchmark.test_samples");
  c.gsa_base_samples = get<Eigen::Index>(j, "gsa.base_samples");
  c.gsa_threshold = get<double>(j, "gsa.threshold");
  c.gsa_params = get<std::vector<std::string>>(j, "gsa.params");
  c.forward_uq_samples = get<Eigen::Index>(j, "forward_uq.samples");
  c.forward_uq_index = get<Eigen::Index>(j, "forward_uq.index");

  if (c.preset == "exp") {
    c.exp_dim = get<Eigen::Index>(j, "problem.dim");
    if (c.exp_dim < 1) fail(ErrorKind::ConfigError, "config: problem.dim must be positive");
    c.exp_prior_mean = get<double>(j, "problem.prior_mean");
    c.exp_prior_var = get<double>(j, "problem.prior_var");
    if (!(c.exp_prior_var > 0.0)) fail(ErrorKind::ConfigError, "config: problem.prior_var must be positive");
  } else if (c.preset == "poisson") {
    c.poisson.n = get<int>(j, "problem.n");
    c.poisson.obs_count = get<Eigen::Index>(j, "problem.obs_count");
    c.poisson.gamma = get<double>(j, "problem.gamma");
    c.poisson.delta = get<double>(j, "problem.delta");
    c.poisson.beta = get<double>(j, "problem.beta");
    c.poisson.xi = get<double>(j, "problem.xi");
    c.poisson.obs_seed = get<std::uint64_t>(j, "problem.obs_seed");
    if (c.poisson.n < 3 || c.poisson.n > 65 || c.poisson.obs_count < 1)
      fail(ErrorKind::ConfigError, "config: poisson needs 3 <= n <= 65 and obs_count >= 1");
  } else {
    c.cardio.params = get<std::vector<std::string>>(j, "problem.params");
    c.cardio.outputs = get<std::vector<std::string>>(j, "problem.outputs");
    c.cardio.ranges = get<std::string>(j, "problem.ranges");
    if (c.cardio.ranges != "uniform" && c.cardio.ranges != "hypertension")
      fail(ErrorKind::ConfigError, "config: problem.ranges must be 'uniform' or 'hypertension'");
    c.cardio.spread = get<double>(j, "problem.spread");
    c.cardio.vsd = get<bool>(j, "problem.vsd");
    c.cardio.sim.dt = get<double>(j, "problem.dt");
    c.cardio.sim.samples_per_beat = get<int>(j, "problem.samples_per_beat");
    c.cardio.sim.beats = get<int>(j, "problem.beats");
  }
  return c;
}

Problem build_problem(const RunConfig& cfg) {
  Problem p;
  if (cfg.preset == "exp") {
    const Eigen::Index d = cfg.exp_dim;
    p.forward = std::make_shared<ExpForward>(d);
    p.prior = GaussianModel(Vec::Constant(d, cfg.exp_prior_mean), SPDMatrix::diagonal(Vec::Constant(d, cfg.exp_prior_var)));
    for (Eigen::Index i = 0; i < d; ++i) {
      p.param_names.push_back("u" + std::to_string(i));
      p.output_names.push_back("y" + std::to_string(i));
    }
  } else if (cfg.preset == "poisson") {
    auto f = std::make_shared<PoissonForward>(cfg.poisson);
    p.prior = poisson_prior(cfg.poisson);
    for (Eigen::Index i = 0; i < f->param_dim(); ++i) p.param_names.push_back("u" + std::to_string(i));
    for (Eigen::Index i = 0; i < f->obs_dim(); ++i) p.output_names.push_back("y" + std::to_string(i));
    p.forward = std::move(f);
  } else {
    CardioParams base = CardioParams::reference();
    base.vsd = cfg.cardio.vsd;
    auto f = std::make_shared<CardioForward>(base, cfg.cardio.params, cfg.cardio.outputs, cfg.cardio.sim);
    p.prior = GaussianModel(f->reference_log_params(),
                            SPDMatrix::diagonal(log_uniform_prior_variance(scenario_ranges(cfg.cardio, cfg.cardio.params))));
    p.param_names = cfg.cardio.params;
    p.output_names = cfg.cardio.outputs;
    p.log_params = true;
    p.forward = std::move(f);
  }
  return p;
}

// ---------------------------------------------------------------- helpers

Mat read_observations(const fs::path& path) {
  if (path.extension() == ".jsonl") return load_dataset(path).noisy_obs;
  const Json j = read_json_file(path);
  if (!j.contains("y") || !j["y"].is_array()) fail(ErrorKind::ConfigError, path.string() + ": expected {\"y\": [[...], ...]}");
  const auto& rows = j["y"];
  if (rows.empty()) fail(ErrorKind::ConfigError, path.string() + ": no observations");
  Mat y(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(vec_from_json(rows[0]).size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Vec v = vec_from_json(rows[i]);
    require_dims(v.size() == y.cols(), path.string() + ": observation " + std::to_string(i) + " has the wrong length");
    y.row(static_cast<Eigen::Index>(i)) = v.transpose();
  }
  return y;
}

std::vector<PosteriorRecord> read_posterior(const fs::path& path) {
  const Json j = read_json_file(path);
  std::vector<PosteriorRecord> out;
  try {
    for (const auto& r : j.at("records")) out.push_back({vec_from_json(r.at("mean")), SPDMatrix(mat_from_json(r.at("cov")))});
  } catch (const Json::exception& e) {
    fail(ErrorKind::ConfigError, path.string() + ": " + e.what());
  }
  return out;
}

double rel_error_inf(const Vec& estimate, const Vec& reference) { return rel_error_vec(estimate, reference).maxCoeff(); }

double rel_error_elementwise(const Vec& estimate, const Vec& reference) {
  require_dims(estimate.size() == reference.size(), "rel_error_elementwise: size mismatch");
  if ((reference.array() == 0.0).any()) fail(ErrorKind::ZeroReference, "rel_error_elementwise: zero reference entry");
  return ((estimate - reference).array() / reference.array()).abs().mean();
}

// ---------------------------------------------------------------- stages

Json run_generate(const RunConfig& cfg) {
  const auto t0 = Clock::now();
  const Problem prob = build_problem(cfg);
  prob.forward->reset_calls();
  const Eigen::Index group = cfg.pool_noise ? prob.forward->obs_dim() : 0;
  const Dataset ds = generate_dataset(*prob.forward, prob.prior, cfg.decoder_samples, cfg.eta, group, cfg.seed);
  const SPDMatrix noise_cov = noise_cov_from_dataset(ds.clean_obs, cfg.eta, group);
  const Dataset test =
      generate_dataset(*prob.forward, prob.prior, cfg.test_samples, cfg.eta, group, cfg.seed + 1, Exec::Parallel, &noise_cov);
  const GaussianModel noise(Vec::Zero(noise_cov.dim()), noise_cov);
  const NormalizationMaps maps = build_normalization(ds, cfg.normalization);

  fs::create_directories(cfg.out);
  write_text_file(cfg.out / artifact::kDataset, dataset_jsonl(ds));
  write_text_file(cfg.out / artifact::kTestSet, dataset_jsonl(test));
  write_json_file(cfg.out / artifact::kPrior, to_json(prob.prior));
  write_json_file(cfg.out / artifact::kNoise, to_json(noise));
  write_json_file(cfg.out / artifact::kNormalization, to_json(maps));

  Json summary{{"seconds", seconds_since(t0)},
               {"forward_calls", prob.forward->calls()},
               {"samples", ds.size()},
               {"test_samples", test.size()},
               {"param_dim", ds.params.cols()},
               {"obs_dim", ds.clean_obs.cols()}};
  Manifest(cfg).record("generate", summary,
                       {artifact::kDataset, artifact::kTestSet, artifact::kPrior, artifact::kNoise,
                        artifact::kNormalization});
  return summary;
}

Json run_train_decoder(const RunConfig& cfg) {
  const auto t0 = Clock::now();
  const NormalizedSetup s = load_normalized(cfg);
  const Dataset ds = load_dataset(cfg.out / artifact::kDataset);
  const Mat x = normalized_params(ds, s.maps);
  const Mat y = normalized_obs(ds.clean_obs, s.maps);
  const MLPSpec spec{x.rows(), cfg.decoder.hidden_layers, cfg.decoder.hidden_width, y.rows()};
  const TrainResult r = train_decoder(init_xavier(spec, cfg.seed + 11), x, y, cfg.decoder.train_options(cfg.seed));

  const Eigen::Index n_train = train_split(x.cols());
  const Mat xv = x.rightCols(x.cols() - n_train), yv = y.rightCols(y.cols() - n_train);
  const DecoderErrorModel dem = decoder_error_stats(Mat(yv - mlp_forward(r.params, xv)));
  const double val_mse = mse(r.params, xv, yv);

  write_json_file(cfg.out / artifact::kDecoder, checkpoint_json(r.params, Json{{"role", "decoder"}}));
  write_text_file(cfg.out / artifact::kDecoderLog, training_log_csv(r.log));
  write_json_file(cfg.out / artifact::kDecoderError,
                  Json{{"format_version", kFormatVersion},
                       {"mean", to_json(dem.mean)},
                       {"cov", to_json(dem.cov.base())},
                       {"validation_samples", xv.cols()},
                       {"validation_mse", val_mse}});
  Json summary{{"seconds", seconds_since(t0)}, {"epochs", cfg.decoder.epochs}, {"validation_mse", val_mse}};
  Manifest(cfg).record("train-decoder", summary,
                       {artifact::kDecoder, artifact::kDecoderLog, artifact::kDecoderError});
  return summary;
}

Json run_train_encoder(const RunConfig& cfg) {
  const auto t0 = Clock::now();
  const NormalizedSetup s = load_normalized(cfg);
  const EncoderProblem ep = encoder_problem(cfg, s);
  const Dataset ds = load_dataset(cfg.out / artifact::kDataset);
  const Mat ys = normalized_obs(ds.noisy_obs.topRows(cfg.encoder_samples), s.maps);
  auto objective = make_objective(cfg, ep.problem);
  const Eigen::Index d = s.prior.dim();
  const MLPSpec spec{ys.rows(), cfg.encoder.hidden_layers, cfg.encoder.hidden_width, head_size(d)};
  const MLPParams init = init_encoder(spec, s.prior_bar.mean, s.prior_bar.cov.chol(), cfg.seed + 23);
  const TrainResult r = train_encoder(init, ys, *objective, cfg.encoder.train_options(cfg.seed));

  write_json_file(cfg.out / artifact::kEncoder,
                  checkpoint_json(r.params, Json{{"role", "encoder"}, {"loss", cfg.loss}}));
  write_text_file(cfg.out / artifact::kEncoderLog, training_log_csv(r.log));
  const long per_eval = cfg.loss == "theta" ? static_cast<long>(d + 1) : static_cast<long>(cfg.alpha_samples);
  Json summary{{"seconds", seconds_since(t0)},
               {"epochs", cfg.encoder.epochs},
               {"loss", cfg.loss},
               {"known_map", cfg.known_map},
               {"forward_calls", r.log.empty() ? 0L : r.log.back().forward_calls},
               {"forward_calls_per_loss_eval", per_eval},
               {"final_train_loss", r.log.empty() ? 0.0 : r.log.back().train_loss},
               {"final_val_loss", r.log.empty() ? 0.0 : r.log.back().val_loss}};
  Manifest(cfg).record("train-encoder", summary, {artifact::kEncoder, artifact::kEncoderLog});
  return summary;
}

Json run_solve(const RunConfig& cfg, const std::optional<fs::path>& obs_file) {
  const auto t0 = Clock::now();
  const fs::path ckpt = cfg.out / artifact::kEncoder;
  if (!fs::exists(ckpt)) fail(ErrorKind::MissingArtifact, "missing " + ckpt.string() + " (run train-encoder first)");
  const MLPParams encoder = params_from_checkpoint(read_json_file(ckpt));
  const NormalizedSetup s = load_normalized(cfg);
  const Mat ys = observations_for(cfg, obs_file);
  require_dims(ys.cols() == encoder.input_dim(), "solve: observation length does not match the encoder");
  std::optional<EncoderProblem> ep;
  if (cfg.loss == "alpha") ep = encoder_problem(cfg, s);

  std::vector<PosteriorRecord> recs;
  std::ostringstream timing;
  timing << "index,seconds\n";
  for (Eigen::Index i = 0; i < ys.rows(); ++i) {
    const auto ts = Clock::now();
    recs.push_back(infer(cfg, encoder, s, ep ? ep->problem : LossProblem{}, ys.row(i).transpose()));
    timing << i << ',' << fmt(seconds_since(ts)) << '\n';
  }
  write_json_file(cfg.out / artifact::kPosterior, posterior_json(recs));
  write_text_file(cfg.out / artifact::kPosteriorTiming, timing.str());
  Json summary{{"seconds", seconds_since(t0)}, {"records", recs.size()}};
  Manifest(cfg).record("solve", summary, {artifact::kPosterior, artifact::kPosteriorTiming});
  return summary;
}

Json run_oracle(const RunConfig& cfg, const std::optional<fs::path>& obs_file) {
  const auto t0 = Clock::now();
  const Problem prob = build_problem(cfg);
  const GaussianModel noise = gaussian_from_json(read_json_file(cfg.out / artifact::kNoise));
  const Mat ys = observations_for(cfg, obs_file);
  if (ys.rows() == 0) fail(ErrorKind::ConfigError, "oracle: no observations");
  require_dims(ys.cols() == prob.forward->obs_dim(), "oracle: observation length does not match the model");
  std::optional<Mat> truth;
  if (!obs_file) truth = load_dataset(cfg.out / artifact::kTestSet).params;

  prob.forward->reset_calls();
  const PriorSampleBank bank = PriorSampleBank::build(*prob.forward, prob.prior, cfg.oracle_points);
  std::vector<OracleResult> results;
  Json records = Json::array();
  for (Eigen::Index i = 0; i < ys.rows(); ++i) {
    try {
      results.push_back(posterior_oracle(bank, ys.row(i).transpose(), noise));
      const OracleResult& r = results.back();
      records.push_back(Json{{"index", i}, {"mean", to_json(r.mean)}, {"cov", to_json(r.cov)}, {"ess", r.ess},
                             {"n_points", r.n_points}});
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateWeights) throw;
      results.push_back({});
      records.push_back(Json{{"index", i}, {"error", std::string(to_string(e.kind()))}, {"message", e.what()}});
    }
  }

  // Error tables against the UQ-VAE posterior when one exists for the same observations.
  Json errors = Json::object();
  const fs::path post_path = cfg.out / artifact::kPosterior;
  std::vector<PosteriorRecord> post;
  if (!obs_file && fs::exists(post_path)) post = read_posterior(post_path);
  std::ostringstream csv;
  csv << "index,mean_err_inf,var_err_inf,mean_err_elementwise,uqvae_true_err_inf,oracle_true_err_inf\n";
  if (post.size() == static_cast<std::size_t>(ys.rows())) {
    auto physical = [&](const Vec& v) { return prob.log_params ? Vec(v.array().exp()) : v; };
    double sm = 0, sv = 0, se = 0, su = 0, so = 0;
    long n = 0;
    for (Eigen::Index i = 0; i < ys.rows(); ++i) {
      const OracleResult& r = results[static_cast<std::size_t>(i)];
      if (r.mean.size() == 0) continue;
      const PosteriorRecord& p = post[static_cast<std::size_t>(i)];
      const double em = rel_error_inf(p.mean, r.mean);
      const double ev = rel_error_var(p.cov, r.cov.diagonal()).maxCoeff();
      const double ee = rel_error_elementwise(physical(p.mean), physical(r.mean));
      const Vec u = truth ? Vec(truth->row(i).transpose()) : Vec();
      const double eu = truth ? rel_error_inf(p.mean, u) : std::nan("");
      const double eo = truth ? rel_error_inf(r.mean, u) : std::nan("");
      csv << i << ',' << fmt(em) << ',' << fmt(ev) << ',' << fmt(ee) << ',' << fmt(eu) << ',' << fmt(eo) << '\n';
      sm += em, sv += ev, se += ee, su += eu, so += eo;
      ++n;
    }
    if (n > 0)
      errors = Json{{"samples", n},
                    {"mean_err_inf", sm / n},
                    {"var_err_inf", sv / n},
                    {"mean_err_elementwise", se / n},
                    {"elementwise_scale", prob.log_params ? "physical" : "native"},
                    {"uqvae_true_err_inf", su / n},
                    {"oracle_true_err_inf", so / n}};
  }
  write_json_file(cfg.out / artifact::kOracle, Json{{"format_version", kFormatVersion},
                                                    {"points", cfg.oracle_points},
                                                    {"records", std::move(records)},
                                                    {"errors", errors}});
  write_text_file(cfg.out / artifact::kOracleErrors, csv.str());
  Json summary{{"seconds", seconds_since(t0)}, {"forward_calls", prob.forward->calls()}, {"errors", errors}};
  Manifest(cfg).record("oracle", summary, {artifact::kOracle, artifact::kOracleErrors});
  return summary;
}

Json run_benchmark(const RunConfig& cfg) {
  if (cfg.preset != "exp") fail(ErrorKind::ConfigError, "benchmark runs on the exp preset");
  const auto t0 = Clock::now();
  Json rows = Json::array();
  std::ostringstream csv;
  csv << "dim,loss,train_seconds,forward_calls_per_eval,mean_err_map,cov_err_lap,mean_err_map_median,cov_err_lap_median\n";
  for (Eigen::Index d : cfg.bench_dims) {
    RunConfig c = cfg;
    c.exp_dim = d;
    const Problem prob = build_problem(c);
    const Dataset ds = generate_dataset(*prob.forward, prob.prior, cfg.encoder_samples, cfg.eta, 0, cfg.seed);
    const SPDMatrix noise_cov = noise_cov_from_dataset(ds.clean_obs, cfg.eta, 0);
    const Dataset test = generate_dataset(*prob.forward, prob.prior, cfg.bench_test_samples, cfg.eta, 0, cfg.seed + 1,
                                          Exec::Parallel, &noise_cov);
    NormalizedSetup s;
    s.maps = build_normalization(ds, cfg.normalization);
    s.prior = prob.prior;
    s.noise = GaussianModel(Vec::Zero(d), noise_cov);
    std::tie(s.prior_bar, s.noise_bar) = normalize_models(s.prior, s.noise, s.maps);
    const LossProblem lp{std::make_shared<NormalizedForward>(prob.forward, s.maps.a, s.maps.b, s.maps.c, s.maps.d),
                         s.prior_bar, s.noise_bar};
    const Mat ys = normalized_obs(ds.noisy_obs, s.maps);

    std::vector<MapLaplace> refs;
    for (Eigen::Index i = 0; i < test.size(); ++i)
      refs.push_back(map_laplace(*prob.forward, prob.prior, s.noise, test.noisy_obs.row(i).transpose()));

    for (const std::string loss : {"theta", "alpha"}) {
      c.loss = loss;
      auto objective = make_objective(c, lp);
      const MLPSpec spec{d, cfg.encoder.hidden_layers, cfg.encoder.hidden_width, head_size(d)};
      TrainOptions opt = cfg.encoder.train_options(cfg.seed);
      opt.exec = Exec::Serial;
      const auto ts = Clock::now();
      const TrainResult r =
          train_encoder(init_encoder(spec, s.prior_bar.mean, s.prior_bar.cov.chol(), cfg.seed + 23), ys, *objective, opt);
      const double train_seconds = seconds_since(ts);

      lp.forward->reset_calls();
      (void)objective->eval(ys.col(0), s.prior_bar.mean, s.prior_bar.cov.chol(), false);
      const long per_eval = lp.forward->calls();

      std::vector<double> mean_errs, cov_errs;
      for (Eigen::Index i = 0; i < test.size(); ++i) {
        const PosteriorRecord p = infer(c, r.params, s, lp, test.noisy_obs.row(i).transpose());
        mean_errs.push_back(rel_error_inf(p.mean, refs[static_cast<std::size_t>(i)].u_map));
        cov_errs.push_back(rel_error_var(p.cov, refs[static_cast<std::size_t>(i)].gamma_lap.base().diagonal()).maxCoeff());
      }
      const double em = average(mean_errs), ec = average(cov_errs);
      const double em_med = median(mean_errs), ec_med = median(cov_errs);
      rows.push_back(Json{{"dim", d},
                          {"loss", loss},
                          {"train_seconds", train_seconds},
                          {"forward_calls_per_eval", per_eval},
                          {"mean_err_map", em},
                          {"cov_err_lap", ec},
                          {"mean_err_map_median", em_med},
                          {"cov_err_lap_median", ec_med},
                          {"epochs", cfg.encoder.epochs}});
      csv << d << ',' << loss << ',' << fmt(train_seconds) << ',' << per_eval << ',' << fmt(em) << ',' << fmt(ec) << ','
          << fmt(em_med) << ',' << fmt(ec_med) << '\n';
    }
  }
  fs::create_directories(cfg.out);
  write_json_file(cfg.out / artifact::kBenchmark, Json{{"format_version", kFormatVersion}, {"rows", rows}});
  write_text_file(cfg.out / artifact::kBenchmarkCsv, csv.str());
  Json summary{{"seconds", seconds_since(t0)}, {"rows", rows}};
  Manifest(cfg).record("benchmark", summary, {artifact::kBenchmark, artifact::kBenchmarkCsv});
  return summary;
}

Json run_gsa(const RunConfig& cfg) {
  const auto t0 = Clock::now();
  const Problem scenario = build_problem(cfg);
  (void)as_cardio(scenario);
  std::vector<std::string> names = cfg.gsa_params;
  if (names.empty()) {
    names = CardioParams::gsa_names();
    if (cfg.cardio.vsd) names.push_back("r_VSD");
  }
  CardioParams base = CardioParams::reference();
  base.vsd = cfg.cardio.vsd;
  auto model = std::make_shared<CardioForward>(base, names, cfg.cardio.outputs, cfg.cardio.sim);
  const PhysicalInputForward physical(model);

  GsaPlan plan;
  plan.base_samples = cfg.gsa_base_samples;
  for (const auto& r : scenario_ranges(cfg.cardio, names)) {
    const double ref = base.get(r.name);
    plan.ranges.push_back({r.name, r.low_factor * ref, r.high_factor * ref});
  }
  const SobolIndices s = run_gsa(plan, physical, cfg.seed);
  const std::vector<int> selected = select_parameters(s, cfg.gsa_threshold);
  int clipped = 0;
  (void)clipped_for_display(s.total, &clipped);

  std::ostringstream csv;
  csv << "parameter,output,total_index\n";
  for (std::size_t i = 0; i < names.size(); ++i)
    for (std::size_t o = 0; o < cfg.cardio.outputs.size(); ++o)
      csv << names[i] << ',' << cfg.cardio.outputs[o] << ','
          << fmt(s.total(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(o))) << '\n';
  Json sel = Json::array();
  for (int i : selected) sel.push_back(names[static_cast<std::size_t>(i)]);
  Json total = Json::array();
  for (Eigen::Index i = 0; i < s.total.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index o = 0; o < s.total.cols(); ++o)
      row.push_back(std::isfinite(s.total(i, o)) ? Json(s.total(i, o)) : Json(nullptr));
    total.push_back(row);
  }
  Json defined = Json::array();
  for (char c : s.defined) defined.push_back(c != 0);

  fs::create_directories(cfg.out);
  write_json_file(cfg.out / artifact::kGsa, Json{{"format_version", kFormatVersion},
                                                 {"parameters", names},
                                                 {"outputs", cfg.cardio.outputs},
                                                 {"base_samples", plan.base_samples},
                                                 {"threshold", cfg.gsa_threshold},
                                                 {"total", total},
                                                 {"variance", to_json(s.variance)},
                                                 {"defined", defined},
                                                 {"selected", sel},
                                                 {"clipped_for_display", clipped}});
  write_text_file(cfg.out / artifact::kGsaCsv, csv.str());
  Json summary{{"seconds", seconds_since(t0)}, {"forward_calls", model->calls()}, {"selected", sel}};
  Manifest(cfg).record("gsa", summary, {artifact::kGsa, artifact::kGsaCsv});
  return summary;
}

Json run_forward_uq(const RunConfig& cfg, const std::optional<fs::path>& posterior_file) {
  const auto t0 = Clock::now();
  const Problem prob = build_problem(cfg);
  const CardioForward& model = as_cardio(prob);
  const auto post = read_posterior(posterior_file.value_or(cfg.out / artifact::kPosterior));
  const auto idx = static_cast<std::size_t>(cfg.forward_uq_index);
  if (idx >= post.size()) fail(ErrorKind::ConfigError, "forward_uq.index is past the end of the posterior file");
  const CardioSimOptions sim = cfg.cardio.sim;

  // Chamber volumes then pressures over the last beat.
  auto simulate = [&](const Vec& log_u) {
    const CardioTrajectory tr = cardio_simulate(model.params_at(log_u), sim);
    Mat out(tr.t.size(), 8);
    out.leftCols(4) = tr.states.leftCols(4);
    out.rightCols(4) = tr.pressures;
    return out;
  };
  const ForwardUqResult band =
      forward_uq(post[idx].mean, post[idx].cov.chol(), simulate, cfg.forward_uq_samples);
  const Mat center = simulate(post[idx].mean);
  std::optional<Mat> truth;
  if (!posterior_file) {
    const Dataset test = load_dataset(cfg.out / artifact::kTestSet);
    if (static_cast<Eigen::Index>(idx) < test.size()) truth = simulate(test.params.row(static_cast<Eigen::Index>(idx)).transpose());
  }
  static const char* series[] = {"V_LA", "V_LV", "V_RA", "V_RV", "p_LA", "p_LV", "p_RA", "p_RV"};
  std::ostringstream csv;
  // Rows are aligned by phase within the beat, since the period varies with HR.
  csv << "phase";
  for (const char* s : series) csv << ',' << s << "_mean," << s << "_std," << s << "_at_mean," << s << "_true";
  csv << '\n';
  for (Eigen::Index r = 0; r < band.mean.rows(); ++r) {
    csv << fmt(static_cast<double>(r) / static_cast<double>(band.mean.rows() - 1));
    for (Eigen::Index k = 0; k < 8; ++k)
      csv << ',' << fmt(band.mean(r, k)) << ',' << fmt(band.std(r, k)) << ',' << fmt(center(r, k)) << ','
          << (truth ? fmt((*truth)(r, k)) : std::string("nan"));
    csv << '\n';
  }
  fs::create_directories(cfg.out);
  write_text_file(cfg.out / artifact::kForwardUq, csv.str());
  Json summary{{"seconds", seconds_since(t0)},
               {"samples", band.samples},
               {"failures", band.failures},
               {"index", cfg.forward_uq_index}};
  Manifest(cfg).record("forward-uq", summary, {artifact::kForwardUq});
  return summary;
}

}  // namespace uqvae
