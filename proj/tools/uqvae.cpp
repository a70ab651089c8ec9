#include <iostream>
#if defined(__GLIBC__)
#include <malloc.h>
#endif
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "uqvae/error.hpp"
#include "uqvae/parallel.hpp"
#include "uqvae/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct CommonFlags {
  std::optional<std::string> config;
  std::optional<std::string> preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> theta;
  std::optional<double> eta;
  std::optional<long> obs_count;
  std::optional<int> threads;
  bool known_map = false;
  std::optional<std::string> input;

  uqvae::Json overrides() const {
    uqvae::Json j = uqvae::Json::object();
    if (preset) j["preset"] = *preset;
    if (seed) j["seed"] = *seed;
    if (out) j["out"] = *out;
    if (theta) j["theta"] = *theta;
    if (eta) j["eta"] = *eta;
    if (obs_count) j["problem"]["obs_count"] = *obs_count;
    if (threads) j["threads"] = *threads;
    if (known_map) j["known_map"] = true;
    return j;
  }
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Run configuration JSON");
  cmd->add_option("--preset", f.preset, "exp, poisson, cardio or cardio_vsd (overrides the file)");
  cmd->add_option("--seed", f.seed, "Base seed");
  cmd->add_option("--out", f.out, "Run directory");
  cmd->add_option("--theta", f.theta, "Perturbation size of the theta loss");
  cmd->add_option("--eta", f.eta, "Relative noise level");
  cmd->add_option("--obs-count", f.obs_count, "Number of observation points (poisson)");
  cmd->add_option("--threads", f.threads, "OpenMP threads (0 keeps the default)");
  cmd->add_flag("--known-map", f.known_map, "Use the true forward map instead of a trained decoder");
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // The alpha loss allocates D x K temporaries per call; keep glibc from returning them to the kernel each time.
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"Variational autoencoder posterior estimation for Bayesian inverse problems"};
  app.require_subcommand(1);
  CommonFlags flags;

  struct Command {
    const char* name;
    const char* help;
  };
  const Command commands[] = {
      {"generate", "Draw the training and test datasets"},
      {"train-decoder", "Fit the surrogate forward map"},
      {"train-encoder", "Fit the encoder with the configured loss"},
      {"solve", "Posterior mean and covariance for each observation"},
      {"oracle", "Quasi-Monte Carlo reference posterior and error tables"},
      {"benchmark", "Compare the theta and alpha losses on the exp problem"},
      {"gsa", "Total Sobol indices of the cardio scenario"},
      {"forward-uq", "Pressure and volume bands from a posterior"},
  };
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    add_common(sub, flags);
    const std::string name = c.name;
    if (name == "solve" || name == "oracle") sub->add_option("--y", flags.input, "Observations file (JSON or dataset JSONL)");
    if (name == "forward-uq") sub->add_option("--posterior", flags.input, "Posterior report from solve");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    std::optional<std::filesystem::path> file;
    if (flags.config) file = *flags.config;
    const uqvae::RunConfig cfg = uqvae::load_config(file, flags.overrides());
    if (cfg.threads > 0) uqvae::set_threads(cfg.threads);
    std::optional<std::filesystem::path> input;
    if (flags.input) input = *flags.input;

    uqvae::Json summary;
    if (cmd == "generate") summary = uqvae::run_generate(cfg);
    else if (cmd == "train-decoder") summary = uqvae::run_train_decoder(cfg);
    else if (cmd == "train-encoder") summary = uqvae::run_train_encoder(cfg);
    else if (cmd == "solve") summary = uqvae::run_solve(cfg, input);
    else if (cmd == "oracle") summary = uqvae::run_oracle(cfg, input);
    else if (cmd == "benchmark") summary = uqvae::run_benchmark(cfg);
    else if (cmd == "gsa") summary = uqvae::run_gsa(cfg);
    else summary = uqvae::run_forward_uq(cfg, input);
    std::cout << summary.dump(2) << '\n';
    return 0;
  } catch (const uqvae::Error& e) {
    std::cerr << "uqvae " << cmd << ": " << e.what() << '\n';
    return uqvae::is_config_error(e.kind()) ? kExitConfig : kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "uqvae " << cmd << ": " << e.what() << '\n';
    return kExitConfig;
  }
}
