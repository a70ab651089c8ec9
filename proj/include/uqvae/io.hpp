#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "uqvae/bayes.hpp"
#include "uqvae/losses.hpp"
#include "uqvae/nnet.hpp"
#include "uqvae/qmc.hpp"

namespace uqvae {

using Json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

Json to_json(const Mat& m);
Json to_json(const Vec& v);
Mat mat_from_json(const Json& j);
Vec vec_from_json(const Json& j);

Json to_json(const GaussianModel& g);
GaussianModel gaussian_from_json(const Json& j);

Json to_json(const NormalizationMaps& maps);
NormalizationMaps normalization_from_json(const Json& j);

Json to_json(const OracleResult& r);

Json checkpoint_json(const MLPParams& params, const Json& meta = Json::object());
MLPParams params_from_checkpoint(const Json& j);

// Header line {format_version, D, O, M, seed, eta, model}, then one {u, y_clean, y_noisy} per line.
std::string dataset_jsonl(const Dataset& ds);
Dataset dataset_from_jsonl(const std::string& text);

// Missing files raise MissingArtifact; malformed JSON raises ConfigError with a line number.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

std::string sha256_hex(const std::string& bytes);

}  // namespace uqvae
