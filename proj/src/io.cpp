#include "uqvae/io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "uqvae/error.hpp"

namespace uqvae {

Json to_json(const Mat& m) {
  Json data = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Json to_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Mat mat_from_json(const Json& j) {
  try {
    const auto rows = j.at("rows").get<Eigen::Index>(), cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols)
      fail(ErrorKind::ConfigError, "matrix JSON: data length does not match rows x cols");
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = data[static_cast<std::size_t>(i * cols + c)].get<double>();
    return m;
  } catch (const Json::exception& e) {
    fail(ErrorKind::ConfigError, std::string("matrix JSON: ") + e.what());
  }
}

Vec vec_from_json(const Json& j) {
  try {
    if (!j.is_array()) fail(ErrorKind::ConfigError, "vector JSON: expected an array");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
  } catch (const Json::exception& e) {
    fail(ErrorKind::ConfigError, std::string("vector JSON: ") + e.what());
  }
}

Json to_json(const GaussianModel& g) { return Json{{"mean", to_json(g.mean)}, {"cov", to_json(g.cov.base())}}; }

GaussianModel gaussian_from_json(const Json& j) {
  return GaussianModel(vec_from_json(j.at("mean")), SPDMatrix(mat_from_json(j.at("cov"))));
}

Json to_json(const NormalizationMaps& m) {
  return Json{{"a", to_json(m.a)}, {"b", to_json(m.b)}, {"c", to_json(m.c)}, {"d", to_json(m.d)}};
}

NormalizationMaps normalization_from_json(const Json& j) {
  NormalizationMaps m;
  m.a = vec_from_json(j.at("a"));
  m.b = vec_from_json(j.at("b"));
  m.c = vec_from_json(j.at("c"));
  m.d = vec_from_json(j.at("d"));
  return m;
}

Json to_json(const OracleResult& r) {
  return Json{{"mean", to_json(r.mean)},
              {"cov", to_json(r.cov)},
              {"ess", r.ess},
              {"n_points", r.n_points},
              {"runtime_seconds", r.runtime_seconds}};
}

Json checkpoint_json(const MLPParams& params, const Json& meta) {
  const MLPSpec s = params.spec();
  Json layers = Json::array();
  for (const auto& l : params.layers) layers.push_back(Json{{"W", to_json(l.W)}, {"b", to_json(l.b)}});
  return Json{{"format_version", kFormatVersion},
              {"spec",
               {{"input_dim", s.input_dim},
                {"hidden_layers", s.hidden_layers},
                {"hidden_width", s.hidden_width},
                {"output_dim", s.output_dim}}},
              {"layers", std::move(layers)},
              {"meta", meta}};
}

MLPParams params_from_checkpoint(const Json& j) {
  try {
    if (j.at("format_version").get<int>() != kFormatVersion)
      fail(ErrorKind::ConfigError, "checkpoint: unsupported format_version");
    MLPSpec s;
    s.input_dim = j.at("spec").at("input_dim").get<Eigen::Index>();
    s.hidden_layers = j.at("spec").at("hidden_layers").get<Eigen::Index>();
    s.hidden_width = j.at("spec").at("hidden_width").get<Eigen::Index>();
    s.output_dim = j.at("spec").at("output_dim").get<Eigen::Index>();
    MLPParams p = MLPParams::zeros(s);
    const auto& layers = j.at("layers");
    require_dims(layers.size() == p.layers.size(), "checkpoint: layer count does not match spec");
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
      Mat w = mat_from_json(layers[i].at("W"));
      Vec b = vec_from_json(layers[i].at("b"));
      require_dims(w.rows() == p.layers[i].W.rows() && w.cols() == p.layers[i].W.cols() &&
                       b.size() == p.layers[i].b.size(),
                   "checkpoint: layer shape does not match spec");
      p.layers[i].W = std::move(w);
      p.layers[i].b = std::move(b);
    }
    return p;
  } catch (const Json::exception& e) {
    fail(ErrorKind::ConfigError, std::string("checkpoint: ") + e.what());
  }
}

std::string dataset_jsonl(const Dataset& ds) {
  std::ostringstream os;
  os << Json{{"format_version", kFormatVersion},
             {"D", ds.params.cols()},
             {"O", ds.clean_obs.cols()},
             {"M", ds.size()},
             {"seed", ds.seed},
             {"eta", ds.eta},
             {"model", ds.model}}
            .dump()
     << '\n';
  for (Eigen::Index m = 0; m < ds.size(); ++m) {
    os << Json{{"u", to_json(Vec(ds.params.row(m).transpose()))},
               {"y_clean", to_json(Vec(ds.clean_obs.row(m).transpose()))},
               {"y_noisy", to_json(Vec(ds.noisy_obs.row(m).transpose()))}}
              .dump()
       << '\n';
  }
  return os.str();
}

Dataset dataset_from_jsonl(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  auto parse = [&](const std::string& s) {
    try {
      return Json::parse(s);
    } catch (const Json::parse_error& e) {
      fail(ErrorKind::ConfigError, "dataset line " + std::to_string(line_no) + ": " + e.what());
    }
  };
  if (!std::getline(is, line)) fail(ErrorKind::ConfigError, "dataset: empty file");
  ++line_no;
  const Json header = parse(line);
  Dataset ds;
  Eigen::Index d = 0, o = 0, m = 0;
  try {
    if (header.at("format_version").get<int>() != kFormatVersion)
      fail(ErrorKind::ConfigError, "dataset: unsupported format_version");
    d = header.at("D").get<Eigen::Index>();
    o = header.at("O").get<Eigen::Index>();
    m = header.at("M").get<Eigen::Index>();
    ds.seed = header.at("seed").get<std::uint64_t>();
    ds.eta = header.at("eta").get<double>();
    ds.model = header.at("model").get<std::string>();
  } catch (const Json::exception& e) {
    fail(ErrorKind::ConfigError, std::string("dataset header: ") + e.what());
  }
  ds.params.resize(m, d);
  ds.clean_obs.resize(m, o);
  ds.noisy_obs.resize(m, o);
  Eigen::Index k = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (k >= m) fail(ErrorKind::ConfigError, "dataset line " + std::to_string(line_no) + ": more records than M");
    const Json rec = parse(line);
    try {
      const Vec u = vec_from_json(rec.at("u")), yc = vec_from_json(rec.at("y_clean")),
                yn = vec_from_json(rec.at("y_noisy"));
      if (u.size() != d || yc.size() != o || yn.size() != o)
        fail(ErrorKind::DimensionMismatch, "dataset line " + std::to_string(line_no) + ": record length");
      ds.params.row(k) = u.transpose();
      ds.clean_obs.row(k) = yc.transpose();
      ds.noisy_obs.row(k) = yn.transpose();
    } catch (const Json::exception& e) {
      fail(ErrorKind::ConfigError, "dataset line " + std::to_string(line_no) + ": " + e.what());
    }
    ++k;
  }
  if (k != m) fail(ErrorKind::ConfigError, "dataset: expected " + std::to_string(m) + " records, found " + std::to_string(k));
  return ds;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::MissingArtifact, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::ConfigError, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorKind::ConfigError, "write failed for " + path.string());
}

Json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    fail(ErrorKind::ConfigError, path.string() + ":" + std::to_string(line) + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    fail(ErrorKind::ConfigError, "sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

}  // namespace uqvae
