#include <algorithm>
#include <cmath>
#include <string>

#include "lrc/pipeline.hpp"
#include "lrc/random.hpp"
#include "lrc/tensor_file.hpp"

namespace lrc {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNoiseLevel = 0.5;
constexpr int kOutlierDof = 5;

const char* to_string(ActivationRule r) {
  return r == ActivationRule::Input ? "input" : "previous_output";
}

const char* to_string(Nonlinearity n) { return n == Nonlinearity::None ? "none" : "rectifier"; }

}  // namespace

SyntheticModel make_synthetic(const GenConfig& cfg) {
  if (cfg.dims.size() < 2) fail(ErrorKind::Config, "need at least two layer widths");
  for (std::size_t d : cfg.dims) {
    if (d == 0) fail(ErrorKind::Config, "layer widths must be positive");
  }
  const std::size_t widest = *std::max_element(cfg.dims.begin(), cfg.dims.end());
  if (cfg.samples < widest) {
    fail(ErrorKind::Config, "need n >= max layer width (" + std::to_string(cfg.samples) +
                                " < " + std::to_string(widest) + ")");
  }
  const std::size_t d0 = cfg.dims.front();
  if (cfg.outlier_channels > d0) fail(ErrorKind::Config, "more outlier channels than inputs");
  if (!(cfg.outlier_gain > 0.0)) fail(ErrorKind::Config, "outlier gain must be positive");

  Rng rng(cfg.seed);
  SyntheticModel model;
  for (std::size_t l = 0; l + 1 < cfg.dims.size(); ++l) {
    const std::size_t d_in = cfg.dims[l];
    const std::size_t d_out = cfg.dims[l + 1];
    const double scale = 1.0 / std::sqrt(static_cast<double>(d_in));
    DenseMatrix w(d_out, d_in);
    for (double& v : w.data()) v = rng.normal() * scale;
    model.weights.push_back(std::move(w));
  }

  // Low-rank signal plus isotropic noise.
  const std::size_t n = cfg.samples;
  const std::size_t rank = std::max<std::size_t>(1, d0 / 4);
  DenseMatrix mixing(d0, rank);
  for (double& v : mixing.data()) v = rng.normal() / std::sqrt(static_cast<double>(rank));
  DenseMatrix latent(rank, n);
  for (double& v : latent.data()) v = rng.normal();
  DenseMatrix x(d0, n);
  for (std::size_t i = 0; i < d0; ++i) {
    for (std::size_t t = 0; t < n; ++t) {
      double s = 0.0;
      for (std::size_t r = 0; r < rank; ++r) s += mixing(i, r) * latent(r, t);
      x(i, t) = s + kNoiseLevel * rng.normal();
    }
  }

  // Distinct outlier channels, then heavy-tailed values on them.
  std::vector<std::size_t> channels(d0);
  for (std::size_t i = 0; i < d0; ++i) channels[i] = i;
  for (std::size_t i = 0; i < cfg.outlier_channels; ++i) {
    std::swap(channels[i], channels[i + rng.index(d0 - i)]);
  }
  for (std::size_t i = 0; i < cfg.outlier_channels; ++i) {
    const std::size_t c = channels[i];
    for (std::size_t t = 0; t < n; ++t) x(c, t) = cfg.outlier_gain * rng.student_t(kOutlierDof);
  }
  model.inputs = std::move(x);
  return model;
}

std::vector<DenseMatrix> split_columns(const DenseMatrix& x, std::size_t parts) {
  if (parts == 0 || parts > std::max<std::size_t>(1, x.cols())) {
    fail(ErrorKind::Config, "shard count must be in [1, n]");
  }
  std::vector<DenseMatrix> out;
  std::size_t start = 0;
  for (std::size_t p = 0; p < parts; ++p) {
    const std::size_t width = x.cols() / parts + (p < x.cols() % parts ? 1 : 0);
    DenseMatrix shard(x.rows(), width);
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t c = 0; c < width; ++c) shard(r, c) = x(r, start + c);
    out.push_back(std::move(shard));
    start += width;
  }
  return out;
}

void gen_synthetic(const GenConfig& cfg, const fs::path& dir) {
  const SyntheticModel model = make_synthetic(cfg);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());

  ModelSpec spec;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    const std::string name = "layer" + std::to_string(l);
    const std::string file = name + ".weight.lrt";
    io::write_matrix(dir / file, model.weights[l]);
    const bool last = l + 1 == model.weights.size();
    spec.layers.push_back({name, file, l == 0 ? ActivationRule::Input : ActivationRule::PreviousOutput,
                           last ? Nonlinearity::None : Nonlinearity::Rectifier});
  }
  const auto shards = split_columns(model.inputs, cfg.shards);
  for (std::size_t s = 0; s < shards.size(); ++s) {
    const std::string file = "input.shard" + std::to_string(s) + ".lrt";
    io::write_matrix(dir / file, shards[s]);
    spec.input_shards.push_back(file);
  }
  json j = to_json(spec);
  j["generator"] = {{"seed", cfg.seed},
                    {"dims", cfg.dims},
                    {"samples", cfg.samples},
                    {"outlier_channels", cfg.outlier_channels},
                    {"outlier_gain", cfg.outlier_gain}};
  write_text(dir / "model.json", dump_json(j));
}

json to_json(const ModelSpec& spec) {
  json layers = json::array();
  for (const auto& l : spec.layers) {
    layers.push_back({{"name", l.name},
                      {"weight", l.weight_path},
                      {"activation", to_string(l.activation)},
                      {"nonlinearity", to_string(l.nonlinearity)}});
  }
  return {{"layers", layers}, {"inputs", spec.input_shards}};
}

ModelSpec load_model_spec(const fs::path& path) {
  const json j = read_json(path);
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    const fs::path candidate(p);
    return candidate.is_absolute() ? p : (base / candidate).string();
  };
  ModelSpec spec;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key != "layers" && key != "inputs" && key != "generator") {
        fail(ErrorKind::Config, "unknown model key '" + key + "'");
      }
    }
    for (const auto& l : j.at("layers")) {
      LayerSpec ls;
      ls.name = l.at("name").get<std::string>();
      ls.weight_path = resolve(l.at("weight").get<std::string>());
      const std::string rule = l.value("activation", "previous_output");
      if (rule == "input") {
        ls.activation = ActivationRule::Input;
      } else if (rule == "previous_output") {
        ls.activation = ActivationRule::PreviousOutput;
      } else {
        fail(ErrorKind::Config, "unknown activation rule '" + rule + "'");
      }
      const std::string nl = l.value("nonlinearity", "none");
      if (nl == "none") {
        ls.nonlinearity = Nonlinearity::None;
      } else if (nl == "rectifier" || nl == "relu") {
        ls.nonlinearity = Nonlinearity::Rectifier;
      } else {
        fail(ErrorKind::Config, "unknown nonlinearity '" + nl + "'");
      }
      spec.layers.push_back(std::move(ls));
    }
    if (j.contains("inputs")) {
      for (const auto& s : j.at("inputs")) spec.input_shards.push_back(resolve(s.get<std::string>()));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, path.string() + ": " + e.what());
  }
  if (spec.layers.empty()) fail(ErrorKind::Config, path.string() + ": model has no layers");
  return spec;
}

}  // namespace lrc
