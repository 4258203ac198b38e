#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lrc/quant.hpp"

namespace lrc {

enum class Method { Rtn, Gptq, Svd, Lrc, Oracle };
enum class Propagation { Clean, Quantized };

const char* to_string(Method m);
Method parse_method(const std::string& s);
const char* to_string(Propagation p);
Propagation parse_propagation(const std::string& s);

// Rank as an absolute count or a percentage of min(d_in, d_out), rounded down.
struct RankSpec {
  enum class Kind { Absolute, Percent };
  Kind kind = Kind::Percent;
  double value = 10.0;

  static RankSpec parse(const std::string& text);
  static RankSpec absolute(std::size_t k) { return {Kind::Absolute, static_cast<double>(k)}; }
  static RankSpec percent(double p) { return {Kind::Percent, p}; }

  std::size_t resolve(std::size_t d_in, std::size_t d_out) const;
  std::string to_string() const;
};

struct ExperimentConfig {
  std::optional<int> weight_bits = 4;  // nullopt: identity (unquantized) weights
  std::optional<int> act_bits = 4;     // nullopt: identity activations
  RankSpec rank;
  std::size_t iterations = 1;
  std::optional<std::size_t> groupsize;      // weights
  std::optional<std::size_t> act_groupsize;  // activations
  std::vector<double> clip_grid = default_clip_candidates();
  bool rotate = false;
  std::uint64_t seed = 0;
  Method method = Method::Lrc;
  std::vector<std::string> shards;
  std::string output_dir = "out";
  Propagation propagation = Propagation::Quantized;
  double damping = 1e-2;
  std::size_t block_size = 32;
  bool record_timing = false;

  QuantGrid weight_grid() const;

  // Throws ConfigError on any inconsistent field.
  void validate() const;
};

// Overlays keys from j onto cfg; unknown keys and ill-typed values are
// rejected with ConfigError.
void apply_json(ExperimentConfig& cfg, const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& cfg);

ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {});

// Default seed from LRC_SEED, or 0 when unset.
std::uint64_t default_seed();

}  // namespace lrc
