#include "lrc/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>

#include "lrc/errors.hpp"

namespace lrc {
namespace {

using nlohmann::json;

[[noreturn]] void bad_config(const std::string& what) { fail(ErrorKind::Config, what); }

std::optional<int> parse_bits(const json& v, const char* key) {
  if (v.is_null()) return std::nullopt;
  if (v.is_string() && (v == "none" || v == "identity")) return std::nullopt;
  if (!v.is_number_integer()) bad_config(std::string(key) + " must be an integer or null");
  return v.get<int>();
}

std::optional<std::size_t> parse_optional_count(const json& v, const char* key) {
  if (v.is_null()) return std::nullopt;
  if (!v.is_number_unsigned()) bad_config(std::string(key) + " must be a positive integer or null");
  return v.get<std::size_t>();
}

std::size_t parse_count(const json& v, const char* key) {
  if (!v.is_number_unsigned()) bad_config(std::string(key) + " must be a non-negative integer");
  return v.get<std::size_t>();
}

std::string parse_string(const json& v, const char* key) {
  if (!v.is_string()) bad_config(std::string(key) + " must be a string");
  return v.get<std::string>();
}

json bits_json(const std::optional<int>& b) { return b ? json(*b) : json(nullptr); }
json count_json(const std::optional<std::size_t>& c) { return c ? json(*c) : json(nullptr); }

}  // namespace

const char* to_string(Method m) {
  switch (m) {
    case Method::Rtn: return "rtn";
    case Method::Gptq: return "gptq";
    case Method::Svd: return "svd";
    case Method::Lrc: return "lrc";
    case Method::Oracle: return "oracle";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  if (s == "rtn") return Method::Rtn;
  if (s == "gptq") return Method::Gptq;
  if (s == "svd") return Method::Svd;
  if (s == "lrc") return Method::Lrc;
  if (s == "oracle") return Method::Oracle;
  bad_config("unknown method '" + s + "' (expected rtn|gptq|svd|lrc|oracle)");
}

const char* to_string(Propagation p) { return p == Propagation::Clean ? "clean" : "quantized"; }

Propagation parse_propagation(const std::string& s) {
  if (s == "clean") return Propagation::Clean;
  if (s == "quantized") return Propagation::Quantized;
  bad_config("unknown calibration propagation '" + s + "' (expected clean|quantized)");
}

RankSpec RankSpec::parse(const std::string& text) {
  if (text.empty()) bad_config("empty rank");
  const bool percent = text.back() == '%';
  const std::string number = percent ? text.substr(0, text.size() - 1) : text;
  char* end = nullptr;
  const double value = std::strtod(number.c_str(), &end);
  if (number.empty() || end != number.c_str() + number.size() || !(value >= 0.0)) {
    bad_config("invalid rank '" + text + "'");
  }
  if (percent) {
    if (value > 100.0) bad_config("rank percentage above 100: " + text);
    return RankSpec::percent(value);
  }
  if (value != std::floor(value)) bad_config("absolute rank must be an integer: " + text);
  return {Kind::Absolute, value};
}

std::size_t RankSpec::resolve(std::size_t d_in, std::size_t d_out) const {
  const std::size_t limit = std::min(d_in, d_out);
  if (kind == Kind::Absolute) return static_cast<std::size_t>(value);
  // Small epsilon so that e.g. 10% of 30 resolves to 3, not 2.
  return static_cast<std::size_t>(std::floor(value / 100.0 * limit + 1e-9));
}

std::string RankSpec::to_string() const {
  char buf[64];
  if (kind == Kind::Absolute) {
    std::snprintf(buf, sizeof buf, "%.0f", value);
  } else {
    std::snprintf(buf, sizeof buf, "%g%%", value);
  }
  return buf;
}

QuantGrid ExperimentConfig::weight_grid() const {
  return weight_bits ? QuantGrid::with_bits(*weight_bits) : QuantGrid::identity();
}

void ExperimentConfig::validate() const {
  auto check_bits = [](const std::optional<int>& b, const char* key) {
    if (b && (*b < 2 || *b > 8)) bad_config(std::string(key) + " must be in [2, 8]");
  };
  check_bits(weight_bits, "weight_bits");
  check_bits(act_bits, "act_bits");
  if (iterations < 1) bad_config("iterations must be >= 1");
  if (groupsize && *groupsize == 0) bad_config("groupsize must be positive");
  if (act_groupsize && *act_groupsize == 0) bad_config("act_groupsize must be positive");
  if (clip_grid.empty()) bad_config("clip_grid must not be empty");
  for (double c : clip_grid) {
    if (!(c > 0.0 && c <= 1.0)) bad_config("clip ratios must lie in (0, 1]");
  }
  if (!(damping >= 0.0)) bad_config("damping must be >= 0");
  if (block_size < 1) bad_config("block_size must be >= 1");
  if (output_dir.empty()) bad_config("output_dir must not be empty");
}

void apply_json(ExperimentConfig& cfg, const json& j) {
  if (!j.is_object()) bad_config("config must be a JSON object");
  static const std::set<std::string> known = {
      "weight_bits", "act_bits", "rank",    "iterations", "groupsize",         "act_groupsize",
      "clip_grid",   "rotate",   "seed",    "method",     "shards",            "output_dir",
      "damping",     "block_size", "calib_propagation", "record_timing"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) bad_config("unknown config key '" + key + "'");
  }
  for (const auto& [key, v] : j.items()) {
    if (key == "weight_bits") {
      cfg.weight_bits = parse_bits(v, "weight_bits");
    } else if (key == "act_bits") {
      cfg.act_bits = parse_bits(v, "act_bits");
    } else if (key == "rank") {
      if (v.is_number_unsigned()) {
        cfg.rank = RankSpec::absolute(v.get<std::size_t>());
      } else if (v.is_string()) {
        cfg.rank = RankSpec::parse(v.get<std::string>());
      } else {
        bad_config("rank must be an integer or a string like \"10%\"");
      }
    } else if (key == "iterations") {
      cfg.iterations = parse_count(v, "iterations");
    } else if (key == "groupsize") {
      cfg.groupsize = parse_optional_count(v, "groupsize");
    } else if (key == "act_groupsize") {
      cfg.act_groupsize = parse_optional_count(v, "act_groupsize");
    } else if (key == "clip_grid") {
      if (!v.is_array()) bad_config("clip_grid must be an array of numbers");
      cfg.clip_grid.clear();
      for (const auto& c : v) {
        if (!c.is_number()) bad_config("clip_grid must be an array of numbers");
        cfg.clip_grid.push_back(c.get<double>());
      }
    } else if (key == "rotate") {
      if (!v.is_boolean()) bad_config("rotate must be a boolean");
      cfg.rotate = v.get<bool>();
    } else if (key == "seed") {
      if (!v.is_number_unsigned()) bad_config("seed must be a non-negative integer");
      cfg.seed = v.get<std::uint64_t>();
    } else if (key == "method") {
      cfg.method = parse_method(parse_string(v, "method"));
    } else if (key == "shards") {
      if (!v.is_array()) bad_config("shards must be an array of paths");
      cfg.shards.clear();
      for (const auto& s : v) cfg.shards.push_back(parse_string(s, "shards"));
    } else if (key == "output_dir") {
      cfg.output_dir = parse_string(v, "output_dir");
    } else if (key == "damping") {
      if (!v.is_number()) bad_config("damping must be a number");
      cfg.damping = v.get<double>();
    } else if (key == "block_size") {
      cfg.block_size = parse_count(v, "block_size");
    } else if (key == "calib_propagation") {
      cfg.propagation = parse_propagation(parse_string(v, "calib_propagation"));
    } else if (key == "record_timing") {
      if (!v.is_boolean()) bad_config("record_timing must be a boolean");
      cfg.record_timing = v.get<bool>();
    }
  }
}

json to_json(const ExperimentConfig& cfg) {
  json j;
  j["weight_bits"] = bits_json(cfg.weight_bits);
  j["act_bits"] = bits_json(cfg.act_bits);
  j["rank"] = cfg.rank.to_string();
  j["iterations"] = cfg.iterations;
  j["groupsize"] = count_json(cfg.groupsize);
  j["act_groupsize"] = count_json(cfg.act_groupsize);
  j["clip_grid"] = cfg.clip_grid;
  j["rotate"] = cfg.rotate;
  j["seed"] = cfg.seed;
  j["method"] = to_string(cfg.method);
  j["shards"] = cfg.shards;
  j["output_dir"] = cfg.output_dir;
  j["damping"] = cfg.damping;
  j["block_size"] = cfg.block_size;
  j["calib_propagation"] = to_string(cfg.propagation);
  j["record_timing"] = cfg.record_timing;
  return j;
}

ExperimentConfig load_config(const std::string& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    bad_config(path + ": " + e.what());
  }
  apply_json(base, j);
  return base;
}

std::uint64_t default_seed() {
  const char* env = std::getenv("LRC_SEED");
  if (env == nullptr || *env == '\0') return 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0') bad_config(std::string("LRC_SEED is not an unsigned integer: ") + env);
  return v;
}

}  // namespace lrc
