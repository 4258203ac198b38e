// lrc: command-line front end for the low-rank correction quantization toolkit.
//
//   lrc gen       synthetic weights, calibration shards and model.json
//   lrc stats     accumulate and finalize calibration statistics
//   lrc quantize  quantize one layer
//   lrc pipeline  quantize a sequential model layer by layer
//   lrc report    aggregate *.report.json into summary.csv / summary.json

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lrc/config.hpp"
#include "lrc/errors.hpp"
#include "lrc/hadamard.hpp"
#include "lrc/pipeline.hpp"
#include "lrc/tensor_file.hpp"

namespace {

using lrc::ExperimentConfig;

// Flags as typed on the command line. Only flags that were actually given
// override the defaults, and a --config file overrides both.
struct ExperimentFlags {
  std::string weight_bits;
  std::string act_bits;
  std::string rank;
  std::size_t iterations = 0;
  std::string groupsize;
  std::string act_groupsize;
  std::vector<double> clip_grid;
  bool rotate = false;
  std::uint64_t seed = 0;
  std::string method;
  std::vector<std::string> shards;
  std::string output_dir;
  double damping = 0.0;
  std::size_t block_size = 0;
  std::string propagation;
  bool timing = false;
  std::string config_path;
};

std::optional<int> parse_bits_flag(const std::string& s, const char* name) {
  if (s == "none" || s == "identity") return std::nullopt;
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  lrc::fail(lrc::ErrorKind::Config, std::string(name) + " must be an integer or 'none'");
}

std::optional<std::size_t> parse_group_flag(const std::string& s, const char* name) {
  if (s == "none") return std::nullopt;
  try {
    std::size_t used = 0;
    const unsigned long v = std::stoul(s, &used);
    if (used == s.size() && s.front() != '-') return v;
  } catch (const std::exception&) {
  }
  lrc::fail(lrc::ErrorKind::Config, std::string(name) + " must be a positive integer or 'none'");
}

void add_experiment_flags(CLI::App* cmd, ExperimentFlags& f, bool with_shards) {
  cmd->add_option("--weight-bits", f.weight_bits, "Weight bits in [2, 8], or 'none'");
  cmd->add_option("--act-bits", f.act_bits, "Activation bits in [2, 8], or 'none'");
  cmd->add_option("--rank", f.rank, "Correction rank: absolute ('8') or percent of min dim ('10%')");
  cmd->add_option("--iterations", f.iterations, "Alternating iterations T");
  cmd->add_option("--groupsize", f.groupsize, "Weight column-group width, or 'none'");
  cmd->add_option("--act-groupsize", f.act_groupsize, "Activation row-group width, or 'none'");
  cmd->add_option("--clip-grid", f.clip_grid, "Activation clip ratio candidates")->delimiter(',');
  cmd->add_flag("--rotate", f.rotate, "Randomized Hadamard rotation of layer inputs");
  cmd->add_option("--seed", f.seed, "Seed (default: $LRC_SEED or 0)");
  cmd->add_option("--method", f.method, "rtn | gptq | svd | lrc | oracle");
  if (with_shards) {
    cmd->add_option("--shards", f.shards, "Calibration shard tensor files")->delimiter(',');
  }
  cmd->add_option("--out", f.output_dir, "Output directory");
  cmd->add_option("--damping", f.damping, "Relative damping factor for the covariances");
  cmd->add_option("--block-size", f.block_size, "GPTQ block size");
  cmd->add_option("--calib-propagation", f.propagation, "clean | quantized");
  cmd->add_flag("--timing", f.timing, "Record wall time in reports");
  cmd->add_option("--config", f.config_path, "JSON config; its keys override flags");
}

ExperimentConfig build_config(const CLI::App* cmd, const ExperimentFlags& f) {
  ExperimentConfig cfg;
  cfg.seed = lrc::default_seed();
  auto given = [&](const char* name) { return cmd->count(name) > 0; };
  if (given("--weight-bits")) cfg.weight_bits = parse_bits_flag(f.weight_bits, "--weight-bits");
  if (given("--act-bits")) cfg.act_bits = parse_bits_flag(f.act_bits, "--act-bits");
  if (given("--rank")) cfg.rank = lrc::RankSpec::parse(f.rank);
  if (given("--iterations")) cfg.iterations = f.iterations;
  if (given("--groupsize")) cfg.groupsize = parse_group_flag(f.groupsize, "--groupsize");
  if (given("--act-groupsize")) {
    cfg.act_groupsize = parse_group_flag(f.act_groupsize, "--act-groupsize");
  }
  if (given("--clip-grid")) cfg.clip_grid = f.clip_grid;
  if (given("--rotate")) cfg.rotate = f.rotate;
  if (given("--seed")) cfg.seed = f.seed;
  if (given("--method")) cfg.method = lrc::parse_method(f.method);
  if (cmd->get_option_no_throw("--shards") != nullptr && given("--shards")) cfg.shards = f.shards;
  if (given("--out")) cfg.output_dir = f.output_dir;
  if (given("--damping")) cfg.damping = f.damping;
  if (given("--block-size")) cfg.block_size = f.block_size;
  if (given("--calib-propagation")) cfg.propagation = lrc::parse_propagation(f.propagation);
  if (given("--timing")) cfg.record_timing = f.timing;
  if (!f.config_path.empty()) cfg = lrc::load_config(f.config_path, cfg);
  cfg.validate();
  return cfg;
}

std::vector<std::size_t> parse_dims(const std::string& text) {
  std::vector<std::size_t> dims;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string part =
        text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    try {
      std::size_t used = 0;
      const unsigned long v = std::stoul(part, &used);
      if (used != part.size() || part.front() == '-') throw std::invalid_argument(part);
      dims.push_back(v);
    } catch (const std::exception&) {
      lrc::fail(lrc::ErrorKind::Config, "invalid --dims entry '" + part + "'");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return dims;
}

void print_layer(const lrc::LayerReport& r) {
  std::cout << r.name << " " << r.method << " rank=" << r.rank
            << " objective=" << lrc::format_double(r.objective)
            << " relative_error=" << lrc::format_double(r.relative_error)
            << " bits_equivalent=" << lrc::format_double(r.bits_equivalent) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank correction post-training quantization"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic model and calibration shards");
  std::string gen_dims = "64,64,64,64";
  lrc::GenConfig gen_cfg;
  std::string gen_out = "data";
  gen->add_option("--dims", gen_dims, "Layer widths d0,d1,...,dL");
  gen->add_option("--samples", gen_cfg.samples, "Calibration tokens n");
  gen->add_option("--shards", gen_cfg.shards, "Number of input shards");
  gen->add_option("--outlier-channels", gen_cfg.outlier_channels, "Heavy-tailed input channels");
  gen->add_option("--outlier-gain", gen_cfg.outlier_gain, "Scale of the outlier channels");
  gen->add_option("--seed", gen_cfg.seed, "Seed (default: $LRC_SEED or 0)");
  gen->add_option("--out", gen_out, "Output directory");

  // stats
  auto* stats = app.add_subcommand("stats", "Accumulate and persist calibration statistics");
  ExperimentFlags stats_flags;
  add_experiment_flags(stats, stats_flags, true);

  // quantize
  auto* quant = app.add_subcommand("quantize", "Quantize one layer");
  ExperimentFlags quant_flags;
  std::string weight_path;
  std::string layer_name = "layer0";
  quant->add_option("--weight", weight_path, "Weight tensor file (d_out x d_in)")->required();
  quant->add_option("--name", layer_name, "Layer name used for output files");
  add_experiment_flags(quant, quant_flags, true);

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "Quantize a sequential model");
  ExperimentFlags pipe_flags;
  std::string model_path;
  pipe->add_option("--model", model_path, "model.json")->required();
  add_experiment_flags(pipe, pipe_flags, true);

  // report
  auto* rep = app.add_subcommand("report", "Summarize layer reports");
  std::string report_dir = "out";
  rep->add_option("--dir", report_dir, "Directory holding *.report.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      gen_cfg.dims = parse_dims(gen_dims);
      if (gen->count("--seed") == 0) gen_cfg.seed = lrc::default_seed();
      lrc::gen_synthetic(gen_cfg, gen_out);
      std::cout << "wrote " << gen_out << "/model.json\n";
    } else if (*stats) {
      const ExperimentConfig cfg = build_config(stats, stats_flags);
      if (cfg.shards.empty()) lrc::fail(lrc::ErrorKind::Config, "stats needs --shards");
      const lrc::ShardSource shards = lrc::ShardSource::from_files(cfg.shards);
      const std::size_t dim = lrc::io::read_matrix(cfg.shards.front()).rows();
      std::optional<lrc::RotationPlan> rotation;
      if (cfg.rotate && lrc::is_power_of_two(dim)) {
        rotation = lrc::RotationPlan::randomized(dim, cfg.seed);
      }
      const lrc::Calibration calib = lrc::calibrate("stats", shards, dim, cfg, rotation);
      nlohmann::json extra = {{"clip_ratio", calib.act.clip_ratio},
                              {"act_bits", calib.act.bits ? nlohmann::json(*calib.act.bits)
                                                          : nlohmann::json(nullptr)},
                              {"rotated", rotation.has_value()},
                              {"damping", cfg.damping}};
      lrc::save_stats(cfg.output_dir, calib.stats, extra);
      std::cout << "wrote statistics for d=" << dim << " over " << calib.stats.samples()
                << " samples to " << cfg.output_dir << "\n";
    } else if (*quant) {
      const ExperimentConfig cfg = build_config(quant, quant_flags);
      if (cfg.shards.empty()) lrc::fail(lrc::ErrorKind::Config, "quantize needs --shards");
      print_layer(lrc::run_layer(cfg, weight_path, cfg.shards, layer_name));
    } else if (*pipe) {
      const ExperimentConfig cfg = build_config(pipe, pipe_flags);
      const lrc::ModelSpec spec = lrc::load_model_spec(model_path);
      const lrc::ModelReport result = lrc::run_model(cfg, spec);
      for (const auto& l : result.layers) print_layer(l);
      std::cout << "end_to_end_error=" << lrc::format_double(result.end_to_end_error) << "\n";
    } else if (*rep) {
      const lrc::SummaryTable table = lrc::report(report_dir);
      std::cout << table.csv;
    }
  } catch (const lrc::Error& e) {
    std::cerr << "error [" << lrc::to_string(e.kind()) << "]: " << e.what() << "\n";
    return lrc::exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error [Io]: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
