#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lrc/calib.hpp"
#include "lrc/config.hpp"
#include "lrc/errors.hpp"
#include "lrc/hadamard.hpp"
#include "lrc/matrix.hpp"
#include "lrc/quant.hpp"

namespace lrc {

// ---------------------------------------------------------------------------
// Serialization helpers

// JSON text with sorted keys, two-space indent and every float printed with
// 17 significant digits.
std::string dump_json(const nlohmann::json& j);
std::string format_double(double v);
void write_text(const std::filesystem::path& path, const std::string& text);
nlohmann::json read_json(const std::filesystem::path& path);

// Stable CLI exit codes: 2 config, 3 numerical, 4 I/O.
int exit_code_for(ErrorKind kind);

// ---------------------------------------------------------------------------
// Synthetic data

struct GenConfig {
  std::uint64_t seed = 0;
  std::vector<std::size_t> dims;  // layer widths d_0 .. d_L; L weight matrices
  std::size_t samples = 512;      // calibration tokens n
  std::size_t shards = 1;
  std::size_t outlier_channels = 0;
  double outlier_gain = 1.0;
};

struct SyntheticModel {
  std::vector<DenseMatrix> weights;  // weights[l] is dims[l+1] x dims[l]
  DenseMatrix inputs;                // dims[0] x samples
};

// Gaussian weights and low-rank-plus-noise inputs whose outlier channels draw
// heavy-tailed values scaled by outlier_gain. Deterministic per seed.
SyntheticModel make_synthetic(const GenConfig& cfg);

// Contiguous column blocks whose widths differ by at most one.
std::vector<DenseMatrix> split_columns(const DenseMatrix& x, std::size_t parts);

// Writes layer<l>.weight.lrt, input.shard<j>.lrt and model.json into dir.
void gen_synthetic(const GenConfig& cfg, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Models

enum class ActivationRule { Input, PreviousOutput };
enum class Nonlinearity { None, Rectifier };

struct LayerSpec {
  std::string name;
  std::string weight_path;
  ActivationRule activation = ActivationRule::PreviousOutput;
  Nonlinearity nonlinearity = Nonlinearity::None;
};

struct ModelSpec {
  std::vector<LayerSpec> layers;
  std::vector<std::string> input_shards;  // used when the config lists none
};

// Relative weight paths resolve against the model file's directory.
ModelSpec load_model_spec(const std::filesystem::path& path);
nlohmann::json to_json(const ModelSpec& spec);

// ---------------------------------------------------------------------------
// Per-layer quantization

struct LayerReport {
  std::string name;
  std::string method;
  std::vector<double> objective_trace;
  double objective = 0.0;           // final stats-form objective
  double relaxed_objective = 0.0;   // unconstrained-weight bound at this rank
  double reference_energy = 0.0;    // ||W X||_F^2 on the calibration data
  double relative_error = 0.0;      // ||W X - out||_F / ||W X||_F
  std::size_t rank = 0;
  std::size_t d_in = 0;
  std::size_t d_out = 0;
  std::optional<int> weight_bits;
  std::optional<int> act_bits;
  double clip_ratio = 1.0;
  double eps_x = 0.0;
  double eps_y = 0.0;
  std::size_t samples = 0;
  bool rotated = false;
  double bits_equivalent = 0.0;
  double wall_time_s = 0.0;  // serialized only when timing is recorded

  nlohmann::json to_json(bool with_timing) const;
  static LayerReport from_json(const nlohmann::json& j);
};

// b + 16 k (d_in + d_out) / (d_in d_out); unquantized weights count as 16 bits.
double bits_equivalent(std::optional<int> weight_bits, std::size_t rank, std::size_t d_in,
                       std::size_t d_out);

// A quantized layer ready for inference: out = W^ Q_a(R x) + U V^T (R x),
// where R is the optional input rotation.
struct QuantizedLayer {
  DenseMatrix weight;  // dequantized W^ (or the real-valued target for the oracle)
  std::optional<QuantizedWeight> codes;
  DenseMatrix u;
  DenseMatrix v;
  ActQuantConfig act;
  std::optional<RotationPlan> rotation;

  DenseMatrix forward(const DenseMatrix& x) const;
};

struct LayerOutcome {
  LayerReport report;
  QuantizedLayer layer;
  CalibStats stats;
};

// Random access to the calibration shards of one layer.
struct ShardSource {
  std::size_t count = 0;
  std::function<DenseMatrix(std::size_t)> load;

  static ShardSource from_files(std::vector<std::string> paths);
  static ShardSource from_memory(const std::vector<DenseMatrix>* shards);
};

struct Calibration {
  ActQuantConfig act;  // with the searched clip ratio
  CalibStats stats;    // finalized
};

// Picks the activation clip ratio over the shards (exhaustive over
// cfg.clip_grid, ties to the smallest), then accumulates and finalizes the
// statistics of the (optionally rotated) activations.
Calibration calibrate(const std::string& name, const ShardSource& shards, std::size_t d_in,
                      const ExperimentConfig& cfg,
                      const std::optional<RotationPlan>& rotation = std::nullopt);

// Clip search, statistics, method dispatch and raw-data error for one layer.
LayerOutcome quantize_layer(const std::string& name, const DenseMatrix& w,
                            const ShardSource& shards, const ExperimentConfig& cfg,
                            std::size_t layer_index = 0);

// Loads W and the shards, quantizes, and writes the report and artifacts
// (codes, scales, U, V as tensor files) into cfg.output_dir.
LayerReport run_layer(const ExperimentConfig& cfg, const std::string& weight_path,
                      const std::vector<std::string>& shard_paths,
                      const std::string& name = "layer0");

void write_layer_artifacts(const std::filesystem::path& dir, const LayerOutcome& outcome,
                           bool with_timing);

struct ModelReport {
  std::vector<LayerReport> layers;
  double end_to_end_error = 0.0;  // final output vs the full-precision model
  std::string method;
  std::string propagation;

  nlohmann::json to_json(bool with_timing) const;
};

// Quantizes the layers in order. With quantized propagation each layer is
// calibrated on the outputs of the already-quantized layers before it.
ModelReport run_model(const ExperimentConfig& cfg, const ModelSpec& spec);

// Same, on in-memory weights and input shards; writes nothing.
ModelReport run_model_in_memory(const ExperimentConfig& cfg, const ModelSpec& spec,
                                const std::vector<DenseMatrix>& weights,
                                const std::vector<DenseMatrix>& input_shards);

// ---------------------------------------------------------------------------
// Aggregation

struct SummaryTable {
  std::string csv;
  nlohmann::json summary;
};

// Reads every *.report.json in dir (sorted by file name).
SummaryTable summarize_reports(const std::filesystem::path& dir);

// Writes summary.csv and summary.json into dir.
SummaryTable report(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Calibration statistics on disk

void save_stats(const std::filesystem::path& dir, const CalibStats& stats,
                const nlohmann::json& extra = nlohmann::json::object());
CalibStats load_stats(const std::filesystem::path& dir);

}  // namespace lrc
