#include "lrc/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <iostream>

#include "lrc/gptq.hpp"
#include "lrc/linalg.hpp"
#include "lrc/lrc.hpp"
#include "lrc/tensor_file.hpp"

namespace lrc {
namespace fs = std::filesystem;

namespace {

struct MethodResult {
  DenseMatrix weight;
  std::optional<QuantizedWeight> codes;
  DenseMatrix u;
  DenseMatrix v;
  std::vector<double> trace;
  double relaxed_objective = 0.0;
};

DenseMatrix no_factor(std::size_t rows) { return DenseMatrix(rows, 0); }

double relaxed_objective_at(const DenseMatrix& w, const CalibStats& stats, std::size_t k) {
  if (k > 0) return init_lr(w, stats, k).objective;
  const DenseMatrix u = no_factor(w.rows());
  const DenseMatrix v = no_factor(w.cols());
  const DenseMatrix target = build_target_weight(w, u, v, stats.sigma_xy(),
                                                 linalg::cholesky(stats.sigma_y()));
  return lrc_objective(w, target, u, v, stats);
}

GptqConfig gptq_config(const ExperimentConfig& cfg) {
  return {cfg.weight_grid(), cfg.groupsize, cfg.block_size};
}

// Weight-only solve against the optimal target with no low-rank term.
QuantizedWeight solve_without_correction(const DenseMatrix& w, const CalibStats& stats,
                                         const ExperimentConfig& cfg) {
  const DenseMatrix target =
      build_target_weight(w, no_factor(w.rows()), no_factor(w.cols()), stats.sigma_xy(),
                          linalg::cholesky(stats.sigma_y()));
  return gptq_solve(target, stats.sigma_y(), gptq_config(cfg)).weight;
}

MethodResult dispatch(Method method, const DenseMatrix& w, const CalibStats& stats,
                      const ExperimentConfig& cfg, std::size_t k) {
  MethodResult r;
  r.u = no_factor(w.rows());
  r.v = no_factor(w.cols());
  switch (method) {
    case Method::Rtn:
      r.codes = rtn_quantize_weight(w, cfg.weight_grid(), cfg.groupsize);
      break;
    case Method::Gptq:
      r.codes = solve_without_correction(w, stats, cfg);
      break;
    case Method::Svd: {
      r.codes = solve_without_correction(w, stats, cfg);
      if (k > 0) {
        SvdPair svd = svd_baseline(w, dequantize(*r.codes), k);
        r.u = std::move(svd.u);
        r.v = std::move(svd.v);
      }
      break;
    }
    case Method::Lrc: {
      LrcSolution sol = lrc_quantize_layer(w, stats, {k, cfg.iterations, gptq_config(cfg)});
      r.codes = std::move(sol.weight);
      r.u = std::move(sol.u);
      r.v = std::move(sol.v);
      r.trace = std::move(sol.objective_trace);
      r.relaxed_objective = sol.relaxed_objective;
      r.weight = dequantize(*r.codes);
      return r;
    }
    case Method::Oracle: {
      if (k > 0) {
        InitResult init = oracle_relaxed(w, stats, k);
        r.weight = std::move(init.target);
        r.u = std::move(init.u);
        r.v = std::move(init.v);
        r.relaxed_objective = init.objective;
      } else {
        r.weight = build_target_weight(w, r.u, r.v, stats.sigma_xy(),
                                       linalg::cholesky(stats.sigma_y()));
        r.relaxed_objective = lrc_objective(w, r.weight, r.u, r.v, stats);
      }
      r.trace = {r.relaxed_objective};
      return r;
    }
  }
  r.weight = dequantize(*r.codes);
  r.trace = {lrc_objective(w, r.weight, r.u, r.v, stats)};
  r.relaxed_objective = relaxed_objective_at(w, stats, k);
  return r;
}

DenseMatrix rectify(DenseMatrix m) {
  for (double& v : m.data()) v = std::max(v, 0.0);
  return m;
}

DenseMatrix apply_nonlinearity(DenseMatrix m, Nonlinearity nl) {
  return nl == Nonlinearity::Rectifier ? rectify(std::move(m)) : m;
}

}  // namespace

ShardSource ShardSource::from_files(std::vector<std::string> paths) {
  const std::size_t n = paths.size();
  return {n, [paths = std::move(paths)](std::size_t i) { return io::read_matrix(paths.at(i)); }};
}

ShardSource ShardSource::from_memory(const std::vector<DenseMatrix>* shards) {
  return {shards->size(), [shards](std::size_t i) { return shards->at(i); }};
}

DenseMatrix QuantizedLayer::forward(const DenseMatrix& x) const {
  const DenseMatrix xr = rotation ? apply_rotation(x, *rotation) : x;
  DenseMatrix out = linalg::matmul(weight, rtn_quantize_activations(xr, act));
  if (u.cols() > 0) linalg::add_in_place(out, linalg::matmul(u, linalg::matmul_tn(v, xr)));
  return out;
}

Calibration calibrate(const std::string& name, const ShardSource& shards, std::size_t d_in,
                      const ExperimentConfig& cfg, const std::optional<RotationPlan>& rotation) {
  if (shards.count == 0) fail(ErrorKind::Config, name + ": no calibration shards");
  auto load_rotated = [&](std::size_t i) {
    DenseMatrix x = shards.load(i);
    if (x.rows() != d_in) {
      fail(ErrorKind::DimensionMismatch, name + ": shard " + std::to_string(i) + " has " +
                                             std::to_string(x.rows()) +
                                             " channels, layer expects " + std::to_string(d_in));
    }
    return rotation ? apply_rotation(x, *rotation) : x;
  };

  Calibration out{ActQuantConfig{cfg.act_bits, 1.0, cfg.act_groupsize}, CalibStats(d_in)};
  ActQuantConfig& act = out.act;
  if (!act.is_identity()) {
    if (cfg.clip_grid.size() == 1) {
      act.clip_ratio = cfg.clip_grid.front();
    } else {
      // The activation quantizer is per token, so the error sums over shards.
      std::vector<double> err(cfg.clip_grid.size(), 0.0);
      for (std::size_t s = 0; s < shards.count; ++s) {
        const DenseMatrix x = load_rotated(s);
        for (std::size_t c = 0; c < err.size(); ++c)
          err[c] += activation_quant_error(x, *cfg.act_bits, cfg.clip_grid[c], cfg.act_groupsize);
      }
      double best = INFINITY;
      for (std::size_t c = 0; c < err.size(); ++c) {
        const double ratio = cfg.clip_grid[c];
        if (err[c] < best || (err[c] == best && ratio < act.clip_ratio)) {
          best = err[c];
          act.clip_ratio = ratio;
        }
      }
    }
  }

  for (std::size_t s = 0; s < shards.count; ++s) out.stats.accumulate(load_rotated(s), act);
  out.stats.finalize(cfg.damping);
  return out;
}

LayerOutcome quantize_layer(const std::string& name, const DenseMatrix& w,
                            const ShardSource& shards, const ExperimentConfig& cfg,
                            std::size_t layer_index) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  const std::size_t d_in = w.cols();
  const std::size_t d_out = w.rows();

  QuantizedLayer layer;
  if (cfg.rotate) {
    if (is_power_of_two(d_in)) {
      layer.rotation = RotationPlan::randomized(d_in, cfg.seed + layer_index);
    } else {
      std::cerr << "note: " << name << ": input width " << d_in
                << " is not a power of two, rotation skipped\n";
    }
  }
  const DenseMatrix w_eff = layer.rotation ? fuse_into_layer(w, *layer.rotation) : w;
  Calibration calib = calibrate(name, shards, d_in, cfg, layer.rotation);
  layer.act = calib.act;
  CalibStats& stats = calib.stats;

  const bool uses_rank = cfg.method == Method::Svd || cfg.method == Method::Lrc ||
                         cfg.method == Method::Oracle;
  const std::size_t k = uses_rank ? cfg.rank.resolve(d_in, d_out) : 0;
  if (k > std::min(d_in, d_out)) {
    fail(ErrorKind::RankOutOfBounds, name + ": rank " + std::to_string(k) + " exceeds " +
                                         std::to_string(std::min(d_in, d_out)));
  }

  MethodResult result = dispatch(cfg.method, w_eff, stats, cfg, k);
  layer.weight = std::move(result.weight);
  layer.codes = std::move(result.codes);
  layer.u = std::move(result.u);
  layer.v = std::move(result.v);

  double err_sq = 0.0;
  double ref_sq = 0.0;
  for (std::size_t s = 0; s < shards.count; ++s) {
    const DenseMatrix x = shards.load(s);
    const DenseMatrix ref = linalg::matmul(w, x);
    const DenseMatrix out = layer.forward(x);
    err_sq += linalg::frobenius_norm_sq(linalg::subtract(ref, out));
    ref_sq += linalg::frobenius_norm_sq(ref);
  }

  LayerOutcome outcome;
  LayerReport& rep = outcome.report;
  rep.name = name;
  rep.method = to_string(cfg.method);
  rep.objective_trace = std::move(result.trace);
  rep.objective = lrc_objective(w_eff, layer.weight, layer.u, layer.v, stats);
  rep.relaxed_objective = result.relaxed_objective;
  rep.reference_energy = ref_sq;
  rep.relative_error = ref_sq > 0.0 ? std::sqrt(err_sq / ref_sq) : std::sqrt(err_sq);
  rep.rank = k;
  rep.d_in = d_in;
  rep.d_out = d_out;
  rep.weight_bits = cfg.weight_bits;
  rep.act_bits = cfg.act_bits;
  rep.clip_ratio = layer.act.clip_ratio;
  rep.eps_x = stats.eps_x();
  rep.eps_y = stats.eps_y();
  rep.samples = stats.samples();
  rep.rotated = layer.rotation.has_value();
  rep.bits_equivalent = bits_equivalent(cfg.weight_bits, k, d_in, d_out);
  rep.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  outcome.layer = std::move(layer);
  outcome.stats = std::move(stats);
  return outcome;
}

void write_layer_artifacts(const fs::path& dir, const LayerOutcome& outcome, bool with_timing) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
  const std::string prefix = outcome.report.name + "." + outcome.report.method;
  const QuantizedLayer& l = outcome.layer;
  if (l.codes) {
    io::write_tensor(dir / (prefix + ".codes.lrt"), io::from_codes(l.codes->codes));
    io::write_matrix(dir / (prefix + ".scales.lrt"), l.codes->scales);
  } else {
    io::write_matrix(dir / (prefix + ".weight.lrt"), l.weight);
  }
  if (l.u.cols() > 0) {
    io::write_matrix(dir / (prefix + ".u.lrt"), l.u);
    io::write_matrix(dir / (prefix + ".v.lrt"), l.v);
  }
  write_text(dir / (prefix + ".report.json"), dump_json(outcome.report.to_json(with_timing)));
}

LayerReport run_layer(const ExperimentConfig& cfg, const std::string& weight_path,
                      const std::vector<std::string>& shard_paths, const std::string& name) {
  const DenseMatrix w = io::read_matrix(weight_path);
  const LayerOutcome outcome = quantize_layer(name, w, ShardSource::from_files(shard_paths), cfg);
  write_layer_artifacts(cfg.output_dir, outcome, cfg.record_timing);
  return outcome.report;
}

namespace {

struct ModelRun {
  ModelReport report;
  std::vector<LayerOutcome> outcomes;
};

ModelRun run_model_impl(const ExperimentConfig& cfg, const ModelSpec& spec,
                        const std::vector<DenseMatrix>& weights,
                        const std::vector<DenseMatrix>& inputs) {
  if (weights.size() != spec.layers.size()) {
    fail(ErrorKind::Config, "model spec and weight list disagree on layer count");
  }
  if (inputs.empty()) fail(ErrorKind::Config, "no calibration input shards");

  ModelRun run;
  run.report.method = to_string(cfg.method);
  run.report.propagation = to_string(cfg.propagation);

  std::vector<DenseMatrix> prev_ref = inputs;
  std::vector<DenseMatrix> prev_quant = inputs;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const LayerSpec& ls = spec.layers[l];
    const DenseMatrix& w = weights[l];
    const bool from_input = ls.activation == ActivationRule::Input;
    const std::vector<DenseMatrix>& ref_in = from_input ? inputs : prev_ref;
    const std::vector<DenseMatrix>& quant_in = from_input ? inputs : prev_quant;
    if (ref_in.front().rows() != w.cols()) {
      fail(ErrorKind::DimensionMismatch,
           ls.name + ": weight expects " + std::to_string(w.cols()) + " inputs, got " +
               std::to_string(ref_in.front().rows()));
    }
    const std::vector<DenseMatrix>& calib =
        cfg.propagation == Propagation::Quantized ? quant_in : ref_in;

    LayerOutcome outcome = quantize_layer(ls.name, w, ShardSource::from_memory(&calib), cfg, l);

    std::vector<DenseMatrix> next_ref;
    std::vector<DenseMatrix> next_quant;
    for (std::size_t s = 0; s < inputs.size(); ++s) {
      next_ref.push_back(apply_nonlinearity(linalg::matmul(w, ref_in[s]), ls.nonlinearity));
      next_quant.push_back(apply_nonlinearity(outcome.layer.forward(quant_in[s]), ls.nonlinearity));
    }
    prev_ref = std::move(next_ref);
    prev_quant = std::move(next_quant);
    run.report.layers.push_back(outcome.report);
    run.outcomes.push_back(std::move(outcome));
  }

  double err_sq = 0.0;
  double ref_sq = 0.0;
  for (std::size_t s = 0; s < prev_ref.size(); ++s) {
    err_sq += linalg::frobenius_norm_sq(linalg::subtract(prev_ref[s], prev_quant[s]));
    ref_sq += linalg::frobenius_norm_sq(prev_ref[s]);
  }
  run.report.end_to_end_error = ref_sq > 0.0 ? std::sqrt(err_sq / ref_sq) : std::sqrt(err_sq);
  return run;
}

}  // namespace

ModelReport run_model_in_memory(const ExperimentConfig& cfg, const ModelSpec& spec,
                                const std::vector<DenseMatrix>& weights,
                                const std::vector<DenseMatrix>& input_shards) {
  return run_model_impl(cfg, spec, weights, input_shards).report;
}

ModelReport run_model(const ExperimentConfig& cfg, const ModelSpec& spec) {
  std::vector<DenseMatrix> weights;
  for (const auto& l : spec.layers) weights.push_back(io::read_matrix(l.weight_path));
  const std::vector<std::string>& paths = cfg.shards.empty() ? spec.input_shards : cfg.shards;
  std::vector<DenseMatrix> inputs;
  for (const auto& p : paths) inputs.push_back(io::read_matrix(p));

  ModelRun run = run_model_impl(cfg, spec, weights, inputs);
  for (const auto& outcome : run.outcomes) {
    write_layer_artifacts(cfg.output_dir, outcome, cfg.record_timing);
  }
  write_text(fs::path(cfg.output_dir) / ("model." + run.report.method + ".json"),
             dump_json(run.report.to_json(cfg.record_timing)));
  return run.report;
}

}  // namespace lrc
