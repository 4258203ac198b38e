#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "lrc/pipeline.hpp"
#include "lrc/tensor_file.hpp"

namespace lrc {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void dump_value(const json& j, std::ostringstream& out, int depth) {
  const std::string pad(2 * (depth + 1), ' ');
  const std::string close_pad(2 * depth, ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out << "{}";
        return;
      }
      out << "{\n";
      bool first = true;
      for (const auto& [key, value] : j.items()) {  // std::map: sorted keys
        if (!first) out << ",\n";
        first = false;
        out << pad << json(key).dump() << ": ";
        dump_value(value, out, depth + 1);
      }
      out << "\n" << close_pad << "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out << "[]";
        return;
      }
      out << "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i > 0) out << ",\n";
        out << pad;
        dump_value(j[i], out, depth + 1);
      }
      out << "\n" << close_pad << "]";
      return;
    }
    case json::value_t::number_float:
      out << format_double(j.get<double>());
      return;
    default:
      out << j.dump();
      return;
  }
}

std::string csv_bits(const json& v) { return v.is_null() ? "none" : std::to_string(v.get<int>()); }

}  // namespace

std::string format_double(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

std::string dump_json(const json& j) {
  std::ostringstream out;
  dump_value(j, out, 0);
  out << "\n";
  return out.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) fail(ErrorKind::Io, "error writing " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Format, path.string() + ": " + e.what());
  }
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotPositiveDefinite:
    case ErrorKind::NotSymmetric:
      return 3;
    case ErrorKind::Io:
    case ErrorKind::Format:
      return 4;
    default:
      return 2;
  }
}

double bits_equivalent(std::optional<int> weight_bits, std::size_t rank, std::size_t d_in,
                       std::size_t d_out) {
  const double b = weight_bits ? *weight_bits : 16.0;
  return b + 16.0 * static_cast<double>(rank) * static_cast<double>(d_in + d_out) /
                 (static_cast<double>(d_in) * static_cast<double>(d_out));
}

json LayerReport::to_json(bool with_timing) const {
  json j;
  j["name"] = name;
  j["method"] = method;
  j["objective_trace"] = objective_trace;
  j["objective"] = objective;
  j["relaxed_objective"] = relaxed_objective;
  j["reference_energy"] = reference_energy;
  j["relative_error"] = relative_error;
  j["rank"] = rank;
  j["d_in"] = d_in;
  j["d_out"] = d_out;
  j["weight_bits"] = weight_bits ? json(*weight_bits) : json(nullptr);
  j["act_bits"] = act_bits ? json(*act_bits) : json(nullptr);
  j["clip_ratio"] = clip_ratio;
  j["eps_x"] = eps_x;
  j["eps_y"] = eps_y;
  j["samples"] = samples;
  j["rotated"] = rotated;
  j["bits_equivalent"] = bits_equivalent;
  if (with_timing) j["wall_time_s"] = wall_time_s;
  return j;
}

LayerReport LayerReport::from_json(const json& j) {
  try {
    LayerReport r;
    r.name = j.at("name").get<std::string>();
    r.method = j.at("method").get<std::string>();
    r.objective_trace = j.at("objective_trace").get<std::vector<double>>();
    r.objective = j.at("objective").get<double>();
    r.relaxed_objective = j.at("relaxed_objective").get<double>();
    r.reference_energy = j.at("reference_energy").get<double>();
    r.relative_error = j.at("relative_error").get<double>();
    r.rank = j.at("rank").get<std::size_t>();
    r.d_in = j.at("d_in").get<std::size_t>();
    r.d_out = j.at("d_out").get<std::size_t>();
    if (!j.at("weight_bits").is_null()) r.weight_bits = j.at("weight_bits").get<int>();
    if (!j.at("act_bits").is_null()) r.act_bits = j.at("act_bits").get<int>();
    r.clip_ratio = j.at("clip_ratio").get<double>();
    r.eps_x = j.at("eps_x").get<double>();
    r.eps_y = j.at("eps_y").get<double>();
    r.samples = j.at("samples").get<std::size_t>();
    r.rotated = j.at("rotated").get<bool>();
    r.bits_equivalent = j.at("bits_equivalent").get<double>();
    if (j.contains("wall_time_s")) r.wall_time_s = j.at("wall_time_s").get<double>();
    return r;
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, std::string("invalid layer report: ") + e.what());
  }
}

json ModelReport::to_json(bool with_timing) const {
  json j;
  j["method"] = method;
  j["calib_propagation"] = propagation;
  j["end_to_end_error"] = end_to_end_error;
  j["layers"] = json::array();
  for (const auto& l : layers) j["layers"].push_back(l.to_json(with_timing));
  return j;
}

SummaryTable summarize_reports(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorKind::Io, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string fname = entry.path().filename().string();
    if (entry.is_regular_file() && fname.size() > 12 &&
        fname.compare(fname.size() - 12, 12, ".report.json") == 0) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());

  SummaryTable table;
  std::ostringstream csv;
  csv << "layer,method,rank,d_in,d_out,weight_bits,act_bits,bits_equivalent,objective,"
         "relaxed_objective,relative_error\n";

  struct Totals {
    double weighted_bits = 0.0;
    double params = 0.0;
    double error_sum = 0.0;
    std::size_t layers = 0;
  };
  std::map<std::string, Totals> per_method;

  for (const auto& path : files) {
    const LayerReport r = LayerReport::from_json(read_json(path));
    const json j = r.to_json(false);
    csv << r.name << ',' << r.method << ',' << r.rank << ',' << r.d_in << ',' << r.d_out << ','
        << csv_bits(j["weight_bits"]) << ',' << csv_bits(j["act_bits"]) << ','
        << format_double(r.bits_equivalent) << ',' << format_double(r.objective) << ','
        << format_double(r.relaxed_objective) << ',' << format_double(r.relative_error) << '\n';
    Totals& t = per_method[r.method];
    const double params = static_cast<double>(r.d_in) * static_cast<double>(r.d_out);
    t.weighted_bits += r.bits_equivalent * params;
    t.params += params;
    t.error_sum += r.relative_error;
    t.layers += 1;
  }

  json methods = json::object();
  for (const auto& [name, t] : per_method) {
    methods[name] = {{"layers", t.layers},
                     {"parameters", t.params},
                     {"bits_equivalent", t.params > 0 ? t.weighted_bits / t.params : 0.0},
                     {"mean_relative_error", t.error_sum / static_cast<double>(t.layers)}};
  }
  table.csv = csv.str();
  table.summary = {{"rows", files.size()}, {"methods", methods}};
  return table;
}

SummaryTable report(const fs::path& dir) {
  SummaryTable table = summarize_reports(dir);
  write_text(dir / "summary.csv", table.csv);
  write_text(dir / "summary.json", dump_json(table.summary));
  return table;
}

void save_stats(const fs::path& dir, const CalibStats& stats, const json& extra) {
  fs::create_directories(dir);
  io::write_matrix(dir / "sigma_x.lrt", stats.sigma_x());
  io::write_matrix(dir / "sigma_y.lrt", stats.sigma_y());
  io::write_matrix(dir / "sigma_xy.lrt", stats.sigma_xy());
  json meta = extra;
  meta["dim"] = stats.dim();
  meta["samples"] = stats.samples();
  meta["eps_x"] = stats.eps_x();
  meta["eps_y"] = stats.eps_y();
  meta["finalized"] = stats.finalized();
  write_text(dir / "stats.json", dump_json(meta));
}

CalibStats load_stats(const fs::path& dir) {
  const json meta = read_json(dir / "stats.json");
  try {
    return CalibStats::from_parts(io::read_matrix(dir / "sigma_x.lrt"),
                                  io::read_matrix(dir / "sigma_y.lrt"),
                                  io::read_matrix(dir / "sigma_xy.lrt"),
                                  meta.at("samples").get<std::size_t>(),
                                  meta.at("eps_x").get<double>(), meta.at("eps_y").get<double>(),
                                  meta.at("finalized").get<bool>());
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, (dir / "stats.json").string() + ": " + e.what());
  }
}

}  // namespace lrc
