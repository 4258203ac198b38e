#include "lrc/quant.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lrc/errors.hpp"

namespace lrc {
namespace {

constexpr int kMinBits = 2;
constexpr int kMaxBits = 8;

void require_bits(int bits) {
  if (bits < kMinBits || bits > kMaxBits) {
    fail(ErrorKind::InvalidArgument, "quantization bits must be in [2, 8], got " +
                                         std::to_string(bits));
  }
}

std::size_t row_groupsize(std::optional<std::size_t> groupsize, std::size_t rows) {
  if (!groupsize) return rows;
  if (*groupsize == 0 || rows % *groupsize != 0) {
    fail(ErrorKind::BadGroupsize, "groupsize " + std::to_string(*groupsize) +
                                      " does not divide dimension " + std::to_string(rows));
  }
  return *groupsize;
}

// Visits every (column, first row of group) pair.
template <typename Visit>
void for_each_column_group(const DenseMatrix& x, std::size_t group, Visit&& visit) {
  for (std::size_t col = 0; col < x.cols(); ++col)
    for (std::size_t start = 0; start < x.rows(); start += group) visit(col, start);
}

}  // namespace

QuantGrid QuantGrid::with_bits(int bits) {
  require_bits(bits);
  return QuantGrid(bits);
}

std::int32_t quantize_code(double value, double scale, const QuantGrid& grid) {
  if (scale == 0.0) return 0;
  const double level = static_cast<double>(grid.max_level());
  const double q = std::clamp(std::round(value / scale), -level, level);
  return static_cast<std::int32_t>(q);
}

std::size_t effective_groupsize(const QuantGrid& grid, std::optional<std::size_t> groupsize,
                                std::size_t cols) {
  if (grid.is_identity()) return 1;
  return row_groupsize(groupsize, cols);
}

DenseMatrix weight_scales(const DenseMatrix& w, const QuantGrid& grid, std::size_t groupsize) {
  if (groupsize == 0 || w.cols() % groupsize != 0) {
    fail(ErrorKind::BadGroupsize, "groupsize " + std::to_string(groupsize) +
                                      " does not divide " + std::to_string(w.cols()));
  }
  const std::size_t groups = w.cols() / groupsize;
  DenseMatrix scales(w.rows(), groups);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    for (std::size_t g = 0; g < groups; ++g) {
      if (grid.is_identity()) {
        scales(r, g) = w(r, g);
        continue;
      }
      double m = 0.0;
      for (std::size_t c = g * groupsize; c < (g + 1) * groupsize; ++c)
        m = std::max(m, std::abs(w(r, c)));
      scales(r, g) = m / grid.max_level();
    }
  }
  return scales;
}

DenseMatrix rtn_quantize_activations(const DenseMatrix& x, const ActQuantConfig& cfg) {
  if (cfg.is_identity()) return x;
  const QuantGrid grid = QuantGrid::with_bits(*cfg.bits);
  if (!(cfg.clip_ratio > 0.0 && cfg.clip_ratio <= 1.0)) {
    fail(ErrorKind::InvalidArgument, "clip ratio must lie in (0, 1]");
  }
  const std::size_t group = row_groupsize(cfg.groupsize, x.rows());
  const double levels = grid.max_level();

  DenseMatrix y(x.rows(), x.cols());
  for_each_column_group(x, group, [&](std::size_t col, std::size_t start) {
    double m = 0.0;
    for (std::size_t r = start; r < start + group; ++r) m = std::max(m, std::abs(x(r, col)));
    const double scale = cfg.clip_ratio * m / levels;
    for (std::size_t r = start; r < start + group; ++r)
      y(r, col) = quantize_code(x(r, col), scale, grid) * scale;
  });
  return y;
}

double activation_quant_error(const DenseMatrix& x, int bits, double clip_ratio,
                              std::optional<std::size_t> groupsize) {
  const DenseMatrix y = rtn_quantize_activations(x, {bits, clip_ratio, groupsize});
  double err = 0.0;
  auto a = x.data();
  auto b = y.data();
  for (std::size_t i = 0; i < a.size(); ++i) err += (a[i] - b[i]) * (a[i] - b[i]);
  return err;
}

ClipSearchResult search_clip_ratio(const DenseMatrix& x, int bits,
                                   std::span<const double> candidates,
                                   std::optional<std::size_t> groupsize) {
  if (candidates.empty()) fail(ErrorKind::EmptyCandidates, "no clip ratio candidates");
  ClipSearchResult best{candidates.front(), INFINITY};
  for (double c : candidates) {
    const double mse = activation_quant_error(x, bits, c, groupsize);
    if (mse < best.mse || (mse == best.mse && c < best.clip_ratio)) best = {c, mse};
  }
  return best;
}

std::vector<double> default_clip_candidates() {
  std::vector<double> c;
  for (int i = 70; i <= 100; i += 5) c.push_back(i / 100.0);
  return c;
}

QuantizedWeight rtn_quantize_weight(const DenseMatrix& w, const QuantGrid& grid,
                                    std::optional<std::size_t> groupsize) {
  const std::size_t group = effective_groupsize(grid, groupsize, w.cols());
  QuantizedWeight q;
  q.grid = grid;
  q.groupsize = group;
  q.scales = weight_scales(w, grid, group);
  q.codes = CodeMatrix{w.rows(), w.cols(), std::vector<std::int32_t>(w.size())};
  for (std::size_t r = 0; r < w.rows(); ++r)
    for (std::size_t c = 0; c < w.cols(); ++c)
      q.codes(r, c) = quantize_code(w(r, c), q.scales(r, c / group), grid);
  return q;
}

DenseMatrix dequantize(const QuantizedWeight& q) {
  DenseMatrix w(q.codes.rows, q.codes.cols);
  for (std::size_t r = 0; r < w.rows(); ++r)
    for (std::size_t c = 0; c < w.cols(); ++c)
      w(r, c) = q.codes(r, c) * q.scales(r, c / q.groupsize);
  return w;
}

}  // namespace lrc
