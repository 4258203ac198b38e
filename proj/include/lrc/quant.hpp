#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lrc/matrix.hpp"

namespace lrc {

// Symmetric signed integer grid with levels -(2^(b-1)-1) .. +(2^(b-1)-1).
// bits == 0 is the identity sentinel: values pass through unquantized.
class QuantGrid {
 public:
  static QuantGrid with_bits(int bits);
  static QuantGrid identity() { return QuantGrid(0); }

  int bits() const noexcept { return bits_; }
  bool is_identity() const noexcept { return bits_ == 0; }
  // Largest code magnitude. The identity grid stores one scale per entry with
  // code 1, so its range is [-1, 1].
  std::int32_t max_level() const noexcept {
    return is_identity() ? 1 : (std::int32_t{1} << (bits_ - 1)) - 1;
  }
  std::int64_t level_count() const noexcept { return 2 * std::int64_t{max_level()} + 1; }

  friend bool operator==(const QuantGrid&, const QuantGrid&) = default;

 private:
  explicit QuantGrid(int bits) : bits_(bits) {}
  int bits_;
};

struct ActQuantConfig {
  std::optional<int> bits;  // nullopt: identity quantizer, Y = X
  double clip_ratio = 1.0;
  std::optional<std::size_t> groupsize;

  bool is_identity() const noexcept { return !bits.has_value(); }
};

struct CodeMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int32_t> data;

  std::int32_t& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  std::int32_t operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  friend bool operator==(const CodeMatrix&, const CodeMatrix&) = default;
};

// Integer codes plus per-row (or per row x column-group) scales. Entry (r, c)
// dequantizes to codes(r, c) * scales(r, c / groupsize).
struct QuantizedWeight {
  CodeMatrix codes;
  DenseMatrix scales;
  QuantGrid grid = QuantGrid::identity();
  std::size_t groupsize = 0;  // column-group width; equals cols when ungrouped

  friend bool operator==(const QuantizedWeight&, const QuantizedWeight&) = default;
};

// Round half away from zero, then clamp into the grid. A zero scale yields 0.
std::int32_t quantize_code(double value, double scale, const QuantGrid& grid);

// Column-group width used for a d_in-wide weight: 1 for the identity grid,
// d_in when ungrouped. Throws BadGroupsize if the group does not divide d_in.
std::size_t effective_groupsize(const QuantGrid& grid, std::optional<std::size_t> groupsize,
                                std::size_t cols);

// Max-abs scales: one per row and column group.
DenseMatrix weight_scales(const DenseMatrix& w, const QuantGrid& grid, std::size_t groupsize);

// Simulated activation quantization. Each column (token) is scaled by
// c * max|x| / (2^(a-1) - 1), per contiguous group of rows when grouped,
// rounded, clamped and dequantized back to reals.
DenseMatrix rtn_quantize_activations(const DenseMatrix& x, const ActQuantConfig& cfg);

// ||X - Q_a(X; c)||_F^2
double activation_quant_error(const DenseMatrix& x, int bits, double clip_ratio,
                              std::optional<std::size_t> groupsize = std::nullopt);

struct ClipSearchResult {
  double clip_ratio = 1.0;
  double mse = 0.0;
};

// Exhaustive search over candidate clip ratios; ties resolve to the smallest.
ClipSearchResult search_clip_ratio(const DenseMatrix& x, int bits,
                                   std::span<const double> candidates,
                                   std::optional<std::size_t> groupsize = std::nullopt);

std::vector<double> default_clip_candidates();

QuantizedWeight rtn_quantize_weight(const DenseMatrix& w, const QuantGrid& grid,
                                    std::optional<std::size_t> groupsize = std::nullopt);

DenseMatrix dequantize(const QuantizedWeight& q);

}  // namespace lrc
