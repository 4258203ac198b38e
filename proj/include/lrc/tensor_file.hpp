#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "lrc/matrix.hpp"
#include "lrc/quant.hpp"

// LRT1 tensor container:
//   bytes 0..3   magic "LRT1"
//   byte  4      dtype (0 = f32, 1 = f64, 2 = i8, 3 = i32)
//   byte  5      ndim
//   then         ndim x u64 little-endian dims
//   then         row-major little-endian payload
namespace lrc::io {

enum class DType : std::uint8_t { F32 = 0, F64 = 1, I8 = 2, I32 = 3 };

std::size_t dtype_size(DType dtype);

struct Tensor {
  DType dtype = DType::F64;
  std::vector<std::uint64_t> dims;
  std::vector<std::uint8_t> payload;  // little-endian element bytes

  std::uint64_t element_count() const;
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

std::vector<std::uint8_t> encode(const Tensor& t);
Tensor decode(const std::vector<std::uint8_t>& bytes);

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

// 2-D f64 tensor. 0-d and 1-d tensors are not matrices.
Tensor from_matrix(const DenseMatrix& m);
Tensor from_matrix_f32(const DenseMatrix& m);
// Accepts f32 or f64, 2-D (or 1-D, read as a column).
DenseMatrix to_matrix(const Tensor& t);

// Codes stored as i8 when every value fits, else i32.
Tensor from_codes(const CodeMatrix& codes);
CodeMatrix to_codes(const Tensor& t);

DenseMatrix read_matrix(const std::filesystem::path& path);
void write_matrix(const std::filesystem::path& path, const DenseMatrix& m);

}  // namespace lrc::io
