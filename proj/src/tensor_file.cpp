#include "lrc/tensor_file.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "lrc/errors.hpp"

namespace lrc::io {
namespace {

constexpr std::uint8_t kMagic[4] = {'L', 'R', 'T', '1'};
constexpr std::size_t kHeaderSize = 6;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
  U bits;
  std::memcpy(&bits, &value, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

template <typename T>
T get_le(const std::uint8_t* p) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(U{p[i]} << (8 * i));
  T value;
  std::memcpy(&value, &bits, sizeof(T));
  return value;
}

[[noreturn]] void bad_format(const std::string& what) {
  fail(ErrorKind::Format, "malformed tensor file: " + what);
}

std::uint64_t checked_product(const std::vector<std::uint64_t>& dims) {
  std::uint64_t n = 1;
  for (std::uint64_t d : dims) {
    if (d != 0 && n > std::numeric_limits<std::uint64_t>::max() / d) bad_format("dims overflow");
    n *= d;
  }
  return n;
}

}  // namespace

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::F32: return 4;
    case DType::F64: return 8;
    case DType::I8: return 1;
    case DType::I32: return 4;
  }
  bad_format("unknown dtype");
}

std::uint64_t Tensor::element_count() const { return checked_product(dims); }

std::vector<std::uint8_t> encode(const Tensor& t) {
  if (t.dims.size() > 255) fail(ErrorKind::Format, "tensor has more than 255 dimensions");
  if (t.payload.size() != t.element_count() * dtype_size(t.dtype)) {
    fail(ErrorKind::Format, "payload length does not match dims");
  }
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.push_back(static_cast<std::uint8_t>(t.dtype));
  out.push_back(static_cast<std::uint8_t>(t.dims.size()));
  for (std::uint64_t d : t.dims) put_le(out, d);
  out.insert(out.end(), t.payload.begin(), t.payload.end());
  return out;
}

Tensor decode(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kHeaderSize) bad_format("truncated header");
  if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) bad_format("bad magic");
  Tensor t;
  const std::uint8_t code = bytes[4];
  if (code > static_cast<std::uint8_t>(DType::I32)) bad_format("unknown dtype code " + std::to_string(code));
  t.dtype = static_cast<DType>(code);
  const std::size_t ndim = bytes[5];
  std::size_t offset = kHeaderSize;
  if (bytes.size() < offset + 8 * ndim) bad_format("truncated dims");
  for (std::size_t i = 0; i < ndim; ++i, offset += 8) t.dims.push_back(get_le<std::uint64_t>(&bytes[offset]));
  const std::uint64_t expected = t.element_count() * dtype_size(t.dtype);
  if (bytes.size() - offset != expected) {
    bad_format("payload is " + std::to_string(bytes.size() - offset) + " bytes, expected " +
               std::to_string(expected));
  }
  t.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset), bytes.end());
  return t;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorKind::Io, "error reading " + path.string());
  return bytes;
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "error writing " + path.string());
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) { write_bytes(path, encode(t)); }

Tensor read_tensor(const std::filesystem::path& path) {
  try {
    return decode(read_bytes(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Format) fail(ErrorKind::Format, path.string() + ": " + e.what());
    throw;
  }
}

Tensor from_matrix(const DenseMatrix& m) {
  Tensor t{DType::F64, {m.rows(), m.cols()}, {}};
  t.payload.reserve(m.size() * 8);
  for (double v : m.data()) put_le(t.payload, v);
  return t;
}

Tensor from_matrix_f32(const DenseMatrix& m) {
  Tensor t{DType::F32, {m.rows(), m.cols()}, {}};
  t.payload.reserve(m.size() * 4);
  for (double v : m.data()) put_le(t.payload, static_cast<float>(v));
  return t;
}

DenseMatrix to_matrix(const Tensor& t) {
  if (t.dtype != DType::F64 && t.dtype != DType::F32) {
    fail(ErrorKind::Format, "expected a floating-point tensor");
  }
  std::size_t rows = 0;
  std::size_t cols = 0;
  if (t.dims.size() == 2) {
    rows = t.dims[0];
    cols = t.dims[1];
  } else if (t.dims.size() == 1) {
    rows = t.dims[0];
    cols = 1;
  } else {
    fail(ErrorKind::Format, "expected a 1-d or 2-d tensor, got " + std::to_string(t.dims.size()) + "-d");
  }
  std::vector<double> data(rows * cols);
  const std::uint8_t* p = t.payload.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = t.dtype == DType::F64 ? get_le<double>(p + 8 * i)
                                    : static_cast<double>(get_le<float>(p + 4 * i));
  }
  DenseMatrix m(rows, cols, std::move(data));
  if (!m.all_finite()) fail(ErrorKind::Format, "tensor contains non-finite values");
  return m;
}

Tensor from_codes(const CodeMatrix& codes) {
  const bool fits_i8 = std::all_of(codes.data.begin(), codes.data.end(), [](std::int32_t c) {
    return c >= std::numeric_limits<std::int8_t>::min() && c <= std::numeric_limits<std::int8_t>::max();
  });
  Tensor t{fits_i8 ? DType::I8 : DType::I32, {codes.rows, codes.cols}, {}};
  for (std::int32_t c : codes.data) {
    if (fits_i8) {
      put_le(t.payload, static_cast<std::int8_t>(c));
    } else {
      put_le(t.payload, c);
    }
  }
  return t;
}

CodeMatrix to_codes(const Tensor& t) {
  if ((t.dtype != DType::I8 && t.dtype != DType::I32) || t.dims.size() != 2) {
    fail(ErrorKind::Format, "expected a 2-d integer tensor");
  }
  CodeMatrix c{t.dims[0], t.dims[1], std::vector<std::int32_t>(t.dims[0] * t.dims[1])};
  for (std::size_t i = 0; i < c.data.size(); ++i) {
    c.data[i] = t.dtype == DType::I8 ? get_le<std::int8_t>(&t.payload[i])
                                     : get_le<std::int32_t>(&t.payload[4 * i]);
  }
  return c;
}

DenseMatrix read_matrix(const std::filesystem::path& path) {
  try {
    return to_matrix(read_tensor(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Format && std::string(e.what()).find(path.string()) == std::string::npos) {
      fail(ErrorKind::Format, path.string() + ": " + e.what());
    }
    throw;
  }
}

void write_matrix(const std::filesystem::path& path, const DenseMatrix& m) {
  write_tensor(path, from_matrix(m));
}

}  // namespace lrc::io
