#pragma once

// Binary containers for feature matrices (FMAT), labels (LBL1) and spatial
// feature maps (FMAP). All integers and floats are little-endian.
//
//   FMAT: "FMAT" u32 version=1 u32 dtype=1 u64 rows u64 cols f32[rows*cols]
//   LBL1: "LBL1" u32 version=1 u32 K u64 count u8[count]
//   FMAP: "FMAP" u32 version=1 u64 images u32 H u32 W u32 C f32[images*H*W*C]

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "icx/error.hpp"
#include "icx/types.hpp"

namespace icx::io {

inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::uint32_t kDtypeF32 = 1;
inline constexpr std::size_t kFmatHeader = 4 + 4 + 4 + 8 + 8;
inline constexpr std::size_t kLabelHeader = 4 + 4 + 4 + 8;
inline constexpr std::size_t kFmapHeader = 4 + 4 + 8 + 4 + 4 + 4;

using Bytes = std::vector<std::uint8_t>;

class ByteWriter {
 public:
  void magic(std::string_view m) { buf_.insert(buf_.end(), m.begin(), m.end()); }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

  const Bytes& bytes() const { return buf_; }
  void reserve(std::size_t n) { buf_.reserve(n); }

 private:
  Bytes buf_;
};

class ByteReader {
 public:
  explicit ByteReader(const Bytes& b) : buf_(b) {}

  std::size_t remaining() const { return buf_.size() - pos_; }

  std::string magic() {
    need(4, "magic");
    std::string m(buf_.begin() + pos_, buf_.begin() + pos_ + 4);
    pos_ += 4;
    return m;
  }
  std::uint8_t u8() {
    need(1, "u8");
    return buf_[pos_++];
  }
  std::uint32_t u32() {
    need(4, "u32 field");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8, "u64 field");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }

 private:
  void need(std::size_t n, const char* what) {
    if (remaining() < n)
      fail(ErrorKind::length, std::string("file ends inside header ") + what);
  }

  const Bytes& buf_;
  std::size_t pos_ = 0;
};

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open '" + path.string() + "' for reading");
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorKind::io, "read failure on '" + path.string() + "'");
  return data;
}

inline void write_file(const std::filesystem::path& path, const Bytes& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::io, "write failure on '" + path.string() + "'");
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  write_file(path, Bytes(text.begin(), text.end()));
}

inline std::string read_text_file(const std::filesystem::path& path) {
  const Bytes b = read_file(path);
  return std::string(b.begin(), b.end());
}

namespace detail {

inline std::string printable(const std::string& m) {
  std::string out = "\"";
  char hex[8];
  for (unsigned char c : m) {
    if (c >= 0x20 && c < 0x7f && c != '"' && c != '\\') {
      out.push_back(static_cast<char>(c));
    } else {
      std::snprintf(hex, sizeof hex, "\\x%02x", c);
      out += hex;
    }
  }
  return out + "\"";
}

inline void expect_magic(ByteReader& r, std::string_view want) {
  const std::string got = r.magic();
  if (got != want)
    fail(ErrorKind::format, "bad magic: expected \"" + std::string(want) + "\", found " +
                                printable(got));
}

inline void expect_version(ByteReader& r) {
  const auto v = r.u32();
  if (v != kVersion)
    fail(ErrorKind::format, "unsupported version " + std::to_string(v));
}

inline void expect_payload(const ByteReader& r, std::uint64_t expected) {
  if (r.remaining() != expected)
    fail(ErrorKind::length, "payload size mismatch: expected " + std::to_string(expected) +
                                " bytes, found " + std::to_string(r.remaining()));
}

}  // namespace detail

// ---- FMAT ------------------------------------------------------------------

inline Bytes encode_feature_matrix(const FeatureMatrix& mat) {
  require(mat.rows() >= 1 && mat.cols() >= 1, ErrorKind::validation,
          "feature matrix must have at least one row and one column");
  require(all_finite(mat.data), ErrorKind::validation, "feature matrix has non-finite entries");
  ByteWriter w;
  w.reserve(kFmatHeader + 4 * mat.rows() * mat.cols());
  w.magic("FMAT");
  w.u32(kVersion);
  w.u32(kDtypeF32);
  w.u64(mat.rows());
  w.u64(mat.cols());
  for (Eigen::Index i = 0; i < mat.data.rows(); ++i)
    for (Eigen::Index j = 0; j < mat.data.cols(); ++j)
      w.f32(static_cast<float>(mat.data(i, j)));
  return w.bytes();
}

inline FeatureMatrix decode_feature_matrix(const Bytes& bytes) {
  ByteReader r(bytes);
  detail::expect_magic(r, "FMAT");
  detail::expect_version(r);
  const auto dtype = r.u32();
  if (dtype != kDtypeF32) fail(ErrorKind::format, "unsupported dtype code " + std::to_string(dtype));
  const auto rows = r.u64();
  const auto cols = r.u64();
  if (rows == 0 || cols == 0) fail(ErrorKind::validation, "feature matrix has zero rows or columns");
  if (rows > (1ULL << 40) / cols) fail(ErrorKind::format, "implausible matrix dimensions");
  detail::expect_payload(r, rows * cols * 4);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const float v = r.f32();
      if (!std::isfinite(v))
        fail(ErrorKind::validation, "non-finite entry at row " + std::to_string(i) +
                                        ", column " + std::to_string(j));
      m(i, j) = v;
    }
  return FeatureMatrix(std::move(m));
}

inline void write_feature_matrix(const FeatureMatrix& mat, const std::filesystem::path& path) {
  write_file(path, encode_feature_matrix(mat));
}

inline FeatureMatrix read_feature_matrix(const std::filesystem::path& path) {
  FeatureMatrix m = decode_feature_matrix(read_file(path));
  m.source = path.filename().string();
  return m;
}

// ---- LBL1 ------------------------------------------------------------------

inline Bytes encode_labels(const LabelVector& labels) {
  validate_labels(labels);
  require(labels.classes <= 256, ErrorKind::validation, "K above 256 cannot be stored as u8");
  ByteWriter w;
  w.magic("LBL1");
  w.u32(kVersion);
  w.u32(labels.classes);
  w.u64(labels.size());
  for (auto v : labels.values) w.u8(v);
  return w.bytes();
}

inline LabelVector decode_labels(const Bytes& bytes) {
  ByteReader r(bytes);
  detail::expect_magic(r, "LBL1");
  detail::expect_version(r);
  const auto k = r.u32();
  if (k == 0 || k > 256) fail(ErrorKind::format, "class count " + std::to_string(k) + " outside [1, 256]");
  const auto count = r.u64();
  detail::expect_payload(r, count);
  LabelVector labels;
  labels.classes = k;
  labels.values.resize(count);
  for (auto& v : labels.values) v = r.u8();
  validate_labels(labels);
  return labels;
}

inline void write_labels(const LabelVector& labels, const std::filesystem::path& path) {
  write_file(path, encode_labels(labels));
}

inline LabelVector read_labels(const std::filesystem::path& path) {
  return decode_labels(read_file(path));
}

// ---- FMAP ------------------------------------------------------------------

inline Bytes encode_spatial_map(const SpatialFeatureMap& fmap) {
  const std::size_t n = static_cast<std::size_t>(fmap.images) * fmap.height * fmap.width * fmap.channels;
  require(fmap.data.size() == n, ErrorKind::dimension, "spatial map payload does not match its shape");
  ByteWriter w;
  w.reserve(kFmapHeader + 4 * n);
  w.magic("FMAP");
  w.u32(kVersion);
  w.u64(fmap.images);
  w.u32(fmap.height);
  w.u32(fmap.width);
  w.u32(fmap.channels);
  for (float v : fmap.data) {
    require(std::isfinite(v), ErrorKind::validation, "spatial map has non-finite entries");
    w.f32(v);
  }
  return w.bytes();
}

inline SpatialFeatureMap decode_spatial_map(const Bytes& bytes) {
  ByteReader r(bytes);
  detail::expect_magic(r, "FMAP");
  detail::expect_version(r);
  SpatialFeatureMap fmap;
  fmap.images = r.u64();
  fmap.height = r.u32();
  fmap.width = r.u32();
  fmap.channels = r.u32();
  const std::uint64_t cells = static_cast<std::uint64_t>(fmap.height) * fmap.width * fmap.channels;
  if (cells != 0 && fmap.images > (1ULL << 40) / cells)
    fail(ErrorKind::format, "implausible spatial map dimensions");
  const std::uint64_t n = fmap.images * cells;
  detail::expect_payload(r, n * 4);
  fmap.data.resize(n);
  for (auto& v : fmap.data) {
    v = r.f32();
    if (!std::isfinite(v)) fail(ErrorKind::validation, "spatial map has non-finite entries");
  }
  return fmap;
}

inline void write_spatial_map(const SpatialFeatureMap& fmap, const std::filesystem::path& path) {
  write_file(path, encode_spatial_map(fmap));
}

inline SpatialFeatureMap read_spatial_map(const std::filesystem::path& path) {
  return decode_spatial_map(read_file(path));
}

}  // namespace icx::io
