#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "icx/error.hpp"

namespace icx {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// N x m feature vectors, one sample per row.
struct FeatureMatrix {
  Matrix data;
  std::string source;

  FeatureMatrix() = default;
  explicit FeatureMatrix(Matrix m, std::string tag = {})
      : data(std::move(m)), source(std::move(tag)) {}

  std::size_t rows() const { return static_cast<std::size_t>(data.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(data.cols()); }
};

/// Ordinal class indices in [0, K).
struct LabelVector {
  std::vector<std::uint8_t> values;
  std::uint32_t classes = 2;

  LabelVector() = default;
  LabelVector(std::vector<std::uint8_t> v, std::uint32_t k)
      : values(std::move(v)), classes(k) {}

  std::size_t size() const { return values.size(); }
  std::uint8_t operator[](std::size_t i) const { return values[i]; }

  std::vector<std::size_t> counts() const {
    std::vector<std::size_t> c(classes, 0);
    for (auto v : values) ++c[v];
    return c;
  }
};

/// Pre-pooling feature tensor; images x H x W x C, channel-last.
struct SpatialFeatureMap {
  std::uint64_t images = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t channels = 0;
  std::vector<float> data;

  std::size_t index(std::uint64_t image, std::uint32_t y, std::uint32_t x,
                    std::uint32_t c = 0) const {
    return ((static_cast<std::size_t>(image) * height + y) * width + x) * channels + c;
  }

  /// H*W x C matrix of one image's cells, row = y*W + x.
  Matrix cells(std::uint64_t image) const {
    require(image < images, ErrorKind::parameter,
            "image index " + std::to_string(image) + " out of range (" +
                std::to_string(images) + " images)");
    const std::size_t hw = static_cast<std::size_t>(height) * width;
    Matrix out(hw, channels);
    const float* base = data.data() + index(image, 0, 0);
    for (std::size_t r = 0; r < hw; ++r)
      for (std::uint32_t c = 0; c < channels; ++c) out(r, c) = base[r * channels + c];
    return out;
  }

  /// Global average over (H, W) of one image.
  Vector pooled(std::uint64_t image) const {
    return cells(image).colwise().mean().transpose();
  }
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline void validate_labels(const LabelVector& labels) {
  require(labels.classes >= 2, ErrorKind::validation, "class count K must be >= 2");
  for (std::size_t i = 0; i < labels.size(); ++i)
    require(labels.values[i] < labels.classes, ErrorKind::validation,
            "label " + std::to_string(labels.values[i]) + " at position " +
                std::to_string(i) + " is not below K=" + std::to_string(labels.classes));
}

/// Rows of `m` selected by `idx`.
inline Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
  Matrix out(idx.size(), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(i) = m.row(idx[i]);
  return out;
}

}  // namespace icx
