#pragma once

// Per-component score decomposition and spatial score maps projected back
// to input space through the network's receptive field.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "icx/error.hpp"
#include "icx/ica.hpp"
#include "icx/io.hpp"
#include "icx/ordinal_head.hpp"
#include "icx/types.hpp"

namespace icx {

/// values(k, j) = B_kj * s_j; each row plus bias sums to the class score.
struct ContributionTable {
  Matrix values;  // K x n
  Vector bias;    // K
  Vector scores;  // K
};

inline ContributionTable component_contributions(const LinearHead& head, const Vector& s) {
  require(head.input_kind == InputKind::independent_components, ErrorKind::parameter,
          "contributions need a head over independent components");
  require(static_cast<std::size_t>(s.size()) == head.input_dim(), ErrorKind::dimension,
          "component vector has " + std::to_string(s.size()) + " entries, head expects " +
              std::to_string(head.input_dim()));
  ContributionTable t;
  t.values = head.weights * s.asDiagonal();
  t.bias = head.bias;
  t.scores = head.weights * s + head.bias;
  return t;
}

inline std::string contribution_table_text(const ContributionTable& t) {
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::string(buf);
  };
  std::string out = "class,bias";
  for (Eigen::Index j = 0; j < t.values.cols(); ++j) out += ",ic" + std::to_string(j);
  out += ",score\n";
  for (Eigen::Index k = 0; k < t.values.rows(); ++k) {
    out += std::to_string(k) + "," + num(t.bias(k));
    for (Eigen::Index j = 0; j < t.values.cols(); ++j) out += "," + num(t.values(k, j));
    out += "," + num(t.scores(k)) + "\n";
  }
  return out;
}

// ---- spatial component maps -------------------------------------------------

enum class SigmaMode { per_image, global };
enum class ThresholdMode { negative, symmetric };

inline SigmaMode parse_sigma_mode(const std::string& s) {
  if (s == "per-image" || s == "per_image") return SigmaMode::per_image;
  if (s == "global") return SigmaMode::global;
  fail(ErrorKind::parameter, "unknown sigma mode '" + s + "' (expected per-image or global)");
}

struct SpatialScoreMap {
  std::size_t component = 0;
  Matrix grid;  // H x W
  double sigma = 0.0;
  std::vector<std::uint8_t> mask;  // H*W, row-major
  ThresholdMode threshold = ThresholdMode::negative;

  Eigen::Index height() const { return grid.rows(); }
  Eigen::Index width() const { return grid.cols(); }
  bool masked(Eigen::Index y, Eigen::Index x) const {
    return mask[static_cast<std::size_t>(y * grid.cols() + x)] != 0;
  }
  std::size_t mask_count() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
  }
  /// Grid values inside the mask, zero elsewhere.
  Matrix thresholded() const {
    Matrix t = Matrix::Zero(grid.rows(), grid.cols());
    for (Eigen::Index y = 0; y < grid.rows(); ++y)
      for (Eigen::Index x = 0; x < grid.cols(); ++x)
        if (masked(y, x)) t(y, x) = grid(y, x);
    return t;
  }
};

inline void apply_threshold(SpatialScoreMap& map) {
  const auto cells = static_cast<std::size_t>(map.grid.size());
  map.mask.assign(cells, 0);
  // Zero spread means no cell can stand out; the mask is empty by definition.
  if (!(map.sigma > 0)) return;
  for (Eigen::Index y = 0; y < map.grid.rows(); ++y)
    for (Eigen::Index x = 0; x < map.grid.cols(); ++x) {
      const double v = map.grid(y, x);
      const bool hit = map.threshold == ThresholdMode::negative ? v < -2.0 * map.sigma
                                                                : std::abs(v) > 2.0 * map.sigma;
      map.mask[static_cast<std::size_t>(y * map.grid.cols() + x)] = hit ? 1 : 0;
    }
}

/// Component `component` evaluated at every cell of image `image`.
inline SpatialScoreMap spatial_ic_map(const IcModel& model, const SpatialFeatureMap& fmap, std::uint64_t image,
                                      std::size_t component, SigmaMode mode = SigmaMode::per_image,
                                      double global_sigma = 0.0,
                                      ThresholdMode threshold = ThresholdMode::negative) {
  require(component < model.n_components, ErrorKind::parameter,
          "component " + std::to_string(component) + " out of range (model has " +
              std::to_string(model.n_components) + ")");
  require(fmap.channels == model.input_dim(), ErrorKind::dimension,
          "spatial map has " + std::to_string(fmap.channels) + " channels, model expects " +
              std::to_string(model.input_dim()));
  const Matrix cells = fmap.cells(image);
  const Vector row = model.oriented_unmixing().row(static_cast<Eigen::Index>(component)).transpose();
  const Vector values = (cells.rowwise() - model.center.transpose()) * row;

  SpatialScoreMap map;
  map.component = component;
  map.threshold = threshold;
  map.grid.resize(fmap.height, fmap.width);
  for (std::uint32_t y = 0; y < fmap.height; ++y)
    for (std::uint32_t x = 0; x < fmap.width; ++x)
      map.grid(y, x) = values(static_cast<Eigen::Index>(y) * fmap.width + x);
  if (mode == SigmaMode::per_image) {
    const double mu = map.grid.mean();
    map.sigma = std::sqrt((map.grid.array() - mu).square().mean());
  } else {
    require(global_sigma >= 0, ErrorKind::parameter, "global sigma must be non-negative");
    map.sigma = global_sigma;
  }
  apply_threshold(map);
  return map;
}

/// Standard deviation of component `component` over every cell of every
/// image, for SigmaMode::global.
inline double population_sigma(const IcModel& model, const SpatialFeatureMap& fmap, std::size_t component) {
  double sum = 0, sq = 0;
  std::size_t count = 0;
  const Vector row = model.oriented_unmixing().row(static_cast<Eigen::Index>(component)).transpose();
  for (std::uint64_t img = 0; img < fmap.images; ++img) {
    const Vector v = (fmap.cells(img).rowwise() - model.center.transpose()) * row;
    sum += v.sum();
    sq += v.squaredNorm();
    count += static_cast<std::size_t>(v.size());
  }
  if (count == 0) return 0.0;
  const double mu = sum / static_cast<double>(count);
  return std::sqrt(std::max(0.0, sq / static_cast<double>(count) - mu * mu));
}

// ---- receptive fields -----------------------------------------------------------

struct LayerGeometry {
  std::uint32_t kernel = 1;
  std::uint32_t stride = 1;
  std::uint32_t padding = 0;
};

struct FieldAtLayer {
  std::int64_t size;   // receptive field side r
  std::int64_t jump;   // input pixels between adjacent cells
  std::int64_t start;  // first input pixel covered by cell 0 (may be negative)
  double center() const { return static_cast<double>(start) + static_cast<double>(size - 1) / 2.0; }
};

struct ReceptiveFieldSpec {
  std::vector<LayerGeometry> layers;
  std::vector<FieldAtLayer> fields;  // one per layer

  FieldAtLayer final_field() const {
    return fields.empty() ? FieldAtLayer{1, 1, 0} : fields.back();
  }
};

/// r_l = r_{l-1} + (k_l - 1) j_{l-1};  j_l = j_{l-1} s_l;  start_l = start_{l-1} - p_l j_{l-1}.
inline ReceptiveFieldSpec receptive_field(const std::vector<LayerGeometry>& layers) {
  ReceptiveFieldSpec spec;
  spec.layers = layers;
  FieldAtLayer f{1, 1, 0};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    require(l.kernel >= 1 && l.stride >= 1, ErrorKind::parameter,
            "layer " + std::to_string(i) + " needs positive kernel and stride");
    f.size += (static_cast<std::int64_t>(l.kernel) - 1) * f.jump;
    f.start -= static_cast<std::int64_t>(l.padding) * f.jump;
    f.jump *= l.stride;
    spec.fields.push_back(f);
  }
  return spec;
}

/// 1 + sum_l (k_l - 1) prod_{p<l} s_p
inline std::int64_t closed_form_field_size(const std::vector<LayerGeometry>& layers, std::size_t upto) {
  std::int64_t r = 1, prod = 1;
  for (std::size_t i = 0; i < upto && i < layers.size(); ++i) {
    r += (static_cast<std::int64_t>(layers[i].kernel) - 1) * prod;
    prod *= layers[i].stride;
  }
  return r;
}

/// Parses "k3s1p1,k3s1p1,k2s2": kernel, optional stride (default 1) and
/// padding (default 0) per comma-separated layer.
inline std::vector<LayerGeometry> parse_architecture(const std::string& text) {
  std::vector<LayerGeometry> layers;
  if (text.empty()) return layers;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string tok = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    LayerGeometry g;
    bool have_kernel = false;
    std::size_t i = 0;
    while (i < tok.size()) {
      const char key = tok[i++];
      std::size_t j = i;
      while (j < tok.size() && tok[j] >= '0' && tok[j] <= '9') ++j;
      if (j == i) fail(ErrorKind::parameter, "layer '" + tok + "': expected digits after '" + key + "'");
      const auto v = static_cast<std::uint32_t>(std::stoul(tok.substr(i, j - i)));
      switch (key) {
        case 'k': g.kernel = v; have_kernel = true; break;
        case 's': g.stride = v; break;
        case 'p': g.padding = v; break;
        default: fail(ErrorKind::parameter, "layer '" + tok + "': unknown field '" + key + "'");
      }
      i = j;
    }
    if (!have_kernel) fail(ErrorKind::parameter, "layer '" + tok + "' lacks a kernel size");
    layers.push_back(g);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return layers;
}

/// `blocks` repetitions of two 3x3/s1/p1 convolutions followed by a 2x2/s2
/// pool.
inline std::vector<LayerGeometry> conv_pool_blocks(std::size_t blocks) {
  std::vector<LayerGeometry> layers;
  for (std::size_t b = 0; b < blocks; ++b) {
    layers.push_back({3, 1, 1});
    layers.push_back({3, 1, 1});
    layers.push_back({2, 2, 0});
  }
  return layers;
}

/// The 640x640 reference backbone: seven conv blocks with pools between them,
/// a 2x2 convolution, then 4x4 average pooling.
inline std::vector<LayerGeometry> reference_backbone() {
  std::vector<LayerGeometry> layers;
  for (std::size_t b = 0; b < 7; ++b) {
    layers.push_back({3, 1, 1});
    layers.push_back({3, 1, 1});
    if (b + 1 < 7) layers.push_back({2, 2, 0});
  }
  layers.push_back({2, 1, 0});
  layers.push_back({4, 4, 0});
  return layers;
}

namespace detail {

inline void check_axis(std::int64_t cells, std::int64_t input, const FieldAtLayer& f, const char* axis) {
  const std::int64_t first_end = f.start + f.size;
  const std::int64_t last_begin = f.start + (cells - 1) * f.jump;
  if (input <= 0 || cells <= 0 || first_end <= 0 || f.start >= input || last_begin >= input ||
      last_begin + f.size <= 0)
    fail(ErrorKind::dimension, std::string("hidden grid ") + axis + " of " + std::to_string(cells) +
                                   " cells does not fit an input of " + std::to_string(input) +
                                   " pixels with jump " + std::to_string(f.jump) + " and start " +
                                   std::to_string(f.start));
}

}  // namespace detail

/// Spreads each masked cell's score uniformly over its receptive-field
/// rectangle (clipped to the input). Total mass is conserved.
inline Matrix project_to_input_raw(const SpatialScoreMap& map, const ReceptiveFieldSpec& rf,
                                   std::int64_t input_height, std::int64_t input_width) {
  const FieldAtLayer f = rf.final_field();
  detail::check_axis(map.height(), input_height, f, "height");
  detail::check_axis(map.width(), input_width, f, "width");
  Matrix out = Matrix::Zero(input_height, input_width);
  for (Eigen::Index y = 0; y < map.height(); ++y)
    for (Eigen::Index x = 0; x < map.width(); ++x) {
      if (!map.masked(y, x)) continue;
      const std::int64_t y0 = std::max<std::int64_t>(0, f.start + y * f.jump);
      const std::int64_t y1 = std::min<std::int64_t>(input_height, f.start + y * f.jump + f.size);
      const std::int64_t x0 = std::max<std::int64_t>(0, f.start + x * f.jump);
      const std::int64_t x1 = std::min<std::int64_t>(input_width, f.start + x * f.jump + f.size);
      const double share = map.grid(y, x) / static_cast<double>((y1 - y0) * (x1 - x0));
      out.block(y0, x0, y1 - y0, x1 - x0).array() += share;
    }
  return out;
}

/// project_to_input_raw scaled by its largest magnitude, so negative-mode
/// maps land in [-1, 0].
inline Matrix project_to_input(const SpatialScoreMap& map, const ReceptiveFieldSpec& rf,
                               std::int64_t input_height, std::int64_t input_width) {
  Matrix out = project_to_input_raw(map, rf, input_height, input_width);
  const double peak = out.cwiseAbs().maxCoeff();
  if (peak > 0) out /= peak;
  return out;
}

// ---- rendering ---------------------------------------------------------------

struct GrayImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> pixels;
};

inline std::uint8_t intensity(double v) {
  const double a = std::min(1.0, std::abs(v));
  return static_cast<std::uint8_t>(std::lround(255.0 * a));
}

/// P5 with maxval 255; pixel = round(255 |v|).
inline io::Bytes encode_pgm(const Matrix& map) {
  const std::string header = "P5\n" + std::to_string(map.cols()) + " " + std::to_string(map.rows()) + "\n255\n";
  io::Bytes out(header.begin(), header.end());
  for (Eigen::Index y = 0; y < map.rows(); ++y)
    for (Eigen::Index x = 0; x < map.cols(); ++x) out.push_back(intensity(map(y, x)));
  return out;
}

/// P6; red saturates where the map is active, green and blue carry the
/// background.
inline io::Bytes encode_ppm(const Matrix& map, const GrayImage& background) {
  require(background.width == map.cols() && background.height == map.rows(), ErrorKind::dimension,
          "background is " + std::to_string(background.width) + "x" + std::to_string(background.height) +
              ", map is " + std::to_string(map.cols()) + "x" + std::to_string(map.rows()));
  const std::string header = "P6\n" + std::to_string(map.cols()) + " " + std::to_string(map.rows()) + "\n255\n";
  io::Bytes out(header.begin(), header.end());
  for (Eigen::Index y = 0; y < map.rows(); ++y)
    for (Eigen::Index x = 0; x < map.cols(); ++x) {
      const std::uint8_t bg = background.pixels[static_cast<std::size_t>(y * map.cols() + x)];
      out.push_back(map(y, x) != 0.0 ? std::uint8_t{255} : bg);
      out.push_back(bg);
      out.push_back(bg);
    }
  return out;
}

inline void render_heatmap(const Matrix& map, const std::optional<GrayImage>& background,
                           const std::filesystem::path& path) {
  io::write_file(path, background ? encode_ppm(map, *background) : encode_pgm(map));
}

/// Reads a binary P5 image with maxval 255.
inline GrayImage read_pgm(const std::filesystem::path& path) {
  const io::Bytes b = io::read_file(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < b.size()) {
      if (b[pos] == '#') {
        while (pos < b.size() && b[pos] != '\n') ++pos;
      } else if (std::isspace(b[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string t;
    while (pos < b.size() && !std::isspace(b[pos])) t.push_back(static_cast<char>(b[pos++]));
    return t;
  };
  if (token() != "P5") fail(ErrorKind::format, "'" + path.string() + "' is not a binary PGM (P5)");
  GrayImage img;
  try {
    img.width = static_cast<std::uint32_t>(std::stoul(token()));
    img.height = static_cast<std::uint32_t>(std::stoul(token()));
    if (std::stoul(token()) != 255) fail(ErrorKind::format, "only maxval 255 PGM is supported");
  } catch (const std::logic_error&) {
    fail(ErrorKind::format, "malformed PGM header in '" + path.string() + "'");
  }
  ++pos;
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  if (b.size() - pos != n)
    fail(ErrorKind::length, "PGM payload: expected " + std::to_string(n) + " bytes, found " +
                                std::to_string(b.size() - pos));
  img.pixels.assign(b.begin() + static_cast<std::ptrdiff_t>(pos), b.end());
  return img;
}

}  // namespace icx
