#pragma once

// Planted datasets with known sources, mixing, rank and labels.

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "icx/error.hpp"
#include "icx/model_text.hpp"
#include "icx/rng.hpp"
#include "icx/types.hpp"

namespace icx {

enum class Distribution { laplace, uniform, gaussian };

inline const char* to_string(Distribution d) {
  switch (d) {
    case Distribution::laplace: return "laplace";
    case Distribution::uniform: return "uniform";
    case Distribution::gaussian: return "gaussian";
  }
  return "?";
}

inline Distribution parse_distribution(const std::string& s) {
  if (s == "laplace") return Distribution::laplace;
  if (s == "uniform") return Distribution::uniform;
  if (s == "gaussian") return Distribution::gaussian;
  fail(ErrorKind::parameter, "unknown source distribution '" + s + "'");
}

struct SourceSpec {
  std::vector<Distribution> distributions;
  std::uint64_t seed = 0;

  std::size_t n_sources() const { return distributions.size(); }

  void validate() const {
    require(!distributions.empty(), ErrorKind::parameter, "source spec needs at least one source");
    const auto gaussians = std::count(distributions.begin(), distributions.end(), Distribution::gaussian);
    require(gaussians <= 1, ErrorKind::parameter,
            "at most one gaussian source is identifiable, got " + std::to_string(gaussians));
  }

  std::string describe() const {
    std::string s;
    for (std::size_t i = 0; i < distributions.size(); ++i) s += (i ? "," : "") + std::string(to_string(distributions[i]));
    return s;
  }
};

/// Parses "laplace,laplace,uniform".
inline std::vector<Distribution> parse_distributions(const std::string& list) {
  std::vector<Distribution> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const auto comma = list.find(',', start);
    out.push_back(parse_distribution(list.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

struct PlantOptions {
  double label_noise = 0.25;
  /// Mixing singular values are drawn uniformly from [1, max_singular].
  double max_singular = 3.0;
  double max_condition = 10.0;
  /// Align the mixing so the label direction has equal weight on every right
  /// singular vector. Dropping any principal direction of the source span
  /// then loses the same share of label signal.
  bool balanced_label_direction = true;
};

struct PlantedDataset {
  FeatureMatrix features;    // N x m
  LabelVector labels;
  Matrix true_sources;       // N x n
  Matrix mixing;             // m x n
  Vector label_direction;    // n
  double noise_sigma = 0.0;
  double label_noise = 0.0;
  SourceSpec spec;
  std::uint64_t seed = 0;
};

struct Bump {
  std::uint64_t image;
  std::uint32_t y;
  std::uint32_t x;
  std::uint32_t source;
};

struct SpatialOptions {
  /// Bump height in source units (sources have unit variance).
  double amplitude = 6.0;
  /// Standard deviation of zero-mean per-cell texture in source units.
  double texture = 0.0;
};

struct SpatialPlant {
  SpatialFeatureMap fmap;
  std::vector<Bump> bumps;
};

/// N x n sources, each column drawn from its distribution and standardized
/// to zero mean and unit variance.
inline Matrix gen_sources(const SourceSpec& spec, std::size_t n_samples) {
  spec.validate();
  require(n_samples >= 1, ErrorKind::parameter, "n_samples must be at least 1");
  Rng rng(derive_seed(spec.seed, streams::sources));
  const auto n = static_cast<Eigen::Index>(spec.n_sources());
  Matrix s(static_cast<Eigen::Index>(n_samples), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Distribution d = spec.distributions[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      switch (d) {
        case Distribution::laplace: s(i, j) = rng.laplace(); break;
        case Distribution::uniform: s(i, j) = rng.uniform(-1.0, 1.0); break;
        case Distribution::gaussian: s(i, j) = rng.normal(); break;
      }
    }
    const double mu = s.col(j).mean();
    s.col(j).array() -= mu;
    const double sd = std::sqrt(s.col(j).squaredNorm() / static_cast<double>(n_samples));
    if (sd > 0) s.col(j) /= sd;
  }
  return s;
}

inline double condition_number(const Matrix& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(sv.size() - 1) <= 0) return INFINITY;
  return sv(0) / sv(sv.size() - 1);
}

namespace detail {

inline Matrix gaussian_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

/// m x n matrix with orthonormal columns.
inline Matrix orthonormal_columns(Eigen::Index m, Eigen::Index n, Rng& rng) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(Eigen::MatrixXd(gaussian_matrix(m, n, rng)));
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m, n);
  return q;
}

/// Orthogonal R with R * v = ones / sqrt(n) for unit v.
inline Matrix balancing_reflection(const Vector& v) {
  const auto n = v.size();
  const Vector target = Vector::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  const Vector w = v - target;
  if (w.norm() < 1e-14) return Matrix::Identity(n, n);
  return Matrix(Matrix::Identity(n, n) - 2.0 * w * w.transpose() / w.squaredNorm());
}

}  // namespace detail

/// Equal-frequency quantization of `latent` into `k` ordinal bins (ties
/// broken by index).
inline LabelVector quantize_equal_frequency(const Vector& latent, std::uint32_t k) {
  const auto n = static_cast<std::size_t>(latent.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return latent(static_cast<Eigen::Index>(a)) < latent(static_cast<Eigen::Index>(b));
  });
  LabelVector labels;
  labels.classes = k;
  labels.values.resize(n);
  for (std::size_t r = 0; r < n; ++r)
    labels.values[order[r]] = static_cast<std::uint8_t>(r * k / n);
  return labels;
}

inline PlantedDataset plant_dataset(const SourceSpec& spec, std::size_t n_samples, std::size_t m,
                                    double noise_sigma, std::uint32_t classes, std::uint64_t seed,
                                    const PlantOptions& opt = {}) {
  spec.validate();
  const std::size_t n = spec.n_sources();
  require(m >= n, ErrorKind::parameter,
          "ambient dimension " + std::to_string(m) + " is below the source count " + std::to_string(n));
  require(classes >= 2 && classes <= 256, ErrorKind::parameter, "K must lie in [2, 256]");
  require(noise_sigma >= 0, ErrorKind::parameter, "noise_sigma must be non-negative");
  require(opt.max_singular >= 1.0, ErrorKind::parameter, "max_singular must be at least 1");

  PlantedDataset ds;
  ds.spec = spec;
  ds.seed = seed;
  ds.noise_sigma = noise_sigma;
  ds.label_noise = opt.label_noise;
  ds.true_sources = gen_sources(spec, n_samples);

  // Label direction: random signs, magnitudes bounded away from zero so every
  // source carries label information.
  Rng label_rng(derive_seed(seed, streams::labels));
  ds.label_direction.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index j = 0; j < ds.label_direction.size(); ++j) {
    const double mag = label_rng.uniform(0.5, 1.0);
    ds.label_direction(j) = label_rng.uniform() < 0.5 ? -mag : mag;
  }
  ds.label_direction.normalize();

  Rng mix_rng(derive_seed(seed, streams::mixing));
  const auto mi = static_cast<Eigen::Index>(m), ni = static_cast<Eigen::Index>(n);
  bool ok = false;
  for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
    const Matrix u = detail::orthonormal_columns(mi, ni, mix_rng);
    Vector sv(ni);
    for (Eigen::Index j = 0; j < ni; ++j) sv(j) = mix_rng.uniform(1.0, opt.max_singular);
    const Matrix r = opt.balanced_label_direction
                         ? detail::balancing_reflection(ds.label_direction)
                         : detail::orthonormal_columns(ni, ni, mix_rng);
    ds.mixing = u * sv.asDiagonal() * r;
    ok = condition_number(ds.mixing) <= opt.max_condition;
  }
  if (!ok) fail(ErrorKind::generation, "mixing matrix exceeded condition number cap 100 times");

  Matrix features = ds.true_sources * ds.mixing.transpose();
  if (noise_sigma > 0) {
    Rng noise_rng(derive_seed(seed, streams::noise));
    for (Eigen::Index i = 0; i < features.rows(); ++i)
      for (Eigen::Index j = 0; j < features.cols(); ++j) features(i, j) += noise_sigma * noise_rng.normal();
  }
  // Stored as f32 on disk; round here so in-memory and file copies agree.
  features = features.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
  ds.features = FeatureMatrix(std::move(features), "planted");

  Vector latent = ds.true_sources * ds.label_direction;
  for (Eigen::Index i = 0; i < latent.size(); ++i) latent(i) += opt.label_noise * label_rng.normal();
  ds.labels = quantize_equal_frequency(latent, classes);
  return ds;
}

/// Builds H x W maps whose spatial mean is each image's feature vector:
/// constant background at the pooled value plus source-aligned bumps
/// (re-centered so pooling is unchanged). A bump of source j pushes the
/// features along mixing column j in the direction that raises the label.
inline SpatialPlant plant_spatial(const PlantedDataset& ds, std::uint32_t height, std::uint32_t width,
                                  std::size_t bumps_per_image, std::uint64_t seed,
                                  const SpatialOptions& opt = {}) {
  require(height >= 1 && width >= 1, ErrorKind::parameter, "spatial grid must be at least 1x1");
  const std::size_t hw = static_cast<std::size_t>(height) * width;
  require(bumps_per_image <= hw, ErrorKind::parameter,
          "grid has " + std::to_string(hw) + " cells, fewer than the " + std::to_string(bumps_per_image) +
              " requested bumps");
  const Matrix& f = ds.features.data;
  const auto m = static_cast<std::uint32_t>(f.cols());
  const auto n = ds.mixing.cols();

  SpatialPlant out;
  SpatialFeatureMap& fmap = out.fmap;
  fmap.images = static_cast<std::uint64_t>(f.rows());
  fmap.height = height;
  fmap.width = width;
  fmap.channels = m;
  fmap.data.resize(static_cast<std::size_t>(fmap.images) * hw * m);

  Rng rng(derive_seed(seed, streams::spatial));
  std::vector<std::size_t> cells(hw);
  Matrix grid(static_cast<Eigen::Index>(hw), m);
  for (std::uint64_t img = 0; img < fmap.images; ++img) {
    grid.rowwise() = f.row(static_cast<Eigen::Index>(img));
    Matrix delta = Matrix::Zero(static_cast<Eigen::Index>(hw), m);
    if (opt.texture > 0) {
      for (std::size_t c = 0; c < hw; ++c) {
        Vector s(n);
        for (Eigen::Index j = 0; j < n; ++j) s(j) = opt.texture * rng.normal();
        delta.row(static_cast<Eigen::Index>(c)) += (ds.mixing * s).transpose();
      }
    }
    std::iota(cells.begin(), cells.end(), std::size_t{0});
    for (std::size_t b = 0; b < bumps_per_image; ++b) {
      const std::size_t pick = b + static_cast<std::size_t>(rng.below(hw - b));
      std::swap(cells[b], cells[pick]);
      const auto source = static_cast<std::uint32_t>(rng.below(static_cast<std::uint64_t>(n)));
      const double sign = ds.label_direction(source) < 0 ? -1.0 : 1.0;
      delta.row(static_cast<Eigen::Index>(cells[b])) += (opt.amplitude * sign) * ds.mixing.col(source).transpose();
      out.bumps.push_back({img, static_cast<std::uint32_t>(cells[b] / width),
                           static_cast<std::uint32_t>(cells[b] % width), source});
    }
    delta.rowwise() -= delta.colwise().mean();
    grid += delta;
    float* dst = fmap.data.data() + fmap.index(img, 0, 0);
    for (std::size_t c = 0; c < hw; ++c)
      for (std::uint32_t ch = 0; ch < m; ++ch)
        dst[c * m + ch] = static_cast<float>(grid(static_cast<Eigen::Index>(c), ch));
  }
  return out;
}

/// Amari performance index of a square matrix, normalized to [0, 1].
inline double amari_index(const Matrix& p) {
  require(p.rows() == p.cols() && p.rows() >= 1, ErrorKind::dimension,
          "Amari index needs a square matrix, got " + std::to_string(p.rows()) + "x" + std::to_string(p.cols()));
  const auto n = p.rows();
  if (n == 1) return 0.0;
  const Matrix a = p.cwiseAbs();
  double rows = 0, cols = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mx = a.row(i).maxCoeff();
    require(mx > 0, ErrorKind::dimension, "Amari index undefined for a zero row");
    rows += a.row(i).sum() / mx - 1.0;
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    const double mx = a.col(j).maxCoeff();
    require(mx > 0, ErrorKind::dimension, "Amari index undefined for a zero column");
    cols += a.col(j).sum() / mx - 1.0;
  }
  const auto nd = static_cast<double>(n);
  return (rows / (2.0 * nd) + cols / (2.0 * nd)) / (nd - 1.0);
}

/// Index of `unmixing` (n x m, acting on raw features) against the true
/// `mixing` (m x n).
inline double amari_index(const Matrix& unmixing, const Matrix& mixing) {
  require(unmixing.cols() == mixing.rows(), ErrorKind::dimension,
          "unmixing columns do not match mixing rows");
  return amari_index(Matrix(unmixing * mixing));
}

/// Text sidecar recording the generating parameters and planted bumps.
inline std::string ground_truth_text(const PlantedDataset& ds, const std::vector<Bump>& bumps = {}) {
  text::Document doc;
  auto& t = doc.section("truth");
  t.set("seed", static_cast<std::size_t>(ds.seed));
  t.set("source_seed", static_cast<std::size_t>(ds.spec.seed));
  t.set("distributions", ds.spec.describe());
  t.set("samples", ds.features.rows());
  t.set("ambient_dim", ds.features.cols());
  t.set("classes", static_cast<long long>(ds.labels.classes));
  t.set("noise_sigma", ds.noise_sigma);
  t.set("label_noise", ds.label_noise);
  t.set_matrix("mixing", ds.mixing);
  t.set_row("label_direction", ds.label_direction);
  auto& b = doc.section("bumps");
  Matrix m(static_cast<Eigen::Index>(bumps.size()), 4);
  for (std::size_t i = 0; i < bumps.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) << static_cast<double>(bumps[i].image), bumps[i].y, bumps[i].x, bumps[i].source;
  b.set_matrix("positions", m);
  return text::serialize(doc);
}

}  // namespace icx
