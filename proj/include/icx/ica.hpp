#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "icx/error.hpp"
#include "icx/pca.hpp"
#include "icx/rng.hpp"
#include "icx/types.hpp"

namespace icx {

enum class Contrast { logcosh, exp };

inline const char* to_string(Contrast c) { return c == Contrast::logcosh ? "logcosh" : "exp"; }

inline Contrast parse_contrast(const std::string& s) {
  if (s == "logcosh") return Contrast::logcosh;
  if (s == "exp") return Contrast::exp;
  fail(ErrorKind::parameter, "unknown contrast '" + s + "' (expected logcosh or exp)");
}

struct IcaConfig {
  std::size_t n_components = 3;
  Contrast contrast = Contrast::logcosh;
  double tol = 1e-4;
  std::size_t max_iter = 200;
  std::size_t restarts = 3;
  std::uint64_t seed = 0;
};

/// How component order and signs were fixed.
enum class Orientation { skew, class0 };

/// Fitted unmixing. `unmixing` and `mixing_pinv` are in raw FastICA order;
/// transform() applies `component_order` and `component_signs` afterwards,
/// so output component i is signs[i] * raw[order[i]].
struct IcModel {
  std::size_t n_components = 0;
  Vector center;                  // m
  Matrix whitening;               // n x m
  Matrix rotation;                // n x n, orthogonal
  Matrix unmixing;                // n x m, rotation * whitening
  Matrix mixing_pinv;             // m x n
  std::vector<std::size_t> component_order;
  std::vector<int> component_signs;
  Contrast contrast = Contrast::logcosh;
  bool converged = false;
  bool gaussian_warning = false;
  bool orientation_fallback = false;
  Orientation orientation = Orientation::skew;
  std::size_t iterations = 0;

  std::size_t input_dim() const { return static_cast<std::size_t>(center.size()); }

  /// n x m map from centered features to oriented components.
  Matrix oriented_unmixing() const {
    Matrix out(unmixing.rows(), unmixing.cols());
    for (std::size_t i = 0; i < n_components; ++i)
      out.row(i) = component_signs[i] * unmixing.row(component_order[i]);
    return out;
  }

  /// m x n map from oriented components back to centered features.
  Matrix oriented_mixing() const {
    Matrix out(mixing_pinv.rows(), mixing_pinv.cols());
    for (std::size_t i = 0; i < n_components; ++i)
      out.col(i) = component_signs[i] * mixing_pinv.col(component_order[i]);
    return out;
  }

  /// Rebuilds `unmixing` and `mixing_pinv` from `rotation` and `whitening`.
  void refresh_derived() {
    unmixing = rotation * whitening;
    const Eigen::MatrixXd gram = unmixing * unmixing.transpose();
    mixing_pinv = unmixing.transpose() * Matrix(gram.ldlt().solve(Eigen::MatrixXd::Identity(gram.rows(), gram.cols())));
  }
};

namespace detail {

inline double log_cosh(double u) {
  const double a = std::abs(u);
  return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
}

inline double contrast_value(Contrast c, double u) {
  return c == Contrast::logcosh ? log_cosh(u) : -std::exp(-0.5 * u * u);
}

/// E[G(v)] for standard normal v, by Simpson quadrature.
inline double gaussian_contrast_mean(Contrast c) {
  const int n = 8000;
  const double lo = -12.0, hi = 12.0, h = (hi - lo) / n;
  double m1 = 0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + i * h;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    m1 += w * std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi) * contrast_value(c, x);
  }
  return m1 * h / 3.0;
}

/// (W W^T)^{-1/2} W
inline Matrix symmetric_decorrelation(const Matrix& w) {
  const Eigen::MatrixXd gram = w * w.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  const Eigen::VectorXd inv_sqrt = es.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd root = es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();
  return root * w;
}

inline Matrix random_orthogonal(std::size_t n, Rng& rng) {
  Matrix w(n, n);
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.normal();
  return symmetric_decorrelation(w);
}

struct FixedPointResult {
  Matrix w;
  bool converged = false;
  std::size_t iterations = 0;
};

/// Symmetric fixed-point FastICA on whitened rows `z`.
inline FixedPointResult fastica_symmetric(const Matrix& z, Matrix w, const IcaConfig& cfg) {
  const double inv_n = 1.0 / static_cast<double>(z.rows());
  const Eigen::Index n = w.rows();
  FixedPointResult out;
  Matrix g(z.rows(), n);
  Vector gprime_mean(n);
  for (std::size_t it = 1; it <= cfg.max_iter; ++it) {
    const Matrix y = z * w.transpose();
    gprime_mean.setZero();
    for (Eigen::Index i = 0; i < y.rows(); ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        const double u = y(i, j);
        if (cfg.contrast == Contrast::logcosh) {
          const double t = std::tanh(u);
          g(i, j) = t;
          gprime_mean(j) += 1.0 - t * t;
        } else {
          const double e = std::exp(-0.5 * u * u);
          g(i, j) = u * e;
          gprime_mean(j) += (1.0 - u * u) * e;
        }
      }
    gprime_mean *= inv_n;
    Matrix w_new = (g.transpose() * z) * inv_n;
    w_new -= gprime_mean.asDiagonal() * w;
    w_new = symmetric_decorrelation(w_new);
    const Vector diag = (w_new * w.transpose()).diagonal();
    const double lim = (1.0 - diag.array().abs()).abs().maxCoeff();
    w = std::move(w_new);
    out.iterations = it;
    if (lim < cfg.tol) {
      out.converged = true;
      break;
    }
  }
  if (!w.allFinite()) fail(ErrorKind::divergence, "FastICA produced non-finite weights");
  out.w = std::move(w);
  return out;
}

inline double skewness(const Vector& x) {
  const double mu = x.mean();
  const Vector d = x.array() - mu;
  const double var = d.squaredNorm() / static_cast<double>(x.size());
  if (var <= 0) return 0.0;
  return d.array().cube().mean() / std::pow(var, 1.5);
}

}  // namespace detail

/// Approximate negentropy (E[G(y)] - E[G(v)])^2 of each column of `s`.
inline Vector negentropy(const Matrix& s, Contrast c) {
  const double ref = detail::gaussian_contrast_mean(c);
  Vector out(s.cols());
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    double acc = 0;
    for (Eigen::Index i = 0; i < s.rows(); ++i) acc += detail::contrast_value(c, s(i, j));
    const double d = acc / static_cast<double>(s.rows()) - ref;
    out(j) = d * d;
  }
  return out;
}

/// Jarque-Bera statistic N/6 (S^2 + K^2/4); chi-square with 2 degrees of
/// freedom for Gaussian samples.
inline double jarque_bera(const Vector& x) {
  const double mu = x.mean();
  const Vector d = x.array() - mu;
  const double var = d.squaredNorm() / static_cast<double>(x.size());
  if (var <= 0) return 0.0;
  const double skew = d.array().cube().mean() / std::pow(var, 1.5);
  const double kurt = d.array().square().square().mean() / (var * var) - 3.0;
  return static_cast<double>(x.size()) / 6.0 * (skew * skew + 0.25 * kurt * kurt);
}

/// Upper 1e-4 tail of chi-square(2): -2 ln 1e-4.
inline constexpr double kGaussianJbCritical = 18.420680743952367;

inline bool looks_gaussian(const Vector& component) { return jarque_bera(component) < kGaussianJbCritical; }

/// Raw (unoriented) components of `features`.
inline Matrix raw_components(const IcModel& model, const Matrix& features) {
  require(static_cast<std::size_t>(features.cols()) == model.input_dim(), ErrorKind::dimension,
          "feature dimension " + std::to_string(features.cols()) + " does not match model input " +
              std::to_string(model.input_dim()));
  return (features.rowwise() - model.center.transpose()) * model.unmixing.transpose();
}

inline Matrix transform(const IcModel& model, const Matrix& features) {
  require(static_cast<std::size_t>(features.cols()) == model.input_dim(), ErrorKind::dimension,
          "feature dimension " + std::to_string(features.cols()) + " does not match model input " +
              std::to_string(model.input_dim()));
  return (features.rowwise() - model.center.transpose()) * model.oriented_unmixing().transpose();
}

inline Vector transform(const IcModel& model, const Vector& feature) {
  return transform(model, Matrix(feature.transpose())).row(0).transpose();
}

/// Maps oriented components back to feature space (the component span).
inline Matrix inverse_transform(const IcModel& model, const Matrix& components) {
  require(static_cast<std::size_t>(components.cols()) == model.n_components, ErrorKind::dimension,
          "component dimension does not match model");
  return (components * model.oriented_mixing().transpose()).rowwise() + model.center.transpose();
}

namespace detail {

inline void orient_by_skew(IcModel& model, const Matrix& raw) {
  model.component_order.resize(model.n_components);
  std::iota(model.component_order.begin(), model.component_order.end(), std::size_t{0});
  model.component_signs.assign(model.n_components, 1);
  for (std::size_t j = 0; j < model.n_components; ++j)
    model.component_signs[j] = skewness(raw.col(static_cast<Eigen::Index>(j))) < 0 ? -1 : 1;
  model.orientation = Orientation::skew;
}

}  // namespace detail

/// Orients components so the class-0 mean of each is positive and orders
/// them by descending class-0 mean magnitude. Without class-0 samples the
/// model falls back to positive-skew orientation and is flagged.
inline IcModel normalize_components(IcModel model, const Matrix& features, const LabelVector& labels) {
  require(labels.size() == static_cast<std::size_t>(features.rows()), ErrorKind::dimension,
          "labels (" + std::to_string(labels.size()) + ") and features (" +
              std::to_string(features.rows()) + ") are not aligned");
  const Matrix raw = raw_components(model, features);
  Vector class0_mean = Vector::Zero(static_cast<Eigen::Index>(model.n_components));
  std::size_t count = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == 0) {
      class0_mean += raw.row(static_cast<Eigen::Index>(i)).transpose();
      ++count;
    }
  if (count == 0) {
    detail::orient_by_skew(model, raw);
    model.orientation_fallback = true;
    return model;
  }
  class0_mean /= static_cast<double>(count);
  std::vector<std::size_t> order(model.n_components);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(class0_mean(a)) > std::abs(class0_mean(b));
  });
  model.component_order = order;
  model.component_signs.resize(model.n_components);
  for (std::size_t i = 0; i < model.n_components; ++i)
    model.component_signs[i] = class0_mean(order[i]) < 0 ? -1 : 1;
  model.orientation = Orientation::class0;
  model.orientation_fallback = false;
  return model;
}

inline IcModel fit_ica(const Matrix& features, const IcaConfig& cfg) {
  require(cfg.n_components >= 1 && cfg.n_components <= static_cast<std::size_t>(features.cols()),
          ErrorKind::parameter,
          "n_components " + std::to_string(cfg.n_components) + " outside [1, " +
              std::to_string(features.cols()) + "]");
  require(cfg.tol > 0, ErrorKind::parameter, "tol must be positive");
  require(cfg.max_iter >= 1, ErrorKind::parameter, "max_iter must be at least 1");

  const PcaModel pca = fit_pca(features);
  const std::size_t rank = usable_rank(pca);
  require(cfg.n_components <= rank, ErrorKind::rank,
          "n_components " + std::to_string(cfg.n_components) + " exceeds numerical rank " +
              std::to_string(rank));

  IcModel model;
  model.n_components = cfg.n_components;
  model.contrast = cfg.contrast;
  model.center = pca.mean;
  model.whitening = whitening_matrix(pca, cfg.n_components);
  const Matrix z = (features.rowwise() - pca.mean.transpose()) * model.whitening.transpose();

  Rng rng(derive_seed(cfg.seed, streams::ica));
  detail::FixedPointResult best;
  double best_score = -1.0;
  std::size_t total_iterations = 0;
  for (std::size_t attempt = 0; attempt <= cfg.restarts; ++attempt) {
    auto run = detail::fastica_symmetric(z, detail::random_orthogonal(cfg.n_components, rng), cfg);
    total_iterations += run.iterations;
    if (run.converged) {
      best = std::move(run);
      break;
    }
    const double score = negentropy(z * run.w.transpose(), cfg.contrast).sum();
    if (score > best_score) {
      best_score = score;
      best = std::move(run);
    }
  }

  model.rotation = best.w;
  model.converged = best.converged;
  model.iterations = total_iterations;
  model.refresh_derived();

  const Matrix raw = z * model.rotation.transpose();
  bool all_gaussian = true;
  for (Eigen::Index c = 0; c < raw.cols(); ++c) all_gaussian = all_gaussian && looks_gaussian(raw.col(c));
  if (all_gaussian) {
    // Gaussian data has no preferred rotation; any fixed point is spurious.
    model.gaussian_warning = true;
    model.converged = false;
  }
  detail::orient_by_skew(model, raw);
  return model;
}

inline IcModel fit_ica(const Matrix& features, const IcaConfig& cfg, const LabelVector& labels) {
  return normalize_components(fit_ica(features, cfg), features, labels);
}

}  // namespace icx
