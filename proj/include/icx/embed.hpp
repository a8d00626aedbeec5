#pragma once

// Exact t-SNE (O(N^2) affinities and gradients) and an SVG scatter writer.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "icx/error.hpp"
#include "icx/io.hpp"
#include "icx/rng.hpp"
#include "icx/types.hpp"

namespace icx {

struct TsneConfig {
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  double exaggeration = 12.0;
  std::size_t exaggeration_iterations = 250;
  double learning_rate = 200.0;
  double momentum_early = 0.5;
  double momentum_late = 0.8;
  std::size_t momentum_switch = 250;
  std::uint64_t seed = 0;
};

struct Affinities {
  Matrix joint;        // symmetric, sums to 1
  Matrix conditional;  // row i holds P(j|i)
  std::vector<double> row_entropy;
  std::size_t floored_rows = 0;
};

struct TsneResult {
  Matrix embedding;  // N x 2
  std::vector<double> kl_trace;
};

inline constexpr double kEntropyTolerance = 1e-5;
inline constexpr int kMaxBisectionSteps = 50;

namespace detail {

inline Matrix squared_distances(const Matrix& x) {
  const Eigen::Index n = x.rows();
  Matrix d = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = (x.row(i) - x.row(j)).squaredNorm();
      d(i, j) = v;
      d(j, i) = v;
    }
  return d;
}

/// Conditional row for precision `beta` over shifted distances; returns the
/// entropy in nats.
inline double conditional_row(const std::vector<double>& shifted, double beta, std::vector<double>& p) {
  double z = 0, weighted = 0;
  for (std::size_t j = 0; j < shifted.size(); ++j) {
    p[j] = std::exp(-beta * shifted[j]);
    z += p[j];
    weighted += p[j] * shifted[j];
  }
  for (auto& v : p) v /= z;
  return std::log(z) + beta * weighted / z;
}

}  // namespace detail

/// Row-wise bandwidth search so each conditional distribution has entropy
/// log(perplexity), then P = (P_cond + P_cond^T) / (2N).
inline Affinities pairwise_affinities(const Matrix& data, double perplexity) {
  const Eigen::Index n = data.rows();
  require(n >= 10, ErrorKind::parameter, "t-SNE needs at least 10 points");
  require(perplexity > 1.0 && perplexity < static_cast<double>(n) / 3.0, ErrorKind::parameter,
          "perplexity " + std::to_string(perplexity) + " must lie in (1, N/3)");
  require(all_finite(data), ErrorKind::validation, "t-SNE input has non-finite entries");

  const Matrix d = detail::squared_distances(data);
  const double target = std::log(perplexity);
  Affinities a;
  a.conditional = Matrix::Zero(n, n);
  a.row_entropy.resize(static_cast<std::size_t>(n));

  std::vector<double> shifted(static_cast<std::size_t>(n - 1)), p(shifted.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    double lo_d = INFINITY, sum_d = 0;
    for (Eigen::Index j = 0, k = 0; j < n; ++j) {
      if (j == i) continue;
      shifted[static_cast<std::size_t>(k++)] = d(i, j);
      lo_d = std::min(lo_d, d(i, j));
    }
    for (auto& v : shifted) {
      v -= lo_d;
      sum_d += v;
    }
    // Search log(beta) on distances scaled to unit mean spread.
    const double scale = sum_d > 0 ? static_cast<double>(shifted.size()) / sum_d : 1.0;
    double lo = -40.0, hi = 40.0, entropy = 0;
    for (int step = 0; step < kMaxBisectionSteps; ++step) {
      const double mid = 0.5 * (lo + hi);
      entropy = detail::conditional_row(shifted, scale * std::exp(mid), p);
      if (std::abs(entropy - target) < 0.1 * kEntropyTolerance) break;
      if (entropy > target) lo = mid;
      else hi = mid;
    }
    if (std::abs(entropy - target) >= kEntropyTolerance) {
      // Collapsed row (duplicates or degenerate spread): floor and renormalize.
      double z = 0;
      for (auto& v : p) z += (v = std::max(v, 1e-12));
      for (auto& v : p) v /= z;
      ++a.floored_rows;
      entropy = 0;
      for (double v : p) entropy -= v * std::log(v);
    }
    a.row_entropy[static_cast<std::size_t>(i)] = entropy;
    for (Eigen::Index j = 0, k = 0; j < n; ++j) {
      if (j == i) continue;
      a.conditional(i, j) = p[static_cast<std::size_t>(k++)];
    }
  }
  a.joint = (a.conditional + a.conditional.transpose()) / (2.0 * static_cast<double>(n));
  return a;
}

inline TsneResult run_tsne(const Matrix& data, const TsneConfig& cfg) {
  require(cfg.iterations >= 250, ErrorKind::parameter, "t-SNE needs at least 250 iterations");
  const Affinities aff = pairwise_affinities(data, cfg.perplexity);
  const Matrix& p = aff.joint;
  const Eigen::Index n = data.rows();

  Rng rng(derive_seed(cfg.seed, streams::tsne));
  Matrix y(n, 2);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index c = 0; c < 2; ++c) y(i, c) = 1e-2 * rng.normal();
  y.rowwise() -= y.colwise().mean();

  Matrix update = Matrix::Zero(n, 2), gains = Matrix::Ones(n, 2), grad(n, 2), num(n, n);
  TsneResult out;
  out.kl_trace.reserve(cfg.iterations);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const double exag = it < cfg.exaggeration_iterations ? cfg.exaggeration : 1.0;
    const double momentum = it < cfg.momentum_switch ? cfg.momentum_early : cfg.momentum_late;

    double z = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      num(i, i) = 0;
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double v = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
        num(i, j) = v;
        num(j, i) = v;
        z += 2.0 * v;
      }
    }
    double kl = 0;
    grad.setZero();
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;
        const double q = num(i, j) / z;
        const double pij = p(i, j);
        if (pij > 0) kl += pij * std::log(pij / std::max(q, 1e-300));
        grad.row(i) += (4.0 * (exag * pij - q) * num(i, j)) * (y.row(i) - y.row(j));
      }
    if (!grad.allFinite() || !std::isfinite(kl))
      fail(ErrorKind::divergence, "non-finite t-SNE gradient at iteration " + std::to_string(it));
    out.kl_trace.push_back(kl);

    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index c = 0; c < 2; ++c) {
        const bool same = (grad(i, c) > 0) == (update(i, c) > 0);
        gains(i, c) = std::max(0.01, same ? gains(i, c) * 0.8 : gains(i, c) + 0.2);
        update(i, c) = momentum * update(i, c) - cfg.learning_rate * gains(i, c) * grad(i, c);
      }
    y += update;
    y.rowwise() -= y.colwise().mean();
  }
  out.embedding = std::move(y);
  return out;
}

inline constexpr const char* kClassPalette[5] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e"};

/// 600x600 scatter, one circle per row in row order, colored by class
/// (palette index = class mod 5).
inline std::string embedding_svg(const Matrix& embedding, const LabelVector& labels) {
  require(labels.size() == 0 || labels.size() == static_cast<std::size_t>(embedding.rows()),
          ErrorKind::dimension, "labels do not match embedding rows");
  const double size = 600.0, margin = 20.0;
  std::string out =
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"600\" viewBox=\"0 0 600 600\">\n"
      "<rect width=\"600\" height=\"600\" fill=\"#ffffff\"/>\n";
  if (embedding.rows() > 0) {
    const double x0 = embedding.col(0).minCoeff(), x1 = embedding.col(0).maxCoeff();
    const double y0 = embedding.col(1).minCoeff(), y1 = embedding.col(1).maxCoeff();
    const double span = std::max({x1 - x0, y1 - y0, 1e-12});
    const double s = (size - 2 * margin) / span;
    char buf[160];
    for (Eigen::Index i = 0; i < embedding.rows(); ++i) {
      const std::size_t cls = labels.size() ? labels[static_cast<std::size_t>(i)] : 0;
      std::snprintf(buf, sizeof buf, "<circle cx=\"%.3f\" cy=\"%.3f\" r=\"3\" fill=\"%s\"/>\n",
                    margin + (embedding(i, 0) - x0) * s, size - margin - (embedding(i, 1) - y0) * s,
                    kClassPalette[cls % 5]);
      out += buf;
    }
  }
  return out + "</svg>\n";
}

inline void embedding_to_svg(const Matrix& embedding, const LabelVector& labels,
                             const std::filesystem::path& path) {
  io::write_text_file(path, embedding_svg(embedding, labels));
}

}  // namespace icx
