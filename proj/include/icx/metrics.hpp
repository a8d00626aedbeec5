#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "icx/error.hpp"
#include "icx/types.hpp"

namespace icx {

/// counts[true][predicted]
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::uint64_t> counts;

  explicit ConfusionMatrix(std::size_t k = 0) : classes(k), counts(k * k, 0) {}

  static ConfusionMatrix from_rows(const std::vector<std::vector<std::uint64_t>>& rows) {
    ConfusionMatrix c(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      require(rows[i].size() == rows.size(), ErrorKind::dimension, "confusion matrix must be square");
      for (std::size_t j = 0; j < rows.size(); ++j) c.at(i, j) = rows[i][j];
    }
    return c;
  }

  std::uint64_t& at(std::size_t t, std::size_t p) { return counts[t * classes + p]; }
  std::uint64_t at(std::size_t t, std::size_t p) const { return counts[t * classes + p]; }

  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (auto c : counts) s += c;
    return s;
  }
};

inline ConfusionMatrix confusion(const LabelVector& labels, const LabelVector& predictions) {
  require(labels.size() == predictions.size(), ErrorKind::dimension,
          "label and prediction lengths differ (" + std::to_string(labels.size()) + " vs " +
              std::to_string(predictions.size()) + ")");
  require(labels.classes == predictions.classes, ErrorKind::dimension,
          "label and prediction class counts differ");
  ConfusionMatrix c(labels.classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] < labels.classes && predictions[i] < labels.classes, ErrorKind::validation,
            "class index out of range at position " + std::to_string(i));
    ++c.at(labels[i], predictions[i]);
  }
  return c;
}

/// Quadratic weighted kappa with weights (i-j)^2/(K-1)^2. The (K-1)^2
/// normalization cancels in the ratio, so the value matches the
/// unnormalized form.
inline double qwk(const ConfusionMatrix& conf) {
  const std::size_t k = conf.classes;
  const auto total = static_cast<double>(conf.total());
  if (k < 2 || total <= 0)
    fail(ErrorKind::undefined_metric, "kappa undefined: need K >= 2 and at least one sample");
  std::vector<double> row(k, 0.0), col(k, 0.0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      row[i] += static_cast<double>(conf.at(i, j));
      col[j] += static_cast<double>(conf.at(i, j));
    }
  const double norm = static_cast<double>((k - 1) * (k - 1));
  double observed = 0, expected = 0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const double d = static_cast<double>(i) - static_cast<double>(j);
      const double w = d * d / norm;
      observed += w * static_cast<double>(conf.at(i, j)) / total;
      expected += w * (row[i] / total) * (col[j] / total);
    }
  if (expected <= 0)
    fail(ErrorKind::undefined_metric, "kappa undefined: expected disagreement is zero "
                                      "(both raters constant on the same class)");
  return 1.0 - observed / expected;
}

inline double accuracy(const ConfusionMatrix& conf) {
  const auto total = conf.total();
  if (total == 0) fail(ErrorKind::undefined_metric, "accuracy undefined on an empty confusion matrix");
  std::uint64_t diag = 0;
  for (std::size_t i = 0; i < conf.classes; ++i) diag += conf.at(i, i);
  return static_cast<double>(diag) / static_cast<double>(total);
}

}  // namespace icx
