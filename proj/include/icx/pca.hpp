#pragma once

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "icx/error.hpp"
#include "icx/types.hpp"

namespace icx {

/// Covariance eigendecomposition of centered features.
struct PcaModel {
  Vector mean;         // m
  Matrix components;   // m x m, columns are principal directions
  Vector eigenvalues;  // m, non-increasing, >= 0

  std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }
  double total_variance() const { return eigenvalues.sum(); }
};

inline constexpr double kWhitenRelativeEpsilon = 1e-10;

inline PcaModel fit_pca(const Matrix& features) {
  require(features.rows() >= 2, ErrorKind::parameter, "PCA needs at least 2 rows");
  require(features.cols() >= 1, ErrorKind::parameter, "PCA needs at least 1 column");
  require(all_finite(features), ErrorKind::validation, "PCA input has non-finite entries");

  PcaModel model;
  model.mean = features.colwise().mean().transpose();
  const Matrix centered = features.rowwise() - model.mean.transpose();
  const Eigen::MatrixXd cov =
      (centered.transpose() * centered) / static_cast<double>(features.rows() - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  require(solver.info() == Eigen::Success, ErrorKind::rank, "covariance eigendecomposition failed");

  const Eigen::Index m = cov.rows();
  std::vector<Eigen::Index> order(m);
  std::iota(order.begin(), order.end(), 0);
  const auto& ev = solver.eigenvalues();
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return ev(a) > ev(b); });

  model.components.resize(m, m);
  model.eigenvalues.resize(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    Vector col = solver.eigenvectors().col(order[k]);
    Eigen::Index arg = 0;
    col.cwiseAbs().maxCoeff(&arg);
    if (col(arg) < 0) col = -col;
    model.components.col(k) = col;
    model.eigenvalues(k) = std::max(ev(order[k]), 0.0);
  }
  return model;
}

inline PcaModel fit_pca(const FeatureMatrix& features) { return fit_pca(features.data); }

/// Minimal k whose cumulative eigenvalue fraction reaches each threshold.
inline std::vector<std::pair<double, std::size_t>> explained_variance_report(
    const PcaModel& model, const std::vector<double>& thresholds) {
  const double total = model.total_variance();
  std::vector<double> cumulative(model.eigenvalues.size());
  double acc = 0;
  for (Eigen::Index k = 0; k < model.eigenvalues.size(); ++k) {
    acc += model.eigenvalues(k);
    cumulative[k] = total > 0 ? acc / total : 1.0;
  }
  // Threshold 1.0 must land on the numerical rank, not on a trailing
  // eigenvalue that differs from zero only by roundoff.
  const double slack = 1e-12;
  std::vector<std::pair<double, std::size_t>> report;
  for (double t : thresholds) {
    require(t > 0.0 && t <= 1.0, ErrorKind::parameter,
            "variance threshold " + std::to_string(t) + " outside (0, 1]");
    std::size_t k = 0;
    while (k + 1 < cumulative.size() && cumulative[k] < t - slack) ++k;
    report.emplace_back(t, cumulative.empty() ? 0 : k + 1);
  }
  return report;
}

/// Largest k that whiten() accepts.
inline std::size_t usable_rank(const PcaModel& model,
                               double relative_eps = kWhitenRelativeEpsilon) {
  if (model.eigenvalues.size() == 0) return 0;
  const double floor = relative_eps * model.eigenvalues(0);
  std::size_t k = 0;
  while (k < static_cast<std::size_t>(model.eigenvalues.size()) && model.eigenvalues(k) > floor &&
         model.eigenvalues(k) > 0)
    ++k;
  return k;
}

/// k x m matrix mapping centered features onto the first k whitened
/// principal coordinates.
inline Matrix whitening_matrix(const PcaModel& model, std::size_t k,
                               double relative_eps = kWhitenRelativeEpsilon) {
  require(k >= 1 && k <= model.dim(), ErrorKind::parameter,
          "whitening dimension " + std::to_string(k) + " outside [1, " + std::to_string(model.dim()) + "]");
  const std::size_t usable = usable_rank(model, relative_eps);
  require(k <= usable, ErrorKind::rank,
          "cannot whiten to " + std::to_string(k) + " dimensions: eigenvalue " + std::to_string(k) +
              " is below the rank floor; at most " + std::to_string(usable) + " usable");
  const auto kk = static_cast<Eigen::Index>(k);
  Matrix w = model.components.leftCols(kk).transpose();
  for (Eigen::Index i = 0; i < kk; ++i) w.row(i) /= std::sqrt(model.eigenvalues(i));
  return w;
}

inline Matrix whiten(const Matrix& features, const PcaModel& model, std::size_t k,
                     double relative_eps = kWhitenRelativeEpsilon) {
  require(static_cast<std::size_t>(features.cols()) == model.dim(), ErrorKind::dimension,
          "feature dimension does not match the PCA model");
  const Matrix w = whitening_matrix(model, k, relative_eps);
  return (features.rowwise() - model.mean.transpose()) * w.transpose();
}

}  // namespace icx
