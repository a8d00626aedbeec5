#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "icx/error.hpp"
#include "icx/metrics.hpp"
#include "icx/types.hpp"

namespace icx {

enum class InputKind { features, independent_components };

inline const char* to_string(InputKind k) {
  return k == InputKind::features ? "features" : "independent_components";
}

inline InputKind parse_input_kind(const std::string& s) {
  if (s == "features") return InputKind::features;
  if (s == "independent_components") return InputKind::independent_components;
  fail(ErrorKind::format, "unknown head input kind '" + s + "'");
}

/// Class scores = weights * x + bias.
struct LinearHead {
  Matrix weights;  // K x d
  Vector bias;     // K
  InputKind input_kind = InputKind::features;

  std::size_t classes() const { return static_cast<std::size_t>(weights.rows()); }
  std::size_t input_dim() const { return static_cast<std::size_t>(weights.cols()); }
};

struct FitConfig {
  double l2 = 1e-4;
  double learning_rate = 0.1;
  std::size_t epochs = 500;
  std::uint64_t seed = 0;
  bool standardize = true;
};

struct HeadFit {
  LinearHead head;
  std::vector<double> loss_trace;  // loss at the start of each epoch, plus the final loss
};

struct Prediction {
  Matrix scores;  // N x K
  LabelVector classes;
};

namespace detail {

/// Mean softmax cross-entropy plus (l2/2)|W|^2; fills `residual` with
/// softmax - onehot when given.
inline double softmax_loss(const Matrix& x, const std::vector<std::uint8_t>& y, const Matrix& w,
                           const Vector& b, double l2, Matrix* residual) {
  Matrix scores = x * w.transpose();
  scores.rowwise() += b.transpose();
  double loss = 0;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const double mx = scores.row(i).maxCoeff();
    double z = 0;
    for (Eigen::Index k = 0; k < scores.cols(); ++k) z += std::exp(scores(i, k) - mx);
    const double log_z = mx + std::log(z);
    loss += log_z - scores(i, y[i]);
    if (residual) {
      for (Eigen::Index k = 0; k < scores.cols(); ++k) (*residual)(i, k) = std::exp(scores(i, k) - log_z);
      (*residual)(i, y[i]) -= 1.0;
    }
  }
  return loss / static_cast<double>(x.rows()) + 0.5 * l2 * w.squaredNorm();
}

}  // namespace detail

/// Multinomial logistic regression by full-batch gradient descent. The step
/// is halved (and stays halved) whenever an epoch would increase the loss,
/// so the loss trace is non-increasing.
inline HeadFit fit_head_traced(const Matrix& inputs, const LabelVector& labels, const FitConfig& cfg,
                               InputKind kind = InputKind::features) {
  const auto n = static_cast<std::size_t>(inputs.rows());
  const std::size_t k = labels.classes;
  require(labels.size() == n, ErrorKind::dimension,
          "labels (" + std::to_string(labels.size()) + ") and inputs (" + std::to_string(n) +
              ") are not aligned");
  require(k >= 2, ErrorKind::parameter, "need K >= 2 classes");
  require(n >= k, ErrorKind::parameter, "need at least K samples");
  require(cfg.l2 >= 0, ErrorKind::parameter, "l2 must be non-negative");
  require(cfg.epochs >= 1, ErrorKind::parameter, "epochs must be at least 1");
  require(cfg.learning_rate > 0, ErrorKind::parameter, "learning rate must be positive");
  require(all_finite(inputs), ErrorKind::validation, "head inputs have non-finite entries");
  validate_labels(labels);
  const auto counts = labels.counts();
  for (std::size_t c = 0; c < k; ++c)
    require(counts[c] > 0, ErrorKind::fit, "class " + std::to_string(c) + " is absent from the training labels");

  const Eigen::Index d = inputs.cols();
  Vector mean = Vector::Zero(d), scale = Vector::Ones(d);
  if (cfg.standardize) {
    mean = inputs.colwise().mean().transpose();
    for (Eigen::Index j = 0; j < d; ++j) {
      const double var = (inputs.col(j).array() - mean(j)).square().sum() / static_cast<double>(n);
      scale(j) = var > 0 ? std::sqrt(var) : 1.0;
    }
  }
  Matrix x = inputs.rowwise() - mean.transpose();
  for (Eigen::Index j = 0; j < d; ++j) x.col(j) /= scale(j);

  Matrix w = Matrix::Zero(static_cast<Eigen::Index>(k), d);
  Vector b = Vector::Zero(static_cast<Eigen::Index>(k));
  Matrix residual(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  const double inv_n = 1.0 / static_cast<double>(n);

  HeadFit out;
  double step = cfg.learning_rate;
  double loss = detail::softmax_loss(x, labels.values, w, b, cfg.l2, &residual);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (!std::isfinite(loss))
      fail(ErrorKind::divergence, "non-finite training loss at epoch " + std::to_string(epoch));
    out.loss_trace.push_back(loss);
    const Matrix grad_w = residual.transpose() * x * inv_n + cfg.l2 * w;
    const Vector grad_b = residual.colwise().sum().transpose() * inv_n;
    bool moved = false;
    for (int halvings = 0; halvings < 60; ++halvings) {
      const Matrix w_try = w - step * grad_w;
      const Vector b_try = b - step * grad_b;
      Matrix res_try(residual.rows(), residual.cols());
      const double loss_try = detail::softmax_loss(x, labels.values, w_try, b_try, cfg.l2, &res_try);
      if (!std::isfinite(loss_try) || loss_try > loss) {
        step *= 0.5;
        continue;
      }
      w = w_try;
      b = b_try;
      residual = std::move(res_try);
      loss = loss_try;
      moved = true;
      break;
    }
    if (!moved) break;
  }
  if (!std::isfinite(loss)) fail(ErrorKind::divergence, "non-finite training loss");
  out.loss_trace.push_back(loss);

  // Fold the standardization into the weights so the head applies to raw inputs.
  LinearHead& head = out.head;
  head.input_kind = kind;
  head.weights = w;
  for (Eigen::Index j = 0; j < d; ++j) head.weights.col(j) /= scale(j);
  head.bias = b - head.weights * mean;
  return out;
}

inline LinearHead fit_head(const Matrix& inputs, const LabelVector& labels, const FitConfig& cfg,
                           InputKind kind = InputKind::features) {
  return fit_head_traced(inputs, labels, cfg, kind).head;
}

inline Prediction predict(const LinearHead& head, const Matrix& inputs) {
  require(static_cast<std::size_t>(inputs.cols()) == head.input_dim(), ErrorKind::dimension,
          "input dimension " + std::to_string(inputs.cols()) + " does not match head dimension " +
              std::to_string(head.input_dim()));
  Prediction p;
  p.scores = inputs * head.weights.transpose();
  p.scores.rowwise() += head.bias.transpose();
  p.classes.classes = static_cast<std::uint32_t>(head.classes());
  p.classes.values.resize(static_cast<std::size_t>(inputs.rows()));
  for (Eigen::Index i = 0; i < p.scores.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < p.scores.cols(); ++k)
      if (p.scores(i, k) > p.scores(i, best)) best = k;
    p.classes.values[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(best);
  }
  return p;
}

inline double evaluate(const LinearHead& head, const Matrix& inputs, const LabelVector& labels) {
  return qwk(confusion(labels, predict(head, inputs).classes));
}

}  // namespace icx
