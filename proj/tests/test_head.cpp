#include <gtest/gtest.h>

#include "icx/ordinal_head.hpp"
#include "icx/serialize.hpp"
#include "test_support.hpp"

using namespace icx;
using icx::testing::random_matrix;

namespace {

struct Blobs {
  Matrix x;
  LabelVector y;
};

Blobs blobs(std::size_t per_class, std::uint32_t k, double spread, std::uint64_t seed) {
  Rng rng(seed);
  Blobs b;
  b.y.classes = k;
  b.x = random_matrix(static_cast<Eigen::Index>(per_class * k), 2, rng, spread);
  for (std::uint32_t c = 0; c < k; ++c)
    for (std::size_t i = 0; i < per_class; ++i) {
      const auto row = static_cast<Eigen::Index>(c * per_class + i);
      b.x(row, 0) += 4.0 * c;
      b.x(row, 1) -= 2.0 * c;
      b.y.values.push_back(static_cast<std::uint8_t>(c));
    }
  return b;
}

// First index of the maximum, by plain loop.
std::uint8_t argmax_oracle(const std::vector<double>& scores) {
  std::size_t best = 0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return static_cast<std::uint8_t>(best);
}

}  // namespace

TEST(Head, SeparableBlobsReachHighKappa) {
  const Blobs b = blobs(100, 4, 0.3, 1);
  const LinearHead h = fit_head(b.x, b.y, {});
  EXPECT_GE(evaluate(h, b.x, b.y), 0.99);
}

TEST(Head, ZeroInputsPredictMajorityClass) {
  LabelVector y({0, 1, 1, 1, 2, 2, 0, 1}, 3);
  const Matrix x = Matrix::Zero(8, 3);
  const LinearHead h = fit_head(x, y, {});
  const auto p = predict(h, x);
  for (auto v : p.classes.values) EXPECT_EQ(v, 1);
}

TEST(Head, LossIsNonIncreasing) {
  const Blobs b = blobs(60, 3, 1.5, 2);
  FitConfig cfg;
  cfg.learning_rate = 5.0;  // forces backtracking
  const HeadFit f = fit_head_traced(b.x, b.y, cfg);
  ASSERT_GE(f.loss_trace.size(), 2u);
  for (std::size_t i = 1; i < f.loss_trace.size(); ++i) EXPECT_LE(f.loss_trace[i], f.loss_trace[i - 1]);
}

TEST(Head, DeterministicAcrossRuns) {
  const Blobs b = blobs(50, 3, 1.0, 3);
  ModelBundle m1, m2;
  m1.head = fit_head(b.x, b.y, {});
  m2.head = fit_head(b.x, b.y, {});
  EXPECT_EQ(model_to_text(m1), model_to_text(m2));
}

TEST(Head, PredictMatchesArgmaxOracle) {
  Rng rng(4);
  LinearHead h;
  h.weights = random_matrix(5, 3, rng);
  h.bias = random_matrix(5, 1, rng).col(0);
  const Matrix x = random_matrix(200, 3, rng);
  const auto p = predict(h, x);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    std::vector<double> s(5);
    for (int k = 0; k < 5; ++k) s[k] = h.weights.row(k).dot(x.row(i)) + h.bias(k);
    EXPECT_EQ(p.classes[static_cast<std::size_t>(i)], argmax_oracle(s));
  }
}

TEST(Head, TiesGoToLowestIndex) {
  LinearHead h;
  h.weights = Matrix::Zero(3, 1);
  h.bias = Vector::Zero(3);
  h.bias << 1.0, 2.0, 2.0;
  EXPECT_EQ(predict(h, Matrix::Zero(1, 1)).classes[0], 1);
  h.bias << 0.0, 0.0, 0.0;
  EXPECT_EQ(predict(h, Matrix::Zero(1, 1)).classes[0], 0);
}

TEST(Head, PredictKnownScores) {
  LinearHead h;
  h.weights = Matrix(2, 2);
  h.weights << 1, 0, 0, 1;
  h.bias = Vector::Zero(2);
  Matrix x(2, 2);
  x << 3, 1, -1, 2;
  const auto p = predict(h, x);
  EXPECT_EQ(p.classes.values, (std::vector<std::uint8_t>{0, 1}));
  EXPECT_DOUBLE_EQ(p.scores(1, 1), 2.0);
}

TEST(Head, InputShiftDoesNotChangePredictions) {
  const Blobs b = blobs(40, 3, 1.2, 5);
  const Matrix shifted = b.x.array() + 250.0;
  const auto p1 = predict(fit_head(b.x, b.y, {}), b.x);
  const auto p2 = predict(fit_head(shifted, b.y, {}), shifted);
  EXPECT_EQ(p1.classes.values, p2.classes.values);
}

TEST(Head, AbsentClassIsFitError) {
  LabelVector y({0, 0, 2, 2}, 3);
  try {
    fit_head(Matrix::Ones(4, 2), y, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::fit);
    EXPECT_NE(std::string(e.what()).find("class 1"), std::string::npos);
  }
}

TEST(Head, ParameterAndShapeErrors) {
  const Blobs b = blobs(10, 2, 1.0, 6);
  FitConfig bad;
  bad.learning_rate = 0;
  EXPECT_THROW(fit_head(b.x, b.y, bad), Error);
  EXPECT_THROW(fit_head(b.x.topRows(5), b.y, {}), Error);
  const LinearHead h = fit_head(b.x, b.y, {});
  EXPECT_THROW(predict(h, Matrix::Zero(1, 3)), Error);
}

TEST(Head, RandomLabelsStayNearChance) {
  Rng rng(7);
  const Matrix x = random_matrix(2000, 4, rng);
  LabelVector y;
  y.classes = 5;
  for (int i = 0; i < 2000; ++i) y.values.push_back(static_cast<std::uint8_t>(rng.below(5)));
  const Matrix xv = random_matrix(2000, 4, rng);
  LabelVector yv;
  yv.classes = 5;
  for (int i = 0; i < 2000; ++i) yv.values.push_back(static_cast<std::uint8_t>(rng.below(5)));
  const LinearHead h = fit_head(x, y, {});
  const auto pred = predict(h, xv).classes;
  const auto c = confusion(yv, pred);
  double k = 0;
  try {
    k = qwk(c);
  } catch (const Error&) {
    k = 0;  // constant predictor
  }
  EXPECT_LT(std::abs(k), 0.1);
}
