#include <gtest/gtest.h>

#include <cmath>
#include <regex>

#include "icx/embed.hpp"
#include "test_support.hpp"

using namespace icx;
using icx::testing::random_matrix;

namespace {

struct Clusters {
  Matrix x;
  LabelVector y;
};

Clusters three_clusters(std::size_t per, std::uint64_t seed) {
  Rng rng(seed);
  Clusters c;
  c.x = random_matrix(static_cast<Eigen::Index>(3 * per), 10, rng);
  c.y.classes = 3;
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < per; ++i) {
      c.x(static_cast<Eigen::Index>(k * per + i), static_cast<Eigen::Index>(k)) += 12.0;
      c.y.values.push_back(static_cast<std::uint8_t>(k));
    }
  return c;
}

double entropy_of_row(const Matrix& p, Eigen::Index i) {
  double h = 0;
  for (Eigen::Index j = 0; j < p.cols(); ++j)
    if (j != i && p(i, j) > 0) h -= p(i, j) * std::log(p(i, j));
  return h;
}

std::size_t count_circles(const std::string& svg) {
  std::size_t n = 0, pos = 0;
  while ((pos = svg.find("<circle", pos)) != std::string::npos) {
    ++n;
    ++pos;
  }
  return n;
}

class TsneRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    data_ = new Clusters(three_clusters(100, 21));
    TsneConfig cfg;
    cfg.seed = 5;
    result_ = new TsneResult(run_tsne(data_->x, cfg));
  }
  static void TearDownTestSuite() {
    delete data_;
    delete result_;
  }
  static Clusters* data_;
  static TsneResult* result_;
};
Clusters* TsneRun::data_ = nullptr;
TsneResult* TsneRun::result_ = nullptr;

}  // namespace

TEST(Affinities, SimplexIsUniform) {
  const Matrix x = Matrix::Identity(12, 12) * 3.0;
  const Affinities a = pairwise_affinities(x, 3.0);
  const double want = 1.0 / (12.0 * 11.0);
  for (Eigen::Index i = 0; i < 12; ++i)
    for (Eigen::Index j = 0; j < 12; ++j) EXPECT_NEAR(a.joint(i, j), i == j ? 0.0 : want, 1e-15);
  // Equal distances cannot reach entropy log 3, so every row is flagged.
  EXPECT_EQ(a.floored_rows, 12u);
}

TEST(Affinities, RowEntropyHitsTarget) {
  Rng rng(1);
  const Matrix x = random_matrix(120, 5, rng);
  for (double perp : {5.0, 15.0, 30.0}) {
    const Affinities a = pairwise_affinities(x, perp);
    EXPECT_EQ(a.floored_rows, 0u);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      EXPECT_NEAR(entropy_of_row(a.conditional, i), std::log(perp), 1e-5);
      EXPECT_NEAR(a.conditional.row(i).sum(), 1.0, 1e-12);
    }
  }
}

TEST(Affinities, JointIsSymmetricAndNormalized) {
  Rng rng(2);
  const Affinities a = pairwise_affinities(random_matrix(60, 4, rng), 10.0);
  EXPECT_EQ((a.joint - a.joint.transpose()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_NEAR(a.joint.sum(), 1.0, 1e-12);
  EXPECT_GE(a.joint.minCoeff(), 0.0);
}

TEST(Affinities, RotationInvariance) {
  Rng rng(3);
  const Matrix x = random_matrix(50, 6, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(6, 6, rng));
  const Matrix q = qr.householderQ();
  const Affinities a = pairwise_affinities(x, 8.0), b = pairwise_affinities(Matrix(x * q), 8.0);
  EXPECT_LT((a.joint - b.joint).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Affinities, DuplicatePointsAreFloored) {
  Matrix x = Matrix::Zero(12, 2);
  x(11, 0) = 1.0;
  const Affinities a = pairwise_affinities(x, 3.0);
  EXPECT_GT(a.floored_rows, 0u);
  EXPECT_GE(a.joint.minCoeff(), 0.0);
  EXPECT_TRUE(a.joint.allFinite());
}

TEST(Affinities, ParameterErrors) {
  Rng rng(4);
  EXPECT_THROW(pairwise_affinities(random_matrix(9, 2, rng), 2.0), Error);
  EXPECT_THROW(pairwise_affinities(random_matrix(30, 2, rng), 10.0), Error);
  EXPECT_THROW(pairwise_affinities(random_matrix(30, 2, rng), 1.0), Error);
}

TEST_F(TsneRun, ClustersStaySeparated) {
  const Matrix& e = result_->embedding;
  double intra = 0, inter = 0;
  std::size_t n_intra = 0, n_inter = 0;
  for (Eigen::Index i = 0; i < e.rows(); ++i)
    for (Eigen::Index j = i + 1; j < e.rows(); ++j) {
      const double d = (e.row(i) - e.row(j)).norm();
      if (data_->y[static_cast<std::size_t>(i)] == data_->y[static_cast<std::size_t>(j)]) {
        intra += d;
        ++n_intra;
      } else {
        inter += d;
        ++n_inter;
      }
    }
  EXPECT_LT(intra / static_cast<double>(n_intra), inter / static_cast<double>(n_inter));
}

TEST_F(TsneRun, KlWindowMeansNonIncreasingAfterExaggeration) {
  const auto& kl = result_->kl_trace;
  ASSERT_EQ(kl.size(), 1000u);
  double prev = INFINITY;
  for (std::size_t start = 250; start + 50 <= kl.size(); start += 50) {
    double mean = 0;
    for (std::size_t i = start; i < start + 50; ++i) mean += kl[i];
    mean /= 50.0;
    EXPECT_LE(mean, prev + 1e-12) << "window at " << start;
    prev = mean;
  }
}

TEST_F(TsneRun, KlIsNonNegative) {
  for (double v : result_->kl_trace) EXPECT_GE(v, 0.0);
}

TEST_F(TsneRun, EmbeddingIsCentered) {
  EXPECT_LT(result_->embedding.colwise().mean().cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Tsne, SameSeedIsBitIdentical) {
  const Clusters c = three_clusters(10, 3);
  TsneConfig cfg;
  cfg.perplexity = 5;
  cfg.iterations = 300;
  cfg.seed = 9;
  const Matrix a = run_tsne(c.x, cfg).embedding, b = run_tsne(c.x, cfg).embedding;
  EXPECT_EQ(0, std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())));
  cfg.seed = 10;
  EXPECT_FALSE((run_tsne(c.x, cfg).embedding.array() == a.array()).all());
}

TEST(Tsne, TooFewIterationsRejected) {
  TsneConfig cfg;
  cfg.iterations = 100;
  cfg.perplexity = 3;
  Rng rng(5);
  EXPECT_THROW(run_tsne(random_matrix(20, 2, rng), cfg), Error);
}

TEST(Svg, EmptyEmbedding) {
  const std::string svg = embedding_svg(Matrix(0, 2), LabelVector());
  EXPECT_EQ(count_circles(svg), 0u);
  EXPECT_EQ(svg.rfind("</svg>\n"), svg.size() - 7);
}

TEST(Svg, CirclesInRowOrderWithPalette) {
  Matrix e(3, 2);
  e << 0, 0, 1, 0, 0, 1;
  const std::string svg = embedding_svg(e, LabelVector({2, 0, 4}, 5));
  EXPECT_EQ(count_circles(svg), 3u);
  const auto a = svg.find(kClassPalette[2]), b = svg.find(kClassPalette[0]), c = svg.find(kClassPalette[4]);
  ASSERT_NE(a, std::string::npos);
  EXPECT_LT(a, b);
  EXPECT_LT(b, c);
  EXPECT_NE(svg.find("<circle cx=\"20.000\" cy=\"580.000\""), std::string::npos);
  EXPECT_NE(svg.find("<circle cx=\"580.000\" cy=\"580.000\""), std::string::npos);
  EXPECT_NE(svg.find("<circle cx=\"20.000\" cy=\"20.000\""), std::string::npos);
}

TEST(Svg, Golden) {
  Matrix e(5, 2);
  e << -1.5, 0.25, 2, 1, 0.5, -3, 0, 0, 1.25, 2.5;
  EXPECT_TRUE(icx::testing::matches_golden("embedding.svg", embedding_svg(e, LabelVector({0, 1, 2, 3, 4}, 5))));
}

TEST(Svg, LabelMismatchRejected) {
  EXPECT_THROW(embedding_svg(Matrix::Zero(3, 2), LabelVector({0, 1}, 2)), Error);
}
