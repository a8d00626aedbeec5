#include <gtest/gtest.h>

#include "icx/metrics.hpp"
#include "icx/rng.hpp"

using namespace icx;

namespace {

// Direct weighted-kappa formula with unnormalized weights (i-j)^2 on raw
// counts: kappa = 1 - sum w O / sum w E, E_ij = row_i col_j / total.
double brute_force_kappa(const std::vector<std::vector<double>>& c) {
  const std::size_t k = c.size();
  double total = 0;
  std::vector<double> row(k, 0), col(k, 0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      total += c[i][j];
      row[i] += c[i][j];
      col[j] += c[i][j];
    }
  double num = 0, den = 0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const double w = (double(i) - double(j)) * (double(i) - double(j));
      num += w * c[i][j];
      den += w * row[i] * col[j] / total;
    }
  return 1.0 - num / den;
}

std::vector<std::vector<double>> as_double(const ConfusionMatrix& c) {
  std::vector<std::vector<double>> out(c.classes, std::vector<double>(c.classes));
  for (std::size_t i = 0; i < c.classes; ++i)
    for (std::size_t j = 0; j < c.classes; ++j) out[i][j] = static_cast<double>(c.at(i, j));
  return out;
}

ConfusionMatrix random_confusion(std::size_t k, Rng& rng) {
  ConfusionMatrix c(k);
  for (auto& v : c.counts) v = rng.below(20);
  c.at(0, 0) += 1;
  c.at(k - 1, k - 1) += 1;
  return c;
}

}  // namespace

TEST(Confusion, IdentityCounts) {
  const auto c = confusion(LabelVector({0, 1}, 2), LabelVector({0, 1}, 2));
  EXPECT_EQ(c.at(0, 0), 1u);
  EXPECT_EQ(c.at(1, 1), 1u);
  EXPECT_EQ(c.at(0, 1), 0u);
  EXPECT_EQ(c.at(1, 0), 0u);
}

TEST(Confusion, OffDiagonal) {
  const auto c = confusion(LabelVector({0, 0}, 2), LabelVector({1, 1}, 2));
  EXPECT_EQ(c.at(0, 1), 2u);
  EXPECT_EQ(c.total(), 2u);
}

TEST(Confusion, RowSumsEqualClassFrequencies) {
  Rng rng(4);
  LabelVector t, p;
  t.classes = p.classes = 5;
  for (int i = 0; i < 1000; ++i) {
    t.values.push_back(static_cast<std::uint8_t>(rng.below(5)));
    p.values.push_back(static_cast<std::uint8_t>(rng.below(5)));
  }
  const auto c = confusion(t, p);
  const auto freq = t.counts();
  for (std::size_t i = 0; i < 5; ++i) {
    std::uint64_t s = 0;
    for (std::size_t j = 0; j < 5; ++j) s += c.at(i, j);
    EXPECT_EQ(s, freq[i]);
  }
}

TEST(Confusion, LengthMismatch) {
  EXPECT_THROW(confusion(LabelVector({0, 1}, 2), LabelVector({0}, 2)), Error);
}

TEST(Qwk, PerfectDiagonalIsOne) {
  EXPECT_DOUBLE_EQ(qwk(ConfusionMatrix::from_rows({{3, 0, 0}, {0, 2, 0}, {0, 0, 5}})), 1.0);
}

TEST(Qwk, IndependenceIsZero) {
  // O = outer product of marginals (1,2,1)/4 x (2,1,1)/4, scaled to counts.
  const auto c = ConfusionMatrix::from_rows({{2, 1, 1}, {4, 2, 2}, {2, 1, 1}});
  EXPECT_NEAR(qwk(c), 0.0, 1e-15);
}

TEST(Qwk, ThreeClassExampleMatchesBruteForce) {
  const auto c = ConfusionMatrix::from_rows({{2, 1, 0}, {0, 2, 1}, {0, 0, 4}});
  EXPECT_NEAR(qwk(c), brute_force_kappa(as_double(c)), 1e-12);
  // rows 3,3,4; cols 2,3,5; sum wO = 2; sum wE = (3*23 + 3*7 + 4*11) / 10 = 13.4
  EXPECT_NEAR(qwk(c), 1.0 - 2.0 / 13.4, 1e-12);
}

TEST(Qwk, ConstantEqualRatersAreUndefined) {
  try {
    qwk(ConfusionMatrix::from_rows({{5, 0}, {0, 0}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::undefined_metric);
  }
}

TEST(Qwk, ReversingClassOrderPreservesKappa) {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 2 + rng.below(6);
    const auto c = random_confusion(k, rng);
    ConfusionMatrix r(k);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) r.at(k - 1 - i, k - 1 - j) = c.at(i, j);
    EXPECT_NEAR(qwk(c), qwk(r), 1e-12);
  }
}

TEST(Qwk, CountScaleInvariance) {
  Rng rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 2 + rng.below(6);
    const auto c = random_confusion(k, rng);
    ConfusionMatrix s = c;
    const auto factor = 1 + rng.below(9);
    for (auto& v : s.counts) v *= factor;
    EXPECT_NEAR(qwk(c), qwk(s), 1e-12);
  }
}

TEST(Qwk, MovingMassTowardDiagonalNeverLowersKappa) {
  // Keeps the column marginals fixed by moving one prediction within a row,
  // only when the move lowers the expected term nowhere (single unit move).
  Rng rng(12);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 3 + rng.below(4);
    auto c = random_confusion(k, rng);
    const std::size_t i = rng.below(k);
    std::size_t j = rng.below(k);
    if (j == i || c.at(i, j) == 0) continue;
    const std::size_t closer = j > i ? j - 1 : j + 1;
    // Pair the move with an opposite move in another row so the column
    // marginals (and with them the expected disagreement) stay fixed.
    std::size_t other = k;
    for (std::size_t r = 0; r < k; ++r)
      if (r != i && c.at(r, closer) > 0) {
        const auto d_before = (double(r) - double(closer)) * (double(r) - double(closer));
        const auto d_after = (double(r) - double(j)) * (double(r) - double(j));
        const auto gain = (double(i) - double(j)) * (double(i) - double(j)) -
                          (double(i) - double(closer)) * (double(i) - double(closer));
        if (d_after - d_before <= gain) {
          other = r;
          break;
        }
      }
    if (other == k) continue;
    const double before = qwk(c);
    --c.at(i, j);
    ++c.at(i, closer);
    --c.at(other, closer);
    ++c.at(other, j);
    EXPECT_GE(qwk(c) + 1e-12, before);
    ++checked;
  }
  EXPECT_GT(checked, 20);
}

TEST(Qwk, RandomMatricesMatchBruteForce) {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = random_confusion(2 + rng.below(6), rng);
    EXPECT_NEAR(qwk(c), brute_force_kappa(as_double(c)), 1e-12);
  }
}

TEST(Accuracy, Basics) {
  EXPECT_DOUBLE_EQ(accuracy(ConfusionMatrix::from_rows({{3, 0}, {0, 4}})), 1.0);
  EXPECT_DOUBLE_EQ(accuracy(ConfusionMatrix::from_rows({{0, 3}, {4, 0}})), 0.0);
  EXPECT_DOUBLE_EQ(accuracy(ConfusionMatrix::from_rows({{1, 1}, {1, 1}})), 0.5);
}
