#include <gtest/gtest.h>

#include "icx/scoremap.hpp"
#include "icx/synthetic.hpp"
#include "test_support.hpp"

using namespace icx;
using icx::testing::random_matrix;

namespace {

LinearHead random_ic_head(std::size_t k, std::size_t n, Rng& rng) {
  LinearHead h;
  h.weights = random_matrix(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n), rng, 10.0);
  h.bias = random_matrix(static_cast<Eigen::Index>(k), 1, rng, 10.0).col(0);
  h.input_kind = InputKind::independent_components;
  return h;
}

SpatialScoreMap map_from(const Matrix& grid, std::initializer_list<std::pair<int, int>> masked) {
  SpatialScoreMap m;
  m.grid = grid;
  m.mask.assign(static_cast<std::size_t>(grid.size()), 0);
  for (auto [y, x] : masked) m.mask[static_cast<std::size_t>(y * grid.cols() + x)] = 1;
  return m;
}

std::string as_string(const io::Bytes& b) { return std::string(b.begin(), b.end()); }

struct Planted {
  PlantedDataset ds;
  SpatialPlant sp;
  IcModel model;
};

Planted planted(std::uint64_t seed, std::size_t images) {
  Planted p;
  p.ds = plant_dataset({parse_distributions("laplace,laplace,uniform"), seed}, 4000, 16, 0.05, 5, seed);
  IcaConfig cfg;
  cfg.n_components = 3;
  cfg.seed = seed;
  p.model = fit_ica(p.ds.features.data, cfg, p.ds.labels);
  PlantedDataset head = p.ds;
  head.features.data = p.ds.features.data.topRows(static_cast<Eigen::Index>(images));
  p.sp = plant_spatial(head, 8, 8, 1, seed);
  return p;
}

// Oriented component that best matches true source j.
std::size_t component_for_source(const IcModel& m, const Matrix& mixing, std::size_t j) {
  const Matrix g = m.oriented_unmixing() * mixing;
  Eigen::Index best;
  g.col(static_cast<Eigen::Index>(j)).cwiseAbs().maxCoeff(&best);
  return static_cast<std::size_t>(best);
}

}  // namespace

TEST(Contributions, ZeroComponentsGiveBias) {
  Rng rng(1);
  const LinearHead h = random_ic_head(5, 3, rng);
  const ContributionTable t = component_contributions(h, Vector::Zero(3));
  EXPECT_TRUE(t.values.isZero(0));
  EXPECT_EQ(t.scores, h.bias);
}

TEST(Contributions, RowsReconstructScores) {
  Rng rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 2 + rng.below(6), n = 1 + rng.below(10);
    const LinearHead h = random_ic_head(k, n, rng);
    const Vector s = random_matrix(static_cast<Eigen::Index>(n), 1, rng, 5.0).col(0);
    const ContributionTable t = component_contributions(h, s);
    const Vector direct = h.weights * s + h.bias;
    for (std::size_t c = 0; c < k; ++c) {
      const double sum = t.values.row(static_cast<Eigen::Index>(c)).sum() + t.bias(static_cast<Eigen::Index>(c));
      const double scale = std::max(1.0, std::abs(direct(static_cast<Eigen::Index>(c))));
      ASSERT_LE(std::abs(sum - direct(static_cast<Eigen::Index>(c))) / scale, 1e-6);
      ASSERT_LE(std::abs(t.scores(static_cast<Eigen::Index>(c)) - direct(static_cast<Eigen::Index>(c))) / scale, 1e-12);
    }
  }
}

TEST(Contributions, FeatureHeadAndShapeRejected) {
  Rng rng(3);
  LinearHead h = random_ic_head(3, 2, rng);
  EXPECT_THROW(component_contributions(h, Vector::Zero(3)), Error);
  h.input_kind = InputKind::features;
  EXPECT_THROW(component_contributions(h, Vector::Zero(2)), Error);
}

TEST(Contributions, TextTable) {
  ContributionTable t;
  t.values = Matrix(2, 2);
  t.values << 1, -0.5, 0.25, 2;
  t.bias = Vector(2);
  t.bias << 0.5, -1;
  t.scores = t.values.rowwise().sum() + t.bias;
  EXPECT_EQ(contribution_table_text(t), "class,bias,ic0,ic1,score\n0,0.5,1,-0.5,1\n1,-1,0.25,2,1.25\n");
}

TEST(Contributions, ClassZeroGetsPositiveContributionsFromPositiveComponents) {
  const auto ds = plant_dataset({parse_distributions("laplace,laplace,uniform"), 4}, 4000, 16, 0.05, 5, 4);
  IcaConfig cfg;
  cfg.n_components = 3;
  cfg.seed = 4;
  const IcModel m = fit_ica(ds.features.data, cfg, ds.labels);
  const Matrix s = transform(m, ds.features.data);
  const LinearHead h = fit_head(s, ds.labels, {}, InputKind::independent_components);
  Vector mean = Vector::Zero(3);
  std::size_t count = 0;
  for (std::size_t i = 0; i < ds.labels.size(); ++i)
    if (ds.labels[i] == 0) {
      mean += component_contributions(h, s.row(static_cast<Eigen::Index>(i)).transpose()).values.row(0).transpose();
      ++count;
    }
  mean /= static_cast<double>(count);
  // Components are oriented so the class-0 mean is positive; the dominant one
  // must push the class-0 score up.
  EXPECT_GT(mean(0), 0.0);
}

TEST(SpatialMap, ConstantMapHasEmptyMask) {
  Rng rng(5);
  const IcModel m = fit_ica(gen_sources({parse_distributions("laplace,laplace,uniform"), 5}, 1000), [] {
    IcaConfig c;
    c.n_components = 3;
    return c;
  }());
  SpatialFeatureMap f;
  f.images = 1;
  f.height = 4;
  f.width = 5;
  f.channels = 3;
  for (std::size_t c = 0; c < 20; ++c)
    for (float v : {0.7f, -1.2f, 2.0f}) f.data.push_back(v);
  Vector pooled(3);
  pooled << 0.7, -1.2, 2.0;
  for (std::size_t j = 0; j < 3; ++j) {
    const SpatialScoreMap map = spatial_ic_map(m, f, 0, j);
    EXPECT_EQ(map.mask_count(), 0u);
    EXPECT_NEAR(map.sigma, 0.0, 1e-12);
    EXPECT_LT((map.grid.array() - transform(m, Vector(pooled.cast<float>().cast<double>()))(static_cast<Eigen::Index>(j))).abs().maxCoeff(), 1e-6);
  }
}

TEST(SpatialMap, GridMeanEqualsPooledComponent) {
  Planted p = planted(6, 10);
  for (std::uint64_t img = 0; img < p.sp.fmap.images; ++img) {
    const Vector pooled = transform(p.model, p.sp.fmap.pooled(img));
    for (std::size_t j = 0; j < 3; ++j) {
      const SpatialScoreMap map = spatial_ic_map(p.model, p.sp.fmap, img, j);
      const double want = pooled(static_cast<Eigen::Index>(j));
      EXPECT_LE(std::abs(map.grid.mean() - want), 1e-5 * std::max(1.0, std::abs(want)));
    }
  }
}

TEST(SpatialMap, MaskCoversPlantedBump) {
  Planted p = planted(7, 20);
  int hits = 0;
  for (const Bump& b : p.sp.bumps) {
    const std::size_t j = component_for_source(p.model, p.ds.mixing, b.source);
    const SpatialScoreMap map = spatial_ic_map(p.model, p.sp.fmap, b.image, j);
    hits += map.masked(b.y, b.x) ? 1 : 0;
  }
  EXPECT_GE(hits, 19);
}

TEST(SpatialMap, MaskFollowsThresholdDefinition) {
  Planted p = planted(8, 3);
  for (std::uint64_t img = 0; img < 3; ++img) {
    const SpatialScoreMap map = spatial_ic_map(p.model, p.sp.fmap, img, 1, SigmaMode::global, 0.5);
    EXPECT_DOUBLE_EQ(map.sigma, 0.5);
    for (Eigen::Index y = 0; y < map.height(); ++y)
      for (Eigen::Index x = 0; x < map.width(); ++x) EXPECT_EQ(map.masked(y, x), map.grid(y, x) < -1.0);
  }
  SpatialScoreMap sym = spatial_ic_map(p.model, p.sp.fmap, 0, 0, SigmaMode::per_image, 0.0, ThresholdMode::symmetric);
  for (Eigen::Index y = 0; y < sym.height(); ++y)
    for (Eigen::Index x = 0; x < sym.width(); ++x)
      EXPECT_EQ(sym.masked(y, x), std::abs(sym.grid(y, x)) > 2.0 * sym.sigma);
}

TEST(SpatialMap, ErrorsOnComponentAndChannels) {
  Planted p = planted(9, 2);
  EXPECT_THROW(spatial_ic_map(p.model, p.sp.fmap, 0, 3), Error);
  SpatialFeatureMap bad = p.sp.fmap;
  bad.channels = 8;
  EXPECT_THROW(spatial_ic_map(p.model, bad, 0, 0), Error);
  EXPECT_THROW(parse_sigma_mode("median"), Error);
}

TEST(ReceptiveField, HandExamples) {
  EXPECT_EQ(receptive_field(parse_architecture("k3s1p1")).final_field().size, 3);
  const auto two = receptive_field(conv_pool_blocks(1));
  ASSERT_EQ(two.fields.size(), 3u);
  EXPECT_EQ(two.fields[0].size, 3);
  EXPECT_EQ(two.fields[1].size, 5);
  EXPECT_EQ(two.fields[2].size, 6);
  EXPECT_EQ(two.fields[2].jump, 2);
  const auto three = receptive_field(conv_pool_blocks(3)).final_field();
  EXPECT_EQ(three.size, 36);
  EXPECT_EQ(three.jump, 8);
}

TEST(ReceptiveField, StartTracksPadding) {
  const auto f = receptive_field(parse_architecture("k3s1p1,k3s1p1,k2s2")).fields;
  EXPECT_EQ(f[0].start, -1);
  EXPECT_EQ(f[1].start, -2);
  EXPECT_EQ(f[2].start, -2);
  EXPECT_DOUBLE_EQ(f[2].center(), 0.5);
}

TEST(ReceptiveField, MatchesClosedFormOnRandomArchitectures) {
  Rng rng(10);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<LayerGeometry> layers;
    const std::size_t depth = 1 + rng.below(12);
    for (std::size_t i = 0; i < depth; ++i)
      layers.push_back({static_cast<std::uint32_t>(1 + rng.below(7)), static_cast<std::uint32_t>(1 + rng.below(3)),
                        static_cast<std::uint32_t>(rng.below(3))});
    const auto spec = receptive_field(layers);
    std::int64_t jump = 1;
    for (std::size_t l = 0; l < depth; ++l) {
      jump *= layers[l].stride;
      EXPECT_EQ(spec.fields[l].size, closed_form_field_size(layers, l + 1));
      EXPECT_EQ(spec.fields[l].jump, jump);
    }
  }
}

TEST(ReceptiveField, ArchitectureParsing) {
  const auto l = parse_architecture("k5s2p2,k2s2,k3");
  ASSERT_EQ(l.size(), 3u);
  EXPECT_EQ(l[0].kernel, 5u);
  EXPECT_EQ(l[0].stride, 2u);
  EXPECT_EQ(l[0].padding, 2u);
  EXPECT_EQ(l[1].padding, 0u);
  EXPECT_EQ(l[2].stride, 1u);
  EXPECT_THROW(parse_architecture("s2"), Error);
  EXPECT_THROW(parse_architecture("k3x1"), Error);
  EXPECT_THROW(parse_architecture("k"), Error);
  EXPECT_THROW(receptive_field({{0, 1, 0}}), Error);
}

TEST(Projection, SingleCellSpreadsOverPatch) {
  Matrix g = Matrix::Zero(5, 5);
  g(2, 2) = -9.0;
  const auto rf = receptive_field(parse_architecture("k3"));
  const Matrix raw = project_to_input_raw(map_from(g, {{2, 2}}), rf, 7, 7);
  for (Eigen::Index y = 0; y < 7; ++y)
    for (Eigen::Index x = 0; x < 7; ++x) {
      const bool inside = y >= 2 && y <= 4 && x >= 2 && x <= 4;
      EXPECT_DOUBLE_EQ(raw(y, x), inside ? -1.0 : 0.0);
    }
  const Matrix norm = project_to_input(map_from(g, {{2, 2}}), rf, 7, 7);
  EXPECT_DOUBLE_EQ(norm.minCoeff(), -1.0);
  EXPECT_DOUBLE_EQ(norm.maxCoeff(), 0.0);
}

TEST(Projection, EmptyMaskIsZero) {
  const auto rf = receptive_field(conv_pool_blocks(1));
  EXPECT_TRUE(project_to_input(map_from(Matrix::Constant(4, 4, -3.0), {}), rf, 8, 8).isZero(0));
}

TEST(Projection, OverlapsAdd) {
  Matrix g = Matrix::Zero(3, 3);
  g(1, 0) = -9.0;
  g(1, 1) = -18.0;
  const auto rf = receptive_field(parse_architecture("k3s1p1"));
  const Matrix raw = project_to_input_raw(map_from(g, {{1, 0}, {1, 1}}), rf, 3, 3);
  // Cell (1,0) covers rows 0..2, cols 0..1 after clipping: 6 pixels.
  // Cell (1,1) covers the whole 3x3 input: 9 pixels.
  EXPECT_DOUBLE_EQ(raw(0, 0), -9.0 / 6 - 18.0 / 9);
  EXPECT_DOUBLE_EQ(raw(0, 2), -18.0 / 9);
}

TEST(Projection, ConservesMass) {
  Rng rng(11);
  const auto rf = receptive_field(conv_pool_blocks(2));
  for (int trial = 0; trial < 50; ++trial) {
    SpatialScoreMap map;
    map.grid = random_matrix(6, 6, rng);
    map.sigma = 0.5;
    apply_threshold(map);
    const Matrix raw = project_to_input_raw(map, rf, 24, 24);
    const double want = map.thresholded().sum();
    EXPECT_LE(std::abs(raw.sum() - want), 1e-6 * std::max(1.0, std::abs(want)));
  }
}

TEST(Projection, InconsistentGeometryRejected) {
  const auto rf = receptive_field(conv_pool_blocks(3));
  EXPECT_THROW(project_to_input(map_from(Matrix::Zero(10, 10), {}), rf, 16, 16), Error);
}

TEST(Render, ZeroMapIsBlackPgm) {
  const io::Bytes b = encode_pgm(Matrix::Zero(2, 3));
  const std::string header = "P5\n3 2\n255\n";
  ASSERT_EQ(b.size(), header.size() + 6);
  EXPECT_EQ(as_string(b).substr(0, header.size()), header);
  for (std::size_t i = header.size(); i < b.size(); ++i) EXPECT_EQ(b[i], 0);
}

TEST(Render, SinglePixelOffset) {
  Matrix m = Matrix::Zero(3, 4);
  m(1, 2) = -1.0;
  const io::Bytes b = encode_pgm(m);
  const std::size_t h = std::string("P5\n4 3\n255\n").size();
  for (std::size_t i = h; i < b.size(); ++i) EXPECT_EQ(b[i], i == h + 1 * 4 + 2 ? 255 : 0);
}

TEST(Render, PgmGolden) {
  Matrix m(4, 6);
  for (Eigen::Index y = 0; y < 4; ++y)
    for (Eigen::Index x = 0; x < 6; ++x) m(y, x) = -static_cast<double>(y * 6 + x) / 23.0;
  EXPECT_TRUE(icx::testing::matches_golden("ramp.pgm", as_string(encode_pgm(m))));
}

TEST(Render, PgmFileRoundTrip) {
  icx::testing::TempDir dir("pgm");
  Matrix m(3, 3);
  m << 0, -0.5, -1, -0.25, 0, -0.75, -1, -1, 0;
  render_heatmap(m, std::nullopt, dir / "a.pgm");
  const GrayImage img = read_pgm(dir / "a.pgm");
  EXPECT_EQ(img.width, 3u);
  EXPECT_EQ(img.height, 3u);
  EXPECT_EQ(img.pixels[1], 128);
  EXPECT_EQ(img.pixels[2], 255);
  EXPECT_EQ(io::read_file(dir / "a.pgm"), encode_pgm(m));
}

TEST(Render, PpmOverlay) {
  GrayImage bg{2, 1, {10, 200}};
  Matrix m(1, 2);
  m << -0.4, 0.0;
  const io::Bytes b = encode_ppm(m, bg);
  const std::string header = "P6\n2 1\n255\n";
  ASSERT_EQ(b.size(), header.size() + 6);
  const std::vector<std::uint8_t> px(b.begin() + static_cast<std::ptrdiff_t>(header.size()), b.end());
  EXPECT_EQ(px, (std::vector<std::uint8_t>{255, 10, 10, 200, 200, 200}));
  EXPECT_THROW(encode_ppm(Matrix::Zero(2, 2), bg), Error);
}
