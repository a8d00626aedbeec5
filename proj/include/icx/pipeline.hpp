#pragma once

// End-to-end run: PCA report, component selection, final oriented model,
// contribution tables, spatial explanations and t-SNE views, plus a manifest
// of every produced file with its SHA-256.

#include <openssl/evp.h>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "icx/embed.hpp"
#include "icx/error.hpp"
#include "icx/ica.hpp"
#include "icx/io.hpp"
#include "icx/model_text.hpp"
#include "icx/ordinal_head.hpp"
#include "icx/pca.hpp"
#include "icx/scoremap.hpp"
#include "icx/selection.hpp"
#include "icx/serialize.hpp"

namespace icx {

namespace fs = std::filesystem;

struct PipelineConfig {
  fs::path train_features, train_labels, val_features, val_labels;
  std::optional<fs::path> fmap;
  std::vector<std::uint64_t> explain_images{0};
  std::size_t n_min = 1;
  std::size_t n_max = 10;
  double epsilon = kDefaultSelectionEpsilon;
  IcaConfig ica;
  FitConfig head;
  bool tsne = true;
  TsneConfig tsne_cfg;
  std::size_t tsne_max_points = 500;
  std::vector<double> variance_thresholds{0.9, 0.95, 0.99};
  SigmaMode sigma = SigmaMode::per_image;
  std::vector<LayerGeometry> arch;
  std::int64_t input_height = 0;  // 0: use the hidden grid size
  std::int64_t input_width = 0;
  fs::path out_dir = "icx_out";
  std::uint64_t seed = 0;
  std::size_t threads = 0;
};

inline std::string sha256_hex(const io::Bytes& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    fail(ErrorKind::io, "SHA-256 computation failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

/// Files written so far, in production order.
class Manifest {
 public:
  explicit Manifest(fs::path root) : root_(std::move(root)) {}

  void add(const fs::path& file) { files_.push_back(file); }
  const std::vector<fs::path>& files() const { return files_; }

  std::string text(bool partial) const {
    std::string out = partial ? "# status: partial\n" : "# status: complete\n";
    for (const auto& f : files_)
      out += sha256_hex(io::read_file(f)) + "  " + fs::relative(f, root_).generic_string() + "\n";
    return out;
  }

 private:
  fs::path root_;
  std::vector<fs::path> files_;
};

namespace detail {

template <typename T, typename Parse>
std::vector<T> split_list(const std::string& s, Parse parse) {
  std::vector<T> out;
  std::size_t start = 0;
  while (start <= s.size() && !s.empty()) {
    const auto comma = s.find(',', start);
    out.push_back(parse(text::detail::trim(s.substr(start, comma == std::string::npos ? std::string::npos : comma - start))));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

/// Reads `key = value` lines. Relative paths resolve against the config's
/// directory; referenced inputs must exist.
inline PipelineConfig parse_pipeline_config(const std::string& content, const fs::path& base_dir) {
  const text::Document doc = text::parse(content, {""});
  static const text::Section empty;
  const text::Section& s = doc.find("") ? *doc.find("") : empty;
  static const std::vector<std::string> known = {
      "train_features", "train_labels", "val_features", "val_labels", "fmap", "explain_images", "n_min", "n_max",
      "epsilon", "seed", "out_dir", "threads", "ica.contrast", "ica.tol", "ica.max_iter", "ica.restarts",
      "head.l2", "head.learning_rate", "head.epochs", "head.standardize", "tsne", "tsne.perplexity",
      "tsne.iterations", "tsne.max_points", "variance_thresholds", "sigma", "arch", "input_height",
      "input_width"};
  for (const auto& e : s.entries())
    if (std::find(known.begin(), known.end(), e.key) == known.end())
      fail(ErrorKind::validation, "unknown pipeline config key '" + e.key + "'");

  auto path = [&](const char* key) {
    const fs::path p = s.scalar(key);
    return p.is_absolute() ? p : base_dir / p;
  };
  auto input = [&](const char* key) {
    if (!s.has(key)) fail(ErrorKind::validation, std::string("pipeline config lacks '") + key + "'");
    fs::path p = path(key);
    if (!fs::exists(p)) fail(ErrorKind::validation, std::string(key) + " path '" + p.string() + "' does not exist");
    return p;
  };

  PipelineConfig cfg;
  cfg.train_features = input("train_features");
  cfg.train_labels = input("train_labels");
  cfg.val_features = input("val_features");
  cfg.val_labels = input("val_labels");
  if (s.has("fmap")) cfg.fmap = input("fmap");
  auto to_u64 = [](const std::string& v) { return static_cast<std::uint64_t>(text::Section::parse_int(v)); };
  auto to_double = [](const std::string& v) { return text::Section::parse_double(v); };
  if (auto v = s.scalar_or("explain_images")) cfg.explain_images = detail::split_list<std::uint64_t>(*v, to_u64);
  if (s.has("n_min")) cfg.n_min = static_cast<std::size_t>(s.integer("n_min"));
  if (s.has("n_max")) cfg.n_max = static_cast<std::size_t>(s.integer("n_max"));
  if (s.has("epsilon")) cfg.epsilon = s.real("epsilon");
  if (s.has("seed")) cfg.seed = static_cast<std::uint64_t>(s.integer("seed"));
  if (s.has("threads")) cfg.threads = static_cast<std::size_t>(s.integer("threads"));
  if (s.has("out_dir")) cfg.out_dir = path("out_dir");
  if (auto v = s.scalar_or("ica.contrast")) cfg.ica.contrast = parse_contrast(*v);
  if (s.has("ica.tol")) cfg.ica.tol = s.real("ica.tol");
  if (s.has("ica.max_iter")) cfg.ica.max_iter = static_cast<std::size_t>(s.integer("ica.max_iter"));
  if (s.has("ica.restarts")) cfg.ica.restarts = static_cast<std::size_t>(s.integer("ica.restarts"));
  if (s.has("head.l2")) cfg.head.l2 = s.real("head.l2");
  if (s.has("head.learning_rate")) cfg.head.learning_rate = s.real("head.learning_rate");
  if (s.has("head.epochs")) cfg.head.epochs = static_cast<std::size_t>(s.integer("head.epochs"));
  if (s.has("head.standardize")) cfg.head.standardize = s.flag("head.standardize");
  if (s.has("tsne")) cfg.tsne = s.flag("tsne");
  if (s.has("tsne.perplexity")) cfg.tsne_cfg.perplexity = s.real("tsne.perplexity");
  if (s.has("tsne.iterations")) cfg.tsne_cfg.iterations = static_cast<std::size_t>(s.integer("tsne.iterations"));
  if (s.has("tsne.max_points")) cfg.tsne_max_points = static_cast<std::size_t>(s.integer("tsne.max_points"));
  if (auto v = s.scalar_or("variance_thresholds")) cfg.variance_thresholds = detail::split_list<double>(*v, to_double);
  if (auto v = s.scalar_or("sigma")) cfg.sigma = parse_sigma_mode(*v);
  if (auto v = s.scalar_or("arch")) cfg.arch = parse_architecture(*v);
  if (s.has("input_height")) cfg.input_height = s.integer("input_height");
  if (s.has("input_width")) cfg.input_width = s.integer("input_width");

  require(cfg.n_min >= 1 && cfg.n_min <= cfg.n_max, ErrorKind::validation, "invalid n_min/n_max");
  require(cfg.epsilon >= 0, ErrorKind::validation, "epsilon must be non-negative");
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) fail(ErrorKind::validation, "cannot create output directory '" + cfg.out_dir.string() + "': " + ec.message());
  return cfg;
}

inline PipelineConfig read_pipeline_config(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorKind::validation, "config file '" + path.string() + "' does not exist");
  return parse_pipeline_config(io::read_text_file(path), path.parent_path());
}

/// Mean contribution table over the samples of each true class.
inline std::vector<ContributionTable> class_mean_contributions(const LinearHead& head, const Matrix& components,
                                                               const LabelVector& labels) {
  std::vector<ContributionTable> tables;
  for (std::uint32_t k = 0; k < labels.classes; ++k) {
    Vector mean = Vector::Zero(components.cols());
    std::size_t count = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == k) {
        mean += components.row(static_cast<Eigen::Index>(i)).transpose();
        ++count;
      }
    if (count) mean /= static_cast<double>(count);
    tables.push_back(component_contributions(head, mean));
  }
  return tables;
}

struct ExplainOptions {
  std::vector<std::size_t> components;  // empty: all
  SigmaMode sigma = SigmaMode::per_image;
  std::vector<LayerGeometry> arch;
  std::int64_t input_height = 0;
  std::int64_t input_width = 0;
  std::optional<GrayImage> background;
};

/// Writes, for one image, a heatmap and a grid-resolution mask per component
/// plus the contribution table of its pooled components. Returns the files.
inline std::vector<fs::path> explain_image(const IcModel& model, const std::optional<LinearHead>& head,
                                           const SpatialFeatureMap& fmap, std::uint64_t image,
                                           const ExplainOptions& opt, const fs::path& out_dir) {
  std::vector<fs::path> written;
  std::vector<std::size_t> comps = opt.components;
  if (comps.empty())
    for (std::size_t j = 0; j < model.n_components; ++j) comps.push_back(j);
  const ReceptiveFieldSpec rf = receptive_field(opt.arch);
  const std::int64_t in_h = opt.input_height > 0 ? opt.input_height : fmap.height;
  const std::int64_t in_w = opt.input_width > 0 ? opt.input_width : fmap.width;
  const std::string stem = "image" + std::to_string(image);
  for (std::size_t j : comps) {
    const double sigma = opt.sigma == SigmaMode::global ? population_sigma(model, fmap, j) : 0.0;
    const SpatialScoreMap map = spatial_ic_map(model, fmap, image, j, opt.sigma, sigma);
    const Matrix projected = project_to_input(map, rf, in_h, in_w);
    const fs::path heat = out_dir / (stem + "_ic" + std::to_string(j) + (opt.background ? ".ppm" : ".pgm"));
    render_heatmap(projected, opt.background, heat);
    written.push_back(heat);
    Matrix mask(map.height(), map.width());
    for (Eigen::Index y = 0; y < map.height(); ++y)
      for (Eigen::Index x = 0; x < map.width(); ++x) mask(y, x) = map.masked(y, x) ? 1.0 : 0.0;
    const fs::path mask_path = out_dir / (stem + "_ic" + std::to_string(j) + "_mask.pgm");
    io::write_file(mask_path, encode_pgm(mask));
    written.push_back(mask_path);
  }
  if (head) {
    const Vector s = transform(model, fmap.pooled(image));
    const fs::path table = out_dir / (stem + "_contributions.txt");
    io::write_text_file(table, contribution_table_text(component_contributions(*head, s)));
    written.push_back(table);
  }
  return written;
}

namespace detail {

inline Matrix leading_rows(const Matrix& m, std::size_t limit) {
  const auto n = std::min<Eigen::Index>(m.rows(), static_cast<Eigen::Index>(limit));
  return m.topRows(n);
}

inline LabelVector leading_labels(const LabelVector& l, std::size_t limit) {
  LabelVector out;
  out.classes = l.classes;
  out.values.assign(l.values.begin(), l.values.begin() + static_cast<std::ptrdiff_t>(std::min(limit, l.size())));
  return out;
}

inline std::string pca_report_text(const PcaModel& pca, const std::vector<double>& thresholds) {
  std::string out;
  char buf[96];
  for (const auto& [t, k] : explained_variance_report(pca, thresholds)) {
    std::snprintf(buf, sizeof buf, "threshold %.6f: %zu components\n", t, k);
    out += buf;
  }
  return out;
}

}  // namespace detail

struct PipelineResult {
  SelectionReport selection;
  ModelBundle model;
  Manifest manifest;
};

inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
  PipelineResult result{{}, {}, Manifest(cfg.out_dir)};
  Manifest& manifest = result.manifest;
  const fs::path manifest_path = cfg.out_dir / "manifest.txt";
  auto emit = [&](const fs::path& file) { manifest.add(file); };
  try {
    const FeatureMatrix train = io::read_feature_matrix(cfg.train_features);
    const LabelVector train_labels = io::read_labels(cfg.train_labels);
    const FeatureMatrix val = io::read_feature_matrix(cfg.val_features);
    const LabelVector val_labels = io::read_labels(cfg.val_labels);
    require(train_labels.size() == train.rows() && val_labels.size() == val.rows(), ErrorKind::validation,
            "labels are not aligned with features");

    const PcaModel pca = fit_pca(train);
    const fs::path pca_path = cfg.out_dir / "pca_report.txt";
    io::write_text_file(pca_path, detail::pca_report_text(pca, cfg.variance_thresholds));
    emit(pca_path);

    SelectionConfig sel;
    sel.ica = cfg.ica;
    sel.head = cfg.head;
    sel.master_seed = cfg.seed;
    sel.threads = cfg.threads;
    result.selection = select_components(train.data, train_labels, val.data, val_labels, cfg.n_min, cfg.n_max,
                                         cfg.epsilon, sel);
    const fs::path report_path = cfg.out_dir / "selection_report.txt";
    io::write_text_file(report_path, report_to_text(result.selection));
    emit(report_path);

    const std::size_t n = result.selection.chosen_n;
    IcaConfig ica = cfg.ica;
    ica.n_components = n;
    ica.seed = trial_ica_seed(cfg.seed, n);
    const IcModel model = fit_ica(train.data, ica, train_labels);
    FitConfig fit = cfg.head;
    fit.seed = trial_head_seed(cfg.seed, n);
    const Matrix train_ic = transform(model, train.data);
    const Matrix val_ic = transform(model, val.data);
    const LinearHead head = fit_head(train_ic, train_labels, fit, InputKind::independent_components);

    ModelBundle& bundle = result.model;
    bundle.pca = pca;
    bundle.ica = model;
    bundle.head = head;
    bundle.meta = {{"seed", std::to_string(cfg.seed)},
                   {"chosen_n", std::to_string(n)},
                   {"epsilon", text::Section::format_double(cfg.epsilon)},
                   {"kappa_full", text::Section::format_double(result.selection.kappa_full)},
                   {"kappa_ic", text::Section::format_double(evaluate(head, val_ic, val_labels))},
                   {"selection_satisfied", result.selection.satisfied ? "true" : "false"}};
    const fs::path model_path = cfg.out_dir / "model.icx";
    write_model(bundle, model_path);
    emit(model_path);

    const auto tables = class_mean_contributions(head, val_ic, val_labels);
    for (std::size_t k = 0; k < tables.size(); ++k) {
      const fs::path p = cfg.out_dir / ("contributions_class" + std::to_string(k) + ".txt");
      io::write_text_file(p, contribution_table_text(tables[k]));
      emit(p);
    }

    if (cfg.fmap) {
      const SpatialFeatureMap fmap = io::read_spatial_map(*cfg.fmap);
      ExplainOptions opt;
      opt.sigma = cfg.sigma;
      opt.arch = cfg.arch;
      opt.input_height = cfg.input_height;
      opt.input_width = cfg.input_width;
      for (auto image : cfg.explain_images)
        for (const auto& f : explain_image(model, head, fmap, image, opt, cfg.out_dir)) emit(f);
    }

    if (cfg.tsne) {
      TsneConfig tc = cfg.tsne_cfg;
      tc.seed = derive_seed(cfg.seed, streams::tsne);
      const LabelVector sub = detail::leading_labels(val_labels, cfg.tsne_max_points);
      const auto original = run_tsne(detail::leading_rows(val.data, cfg.tsne_max_points), tc);
      const fs::path a = cfg.out_dir / "tsne_features.svg";
      embedding_to_svg(original.embedding, sub, a);
      emit(a);
      const auto reduced = run_tsne(detail::leading_rows(val_ic, cfg.tsne_max_points), tc);
      const fs::path b = cfg.out_dir / "tsne_ica.svg";
      embedding_to_svg(reduced.embedding, sub, b);
      emit(b);
    }
  } catch (...) {
    io::write_text_file(manifest_path, manifest.text(true));
    throw;
  }
  io::write_text_file(manifest_path, manifest.text(false));
  return result;
}

}  // namespace icx
