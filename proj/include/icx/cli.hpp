#pragma once

// `icx` command-line front end. Exit codes: 0 success, 1 usage/validation/
// format/io errors, 2 numerical failures. Errors go to the error stream as a
// single `error: <category>: <detail>` line.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "icx/embed.hpp"
#include "icx/error.hpp"
#include "icx/ica.hpp"
#include "icx/io.hpp"
#include "icx/metrics.hpp"
#include "icx/ordinal_head.hpp"
#include "icx/pca.hpp"
#include "icx/pipeline.hpp"
#include "icx/scoremap.hpp"
#include "icx/selection.hpp"
#include "icx/serialize.hpp"
#include "icx/synthetic.hpp"

namespace icx::cli {

namespace fs = std::filesystem;

/// Worker cap from ICX_THREADS (0 or unset: sequential).
inline std::size_t env_threads() {
  const char* v = std::getenv("ICX_THREADS");
  if (!v || !*v) return 0;
  try {
    return static_cast<std::size_t>(std::stoul(v));
  } catch (const std::exception&) {
    fail(ErrorKind::validation, std::string("ICX_THREADS='") + v + "' is not a non-negative integer");
  }
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::io, "cannot create directory '" + dir.string() + "': " + ec.message());
}

inline std::string fixed6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

struct SynthArgs {
  std::string sources = "laplace,laplace,uniform";
  std::size_t samples = 5000;
  std::size_t val_samples = 2000;
  std::size_t dim = 64;
  double noise = 0.1;
  double label_noise = 0.25;
  std::uint32_t classes = 5;
  std::uint64_t seed = 0;
  std::uint32_t fmap_height = 0;
  std::uint32_t fmap_width = 0;
  std::size_t fmap_images = 16;
  std::size_t bumps = 1;
  double amplitude = 6.0;
  double texture = 0.0;
  std::string out_dir = ".";
};

inline int cmd_synth(const SynthArgs& a, std::ostream& out) {
  ensure_dir(a.out_dir);
  SourceSpec spec{parse_distributions(a.sources), a.seed};
  PlantOptions opt;
  opt.label_noise = a.label_noise;
  const PlantedDataset ds = plant_dataset(spec, a.samples + a.val_samples, a.dim, a.noise, a.classes, a.seed, opt);
  std::vector<std::size_t> train_idx, val_idx;
  for (std::size_t i = 0; i < a.samples + a.val_samples; ++i) (i < a.samples ? train_idx : val_idx).push_back(i);
  auto labels_of = [&](const std::vector<std::size_t>& idx) {
    LabelVector l;
    l.classes = ds.labels.classes;
    for (auto i : idx) l.values.push_back(ds.labels[i]);
    return l;
  };
  const fs::path dir = a.out_dir;
  io::write_feature_matrix(FeatureMatrix(take_rows(ds.features.data, train_idx)), dir / "train_features.fmat");
  io::write_labels(labels_of(train_idx), dir / "train_labels.lbl");
  out << "wrote " << (dir / "train_features.fmat").string() << " (" << a.samples << "x" << a.dim << ")\n";
  if (a.val_samples > 0) {
    io::write_feature_matrix(FeatureMatrix(take_rows(ds.features.data, val_idx)), dir / "val_features.fmat");
    io::write_labels(labels_of(val_idx), dir / "val_labels.lbl");
    out << "wrote " << (dir / "val_features.fmat").string() << " (" << a.val_samples << "x" << a.dim << ")\n";
  }
  std::vector<Bump> bumps;
  if (a.fmap_height > 0 && a.fmap_width > 0) {
    // Spatial maps for the leading validation images (training images when
    // there is no validation split).
    const auto& pool = a.val_samples > 0 ? val_idx : train_idx;
    std::vector<std::size_t> chosen(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(std::min(a.fmap_images, pool.size())));
    PlantedDataset sub = ds;
    sub.features = FeatureMatrix(take_rows(ds.features.data, chosen));
    SpatialOptions sopt;
    sopt.amplitude = a.amplitude;
    sopt.texture = a.texture;
    const SpatialPlant plant = plant_spatial(sub, a.fmap_height, a.fmap_width, a.bumps, a.seed, sopt);
    io::write_spatial_map(plant.fmap, dir / "fmap.fmap");
    bumps = plant.bumps;
    out << "wrote " << (dir / "fmap.fmap").string() << " (" << chosen.size() << " images)\n";
  }
  io::write_text_file(dir / "truth.txt", ground_truth_text(ds, bumps));
  out << "wrote " << (dir / "truth.txt").string() << "\n";
  return 0;
}

inline std::vector<double> parse_thresholds(const std::string& s) {
  return detail::split_list<double>(s, [](const std::string& v) { return text::Section::parse_double(v); });
}

inline int cmd_pca(const std::string& features, const std::string& thresholds, const std::string& model_out,
                   std::ostream& out) {
  const PcaModel pca = fit_pca(io::read_feature_matrix(features));
  out << detail::pca_report_text(pca, parse_thresholds(thresholds));
  if (!model_out.empty()) {
    ModelBundle b;
    b.pca = pca;
    write_model(b, model_out);
  }
  return 0;
}

struct IcaArgs {
  std::string features, labels, out;
  IcaConfig cfg;
  std::string contrast = "logcosh";
};

inline int cmd_ica(IcaArgs a, std::ostream& out) {
  a.cfg.contrast = parse_contrast(a.contrast);
  const FeatureMatrix f = io::read_feature_matrix(a.features);
  IcModel model = a.labels.empty() ? fit_ica(f.data, a.cfg) : fit_ica(f.data, a.cfg, io::read_labels(a.labels));
  ModelBundle b;
  b.ica = model;
  b.meta = {{"seed", std::to_string(a.cfg.seed)}};
  write_model(b, a.out);
  out << "n_components = " << model.n_components << "\n"
      << "converged = " << (model.converged ? "true" : "false") << "\n"
      << "gaussian_warning = " << (model.gaussian_warning ? "true" : "false") << "\n"
      << "iterations = " << model.iterations << "\n";
  return 0;
}

struct HeadArgs {
  std::string features, labels, model, out;
  FitConfig cfg;
};

inline int cmd_head_fit(const HeadArgs& a, std::ostream& out) {
  const FeatureMatrix f = io::read_feature_matrix(a.features);
  const LabelVector labels = io::read_labels(a.labels);
  ModelBundle b;
  if (!a.model.empty()) b = read_model(a.model);
  LinearHead head;
  if (b.ica) {
    head = fit_head(transform(*b.ica, f.data), labels, a.cfg, InputKind::independent_components);
  } else {
    head = fit_head(f.data, labels, a.cfg, InputKind::features);
  }
  b.head = head;
  write_model(b, a.out);
  out << "training kappa = " << fixed6(evaluate(head, b.ica ? transform(*b.ica, f.data) : f.data, labels)) << "\n";
  return 0;
}

inline int cmd_head_eval(const HeadArgs& a, std::ostream& out) {
  const ModelBundle b = read_model(a.model);
  if (!b.head) fail(ErrorKind::validation, "model '" + a.model + "' has no [head] section");
  const FeatureMatrix f = io::read_feature_matrix(a.features);
  const LabelVector labels = io::read_labels(a.labels);
  Matrix inputs = f.data;
  if (b.head->input_kind == InputKind::independent_components) {
    if (!b.ica) fail(ErrorKind::validation, "head expects components but the model has no [ica] section");
    inputs = transform(*b.ica, f.data);
  }
  out << fixed6(evaluate(*b.head, inputs, labels)) << "\n";
  return 0;
}

struct SelectArgs {
  std::string train_features, train_labels, val_features, val_labels, out_dir = ".";
  std::size_t n_min = 1, n_max = 10;
  double epsilon = kDefaultSelectionEpsilon;
  std::uint64_t seed = 0;
  IcaConfig ica;
  FitConfig head;
};

inline int cmd_select(const SelectArgs& a, std::ostream& out) {
  ensure_dir(a.out_dir);
  const FeatureMatrix train = io::read_feature_matrix(a.train_features);
  const LabelVector train_labels = io::read_labels(a.train_labels);
  const FeatureMatrix val = io::read_feature_matrix(a.val_features);
  const LabelVector val_labels = io::read_labels(a.val_labels);
  SelectionConfig cfg;
  cfg.ica = a.ica;
  cfg.head = a.head;
  cfg.master_seed = a.seed;
  cfg.threads = env_threads();
  const SelectionReport r = select_components(train.data, train_labels, val.data, val_labels, a.n_min, a.n_max,
                                              a.epsilon, cfg);
  const std::string table = report_to_text(r);
  io::write_text_file(fs::path(a.out_dir) / "selection_report.txt", table);
  out << table;

  IcaConfig ica = a.ica;
  ica.n_components = r.chosen_n;
  ica.seed = trial_ica_seed(a.seed, r.chosen_n);
  ModelBundle b;
  b.ica = fit_ica(train.data, ica, train_labels);
  FitConfig fit = a.head;
  fit.seed = trial_head_seed(a.seed, r.chosen_n);
  b.head = fit_head(transform(*b.ica, train.data), train_labels, fit, InputKind::independent_components);
  b.meta = {{"seed", std::to_string(a.seed)},
            {"chosen_n", std::to_string(r.chosen_n)},
            {"kappa_full", text::Section::format_double(r.kappa_full)},
            {"kappa_ic", text::Section::format_double(evaluate(*b.head, transform(*b.ica, val.data), val_labels))}};
  write_model(b, fs::path(a.out_dir) / "model.icx");
  return 0;
}

struct ExplainArgs {
  std::string model, fmap, component = "all", sigma = "per-image", out_dir = ".", arch, input_size, background;
  std::uint64_t image = 0;
};

inline int cmd_explain(const ExplainArgs& a, std::ostream& out) {
  ensure_dir(a.out_dir);
  const ModelBundle b = read_model(a.model);
  if (!b.ica) fail(ErrorKind::validation, "model '" + a.model + "' has no [ica] section");
  const SpatialFeatureMap fmap = io::read_spatial_map(a.fmap);
  ExplainOptions opt;
  opt.sigma = parse_sigma_mode(a.sigma);
  opt.arch = parse_architecture(a.arch);
  if (a.component != "all") {
    const auto j = text::Section::parse_int(a.component, "--component");
    if (j < 0) fail(ErrorKind::parameter, "--component must be non-negative or 'all'");
    opt.components.push_back(static_cast<std::size_t>(j));
  }
  if (!a.input_size.empty()) {
    const auto x = a.input_size.find('x');
    if (x == std::string::npos) fail(ErrorKind::parameter, "--input-size expects HxW");
    opt.input_height = text::Section::parse_int(a.input_size.substr(0, x), "--input-size");
    opt.input_width = text::Section::parse_int(a.input_size.substr(x + 1), "--input-size");
  }
  if (!a.background.empty()) opt.background = read_pgm(a.background);
  std::optional<LinearHead> head;
  if (b.head && b.head->input_kind == InputKind::independent_components) head = b.head;
  for (const auto& f : explain_image(*b.ica, head, fmap, a.image, opt, a.out_dir)) out << "wrote " << f.string() << "\n";
  return 0;
}

struct TsneArgs {
  std::string features, labels, out;
  TsneConfig cfg;
  std::size_t max_points = 1000;
};

inline int cmd_tsne(const TsneArgs& a, std::ostream& out) {
  const FeatureMatrix f = io::read_feature_matrix(a.features);
  LabelVector labels;
  if (!a.labels.empty()) labels = detail::leading_labels(io::read_labels(a.labels), a.max_points);
  const TsneResult r = run_tsne(detail::leading_rows(f.data, a.max_points), a.cfg);
  embedding_to_svg(r.embedding, labels, a.out);
  out << "final KL = " << fixed6(r.kl_trace.back()) << "\n";
  return 0;
}

inline int cmd_qwk(const std::string& labels, const std::string& preds, std::ostream& out) {
  out << fixed6(qwk(confusion(io::read_labels(labels), io::read_labels(preds)))) << "\n";
  return 0;
}

inline int cmd_pipeline(const std::string& config, std::ostream& out) {
  PipelineConfig cfg = read_pipeline_config(config);
  if (cfg.threads == 0) cfg.threads = env_threads();
  const PipelineResult r = run_pipeline(cfg);
  out << report_to_text(r.selection);
  out << "manifest: " << (cfg.out_dir / "manifest.txt").string() << " (" << r.manifest.files().size() << " files)\n";
  return 0;
}

/// Runs the CLI on `args` (program name excluded).
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"icx: independent-component explanations of classifier features", "icx"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "generate a planted dataset");
  s->add_option("--sources", synth.sources, "comma-separated laplace|uniform|gaussian");
  s->add_option("--samples", synth.samples, "training samples");
  s->add_option("--val-samples", synth.val_samples, "validation samples");
  s->add_option("--dim", synth.dim, "ambient feature dimension");
  s->add_option("--noise", synth.noise, "feature noise sigma");
  s->add_option("--label-noise", synth.label_noise, "latent label noise sigma");
  s->add_option("--classes", synth.classes, "ordinal class count K");
  s->add_option("--seed", synth.seed, "master seed");
  s->add_option("--fmap-height", synth.fmap_height, "spatial map height (0: no map)");
  s->add_option("--fmap-width", synth.fmap_width, "spatial map width (0: no map)");
  s->add_option("--fmap-images", synth.fmap_images, "images with spatial maps");
  s->add_option("--bumps", synth.bumps, "planted bumps per image");
  s->add_option("--amplitude", synth.amplitude, "bump amplitude in source units");
  s->add_option("--texture", synth.texture, "per-cell texture sigma in source units");
  s->add_option("--out-dir", synth.out_dir, "output directory");

  std::string pca_features, pca_thresholds = "0.9,0.99", pca_model;
  auto* p = app.add_subcommand("pca", "explained-variance report");
  p->add_option("--features", pca_features, "FMAT file")->required();
  p->add_option("--thresholds", pca_thresholds, "comma-separated fractions in (0,1]");
  p->add_option("--model-out", pca_model, "write the PCA model");

  IcaArgs ica;
  auto* ic = app.add_subcommand("ica", "fit FastICA");
  ic->add_option("--features", ica.features, "FMAT file")->required();
  ic->add_option("--labels", ica.labels, "LBL1 file for class-0 orientation");
  ic->add_option("--n", ica.cfg.n_components, "number of components")->required();
  ic->add_option("--contrast", ica.contrast, "logcosh|exp");
  ic->add_option("--tol", ica.cfg.tol, "convergence tolerance");
  ic->add_option("--max-iter", ica.cfg.max_iter, "iterations per attempt");
  ic->add_option("--restarts", ica.cfg.restarts, "restarts after non-convergence");
  ic->add_option("--seed", ica.cfg.seed, "seed");
  ic->add_option("--out", ica.out, "model file")->required();

  HeadArgs head_fit, head_eval;
  auto* h = app.add_subcommand("head", "linear class heads");
  h->require_subcommand(1);
  auto* hf = h->add_subcommand("fit", "fit a head (over components when --model has [ica])");
  hf->add_option("--features", head_fit.features, "FMAT file")->required();
  hf->add_option("--labels", head_fit.labels, "LBL1 file")->required();
  hf->add_option("--model", head_fit.model, "model with an [ica] section");
  hf->add_option("--l2", head_fit.cfg.l2, "L2 penalty");
  hf->add_option("--lr", head_fit.cfg.learning_rate, "initial step");
  hf->add_option("--epochs", head_fit.cfg.epochs, "epochs");
  hf->add_option("--seed", head_fit.cfg.seed, "seed");
  hf->add_flag("!--no-standardize", head_fit.cfg.standardize, "fit on raw inputs");
  hf->add_option("--out", head_fit.out, "model file")->required();
  auto* he = h->add_subcommand("eval", "validation kappa of a head");
  he->add_option("--model", head_eval.model, "model file")->required();
  he->add_option("--features", head_eval.features, "FMAT file")->required();
  he->add_option("--labels", head_eval.labels, "LBL1 file")->required();

  std::string qwk_labels, qwk_preds;
  auto* q = app.add_subcommand("qwk", "quadratic weighted kappa of two label files");
  q->add_option("--labels", qwk_labels, "true labels")->required();
  q->add_option("--preds", qwk_preds, "predicted labels")->required();

  SelectArgs sel;
  auto* se = app.add_subcommand("select", "component-count sweep");
  se->add_option("--train-features", sel.train_features)->required();
  se->add_option("--train-labels", sel.train_labels)->required();
  se->add_option("--val-features", sel.val_features)->required();
  se->add_option("--val-labels", sel.val_labels)->required();
  se->add_option("--n-min", sel.n_min);
  se->add_option("--n-max", sel.n_max);
  se->add_option("--epsilon", sel.epsilon);
  se->add_option("--seed", sel.seed);
  se->add_option("--out-dir", sel.out_dir);

  ExplainArgs ex;
  auto* e = app.add_subcommand("explain", "spatial component maps for one image");
  e->add_option("--model", ex.model)->required();
  e->add_option("--fmap", ex.fmap)->required();
  e->add_option("--image", ex.image)->required();
  e->add_option("--component", ex.component, "index or 'all'");
  e->add_option("--sigma", ex.sigma, "per-image|global");
  e->add_option("--out-dir", ex.out_dir);
  e->add_option("--arch", ex.arch, "layers as k3s1p1,k2s2,...");
  e->add_option("--input-size", ex.input_size, "HxW of the input image");
  e->add_option("--background", ex.background, "P5 background image (renders P6)");

  TsneArgs ts;
  auto* t = app.add_subcommand("tsne", "exact t-SNE scatter");
  t->add_option("--features", ts.features)->required();
  t->add_option("--labels", ts.labels);
  t->add_option("--out", ts.out)->required();
  t->add_option("--perplexity", ts.cfg.perplexity);
  t->add_option("--iterations", ts.cfg.iterations);
  t->add_option("--seed", ts.cfg.seed);
  t->add_option("--max-points", ts.max_points, "use only the leading rows");

  std::string config;
  auto* pl = app.add_subcommand("pipeline", "full run from a config file");
  pl->add_option("--config", config)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& ex_) {
    err << "error: usage: " << ex_.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.back()->help());
    return 1;
  }

  try {
    if (s->parsed()) return cmd_synth(synth, out);
    if (p->parsed()) return cmd_pca(pca_features, pca_thresholds, pca_model, out);
    if (ic->parsed()) return cmd_ica(ica, out);
    if (hf->parsed()) return cmd_head_fit(head_fit, out);
    if (he->parsed()) return cmd_head_eval(head_eval, out);
    if (q->parsed()) return cmd_qwk(qwk_labels, qwk_preds, out);
    if (se->parsed()) {
      return cmd_select(sel, out);
    }
    if (e->parsed()) return cmd_explain(ex, out);
    if (t->parsed()) return cmd_tsne(ts, out);
    if (pl->parsed()) return cmd_pipeline(config, out);
  } catch (const Error& ex_) {
    err << "error: " << to_string(ex_.kind()) << ": " << ex_.what() << "\n";
    return is_numerical(ex_.kind()) ? 2 : 1;
  } catch (const std::exception& ex_) {
    err << "error: internal: " << ex_.what() << "\n";
    return 1;
  }
  err << app.help();
  return 1;
}

inline int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(std::move(args), std::cout, std::cerr);
}

}  // namespace icx::cli
