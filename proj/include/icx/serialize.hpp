#pragma once

// Fitted models <-> the sectioned text format. Sections are written in the
// order [pca], [ica], [head], [meta]; keys within each section in the order
// listed by the *_section() functions below.

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "icx/ica.hpp"
#include "icx/io.hpp"
#include "icx/model_text.hpp"
#include "icx/ordinal_head.hpp"
#include "icx/pca.hpp"

namespace icx {

struct ModelBundle {
  std::optional<PcaModel> pca;
  std::optional<IcModel> ica;
  std::optional<LinearHead> head;
  std::vector<std::pair<std::string, std::string>> meta;
};

namespace detail {

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

inline std::vector<long long> split_ints(const std::string& s) {
  std::vector<long long> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(text::Section::parse_int(text::detail::trim(s.substr(start, comma - start))));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

inline void write_section(text::Section& s, const PcaModel& m) {
  s.set("dim", m.dim());
  s.set_row("mean", m.mean);
  s.set_matrix("components", m.components);
  s.set_row("eigenvalues", m.eigenvalues);
}

inline PcaModel read_pca(const text::Section& s) {
  PcaModel m;
  const auto dim = s.integer("dim");
  m.mean = s.row_vector("mean");
  m.components = s.matrix("components");
  m.eigenvalues = s.row_vector("eigenvalues");
  if (m.mean.size() != dim || m.components.rows() != dim || m.components.cols() != dim ||
      m.eigenvalues.size() != dim)
    fail(ErrorKind::dimension, "[pca] matrices disagree with dim = " + std::to_string(dim));
  return m;
}

inline void write_section(text::Section& s, const IcModel& m) {
  s.set("n_components", m.n_components);
  s.set("input_dim", m.input_dim());
  s.set("contrast", to_string(m.contrast));
  s.set("converged", m.converged);
  s.set("gaussian_warning", m.gaussian_warning);
  s.set("orientation", m.orientation == Orientation::class0 ? "class0" : "skew");
  s.set("orientation_fallback", m.orientation_fallback);
  s.set("iterations", m.iterations);
  s.set("order", detail::join(m.component_order));
  s.set("signs", detail::join(m.component_signs));
  s.set_row("center", m.center);
  s.set_matrix("whitening", m.whitening);
  s.set_matrix("rotation", m.rotation);
}

inline IcModel read_ica(const text::Section& s) {
  IcModel m;
  const auto n = s.integer("n_components");
  const auto dim = s.integer("input_dim");
  if (n < 1 || dim < n) fail(ErrorKind::dimension, "[ica] needs 1 <= n_components <= input_dim");
  m.n_components = static_cast<std::size_t>(n);
  m.contrast = parse_contrast(s.scalar("contrast"));
  m.converged = s.flag("converged");
  m.gaussian_warning = s.flag("gaussian_warning");
  const auto& orient = s.scalar("orientation");
  if (orient != "class0" && orient != "skew") fail(ErrorKind::format, "unknown orientation '" + orient + "'");
  m.orientation = orient == "class0" ? Orientation::class0 : Orientation::skew;
  m.orientation_fallback = s.flag("orientation_fallback");
  m.iterations = static_cast<std::size_t>(s.integer("iterations"));
  for (auto v : detail::split_ints(s.scalar("order"))) {
    if (v < 0 || v >= n) fail(ErrorKind::format, "[ica] order entry out of range");
    m.component_order.push_back(static_cast<std::size_t>(v));
  }
  for (auto v : detail::split_ints(s.scalar("signs"))) {
    if (v != 1 && v != -1) fail(ErrorKind::format, "[ica] signs must be +1 or -1");
    m.component_signs.push_back(static_cast<int>(v));
  }
  m.center = s.row_vector("center");
  m.whitening = s.matrix("whitening");
  m.rotation = s.matrix("rotation");
  if (m.component_order.size() != m.n_components || m.component_signs.size() != m.n_components ||
      m.center.size() != dim || m.whitening.rows() != n || m.whitening.cols() != dim ||
      m.rotation.rows() != n || m.rotation.cols() != n)
    fail(ErrorKind::dimension, "[ica] matrices disagree with n_components/input_dim");
  m.refresh_derived();
  return m;
}

inline void write_section(text::Section& s, const LinearHead& h) {
  s.set("classes", h.classes());
  s.set("input_dim", h.input_dim());
  s.set("input_kind", to_string(h.input_kind));
  s.set_matrix("weights", h.weights);
  s.set_row("bias", h.bias);
}

inline LinearHead read_head(const text::Section& s) {
  LinearHead h;
  const auto k = s.integer("classes");
  const auto d = s.integer("input_dim");
  h.input_kind = parse_input_kind(s.scalar("input_kind"));
  h.weights = s.matrix("weights");
  h.bias = s.row_vector("bias");
  if (k < 2 || h.weights.rows() != k || h.weights.cols() != d || h.bias.size() != k)
    fail(ErrorKind::dimension, "[head] matrices disagree with classes/input_dim");
  return h;
}

inline std::string model_to_text(const ModelBundle& b) {
  text::Document doc;
  if (b.pca) write_section(doc.section("pca"), *b.pca);
  if (b.ica) write_section(doc.section("ica"), *b.ica);
  if (b.head) write_section(doc.section("head"), *b.head);
  if (!b.meta.empty()) {
    auto& meta = doc.section("meta");
    for (const auto& [k, v] : b.meta) meta.set(k, v);
  }
  return text::serialize(doc);
}

inline ModelBundle model_from_text(const std::string& content) {
  const text::Document doc = text::parse(content, {"pca", "ica", "head", "meta"});
  if (const auto* root = doc.find(""); root && !root->entries().empty())
    fail(ErrorKind::format, "model file has entries before the first section");
  ModelBundle b;
  if (const auto* s = doc.find("pca")) b.pca = read_pca(*s);
  if (const auto* s = doc.find("ica")) b.ica = read_ica(*s);
  if (const auto* s = doc.find("head")) b.head = read_head(*s);
  if (const auto* s = doc.find("meta"))
    for (const auto& e : s->entries()) {
      if (!std::holds_alternative<std::string>(e.value))
        fail(ErrorKind::format, "[meta] holds scalars only");
      b.meta.emplace_back(e.key, std::get<std::string>(e.value));
    }
  return b;
}

inline void write_model(const ModelBundle& b, const std::filesystem::path& path) {
  io::write_text_file(path, model_to_text(b));
}

inline ModelBundle read_model(const std::filesystem::path& path) {
  return model_from_text(io::read_text_file(path));
}

}  // namespace icx
