#pragma once

// Line-oriented text container shared by model files and pipeline configs.
//
//   [section]
//   key = value
//   name.rows = R
//   name.cols = C
//   v,v,...        (R lines of C comma-separated values, %.9g)
//
// Blank lines and lines starting with '#' are ignored on read. Entries are
// written in insertion order, so producers that insert in a fixed order get
// byte-identical files.

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "icx/error.hpp"
#include "icx/types.hpp"

namespace icx::text {

struct Entry {
  std::string key;
  std::variant<std::string, Matrix> value;
};

class Section {
 public:
  Section() = default;
  explicit Section(std::string name) : name_(std::move(name)) {}

  const std::string& name() const { return name_; }
  const std::vector<Entry>& entries() const { return entries_; }

  void set(std::string key, std::string value) { put(std::move(key), std::move(value)); }
  void set(std::string key, const char* value) { put(std::move(key), std::string(value)); }
  void set(std::string key, double value) { put(std::move(key), format_double(value)); }
  void set(std::string key, long long value) { put(std::move(key), std::to_string(value)); }
  void set(std::string key, int value) { set(std::move(key), static_cast<long long>(value)); }
  void set(std::string key, std::size_t value) { put(std::move(key), std::to_string(value)); }
  void set(std::string key, bool value) { put(std::move(key), std::string(value ? "true" : "false")); }
  void set_matrix(std::string key, Matrix m) { put(std::move(key), std::move(m)); }
  void set_row(std::string key, const Vector& v) { set_matrix(std::move(key), Matrix(v.transpose())); }

  bool has(std::string_view key) const { return find(key) != nullptr; }

  const std::string& scalar(std::string_view key) const {
    const Entry* e = find(key);
    if (!e) fail(ErrorKind::format, "section [" + name_ + "] lacks key '" + std::string(key) + "'");
    if (!std::holds_alternative<std::string>(e->value))
      fail(ErrorKind::format, "key '" + std::string(key) + "' in [" + name_ + "] is a matrix");
    return std::get<std::string>(e->value);
  }

  std::optional<std::string> scalar_or(std::string_view key) const {
    const Entry* e = find(key);
    if (!e || !std::holds_alternative<std::string>(e->value)) return std::nullopt;
    return std::get<std::string>(e->value);
  }

  double real(std::string_view key) const { return parse_double(scalar(key), key); }
  long long integer(std::string_view key) const { return parse_int(scalar(key), key); }
  bool flag(std::string_view key) const { return parse_bool(scalar(key), key); }

  const Matrix& matrix(std::string_view key) const {
    const Entry* e = find(key);
    if (!e) fail(ErrorKind::format, "section [" + name_ + "] lacks matrix '" + std::string(key) + "'");
    if (!std::holds_alternative<Matrix>(e->value))
      fail(ErrorKind::format, "key '" + std::string(key) + "' in [" + name_ + "] is not a matrix");
    return std::get<Matrix>(e->value);
  }

  Vector row_vector(std::string_view key) const {
    const Matrix& m = matrix(key);
    if (m.rows() != 1 && m.cols() != 0)
      fail(ErrorKind::dimension, "'" + std::string(key) + "' must be a single row");
    return m.rows() == 1 ? Vector(m.row(0).transpose()) : Vector();
  }

  static std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
  }

  static double parse_double(const std::string& s, std::string_view key = {}) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
      fail(ErrorKind::format, "invalid number '" + s + "'" +
                                  (key.empty() ? "" : " for key '" + std::string(key) + "'"));
    return v;
  }

  static long long parse_int(const std::string& s, std::string_view key = {}) {
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
      fail(ErrorKind::format, "invalid integer '" + s + "'" +
                                  (key.empty() ? "" : " for key '" + std::string(key) + "'"));
    return v;
  }

  static bool parse_bool(const std::string& s, std::string_view key = {}) {
    if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "off" || s == "no") return false;
    fail(ErrorKind::format, "invalid flag '" + s + "'" +
                                (key.empty() ? "" : " for key '" + std::string(key) + "'"));
  }

 private:
  void put(std::string key, std::variant<std::string, Matrix> value) {
    for (auto& e : entries_)
      if (e.key == key) {
        e.value = std::move(value);
        return;
      }
    entries_.push_back({std::move(key), std::move(value)});
  }

  const Entry* find(std::string_view key) const {
    for (const auto& e : entries_)
      if (e.key == key) return &e;
    return nullptr;
  }

  std::string name_;
  std::vector<Entry> entries_;
};

/// Ordered collection of sections. The unnamed root section holds entries
/// that appear before the first header.
class Document {
 public:
  Section& section(const std::string& name) {
    for (auto& s : sections_)
      if (s.name() == name) return s;
    sections_.emplace_back(name);
    return sections_.back();
  }

  const Section* find(std::string_view name) const {
    for (const auto& s : sections_)
      if (s.name() == name) return &s;
    return nullptr;
  }

  const Section& get(std::string_view name) const {
    const Section* s = find(name);
    if (!s) fail(ErrorKind::format, "missing section [" + std::string(name) + "]");
    return *s;
  }

  const std::vector<Section>& sections() const { return sections_; }

 private:
  std::vector<Section> sections_;
};

inline std::string serialize(const Document& doc) {
  std::string out;
  bool first = true;
  for (const auto& sec : doc.sections()) {
    if (!sec.name().empty()) {
      if (!first) out += "\n";
      out += "[" + sec.name() + "]\n";
    }
    first = false;
    for (const auto& e : sec.entries()) {
      if (const auto* s = std::get_if<std::string>(&e.value)) {
        out += e.key + " = " + *s + "\n";
        continue;
      }
      const Matrix& m = std::get<Matrix>(e.value);
      out += e.key + ".rows = " + std::to_string(m.rows()) + "\n";
      out += e.key + ".cols = " + std::to_string(m.cols()) + "\n";
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
          if (j) out += ",";
          out += Section::format_double(m(i, j));
        }
        out += "\n";
      }
    }
  }
  return out;
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace detail

/// Parses `text`. When `allowed` is non-empty, any section outside it is
/// rejected.
inline Document parse(const std::string& text, const std::vector<std::string>& allowed = {}) {
  Document doc;
  std::vector<std::string> lines;
  {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
  }
  Section* current = nullptr;
  auto root = [&]() -> Section& {
    if (!current) current = &doc.section("");
    return *current;
  };
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string line = detail::trim(lines[ln]);
    const std::string where = "line " + std::to_string(ln + 1);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(ErrorKind::format, where + ": malformed section header");
      const std::string name = line.substr(1, line.size() - 2);
      if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), name) == allowed.end())
        fail(ErrorKind::format, where + ": unknown section [" + name + "]");
      current = &doc.section(name);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorKind::format, where + ": expected 'key = value'");
    const std::string key = detail::trim(std::string_view(line).substr(0, eq));
    const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) fail(ErrorKind::format, where + ": empty key");
    if (!detail::ends_with(key, ".rows")) {
      root().set(key, value);
      continue;
    }
    const std::string name = key.substr(0, key.size() - 5);
    const long long rows = Section::parse_int(value, key);
    if (ln + 1 >= lines.size()) fail(ErrorKind::format, where + ": '" + name + ".cols' missing");
    const std::string cline = detail::trim(lines[++ln]);
    const auto ceq = cline.find('=');
    if (ceq == std::string::npos || detail::trim(cline.substr(0, ceq)) != name + ".cols")
      fail(ErrorKind::format, "line " + std::to_string(ln + 1) + ": expected '" + name + ".cols'");
    const long long cols = Section::parse_int(detail::trim(cline.substr(ceq + 1)), name + ".cols");
    if (rows < 0 || cols < 0) fail(ErrorKind::dimension, where + ": negative matrix size");
    Matrix m(rows, cols);
    for (long long i = 0; i < rows; ++i) {
      if (ln + 1 >= lines.size())
        fail(ErrorKind::dimension, "matrix '" + name + "' declares " + std::to_string(rows) +
                                       " rows but the file ends after " + std::to_string(i));
      const std::string row = detail::trim(lines[++ln]);
      if (row.find('=') != std::string::npos || row.empty() || row[0] == '[')
        fail(ErrorKind::dimension, "matrix '" + name + "' declares " + std::to_string(rows) +
                                       " rows but only " + std::to_string(i) + " follow");
      long long j = 0;
      std::size_t start = 0;
      while (true) {
        const auto comma = row.find(',', start);
        const std::string cell = detail::trim(row.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (j >= cols)
          fail(ErrorKind::dimension, "line " + std::to_string(ln + 1) + ": matrix '" + name +
                                         "' row has more than " + std::to_string(cols) + " values");
        m(i, j++) = Section::parse_double(cell, name);
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      if (j != cols)
        fail(ErrorKind::dimension, "line " + std::to_string(ln + 1) + ": matrix '" + name + "' row has " +
                                       std::to_string(j) + " values, expected " + std::to_string(cols));
    }
    root().set_matrix(name, std::move(m));
  }
  return doc;
}

}  // namespace icx::text
