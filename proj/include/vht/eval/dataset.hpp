#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vht/tree/instance.hpp"

namespace vht::eval {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DatasetFormat { automatic, arff, csv };

struct DatasetHeader {
  std::vector<AttributeInfo> attributes;
  AttributeInfo class_attribute;
  std::optional<std::uint64_t> instance_count;

  Schema schema() const {
    Schema s;
    s.attributes = attributes;
    s.classes = class_attribute.values;
    return s;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Splits one line on `sep`, honoring double quotes ("" escapes a quote)
/// and, for ARFF, single quotes.
inline std::vector<std::string> split_fields(std::string_view line, char sep, bool single_quotes = false) {
  std::vector<std::string> out;
  std::string cur;
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote) {
      if (c == quote) {
        if (i + 1 < line.size() && line[i + 1] == quote) {
          cur += c;
          ++i;
        } else {
          quote = 0;
        }
      } else {
        cur += c;
      }
    } else if (c == '"' || (single_quotes && c == '\'')) {
      quote = c;
    } else if (c == sep) {
      out.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quote) throw DatasetError("unterminated quote");
  out.emplace_back(trim(cur));
  return out;
}

inline std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

/// Orders nominal values numerically when they all parse as numbers.
inline std::vector<std::string> ordered_values(const std::set<std::string>& values) {
  std::vector<std::string> out(values.begin(), values.end());
  const bool numeric = std::all_of(out.begin(), out.end(), [](const auto& v) { return parse_number(v).has_value(); });
  if (numeric) {
    std::stable_sort(out.begin(), out.end(),
                     [](const auto& a, const auto& b) { return *parse_number(a) < *parse_number(b); });
  }
  return out;
}

}  // namespace detail

/// Streaming reader: the header is parsed (and, for CSV, column types are
/// inferred in a first pass) up front; rows are then read one at a time.
class DatasetReader {
 public:
  DatasetReader(const std::filesystem::path& path, DatasetFormat format = DatasetFormat::automatic) : path_(path) {
    if (format == DatasetFormat::automatic) {
      const auto ext = path.extension().string();
      if (ext == ".arff") {
        format = DatasetFormat::arff;
      } else if (ext == ".csv") {
        format = DatasetFormat::csv;
      } else {
        throw DatasetError("unknown dataset format for " + path.string());
      }
    }
    format_ = format;
    in_.open(path);
    if (!in_) throw DatasetError("cannot open " + path.string());
    if (format_ == DatasetFormat::arff) {
      read_arff_header();
    } else {
      scan_csv();
    }
  }

  const DatasetHeader& header() const { return header_; }
  Schema schema() const { return header_.schema(); }

  /// Next instance, or nullopt at end of file.
  std::optional<Instance> next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      const auto t = detail::trim(line);
      if (t.empty() || (format_ == DatasetFormat::arff && t.front() == '%')) continue;
      return parse_row(t);
    }
    return std::nullopt;
  }

  std::optional<Instance> operator()() { return next(); }

 private:
  std::string where() const { return path_.filename().string() + " line " + std::to_string(line_no_); }

  void read_arff_header() {
    std::string line;
    bool data = false;
    std::vector<AttributeInfo> all;
    while (!data && std::getline(in_, line)) {
      ++line_no_;
      auto t = detail::trim(line);
      if (t.empty() || t.front() == '%') continue;
      std::string lower(t.substr(0, std::min<std::size_t>(t.size(), 10)));
      std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
      if (lower.rfind("@relation", 0) == 0) continue;
      if (lower.rfind("@data", 0) == 0) {
        data = true;
        break;
      }
      if (lower.rfind("@attribute", 0) != 0) throw DatasetError(where() + ": unexpected header line");
      auto rest = detail::trim(t.substr(10));
      std::string name;
      if (!rest.empty() && (rest.front() == '\'' || rest.front() == '"')) {
        const auto close = rest.find(rest.front(), 1);
        if (close == std::string_view::npos) throw DatasetError(where() + ": unterminated attribute name");
        name = std::string(rest.substr(1, close - 1));
        rest = detail::trim(rest.substr(close + 1));
      } else {
        const auto sp = rest.find_first_of(" \t");
        if (sp == std::string_view::npos) throw DatasetError(where() + ": attribute without type");
        name = std::string(rest.substr(0, sp));
        rest = detail::trim(rest.substr(sp));
      }
      if (!rest.empty() && rest.front() == '{') {
        const auto close = rest.rfind('}');
        if (close == std::string_view::npos) throw DatasetError(where() + ": unterminated value list");
        AttributeInfo info{name, AttributeKind::categorical, detail::split_fields(rest.substr(1, close - 1), ',', true)};
        all.push_back(std::move(info));
      } else {
        std::string type(rest);
        std::transform(type.begin(), type.end(), type.begin(), [](unsigned char c) { return std::tolower(c); });
        if (type != "numeric" && type != "real" && type != "integer") {
          throw DatasetError(where() + ": unsupported attribute type '" + std::string(rest) + "'");
        }
        all.push_back(numeric_attribute(name));
      }
    }
    if (!data) throw DatasetError(path_.string() + ": missing @data section");
    finish_header(std::move(all));
  }

  void scan_csv() {
    std::string line;
    if (!std::getline(in_, line)) throw DatasetError(path_.string() + ": empty file, header required");
    ++line_no_;
    const auto names = detail::split_fields(line, ',');
    const std::size_t width = names.size();
    if (width < 2) throw DatasetError(where() + ": need at least one attribute and a class column");
    std::vector<bool> numeric(width, true);
    std::vector<std::set<std::string>> values(width);
    std::uint64_t rows = 0;
    while (std::getline(in_, line)) {
      ++line_no_;
      const auto t = detail::trim(line);
      if (t.empty()) continue;
      const auto f = detail::split_fields(t, ',');
      if (f.size() != width) {
        throw DatasetError(where() + ": expected " + std::to_string(width) + " fields, got " + std::to_string(f.size()));
      }
      for (std::size_t i = 0; i < width; ++i) {
        if (f[i] == "?" || f[i].empty()) throw DatasetError(where() + ": missing value in column " + names[i]);
        if (i + 1 == width || !numeric[i]) {
          values[i].insert(f[i]);
        } else if (!detail::parse_number(f[i])) {
          numeric[i] = false;
          values[i].insert(f[i]);
        }
      }
      ++rows;
    }
    // A column that turned categorical part way needs its earlier values too.
    std::vector<AttributeInfo> all;
    const bool rescan = std::find(numeric.begin(), numeric.end() - 1, false) != numeric.end() - 1;
    if (rescan) {
      in_.clear();
      in_.seekg(0);
      std::getline(in_, line);
      while (std::getline(in_, line)) {
        const auto t = detail::trim(line);
        if (t.empty()) continue;
        const auto f = detail::split_fields(t, ',');
        for (std::size_t i = 0; i + 1 < width; ++i) {
          if (!numeric[i]) values[i].insert(f[i]);
        }
      }
    }
    for (std::size_t i = 0; i < width; ++i) {
      if (i + 1 < width && numeric[i]) {
        all.push_back(numeric_attribute(names[i]));
      } else {
        all.push_back(AttributeInfo{names[i], AttributeKind::categorical, detail::ordered_values(values[i])});
      }
    }
    header_.instance_count = rows;
    finish_header(std::move(all));
    in_.clear();
    in_.seekg(0);
    std::getline(in_, line);
    line_no_ = 1;
  }

  void finish_header(std::vector<AttributeInfo> all) {
    if (all.size() < 2) throw DatasetError(path_.string() + ": need at least one attribute and a class");
    header_.class_attribute = std::move(all.back());
    all.pop_back();
    if (header_.class_attribute.kind != AttributeKind::categorical) {
      throw DatasetError(path_.string() + ": class attribute must be nominal");
    }
    if (header_.class_attribute.values.size() < 2) throw DatasetError(path_.string() + ": class needs two or more values");
    header_.attributes = std::move(all);
    index_.resize(header_.attributes.size() + 1);
    for (std::size_t i = 0; i <= header_.attributes.size(); ++i) {
      const auto& info = i < header_.attributes.size() ? header_.attributes[i] : header_.class_attribute;
      for (std::size_t v = 0; v < info.values.size(); ++v) index_[i].emplace(info.values[v], static_cast<double>(v));
    }
  }

  Instance parse_row(std::string_view line) {
    const auto f = detail::split_fields(line, ',', format_ == DatasetFormat::arff);
    const std::size_t m = header_.attributes.size();
    if (f.size() != m + 1) {
      throw DatasetError(where() + ": expected " + std::to_string(m + 1) + " fields, got " + std::to_string(f.size()));
    }
    std::vector<double> x(m);
    for (std::size_t i = 0; i <= m; ++i) {
      if (f[i] == "?") throw DatasetError(where() + ": missing values are not supported");
      const auto& info = i < m ? header_.attributes[i] : header_.class_attribute;
      double v;
      if (info.kind == AttributeKind::numeric) {
        const auto parsed = detail::parse_number(f[i]);
        if (!parsed) throw DatasetError(where() + ": cannot parse '" + f[i] + "' as a number");
        v = *parsed;
      } else {
        const auto it = index_[i].find(f[i]);
        if (it == index_[i].end()) throw DatasetError(where() + ": unknown value '" + f[i] + "' for " + info.name);
        v = it->second;
      }
      if (i < m) {
        x[i] = v;
      } else {
        return Instance::dense(std::move(x), static_cast<ClassIndex>(v));
      }
    }
    return Instance();  // unreachable
  }

  std::filesystem::path path_;
  DatasetFormat format_ = DatasetFormat::csv;
  std::ifstream in_;
  DatasetHeader header_;
  std::vector<std::unordered_map<std::string, double>> index_;
  std::uint64_t line_no_ = 0;
};

/// Opens a dataset for streaming.
inline DatasetReader load_dataset(const std::filesystem::path& path, DatasetFormat format = DatasetFormat::automatic) {
  return DatasetReader(path, format);
}

/// Writes instances as CSV with a header, class last (for exporting generated streams).
template <typename Next>
std::uint64_t write_csv_dataset(const std::filesystem::path& path, const Schema& schema, Next&& next) {
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot write " + path.string());
  for (const auto& a : schema.attributes) out << a.name << ',';
  out << "class\n";
  std::uint64_t n = 0;
  out.precision(17);
  while (auto inst = next()) {
    for (std::size_t i = 0; i < schema.num_attributes(); ++i) {
      const double v = inst->value(static_cast<AttributeId>(i));
      if (schema.attributes[i].kind == AttributeKind::categorical) {
        out << schema.attributes[i].values.at(static_cast<std::size_t>(v));
      } else {
        out << v;
      }
      out << ',';
    }
    out << schema.classes.at(inst->class_index()) << '\n';
    ++n;
  }
  if (!out) throw DatasetError("write failed for " + path.string());
  return n;
}

}  // namespace vht::eval
