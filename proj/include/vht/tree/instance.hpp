#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vht {

using AttributeId = std::uint32_t;
using ClassIndex = std::uint32_t;
using LeafId = std::uint64_t;

enum class AttributeKind : std::uint8_t { categorical = 0, numeric = 1 };

struct AttributeInfo {
  std::string name;
  AttributeKind kind = AttributeKind::numeric;
  // Categorical only: value labels; values are encoded as indices into this list.
  std::vector<std::string> values;

  std::uint32_t num_values() const { return static_cast<std::uint32_t>(values.size()); }
};

/// Describes the attribute layout and the class attribute of a stream.
struct Schema {
  std::vector<AttributeInfo> attributes;
  std::vector<std::string> classes;

  std::size_t num_attributes() const { return attributes.size(); }
  std::uint32_t num_classes() const { return static_cast<std::uint32_t>(classes.size()); }

  const AttributeInfo& attribute(AttributeId id) const { return attributes.at(id); }
  bool is_categorical(AttributeId id) const {
    return attributes[id].kind == AttributeKind::categorical;
  }

  /// Largest branch count a split on any attribute of this schema can produce.
  std::uint32_t max_branches() const {
    std::uint32_t branches = 2;
    for (const auto& a : attributes) {
      if (a.kind == AttributeKind::categorical && a.num_values() > branches) {
        branches = a.num_values();
      }
    }
    return branches;
  }

  friend bool operator==(const Schema& a, const Schema& b) {
    if (a.classes != b.classes || a.attributes.size() != b.attributes.size()) return false;
    for (std::size_t i = 0; i < a.attributes.size(); ++i) {
      const auto& x = a.attributes[i];
      const auto& y = b.attributes[i];
      if (x.name != y.name || x.kind != y.kind || x.values != y.values) return false;
    }
    return true;
  }
};

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline AttributeInfo numeric_attribute(std::string name) {
  return AttributeInfo{std::move(name), AttributeKind::numeric, {}};
}

inline AttributeInfo categorical_attribute(std::string name, std::uint32_t num_values) {
  AttributeInfo info{std::move(name), AttributeKind::categorical, {}};
  info.values.reserve(num_values);
  for (std::uint32_t v = 0; v < num_values; ++v) info.values.push_back(std::to_string(v));
  return info;
}

inline std::vector<std::string> class_labels(std::uint32_t num_classes) {
  std::vector<std::string> out;
  for (std::uint32_t k = 0; k < num_classes; ++k) out.push_back("class" + std::to_string(k));
  return out;
}

/// One example of the stream. Dense instances store every attribute value in
/// order; sparse instances store (id, value) pairs with strictly increasing
/// ids, absent attributes reading as zero.
class Instance {
 public:
  using Entry = std::pair<AttributeId, double>;

  Instance() = default;

  static Instance dense(std::vector<double> values, std::optional<ClassIndex> label,
                        double weight = 1.0) {
    Instance inst;
    inst.values_ = std::move(values);
    inst.label_ = label;
    inst.weight_ = weight;
    return inst;
  }

  static Instance sparse(std::vector<Entry> entries, std::size_t num_attributes,
                         std::optional<ClassIndex> label, double weight = 1.0) {
    Instance inst;
    inst.sparse_ = true;
    inst.width_ = num_attributes;
    inst.ids_.reserve(entries.size());
    inst.values_.reserve(entries.size());
    for (const auto& [id, value] : entries) {
      inst.ids_.push_back(id);
      inst.values_.push_back(value);
    }
    inst.label_ = label;
    inst.weight_ = weight;
    return inst;
  }

  bool is_sparse() const { return sparse_; }
  /// Declared attribute count (m) for sparse instances, value count for dense.
  std::size_t width() const { return sparse_ ? width_ : values_.size(); }
  /// Number of stored attribute values.
  std::size_t num_present() const { return values_.size(); }

  std::optional<ClassIndex> label() const { return label_; }
  bool is_labeled() const { return label_.has_value(); }
  ClassIndex class_index() const { return label_.value(); }
  double weight() const { return weight_; }

  void set_label(std::optional<ClassIndex> label) { label_ = label; }
  void set_weight(double weight) { weight_ = weight; }

  /// Value of attribute `id`; sparse attributes that are absent read as 0.
  double value(AttributeId id) const {
    if (!sparse_) return values_[id];
    auto lo = std::size_t{0};
    auto hi = ids_.size();
    while (lo < hi) {
      const auto mid = (lo + hi) / 2;
      if (ids_[mid] < id) {
        lo = mid + 1;
      } else {
        hi = mid;
      }
    }
    return (lo < ids_.size() && ids_[lo] == id) ? values_[lo] : 0.0;
  }

  bool has(AttributeId id) const {
    if (!sparse_) return id < values_.size();
    for (auto a : ids_) {
      if (a == id) return true;
      if (a > id) return false;
    }
    return false;
  }

  /// Calls `fn(id, value)` for every stored attribute.
  template <typename Fn>
  void for_each_present(Fn&& fn) const {
    if (sparse_) {
      for (std::size_t i = 0; i < ids_.size(); ++i) fn(ids_[i], values_[i]);
    } else {
      for (std::size_t i = 0; i < values_.size(); ++i) fn(static_cast<AttributeId>(i), values_[i]);
    }
  }

  const std::vector<double>& raw_values() const { return values_; }
  const std::vector<AttributeId>& raw_ids() const { return ids_; }

  /// Throws SchemaError if the instance does not fit `schema`.
  void validate(const Schema& schema) const {
    const auto m = schema.num_attributes();
    if (!(weight_ >= 0.0) || !std::isfinite(weight_)) {
      throw SchemaError("instance weight must be a finite non-negative number");
    }
    if (label_ && *label_ >= schema.num_classes()) {
      throw SchemaError("class index " + std::to_string(*label_) + " out of range");
    }
    if (sparse_) {
      if (width_ != m) throw SchemaError("sparse instance width does not match schema");
      for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (ids_[i] >= m) throw SchemaError("sparse attribute id out of range");
        if (i > 0 && ids_[i] <= ids_[i - 1]) {
          throw SchemaError("sparse attribute ids must be strictly increasing");
        }
      }
    } else if (values_.size() != m) {
      throw SchemaError("dense instance has " + std::to_string(values_.size()) +
                        " values, schema declares " + std::to_string(m));
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
      const auto id = sparse_ ? ids_[i] : static_cast<AttributeId>(i);
      const double v = values_[i];
      if (!std::isfinite(v)) throw SchemaError("attribute value is not finite");
      if (schema.is_categorical(id)) {
        const auto n = schema.attributes[id].num_values();
        if (v < 0 || v != std::floor(v) || v >= n) {
          throw SchemaError("categorical value out of range for attribute " +
                            schema.attributes[id].name);
        }
      }
    }
  }

  friend bool operator==(const Instance& a, const Instance& b) {
    return a.sparse_ == b.sparse_ && a.width_ == b.width_ && a.ids_ == b.ids_ &&
           a.values_ == b.values_ && a.label_ == b.label_ && a.weight_ == b.weight_;
  }

 private:
  bool sparse_ = false;
  std::size_t width_ = 0;
  std::vector<AttributeId> ids_;
  std::vector<double> values_;
  std::optional<ClassIndex> label_;
  double weight_ = 1.0;
};

}  // namespace vht
