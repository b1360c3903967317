#pragma once

#include <optional>
#include <unordered_map>
#include <vector>

#include <span>

#include "vht/tree/attribute_stats.hpp"
#include "vht/tree/split.hpp"

namespace vht {

/// Attribute statistics of one leaf, created lazily per attribute. Narrow
/// schemas use a flat slot per attribute, wide (sparse) ones a hash map.
class LeafCells {
 public:
  static constexpr std::size_t kFlatLimit = 4096;

  LeafCells() = default;
  explicit LeafCells(std::size_t num_attributes) : flat_(num_attributes <= kFlatLimit) {
    if (flat_) slots_.resize(num_attributes);
  }

  AttributeStats& get_or_create(AttributeId id, AttributeKind kind, std::uint32_t num_classes) {
    if (flat_) {
      auto& slot = slots_[id];
      if (!slot) {
        slot.emplace(make_attribute_stats(kind, num_classes));
        ++size_;
      }
      return *slot;
    }
    auto [it, inserted] = map_.try_emplace(id, make_attribute_stats(kind, num_classes));
    if (inserted) ++size_;
    return it->second;
  }

  const AttributeStats* find(AttributeId id) const {
    if (flat_) return id < slots_.size() && slots_[id] ? &*slots_[id] : nullptr;
    const auto it = map_.find(id);
    return it == map_.end() ? nullptr : &it->second;
  }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    if (flat_) {
      for (std::size_t i = 0; i < slots_.size(); ++i) {
        if (slots_[i]) fn(static_cast<AttributeId>(i), *slots_[i]);
      }
    } else {
      for (const auto& [id, stats] : map_) fn(id, stats);
    }
  }

  std::size_t size() const { return size_; }

  /// Largest per-attribute weight total; a lower bound on the leaf's weight.
  double max_cell_weight() const {
    double best = 0.0;
    for_each([&](AttributeId, const AttributeStats& s) { best = std::max(best, total_weight(s)); });
    return best;
  }

 private:
  bool flat_ = false;
  std::vector<std::optional<AttributeStats>> slots_;
  std::unordered_map<AttributeId, AttributeStats> map_;
  std::size_t size_ = 0;
};

/// Candidates for every attribute in `cells`, relative to the leaf's basis
/// distribution. Attributes that cannot split the leaf are left out.
inline std::vector<SplitCandidate> leaf_candidates(const LeafCells& cells, const Schema& schema,
                                                   std::span<const double> basis,
                                                   const SplitParams& params) {
  std::vector<SplitCandidate> out;
  cells.for_each([&](AttributeId id, const AttributeStats& stats) {
    const auto implicit = implicit_zero_weights(basis, stats);
    auto c = attribute_candidate(id, stats, schema, implicit, params);
    if (!c.is_no_split()) out.push_back(std::move(c));
  });
  return out;
}

}  // namespace vht
