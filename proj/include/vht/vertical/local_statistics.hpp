#pragma once

#include <memory>
#include <unordered_map>

#include "vht/tree/leaf_cells.hpp"
#include "vht/vertical/events.hpp"

namespace vht::vertical {

/// The statistics table of one replica: (leaf id, attribute id) -> stats.
/// Only keys routed to this replica ever appear here.
class LocalStatistics {
 public:
  LocalStatistics(std::shared_ptr<const Schema> schema, SplitParams params, std::size_t replica = 0)
      : schema_(std::move(schema)), params_(params), replica_(replica) {}

  void on_attribute(const AttributeEvent& e) {
    auto it = table_.find(e.leaf);
    if (it == table_.end()) it = table_.emplace(e.leaf, LeafCells(schema_->num_attributes())).first;
    const auto kind = schema_->attributes[e.attribute].kind;
    update_stats(it->second.get_or_create(e.attribute, kind, schema_->num_classes()), e.value, e.label, e.weight);
  }

  void on_batch(const AttributeBatchEvent& b) {
    auto it = table_.find(b.leaf);
    if (it == table_.end()) it = table_.emplace(b.leaf, LeafCells(schema_->num_attributes())).first;
    const auto C = schema_->num_classes();
    for (const auto& [a, v] : b.values) {
      update_stats(it->second.get_or_create(a, schema_->attributes[a].kind, C), v, b.label, b.weight);
    }
  }

  LocalResultEvent on_compute(const ComputeEvent& e) const {
    LocalResultEvent r;
    r.leaf = e.leaf;
    r.attempt = e.attempt;
    r.replica = replica_;
    const auto it = table_.find(e.leaf);
    if (it == table_.end()) return r;
    r.top = top_two(leaf_candidates(it->second, *schema_, e.basis, params_));
    r.n_estimate = it->second.max_cell_weight();
    return r;
  }

  /// Removes the leaf's cells; unknown leaves are ignored.
  std::size_t on_drop(const DropEvent& e) {
    const auto it = table_.find(e.leaf);
    if (it == table_.end()) return 0;
    const auto n = it->second.size();
    table_.erase(it);
    return n;
  }

  std::size_t cell_count() const {
    std::size_t n = 0;
    for (const auto& [_, cells] : table_) n += cells.size();
    return n;
  }
  std::size_t leaf_count() const { return table_.size(); }
  bool has_leaf(LeafId id) const { return table_.count(id) != 0; }
  const LeafCells* cells(LeafId id) const {
    const auto it = table_.find(id);
    return it == table_.end() ? nullptr : &it->second;
  }
  std::size_t replica() const { return replica_; }

 private:
  std::shared_ptr<const Schema> schema_;
  SplitParams params_;
  std::size_t replica_;
  std::unordered_map<LeafId, LeafCells> table_;
};

}  // namespace vht::vertical
