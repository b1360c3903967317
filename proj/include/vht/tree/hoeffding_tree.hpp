#pragma once

#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "vht/tree/leaf_cells.hpp"
#include "vht/tree/tree_model.hpp"

namespace vht {

/// One evaluated split attempt, kept for replaying the split guard.
struct SplitRecord {
  LeafId leaf = 0;
  double n = 0.0;
  TopTwo top;
  double epsilon = 0.0;
  bool split = false;
};

/// The sequential Hoeffding tree learner.
class HoeffdingTree {
 public:
  explicit HoeffdingTree(Schema schema, HoeffdingParams params = {})
      : params_(params), model_(std::move(schema)) {}

  const TreeModel& model() const { return model_; }
  TreeModel& model() { return model_; }
  const HoeffdingParams& params() const { return params_; }
  const Schema& schema() const { return model_.schema(); }

  ClassIndex predict(const Instance& inst) const { return model_.predict(inst); }

  void train(const Instance& inst) {
    if (!inst.is_labeled()) return;
    const ClassIndex k = inst.class_index();
    const double w = inst.weight();
    const LeafId id = model_.sort_to_leaf(inst);
    auto& cells = cells_for(id);
    const auto& schema = model_.schema();
    const auto C = model_.num_classes();
    inst.for_each_present([&](AttributeId a, double v) {
      update_stats(cells.get_or_create(a, schema.attributes[a].kind, C), v, k, w);
    });
    model_.count(id, k, w);
    ++trained_;

    auto& leaf = model_.leaf(id);
    const double n = leaf.weight();
    if (n - leaf.weight_at_last_attempt >= params_.grace_period) {
      leaf.weight_at_last_attempt = n;
      if (!leaf.is_pure()) attempt_split(id);
    }
  }

  /// Evaluates the split guard at `id` without changing the tree.
  SplitDecision evaluate_split(LeafId id) const {
    const auto& leaf = model_.leaf(id);
    TopTwo top;
    if (const auto it = cells_.find(id); it != cells_.end()) {
      top = top_two(leaf_candidates(it->second, model_.schema(), leaf.basis_counts, params_.split));
    }
    return decide_split(top, leaf.weight(), model_.num_classes(), params_);
  }

  /// Runs the split guard at `id` and applies the split if it passes.
  SplitDecision attempt_split(LeafId id) {
    auto decision = evaluate_split(id);
    if (record_attempts_) {
      attempts_.push_back(
          SplitRecord{id, decision.n, TopTwo{decision.best, decision.second}, decision.epsilon,
                      decision.split});
    }
    if (decision.split) {
      model_.split_leaf(id, decision.best);
      cells_.erase(id);
    }
    return decision;
  }

  void record_attempts(bool on) { record_attempts_ = on; }
  const std::vector<SplitRecord>& attempts() const { return attempts_; }

  std::size_t leaf_count() const { return model_.num_leaves(); }
  std::size_t split_count() const { return model_.num_splits(); }
  std::uint64_t instances_trained() const { return trained_; }

  /// Number of (leaf, attribute) statistics cells currently held.
  std::size_t cell_count() const {
    std::size_t n = 0;
    for (const auto& [_, c] : cells_) n += c.size();
    return n;
  }

  const LeafCells* cells(LeafId id) const {
    const auto it = cells_.find(id);
    return it == cells_.end() ? nullptr : &it->second;
  }

 private:
  LeafCells& cells_for(LeafId id) {
    auto it = cells_.find(id);
    if (it == cells_.end()) it = cells_.emplace(id, LeafCells(model_.schema().num_attributes())).first;
    return it->second;
  }

  HoeffdingParams params_;
  TreeModel model_;
  std::unordered_map<LeafId, LeafCells> cells_;
  std::vector<SplitRecord> attempts_;
  bool record_attempts_ = false;
  std::uint64_t trained_ = 0;
};

/// Trains a fresh tree on `next()` until it returns nullopt; every instance is
/// checked against the schema and read exactly once.
template <typename Next>
HoeffdingTree train_sequential(const Schema& schema, Next&& next, HoeffdingParams params = {}) {
  HoeffdingTree tree(schema, params);
  std::uint64_t index = 0;
  while (auto inst = next()) {
    try {
      inst->validate(schema);
    } catch (const SchemaError& e) {
      throw SchemaError("instance " + std::to_string(index) + ": " + e.what());
    }
    tree.train(*inst);
    ++index;
  }
  return tree;
}

template <typename Container>
HoeffdingTree train_sequential_on(const Schema& schema, const Container& instances,
                                  HoeffdingParams params = {}) {
  auto it = std::begin(instances);
  const auto end = std::end(instances);
  return train_sequential(
      schema,
      [&]() -> std::optional<Instance> {
        if (it == end) return std::nullopt;
        return *it++;
      },
      params);
}

}  // namespace vht
