#pragma once

#include <optional>
#include <vector>

#include "vht/eval/prequential.hpp"
#include "vht/tree/hoeffding_tree.hpp"

namespace vht::baselines {

/// Prequential adapter over the sequential Hoeffding tree.
class SequentialLearner {
 public:
  explicit SequentialLearner(Schema schema, HoeffdingParams params = {}) : tree_(std::move(schema), params) {}

  ClassIndex predict(const Instance& inst) const { return tree_.predict(inst); }
  void train(const Instance& inst) {
    inst.validate(tree_.schema());
    tree_.train(inst);
  }
  std::uint64_t split_count() const { return tree_.model().num_splits(); }
  std::uint64_t leaf_count() const { return tree_.model().num_leaves(); }

  const HoeffdingTree& tree() const { return tree_; }

 private:
  HoeffdingTree tree_;
};

struct SequentialResult {
  std::vector<eval::MetricsRow> rows;
  HoeffdingTree tree;
};

/// Test-then-train run of the sequential tree; the reference for all ratios.
template <typename Next>
SequentialResult run_sequential(const Schema& schema, Next&& next, std::uint64_t report_every,
                                HoeffdingParams params = {}, eval::PrequentialEvaluator::Clock clock = {}) {
  SequentialLearner learner(schema, params);
  auto rows = eval::prequential(learner, std::forward<Next>(next), report_every, std::move(clock));
  return SequentialResult{std::move(rows), learner.tree()};
}

}  // namespace vht::baselines
