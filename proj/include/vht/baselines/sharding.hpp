#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "vht/engine/runtime.hpp"
#include "vht/tree/hoeffding_tree.hpp"
#include "vht/vertical/events.hpp"

namespace vht::baselines {

/// Class with the most votes; ties go to the lowest class index.
inline ClassIndex majority_vote(const std::vector<ClassIndex>& votes, std::uint32_t num_classes) {
  std::vector<std::size_t> tally(std::max<std::uint32_t>(num_classes, 1), 0);
  for (auto v : votes) {
    if (v >= tally.size()) tally.resize(v + 1, 0);
    ++tally[v];
  }
  ClassIndex best = 0;
  for (ClassIndex k = 1; k < tally.size(); ++k) {
    if (tally[k] > tally[best]) best = k;
  }
  return best;
}

/// Horizontal parallelism: p independent Hoeffding trees, instance i trains
/// shard i mod p, prediction by unweighted majority vote.
class ShardEnsemble {
 public:
  ShardEnsemble(const Schema& schema, std::size_t shards, HoeffdingParams params = {}) {
    if (shards == 0) throw std::invalid_argument("sharding needs at least one shard");
    shards_.reserve(shards);
    for (std::size_t s = 0; s < shards; ++s) shards_.emplace_back(schema, params);
  }

  std::size_t size() const { return shards_.size(); }
  const HoeffdingTree& shard(std::size_t s) const { return shards_.at(s); }
  HoeffdingTree& shard(std::size_t s) { return shards_.at(s); }

  void train(const Instance& inst) {
    if (!inst.is_labeled()) return;
    shards_[next_ % shards_.size()].train(inst);
    ++next_;
  }

  std::vector<ClassIndex> votes(const Instance& inst) const {
    std::vector<ClassIndex> out;
    out.reserve(shards_.size());
    for (const auto& t : shards_) out.push_back(t.predict(inst));
    return out;
  }

  ClassIndex predict(const Instance& inst) const {
    return majority_vote(votes(inst), shards_.front().model().num_classes());
  }

  std::size_t cell_count() const {
    std::size_t n = 0;
    for (const auto& t : shards_) n += t.cell_count();
    return n;
  }
  std::uint64_t split_count() const {
    std::uint64_t n = 0;
    for (const auto& t : shards_) n += t.model().num_splits();
    return n;
  }
  std::uint64_t leaf_count() const {
    std::uint64_t n = 0;
    for (const auto& t : shards_) n += t.model().num_leaves();
    return n;
  }

 private:
  std::vector<HoeffdingTree> shards_;
  std::uint64_t next_ = 0;
};

// Sharding as an engine topology: source -all-> shard(p) -shuffle-> voter(1).
// Each shard votes on every instance before training on its own slice, so the
// votes equal ShardEnsemble's in every execution mode.

struct VoteEvent {
  std::uint64_t index = 0;
  ClassIndex vote = 0;
  std::optional<ClassIndex> actual;
  double weight = 1.0;
  std::size_t splits = 0;
  std::size_t leaves = 1;
};

using ShardEvent = std::variant<vertical::InstanceEvent, VoteEvent>;
using PredictionSink = std::function<void(const vertical::PredictionEvent&)>;

namespace shard_streams {
inline constexpr engine::StreamId instances = 1;
inline constexpr engine::StreamId votes = 2;
}  // namespace shard_streams

struct ShardingConfig {
  std::size_t parallelism = 2;
  HoeffdingParams params;
  std::size_t queue_capacity = 1024;
};

class ShardProcessor final : public engine::Processor<ShardEvent> {
 public:
  ShardProcessor(const Schema& schema, HoeffdingParams params, std::size_t replica, std::size_t shards)
      : tree_(schema, params), replica_(replica), shards_(shards) {}

  void process(engine::Envelope<ShardEvent>& in, engine::Context<ShardEvent>& ctx) override {
    const auto& ev = std::get<vertical::InstanceEvent>(in.payload);
    const auto& inst = ev.instance;
    VoteEvent v{ev.index, tree_.predict(inst), inst.label(), inst.weight(), tree_.model().num_splits(),
                tree_.model().num_leaves()};
    ctx.emit(shard_streams::votes, v);
    if (inst.is_labeled() && ev.index % shards_ == replica_) tree_.train(inst);
  }

  const HoeffdingTree& tree() const { return tree_; }

 private:
  HoeffdingTree tree_;
  std::size_t replica_;
  std::size_t shards_;
};

class VoterProcessor final : public engine::Processor<ShardEvent> {
 public:
  VoterProcessor(std::size_t shards, std::uint32_t num_classes, PredictionSink sink)
      : shards_(shards), num_classes_(num_classes), sink_(std::move(sink)) {}

  void process(engine::Envelope<ShardEvent>& in, engine::Context<ShardEvent>&) override {
    const auto& v = std::get<VoteEvent>(in.payload);
    auto& p = pending_[v.index];
    p.votes.push_back(v.vote);
    p.splits += v.splits;
    p.leaves += v.leaves;
    if (p.votes.size() < shards_) return;
    vertical::PredictionEvent out{v.index, majority_vote(p.votes, num_classes_), v.actual, v.weight, p.splits,
                                  p.leaves};
    pending_.erase(v.index);
    ++decided_;
    if (sink_) sink_(out);
  }

  std::uint64_t decided() const { return decided_; }

 private:
  struct Pending {
    std::vector<ClassIndex> votes;
    std::size_t splits = 0;
    std::size_t leaves = 0;
  };
  std::size_t shards_;
  std::uint32_t num_classes_;
  PredictionSink sink_;
  std::unordered_map<std::uint64_t, Pending> pending_;
  std::uint64_t decided_ = 0;
};

struct ShardingLayout {
  static constexpr std::size_t source = 0;
  static constexpr std::size_t shard = 1;
  static constexpr std::size_t voter = 2;
};

inline engine::Topology<ShardEvent> build_sharding_topology(const ShardingConfig& config, const Schema& schema,
                                                            PredictionSink sink = {}) {
  if (config.parallelism == 0) throw std::invalid_argument("sharding needs at least one shard");
  engine::TopologyBuilder<ShardEvent> b;
  const auto src = b.add_processor("source", 1, [](std::size_t) {
    return std::make_unique<engine::FunctionProcessor<ShardEvent>>(
        [](engine::Envelope<ShardEvent>& in, engine::Context<ShardEvent>& ctx) {
          ctx.emit(shard_streams::instances, std::move(in.payload));
        });
  });
  const auto shard = b.add_processor("shard", config.parallelism, [schema, config](std::size_t r) {
    return std::make_unique<ShardProcessor>(schema, config.params, r, config.parallelism);
  });
  const auto voter = b.add_processor("voter", 1, [config, sink, c = schema.num_classes()](std::size_t) {
    return std::make_unique<VoterProcessor>(config.parallelism, c, sink);
  });
  b.connect(shard_streams::instances, src, shard, engine::Grouping::all)
      .connect(shard_streams::votes, shard, voter, engine::Grouping::shuffle)
      .entry(src)
      .queue_capacity(config.queue_capacity);
  return b.build();
}

struct ShardingResult {
  engine::RunReport report;
  std::vector<TreeModel> trees;
  std::vector<std::size_t> cells_per_shard;

  std::size_t total_cells() const {
    std::size_t n = 0;
    for (auto c : cells_per_shard) n += c;
    return n;
  }
};

template <typename Next>
ShardingResult run_sharding(const ShardingConfig& config, const Schema& schema, Next&& next, PredictionSink sink = {},
                            engine::RunOptions<ShardEvent> options = {}) {
  engine::Runner<ShardEvent> runner(build_sharding_topology(config, schema, std::move(sink)), std::move(options));
  std::uint64_t index = 0;
  ShardingResult out;
  out.report = runner.run([&]() -> std::optional<ShardEvent> {
    auto inst = next();
    if (!inst) return std::nullopt;
    try {
      inst->validate(schema);
    } catch (const SchemaError& e) {
      throw SchemaError("instance " + std::to_string(index) + ": " + e.what());
    }
    return ShardEvent{vertical::InstanceEvent{std::move(*inst), index++}};
  });
  for (std::size_t r = 0; r < config.parallelism; ++r) {
    const auto& t = runner.template processor_as<ShardProcessor>(ShardingLayout::shard, r).tree();
    out.trees.push_back(t.model());
    out.cells_per_shard.push_back(t.cell_count());
  }
  return out;
}

}  // namespace vht::baselines
