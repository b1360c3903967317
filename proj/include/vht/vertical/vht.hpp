#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vht/engine/runtime.hpp"
#include "vht/vertical/local_statistics.hpp"
#include "vht/vertical/model_aggregator.hpp"

namespace vht::vertical {

struct VhtConfig {
  std::size_t parallelism = 2;     // statistics replicas (p)
  std::size_t model_replicas = 1;  // q
  Variant variant = Variant::wok;
  std::size_t buffer_size = 0;     // z, used by Variant::wk
  std::uint64_t timeout = 30;
  HoeffdingParams params;
  std::optional<std::filesystem::path> spill_dir;
  std::size_t queue_capacity = 1024;

  void validate() const {
    if (parallelism == 0) throw std::invalid_argument("statistics parallelism must be at least 1");
    if (model_replicas == 0) throw std::invalid_argument("model parallelism must be at least 1");
    if (timeout == 0) throw std::invalid_argument("timeout must be positive");
    if (queue_capacity == 0) throw std::invalid_argument("queue capacity must be at least 1");
    if (!(params.delta > 0.0 && params.delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
    if (!(params.grace_period > 0.0)) throw std::invalid_argument("grace period must be positive");
    if (!(params.tie_threshold >= 0.0)) throw std::invalid_argument("tie threshold must be non-negative");
  }
};

using Event = ContentEvent;
using PredictionSink = std::function<void(const PredictionEvent&)>;

/// Forwards external instances into the topology.
class SourceProcessor final : public engine::Processor<Event> {
 public:
  void process(engine::Envelope<Event>& in, engine::Context<Event>& ctx) override {
    ctx.emit(streams::instances, std::move(in.payload));
  }
};

class ModelProcessor final : public engine::Processor<Event> {
 public:
  ModelProcessor(std::shared_ptr<const Schema> schema, ModelConfig config)
      : aggregator_(std::move(schema), std::move(config)) {}

  void process(engine::Envelope<Event>& in, engine::Context<Event>& ctx) override {
    const auto now = ctx.now();
    ModelAggregator::Emit emit = [&ctx](engine::StreamId s, Event e) { ctx.emit(s, std::move(e)); };
    aggregator_.check_timeouts(now, emit);
    if (auto* i = std::get_if<InstanceEvent>(&in.payload)) {
      aggregator_.on_instance(*i, now, emit);
    } else if (auto* r = std::get_if<LocalResultEvent>(&in.payload)) {
      aggregator_.on_local_result(*r, now, emit);
    } else if (auto* d = std::get_if<DecisionEvent>(&in.payload)) {
      aggregator_.on_decision(*d, now, emit);
    } else {
      throw std::logic_error("model received an unexpected event type");
    }
  }

  const ModelAggregator& aggregator() const { return aggregator_; }

 private:
  ModelAggregator aggregator_;
};

class StatisticsProcessor final : public engine::Processor<Event> {
 public:
  StatisticsProcessor(std::shared_ptr<const Schema> schema, SplitParams params, std::size_t replica)
      : stats_(std::move(schema), params, replica) {}

  void process(engine::Envelope<Event>& in, engine::Context<Event>& ctx) override {
    if (auto* b = std::get_if<AttributeBatchEvent>(&in.payload)) {
      stats_.on_batch(*b);
    } else if (auto* a = std::get_if<AttributeEvent>(&in.payload)) {
      stats_.on_attribute(*a);
    } else if (auto* c = std::get_if<ComputeEvent>(&in.payload)) {
      ctx.emit(streams::results, stats_.on_compute(*c));
    } else if (auto* d = std::get_if<DropEvent>(&in.payload)) {
      stats_.on_drop(*d);
    } else {
      throw std::logic_error("statistics received an unexpected event type");
    }
  }

  const LocalStatistics& statistics() const { return stats_; }

 private:
  LocalStatistics stats_;
};

class EvaluatorProcessor final : public engine::Processor<Event> {
 public:
  explicit EvaluatorProcessor(PredictionSink sink) : sink_(std::move(sink)) {}
  void process(engine::Envelope<Event>& in, engine::Context<Event>&) override {
    const auto& p = std::get<PredictionEvent>(in.payload);
    ++count_;
    if (sink_) sink_(p);
  }
  std::uint64_t count() const { return count_; }

 private:
  PredictionSink sink_;
  std::uint64_t count_ = 0;
};

/// Processor indices of the topology built below.
struct VhtLayout {
  static constexpr std::size_t source = 0;
  static constexpr std::size_t model = 1;
  static constexpr std::size_t statistics = 2;
  static constexpr std::size_t evaluator = 3;
};

/// source -> model (shuffle); model -> statistics (key on leaf and attribute
/// for attribute batches, all for compute and drop); statistics -> model (all);
/// model -> evaluator; with several model replicas the primary also relays
/// its decisions to the others.
inline engine::Topology<Event> build_vht_topology(const VhtConfig& config, Schema schema,
                                                  PredictionSink sink = {}) {
  config.validate();
  auto shared = std::make_shared<const Schema>(std::move(schema));
  engine::TopologyBuilder<Event> b;
  const auto src = b.add_processor("source", 1, [](std::size_t) { return std::make_unique<SourceProcessor>(); });
  const auto model = b.add_processor("model", config.model_replicas, [shared, config](std::size_t r) {
    ModelConfig mc;
    mc.params = config.params;
    mc.stats_parallelism = config.parallelism;
    mc.model_parallelism = config.model_replicas;
    mc.replica = r;
    mc.variant = config.variant;
    mc.buffer_size = config.buffer_size;
    mc.timeout = config.timeout;
    mc.spill_dir = config.spill_dir;
    return std::make_unique<ModelProcessor>(shared, mc);
  });
  const auto stats = b.add_processor("statistics", config.parallelism, [shared, config](std::size_t r) {
    return std::make_unique<StatisticsProcessor>(shared, config.params.split, r);
  });
  const auto eval =
      b.add_processor("evaluator", 1, [sink](std::size_t) { return std::make_unique<EvaluatorProcessor>(sink); });
  b.connect(streams::instances, src, model, engine::Grouping::shuffle)
      .connect_partitioned(streams::attributes, model, stats, attribute_partition)
      .connect(streams::control, model, stats, engine::Grouping::all)
      .connect(streams::results, stats, model, engine::Grouping::all)
      .connect(streams::predictions, model, eval, engine::Grouping::shuffle);
  if (config.model_replicas > 1) b.connect(streams::decisions, model, model, engine::Grouping::all);
  b.entry(src).queue_capacity(config.queue_capacity);
  return b.build();
}

/// Everything worth inspecting after a run.
struct VhtResult {
  engine::RunReport report;
  std::vector<TreeModel> trees;  // one per model replica
  std::vector<AttemptTrace> traces;  // primary's attempts
  std::vector<std::size_t> cells_per_replica;
  std::uint64_t stale_results = 0;
  std::uint64_t timeouts = 0;
  std::uint64_t discarded = 0;

  const TreeModel& tree() const { return trees.front(); }
  std::size_t total_cells() const {
    std::size_t n = 0;
    for (auto c : cells_per_replica) n += c;
    return n;
  }
};

/// Runs the vertical tree over `next()` until it yields nothing.
template <typename Next>
VhtResult run_vht(const VhtConfig& config, const Schema& schema, Next&& next, PredictionSink sink = {},
                  engine::RunOptions<Event> options = {}) {
  engine::Runner<Event> runner(build_vht_topology(config, schema, std::move(sink)), std::move(options));
  std::uint64_t index = 0;
  VhtResult out;
  out.report = runner.run([&]() -> std::optional<Event> {
    auto inst = next();
    if (!inst) return std::nullopt;
    try {
      inst->validate(schema);
    } catch (const SchemaError& e) {
      throw SchemaError("instance " + std::to_string(index) + ": " + e.what());
    }
    return Event{InstanceEvent{std::move(*inst), index++}};
  });
  for (std::size_t r = 0; r < config.model_replicas; ++r) {
    const auto& agg = runner.template processor_as<ModelProcessor>(VhtLayout::model, r).aggregator();
    out.trees.push_back(agg.model());
    out.stale_results += agg.stale_results();
    if (r == 0) {
      out.traces = agg.traces();
      out.timeouts = agg.timeouts();
    }
    out.discarded += agg.discarded();
  }
  for (std::size_t r = 0; r < config.parallelism; ++r) {
    out.cells_per_replica.push_back(
        runner.template processor_as<StatisticsProcessor>(VhtLayout::statistics, r).statistics().cell_count());
  }
  return out;
}

}  // namespace vht::vertical
