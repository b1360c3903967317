#pragma once

#include <algorithm>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "vht/tree/tree_model.hpp"
#include "vht/vertical/events.hpp"
#include "vht/vertical/instance_buffer.hpp"

namespace vht::vertical {

/// How instances reaching a leaf with a pending split are handled.
enum class Variant {
  vanilla,  // dropped
  wok,      // forwarded to the statistics as usual
  wk,       // forwarded and also buffered (up to z) for replay after a split
};

struct ModelConfig {
  HoeffdingParams params;
  std::size_t stats_parallelism = 1;  // p
  std::size_t model_parallelism = 1;  // q
  std::size_t replica = 0;
  Variant variant = Variant::wok;
  std::size_t buffer_size = 0;  // z
  std::uint64_t timeout = 30;   // engine-time units
  std::optional<std::filesystem::path> spill_dir;
};

enum class AttemptOutcome { pending, split, no_split };

/// What happened during one split attempt.
struct AttemptTrace {
  AttemptId attempt = 0;
  LeafId leaf = 0;
  std::uint64_t issued_at = 0;
  std::size_t responses = 0;
  std::uint64_t arrivals = 0;  // instances that reached the leaf while pending
  std::uint64_t buffered = 0;
  std::uint64_t replayed = 0;
  bool timed_out = false;
  double n_used = 0.0;
  AttemptOutcome outcome = AttemptOutcome::pending;
};

/// The model side of the vertical tree: holds the tree, sorts instances,
/// fans attributes out to the statistics and decides splits from their
/// answers. Emitted events go through `Emit`.
class ModelAggregator {
 public:
  using Emit = std::function<void(engine::StreamId, ContentEvent)>;

  ModelAggregator(std::shared_ptr<const Schema> schema, ModelConfig config)
      : schema_(std::move(schema)), config_(std::move(config)), model_(*schema_) {
    if (config_.stats_parallelism == 0 || config_.model_parallelism == 0) {
      throw std::invalid_argument("parallelism must be at least 1");
    }
    if (config_.timeout == 0) throw std::invalid_argument("timeout must be positive");
  }

  bool is_primary() const { return config_.replica == 0; }

  void on_instance(const InstanceEvent& e, std::uint64_t now, const Emit& emit) {
    const Instance& inst = e.instance;
    PredictionEvent p;
    p.index = e.index;
    p.predicted = model_.predict(inst);
    p.actual = inst.label();
    p.weight = inst.weight();
    p.splits = model_.num_splits();
    p.leaves = model_.num_leaves();
    emit(streams::predictions, p);
    if (!inst.is_labeled()) return;
    ++instances_;
    train(inst, now, emit, false);
  }

  void on_local_result(const LocalResultEvent& r, std::uint64_t now, const Emit& emit) {
    auto it = attempts_.find(r.leaf);
    if (!is_primary() && it == attempts_.end() && model_.has_leaf(r.leaf) && r.attempt >= next_attempt_) {
      // A replica learns about the primary's attempt from its first answer.
      it = attempts_.emplace(r.leaf, Pending(r.leaf, r.attempt, now, make_buffer(r.leaf))).first;
      next_attempt_ = r.attempt + 1;
      open_trace(it->second, now);
    }
    if (it == attempts_.end() || it->second.attempt != r.attempt) {
      ++stale_results_;
      return;
    }
    Pending& a = it->second;
    if (!a.responders.insert(r.replica).second) {
      ++stale_results_;
      return;
    }
    a.top = merge_top_two(a.top, r.top);
    a.n_max = std::max(a.n_max, r.n_estimate);
    trace(a).responses = a.responders.size();
    if (is_primary() && a.responders.size() >= config_.stats_parallelism) resolve(it, false, now, emit);
  }

  /// Replicas other than the primary apply the primary's verdict.
  void on_decision(const DecisionEvent& d, std::uint64_t now, const Emit& emit) {
    if (is_primary()) return;
    auto it = attempts_.find(d.leaf);
    std::optional<InstanceBuffer> buffer;
    if (it != attempts_.end() && it->second.attempt == d.attempt) {
      buffer.emplace(std::move(it->second.buffer));
      trace(it->second).outcome = d.split ? AttemptOutcome::split : AttemptOutcome::no_split;
    }
    const auto trace_index = it != attempts_.end() ? trace_index_.at(it->second.attempt) : traces_.size();
    if (it != attempts_.end()) attempts_.erase(it);
    next_attempt_ = std::max(next_attempt_, d.attempt + 1);
    if (!d.split || !model_.has_leaf(d.leaf)) return;
    model_.split_leaf(d.leaf, d.candidate, first_child(d.attempt));
    if (buffer) replay(*buffer, trace_index, now, emit);
  }

  /// Resolves every attempt whose deadline has passed.
  void check_timeouts(std::uint64_t now, const Emit& emit) {
    if (!is_primary()) return;
    for (auto it = attempts_.begin(); it != attempts_.end();) {
      if (now >= it->second.deadline) {
        it = resolve(it, true, now, emit);
      } else {
        ++it;
      }
    }
  }

  const TreeModel& model() const { return model_; }
  const std::vector<AttemptTrace>& traces() const { return traces_; }
  std::size_t active_attempts() const { return attempts_.size(); }
  bool splitting(LeafId leaf) const { return attempts_.count(leaf) != 0; }
  std::uint64_t stale_results() const { return stale_results_; }
  std::uint64_t timeouts() const { return timeouts_; }
  std::uint64_t instances() const { return instances_; }
  std::uint64_t discarded() const { return discarded_; }
  const ModelConfig& config() const { return config_; }

 private:
  struct Pending {
    Pending(LeafId l, AttemptId id, std::uint64_t deadline_at, InstanceBuffer buf)
        : leaf(l), attempt(id), deadline(deadline_at), buffer(std::move(buf)) {}
    LeafId leaf;
    AttemptId attempt;
    std::uint64_t deadline;
    TopTwo top;
    std::set<std::size_t> responders;
    double n_max = 0.0;
    InstanceBuffer buffer;
  };
  using Attempts = std::map<LeafId, Pending>;

  InstanceBuffer make_buffer(LeafId leaf) const {
    const std::size_t z = config_.variant == Variant::wk ? config_.buffer_size : 0;
    std::optional<std::filesystem::path> file;
    if (config_.spill_dir && z > 0) {
      file = *config_.spill_dir / ("model" + std::to_string(config_.replica) + "-leaf" + std::to_string(leaf) + ".buf");
    }
    return InstanceBuffer(z, std::move(file));
  }

  LeafId first_child(AttemptId attempt) const {
    return 1 + static_cast<LeafId>(attempt) * schema_->max_branches();
  }

  AttemptTrace& trace(const Pending& a) { return traces_[trace_index_.at(a.attempt)]; }

  void open_trace(const Pending& a, std::uint64_t now) {
    AttemptTrace t;
    t.attempt = a.attempt;
    t.leaf = a.leaf;
    t.issued_at = now;
    trace_index_[a.attempt] = traces_.size();
    traces_.push_back(t);
  }

  // One batch per statistics replica that owns any of the instance's cells.
  void send_attributes(const Instance& inst, LeafId leaf, ClassIndex k, double w, const Emit& emit) {
    const std::size_t p = config_.stats_parallelism;
    batches_.resize(p);
    for (auto& b : batches_) b.clear();
    inst.for_each_present(
        [&](AttributeId a, double v) { batches_[attribute_replica(leaf, a, p)].emplace_back(a, v); });
    for (std::size_t r = 0; r < p; ++r) {
      if (batches_[r].empty()) continue;
      emit(streams::attributes, AttributeBatchEvent{leaf, k, w, r, batches_[r]});
    }
  }

  void train(const Instance& inst, std::uint64_t now, const Emit& emit, bool replaying) {
    const LeafId leaf = model_.sort_to_leaf(inst);
    if (auto it = attempts_.find(leaf); it != attempts_.end() && !replaying) {
      auto& t = trace(it->second);
      ++t.arrivals;
      if (config_.variant == Variant::vanilla) {
        ++discarded_;
        return;
      }
      if (it->second.buffer.push(inst)) ++t.buffered;
    }
    const ClassIndex k = inst.class_index();
    const double w = inst.weight();
    send_attributes(inst, leaf, k, w, emit);
    model_.count(leaf, k, w);

    if (!is_primary()) return;
    auto& node = model_.leaf(leaf);
    const double n = node.weight();
    const double grace = config_.params.grace_period / static_cast<double>(config_.model_parallelism);
    if (n - node.weight_at_last_attempt < grace) return;
    node.weight_at_last_attempt = n;
    if (node.is_pure() || attempts_.count(leaf)) return;

    const AttemptId id = next_attempt_++;
    auto [it, _] = attempts_.emplace(leaf, Pending(leaf, id, now + config_.timeout, make_buffer(leaf)));
    open_trace(it->second, now);
    ComputeEvent c;
    c.leaf = leaf;
    c.attempt = id;
    c.basis = node.basis_counts;
    for (auto& b : c.basis) b *= static_cast<double>(config_.model_parallelism);
    emit(streams::control, std::move(c));
  }

  Attempts::iterator resolve(Attempts::iterator it, bool timed_out, std::uint64_t now, const Emit& emit) {
    Pending& a = it->second;
    const std::size_t ti = trace_index_.at(a.attempt);
    const LeafId leaf = a.leaf;
    const AttemptId attempt = a.attempt;
    traces_[ti].timed_out = timed_out;
    if (timed_out) ++timeouts_;

    const double n = config_.model_parallelism == 1 ? model_.leaf(leaf).weight() : a.n_max;
    SplitDecision d;
    if (n > 0.0) d = decide_split(a.top, n, model_.num_classes(), config_.params);
    traces_[ti].n_used = n;
    traces_[ti].outcome = d.split ? AttemptOutcome::split : AttemptOutcome::no_split;

    InstanceBuffer buffer = std::move(a.buffer);
    auto next = attempts_.erase(it);
    if (config_.model_parallelism > 1) {
      emit(streams::decisions, DecisionEvent{leaf, attempt, d.split, d.split ? d.best : SplitCandidate::no_split()});
    }
    if (!d.split) {
      buffer.clear();
      return next;
    }
    model_.split_leaf(leaf, d.best, first_child(attempt));
    emit(streams::control, DropEvent{leaf});
    replay(buffer, ti, now, emit);
    // Replay may have opened attempts; re-seek so the caller's walk stays valid.
    return attempts_.upper_bound(leaf);
  }

  void replay(InstanceBuffer& buffer, std::size_t trace_index, std::uint64_t now, const Emit& emit) {
    buffer.drain([&](Instance inst) {
      ++traces_[trace_index].replayed;
      train(inst, now, emit, true);
    });
  }

  std::shared_ptr<const Schema> schema_;
  ModelConfig config_;
  TreeModel model_;
  Attempts attempts_;
  AttemptId next_attempt_ = 0;
  std::vector<AttemptTrace> traces_;
  std::map<AttemptId, std::size_t> trace_index_;
  std::uint64_t stale_results_ = 0;
  std::uint64_t timeouts_ = 0;
  std::uint64_t instances_ = 0;
  std::uint64_t discarded_ = 0;
  std::vector<std::vector<std::pair<AttributeId, double>>> batches_;
};

}  // namespace vht::vertical
