#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "vht/engine/routing.hpp"
#include "vht/engine/topology.hpp"
#include "vht/tree/instance.hpp"
#include "vht/tree/split.hpp"

namespace vht::vertical {

using AttemptId = std::uint64_t;

/// A labeled or unlabeled example entering the model; `index` is its stream position.
struct InstanceEvent {
  Instance instance;
  std::uint64_t index = 0;
};

/// One attribute of a training instance, addressed to the (leaf, attribute) cell.
struct AttributeEvent {
  LeafId leaf = 0;
  AttributeId attribute = 0;
  double value = 0.0;
  ClassIndex label = 0;
  double weight = 1.0;
};

/// The attribute events of one instance that route to one statistics
/// replica, sent together. Each (attribute, value) pair is one AttributeEvent
/// for `leaf` with the shared label and weight.
struct AttributeBatchEvent {
  LeafId leaf = 0;
  ClassIndex label = 0;
  double weight = 1.0;
  std::size_t replica = 0;
  std::vector<std::pair<AttributeId, double>> values;

  AttributeEvent at(std::size_t i) const { return {leaf, values[i].first, values[i].second, label, weight}; }
};

/// Asks every statistics replica for its best local candidates at `leaf`.
/// `basis` is the class distribution the leaf's statistics were built from.
struct ComputeEvent {
  LeafId leaf = 0;
  AttemptId attempt = 0;
  std::vector<double> basis;
};

struct LocalResultEvent {
  LeafId leaf = 0;
  AttemptId attempt = 0;
  std::size_t replica = 0;
  TopTwo top;
  double n_estimate = 0.0;  // largest cell weight seen for the leaf
};

/// Releases every statistics cell of a retired leaf.
struct DropEvent {
  LeafId leaf = 0;
};

/// Outcome of an attempt, relayed by the primary model to model replicas.
struct DecisionEvent {
  LeafId leaf = 0;
  AttemptId attempt = 0;
  bool split = false;
  SplitCandidate candidate;
};

/// Test-then-train outcome for one instance, sent to the evaluator.
struct PredictionEvent {
  std::uint64_t index = 0;
  ClassIndex predicted = 0;
  std::optional<ClassIndex> actual;
  double weight = 1.0;
  std::size_t splits = 0;
  std::size_t leaves = 1;
};

using ContentEvent = std::variant<InstanceEvent, AttributeEvent, AttributeBatchEvent, ComputeEvent, LocalResultEvent, DropEvent,
                                  DecisionEvent, PredictionEvent>;

namespace streams {
inline constexpr engine::StreamId instances = 1;    // source -> model, shuffle
inline constexpr engine::StreamId attributes = 2;   // model -> statistics, key (leaf, attribute)
inline constexpr engine::StreamId control = 3;      // model -> statistics, all (compute, drop)
inline constexpr engine::StreamId results = 4;      // statistics -> model, all
inline constexpr engine::StreamId predictions = 5;  // model -> evaluator
inline constexpr engine::StreamId decisions = 6;    // primary model -> model replicas, all
}  // namespace streams

/// Statistics replica owning the (leaf, attribute) cell among `n`.
inline std::size_t attribute_replica(LeafId leaf, AttributeId attribute, std::size_t n) {
  return n <= 1 ? 0 : engine::route_key(engine::make_key(leaf, attribute), n);
}

/// Partitioner of the attribute stream: single events by key, batches by
/// their precomputed replica.
inline std::size_t attribute_partition(const ContentEvent& e, std::size_t n) {
  if (const auto* b = std::get_if<AttributeBatchEvent>(&e)) return b->replica;
  const auto& a = std::get<AttributeEvent>(e);
  return attribute_replica(a.leaf, a.attribute, n);
}

inline engine::RouteKey attribute_key(const ContentEvent& e) {
  const auto& a = std::get<AttributeEvent>(e);
  return engine::make_key(a.leaf, a.attribute);
}

}  // namespace vht::vertical
