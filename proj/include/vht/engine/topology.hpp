#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vht/engine/routing.hpp"

namespace vht::engine {

using StreamId = std::uint32_t;

/// Stream id reserved for items pulled from the external source.
inline constexpr StreamId kSourceStream = 0xffffffffu;

struct ProcessorId {
  std::size_t id = 0;
  std::size_t replica = 0;
  friend bool operator==(const ProcessorId&, const ProcessorId&) = default;
};

template <class Event>
struct Envelope {
  Event payload;
  std::uint64_t seq = 0;  // per (source replica, stream)
  ProcessorId source;
  StreamId stream = kSourceStream;
};

class TopologyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// What a processor sees while handling one event.
template <class Event>
class Context {
 public:
  virtual ~Context() = default;
  virtual void emit(StreamId stream, Event event) = 0;
  /// Engine time: wall milliseconds (threaded) or admitted source items.
  virtual std::uint64_t now() const = 0;
  virtual ProcessorId self() const = 0;
  virtual std::size_t parallelism() const = 0;
};

template <class Event>
class Processor {
 public:
  virtual ~Processor() = default;
  virtual void process(Envelope<Event>& in, Context<Event>& ctx) = 0;
};

/// Adapter for stateless or closure-held behavior.
template <class Event>
class FunctionProcessor final : public Processor<Event> {
 public:
  using Fn = std::function<void(Envelope<Event>&, Context<Event>&)>;
  explicit FunctionProcessor(Fn fn) : fn_(std::move(fn)) {}
  void process(Envelope<Event>& in, Context<Event>& ctx) override { fn_(in, ctx); }

 private:
  Fn fn_;
};

template <class Event>
using ProcessorFactory = std::function<std::unique_ptr<Processor<Event>>(std::size_t replica)>;

template <class Event>
struct ProcessorDecl {
  std::string name;
  std::size_t parallelism = 1;
  ProcessorFactory<Event> factory;
};

enum class Grouping { shuffle, key, all };

template <class Event>
struct StreamSpec {
  StreamId stream = 0;
  std::size_t source = 0;
  std::size_t destination = 0;
  Grouping grouping = Grouping::shuffle;
  std::function<RouteKey(const Event&)> key;
  /// Key grouping with the key already hashed: returns the destination
  /// replica for `parallelism` replicas. Takes precedence over `key`.
  std::function<std::size_t(const Event&, std::size_t parallelism)> partition;
  /// Set by the builder for edges that close a cycle; those queues never block.
  bool back_edge = false;
};

template <class Event>
class Topology {
 public:
  const std::vector<ProcessorDecl<Event>>& processors() const { return processors_; }
  const std::vector<StreamSpec<Event>>& streams() const { return streams_; }
  std::size_t entry() const { return entry_; }
  std::size_t queue_capacity() const { return capacity_; }
  bool bound_back_edges() const { return bound_back_edges_; }

  /// Specs leaving `processor` on `stream`, one per destination.
  std::vector<std::size_t> outgoing(std::size_t processor, StreamId stream) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < streams_.size(); ++i) {
      if (streams_[i].source == processor && streams_[i].stream == stream) out.push_back(i);
    }
    return out;
  }

  std::size_t find(const std::string& name) const {
    for (std::size_t i = 0; i < processors_.size(); ++i) {
      if (processors_[i].name == name) return i;
    }
    throw TopologyError("no processor named '" + name + "'");
  }

 private:
  template <class>
  friend class TopologyBuilder;
  std::vector<ProcessorDecl<Event>> processors_;
  std::vector<StreamSpec<Event>> streams_;
  std::size_t entry_ = 0;
  std::size_t capacity_ = 1024;
  bool bound_back_edges_ = false;
};

template <class Event>
class TopologyBuilder {
 public:
  std::size_t add_processor(std::string name, std::size_t parallelism, ProcessorFactory<Event> factory) {
    decls_.push_back({std::move(name), parallelism, std::move(factory)});
    return decls_.size() - 1;
  }

  TopologyBuilder& connect(StreamId stream, std::size_t source, std::size_t destination,
                           Grouping grouping, std::function<RouteKey(const Event&)> key = {}) {
    streams_.push_back({stream, source, destination, grouping, std::move(key), {}, false});
    return *this;
  }

  /// Key-grouped stream whose events carry their destination replica, for
  /// senders that batch many keys bound for the same replica.
  TopologyBuilder& connect_partitioned(StreamId stream, std::size_t source, std::size_t destination,
                                       std::function<std::size_t(const Event&, std::size_t)> partition) {
    streams_.push_back({stream, source, destination, Grouping::key, {}, std::move(partition), false});
    return *this;
  }

  TopologyBuilder& entry(std::size_t processor) {
    entry_ = processor;
    return *this;
  }
  TopologyBuilder& queue_capacity(std::size_t c) {
    capacity_ = c;
    return *this;
  }
  /// Testing aid: keep cycle-closing edges bounded (can deadlock).
  TopologyBuilder& bound_back_edges(bool on) {
    bound_back_edges_ = on;
    return *this;
  }

  Topology<Event> build() const {
    if (decls_.empty()) throw TopologyError("topology has no processors");
    if (capacity_ == 0) throw TopologyError("queue capacity must be at least 1");
    for (const auto& d : decls_) {
      if (d.parallelism == 0) throw TopologyError("processor '" + d.name + "' has zero parallelism");
      if (!d.factory) throw TopologyError("processor '" + d.name + "' has no factory");
    }
    if (entry_ >= decls_.size()) throw TopologyError("dangling reference: entry processor " + std::to_string(entry_));
    for (const auto& s : streams_) {
      if (s.source >= decls_.size() || s.destination >= decls_.size()) {
        throw TopologyError("dangling reference in stream " + std::to_string(s.stream));
      }
      if (s.grouping == Grouping::key && !s.key && !s.partition) {
        throw TopologyError("stream " + std::to_string(s.stream) + " uses key grouping without a key extractor");
      }
    }
    Topology<Event> t;
    t.processors_ = decls_;
    t.streams_ = streams_;
    t.entry_ = entry_;
    t.capacity_ = capacity_;
    t.bound_back_edges_ = bound_back_edges_;
    mark_back_edges(t.streams_);
    return t;
  }

 private:
  // Depth-first classification from the entry; unreachable processors are
  // explored afterwards so every edge gets a verdict.
  void mark_back_edges(std::vector<StreamSpec<Event>>& streams) const {
    const std::size_t n = decls_.size();
    std::vector<int> state(n, 0);  // 0 new, 1 on stack, 2 done
    std::function<void(std::size_t)> dfs = [&](std::size_t u) {
      state[u] = 1;
      for (auto& s : streams) {
        if (s.source != u) continue;
        if (state[s.destination] == 1) {
          s.back_edge = true;
        } else if (state[s.destination] == 0) {
          dfs(s.destination);
        }
      }
      state[u] = 2;
    };
    dfs(entry_);
    for (std::size_t u = 0; u < n; ++u) {
      if (state[u] == 0) dfs(u);
    }
  }

  std::vector<ProcessorDecl<Event>> decls_;
  std::vector<StreamSpec<Event>> streams_;
  std::size_t entry_ = 0;
  std::size_t capacity_ = 1024;
  bool bound_back_edges_ = false;
};

}  // namespace vht::engine
