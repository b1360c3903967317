#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vht/engine/topology.hpp"

namespace vht::engine {

enum class Mode {
  threaded,   // one worker thread per replica, bounded queues
  local,      // one worker, synchronous global FIFO, zero feedback delay
  simulated,  // one worker, seeded random interleaving of channels
};

template <class Event>
using Source = std::function<std::optional<Event>()>;

template <class Event>
struct RunOptions {
  Mode mode = Mode::threaded;
  /// Threaded: abort when nothing moves for this long while work is pending.
  std::chrono::milliseconds watchdog{30000};
  /// Threaded: length of one engine-time unit on the wall clock.
  std::chrono::milliseconds tick{1000};
  /// Simulated: scheduler seed.
  std::uint64_t seed = 1;
  /// Simulated: extra engine-time delay before an event becomes deliverable.
  std::function<std::uint64_t(std::size_t destination, const Event&)> delay;
};

struct ProcessorReport {
  std::string name;
  std::size_t parallelism = 1;
  std::uint64_t events = 0;
  std::vector<std::uint64_t> events_per_replica;
  std::vector<double> busy_per_replica;
  double busy_seconds = 0.0;
};

struct RunReport {
  std::vector<ProcessorReport> processors;
  std::uint64_t source_items = 0;
  double wall_seconds = 0.0;

  std::uint64_t events(const std::string& name) const {
    for (const auto& p : processors) {
      if (p.name == name) return p.events;
    }
    return 0;
  }
  std::uint64_t total_events() const {
    std::uint64_t n = 0;
    for (const auto& p : processors) n += p.events;
    return n;
  }
};

class EngineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <class Event>
struct Delivery {
  std::size_t processor;
  std::size_t replica;
  bool bounded;
  Envelope<Event> envelope;
};

/// Output-side state owned by one processor replica: shuffle counters per
/// outgoing spec and sequence numbers per stream.
template <class Event>
class OutputPort {
 public:
  OutputPort(const Topology<Event>* t, ProcessorId self) : topology_(t), self_(self) {}

  template <class Sink>
  void route(StreamId stream, Event&& event, Sink&& sink) {
    const auto& specs = cached_outgoing(stream);
    const std::uint64_t seq = seq_[stream]++;
    std::size_t remaining = 0;
    for (std::size_t i : specs) {
      remaining += topology_->streams()[i].grouping == Grouping::all
                       ? topology_->processors()[topology_->streams()[i].destination].parallelism
                       : 1;
    }
    for (std::size_t i : specs) {
      const auto& s = topology_->streams()[i];
      const std::size_t n = topology_->processors()[s.destination].parallelism;
      const bool bounded = !s.back_edge || topology_->bound_back_edges();
      auto deliver = [&](std::size_t replica) {
        --remaining;
        Envelope<Event> env{remaining == 0 ? std::move(event) : event, seq, self_, stream};
        sink(Delivery<Event>{s.destination, replica, bounded, std::move(env)});
      };
      switch (s.grouping) {
        case Grouping::shuffle:
          deliver(shuffle_[i].next(n));
          break;
        case Grouping::key:
          deliver(key_replica(s, event, n));
          break;
        case Grouping::all:
          for (std::size_t r = 0; r < n; ++r) deliver(r);
          break;
      }
    }
  }

 private:
  std::size_t key_replica(const StreamSpec<Event>& s, const Event& event, std::size_t n) const {
    std::size_t r = 0;
    try {
      r = s.partition ? s.partition(event, n) : route_key(s.key(event), n);
    } catch (const std::exception& e) {
      throw EngineError(where(s) + ": key extraction failed: " + e.what());
    }
    if (r >= n) throw EngineError(where(s) + ": partition chose replica " + std::to_string(r) + " of " + std::to_string(n));
    return r;
  }

  std::string where(const StreamSpec<Event>& s) const {
    const auto& procs = topology_->processors();
    const std::string from = self_.id < procs.size() ? "processor '" + procs[self_.id].name + "'" : "source";
    return from + " stream " + std::to_string(s.stream);
  }

  const std::vector<std::size_t>& cached_outgoing(StreamId stream) {
    auto it = outgoing_.find(stream);
    if (it == outgoing_.end()) it = outgoing_.emplace(stream, topology_->outgoing(self_.id, stream)).first;
    return it->second;
  }

  const Topology<Event>* topology_;
  ProcessorId self_;
  std::unordered_map<StreamId, std::vector<std::size_t>> outgoing_;
  std::unordered_map<std::size_t, ShuffleRouter> shuffle_;
  std::unordered_map<StreamId, std::uint64_t> seq_;
};

template <class Event>
class CollectingContext final : public Context<Event> {
 public:
  CollectingContext(ProcessorId self, std::size_t parallelism, std::function<std::uint64_t()> clock)
      : self_(self), parallelism_(parallelism), clock_(std::move(clock)) {}

  void emit(StreamId stream, Event event) override { out.emplace_back(stream, std::move(event)); }
  std::uint64_t now() const override { return clock_(); }
  ProcessorId self() const override { return self_; }
  std::size_t parallelism() const override { return parallelism_; }

  std::vector<std::pair<StreamId, Event>> out;

 private:
  ProcessorId self_;
  std::size_t parallelism_;
  std::function<std::uint64_t()> clock_;
};

inline ProcessorId source_id() { return {static_cast<std::size_t>(-1), 0}; }

}  // namespace detail

/// Executes a topology over a finite source. Processors are instantiated per
/// run and stay inspectable until the next run.
template <class Event>
class Runner {
 public:
  explicit Runner(Topology<Event> topology, RunOptions<Event> options = {})
      : topology_(std::move(topology)), options_(std::move(options)) {}

  RunReport run(Source<Event> source) {
    instantiate();
    const auto start = std::chrono::steady_clock::now();
    switch (options_.mode) {
      case Mode::threaded:
        run_threaded(source);
        break;
      case Mode::local:
        run_local(source);
        break;
      case Mode::simulated:
        run_simulated(source);
        break;
    }
    report_.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (auto& pr : report_.processors) {
      pr.events = 0;
      pr.busy_seconds = 0;
      for (auto e : pr.events_per_replica) pr.events += e;
      for (auto b : pr.busy_per_replica) pr.busy_seconds += b;
    }
    return report_;
  }

  Processor<Event>& processor(std::size_t id, std::size_t replica) { return *instances_.at(id).at(replica); }

  template <class P>
  P& processor_as(std::size_t id, std::size_t replica) {
    auto* p = dynamic_cast<P*>(&processor(id, replica));
    if (!p) throw EngineError("processor " + std::to_string(id) + " has a different type");
    return *p;
  }

  const Topology<Event>& topology() const { return topology_; }

 private:
  using Delivery = detail::Delivery<Event>;

  void instantiate() {
    instances_.clear();
    report_ = RunReport{};
    for (const auto& d : topology_.processors()) {
      std::vector<std::unique_ptr<Processor<Event>>> reps;
      for (std::size_t r = 0; r < d.parallelism; ++r) {
        reps.push_back(d.factory(r));
        if (!reps.back()) throw EngineError("factory of '" + d.name + "' returned null");
      }
      instances_.push_back(std::move(reps));
      ProcessorReport pr;
      pr.name = d.name;
      pr.parallelism = d.parallelism;
      pr.events_per_replica.assign(d.parallelism, 0);
      pr.busy_per_replica.assign(d.parallelism, 0.0);
      report_.processors.push_back(std::move(pr));
    }
  }

  std::vector<std::vector<detail::OutputPort<Event>>> make_ports() const {
    std::vector<std::vector<detail::OutputPort<Event>>> ports;
    for (std::size_t p = 0; p < topology_.processors().size(); ++p) {
      std::vector<detail::OutputPort<Event>> reps;
      for (std::size_t r = 0; r < topology_.processors()[p].parallelism; ++r) {
        reps.emplace_back(&topology_, ProcessorId{p, r});
      }
      ports.push_back(std::move(reps));
    }
    return ports;
  }

  std::string describe(std::size_t p, std::size_t r) const {
    return "processor '" + topology_.processors()[p].name + "' replica " + std::to_string(r);
  }

  // Invokes one callback, converting exceptions into an EngineError that
  // names the processor. Returns the emitted events.
  std::vector<std::pair<StreamId, Event>> invoke(std::size_t p, std::size_t r, Envelope<Event>& env,
                                                 std::function<std::uint64_t()> clock) {
    detail::CollectingContext<Event> ctx({p, r}, topology_.processors()[p].parallelism, std::move(clock));
    const auto t0 = std::chrono::steady_clock::now();
    try {
      instances_[p][r]->process(env, ctx);
    } catch (const std::exception& e) {
      throw EngineError(describe(p, r) + " failed: " + e.what());
    } catch (...) {
      throw EngineError(describe(p, r) + " failed with a non-standard exception");
    }
    // Replicas write disjoint slots; totals are summed after the run.
    auto& rep = report_.processors[p];
    rep.busy_per_replica[r] += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ++rep.events_per_replica[r];
    return std::move(ctx.out);
  }

  // --- local -------------------------------------------------------------

  void run_local(Source<Event>& source) {
    auto ports = make_ports();
    detail::OutputPort<Event> source_port(&topology_, detail::source_id());
    ShuffleRouter entry_router;
    std::deque<Delivery> queue;
    std::uint64_t admitted = 0;
    auto clock = [&admitted] { return admitted; };
    for (;;) {
      if (queue.empty()) {
        auto item = source();
        if (!item) break;
        const std::size_t n = topology_.processors()[topology_.entry()].parallelism;
        queue.push_back({topology_.entry(), entry_router.next(n), true,
                         Envelope<Event>{std::move(*item), admitted, detail::source_id(), kSourceStream}});
        ++admitted;
        report_.source_items = admitted;
      }
      Delivery d = std::move(queue.front());
      queue.pop_front();
      auto out = invoke(d.processor, d.replica, d.envelope, clock);
      for (auto& [stream, ev] : out) {
        ports[d.processor][d.replica].route(stream, std::move(ev), [&](Delivery&& x) { queue.push_back(std::move(x)); });
      }
    }
  }

  // --- simulated ---------------------------------------------------------

  void run_simulated(Source<Event>& source) {
    struct Pending {
      std::uint64_t release;
      Delivery delivery;
    };
    using ChannelKey = std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>;
    std::map<ChannelKey, std::deque<Pending>> channels;
    auto ports = make_ports();
    std::mt19937_64 rng(options_.seed);
    ShuffleRouter entry_router;
    std::uint64_t admitted = 0;
    std::uint64_t now = 0;
    bool exhausted = false;
    auto clock = [&now] { return now; };

    auto enqueue = [&](const ProcessorId& from, Delivery&& d) {
      const std::uint64_t delay = options_.delay ? options_.delay(d.processor, d.envelope.payload) : 0;
      channels[{from.id, from.replica, d.processor, d.replica}].push_back({now + delay, std::move(d)});
    };

    std::vector<ChannelKey> ready;
    for (;;) {
      ready.clear();
      std::uint64_t earliest = UINT64_MAX;
      for (auto it = channels.begin(); it != channels.end();) {
        if (it->second.empty()) {
          it = channels.erase(it);
          continue;
        }
        const auto release = it->second.front().release;
        if (release <= now) ready.push_back(it->first);
        earliest = std::min(earliest, release);
        ++it;
      }
      const std::size_t options = ready.size() + (exhausted ? 0 : 1);
      if (options == 0) {
        if (channels.empty()) break;
        now = earliest;  // everything is held back: jump ahead
        continue;
      }
      const std::size_t pick = std::uniform_int_distribution<std::size_t>(0, options - 1)(rng);
      if (pick == ready.size()) {
        auto item = source();
        if (!item) {
          exhausted = true;
          continue;
        }
        const std::size_t n = topology_.processors()[topology_.entry()].parallelism;
        ++admitted;
        now = std::max(now, admitted);
        report_.source_items = admitted;
        enqueue(detail::source_id(),
                Delivery{topology_.entry(), entry_router.next(n), true,
                         Envelope<Event>{std::move(*item), admitted - 1, detail::source_id(), kSourceStream}});
        continue;
      }
      auto& q = channels[ready[pick]];
      Delivery d = std::move(q.front().delivery);
      q.pop_front();
      auto out = invoke(d.processor, d.replica, d.envelope, clock);
      const ProcessorId self{d.processor, d.replica};
      for (auto& [stream, ev] : out) {
        ports[d.processor][d.replica].route(stream, std::move(ev), [&](Delivery&& x) { enqueue(self, std::move(x)); });
      }
    }
  }

  // --- threaded ----------------------------------------------------------

  struct Mailbox {
    std::mutex mutex;
    std::condition_variable not_empty;
    std::condition_variable not_full;
    std::deque<Delivery> queue;
    std::size_t bounded = 0;
    bool closed = false;
    bool consumer_waiting = false;
    std::size_t producers_waiting = 0;
  };

  struct Shared {
    std::vector<std::vector<std::unique_ptr<Mailbox>>> boxes;
    std::atomic<std::int64_t> in_flight{0};
    std::atomic<std::uint64_t> progress{0};
    std::atomic<bool> abort{false};
    std::mutex error_mutex;
    std::optional<std::string> error;
    std::mutex done_mutex;
    std::condition_variable done_cv;
    bool source_done = false;
  };

  static void fail(Shared& sh, std::string message) {
    {
      std::lock_guard lock(sh.error_mutex);
      if (!sh.error) sh.error = std::move(message);
    }
    sh.abort = true;
    for (auto& reps : sh.boxes) {
      for (auto& box : reps) {
        std::lock_guard lock(box->mutex);
        box->not_empty.notify_all();
        box->not_full.notify_all();
      }
    }
    std::lock_guard lock(sh.done_mutex);
    sh.done_cv.notify_all();
  }

  // Pushes a batch for one mailbox; blocks on bounded items while full.
  // Wakes the consumer only if it sleeps, so a batch costs one wake-up.
  bool push_batch(Shared& sh, Mailbox& box, std::vector<Delivery>& batch) {
    const std::size_t capacity = topology_.queue_capacity();
    std::unique_lock lock(box.mutex);
    for (auto& d : batch) {
      if (d.bounded && box.bounded >= capacity) {
        if (box.consumer_waiting) box.not_empty.notify_one();
        ++box.producers_waiting;
        box.not_full.wait(lock, [&] { return box.bounded < capacity || sh.abort.load(); });
        --box.producers_waiting;
        if (sh.abort) return false;
      }
      if (d.bounded) ++box.bounded;
      box.queue.push_back(std::move(d));
      sh.progress.fetch_add(1, std::memory_order_relaxed);
    }
    if (box.consumer_waiting) box.not_empty.notify_one();
    return true;
  }

  // Takes up to `limit` queued deliveries in FIFO order; empty once closed or aborted.
  bool pop_chunk(Shared& sh, Mailbox& box, std::vector<Delivery>& chunk, std::size_t limit) {
    chunk.clear();
    std::unique_lock lock(box.mutex);
    box.consumer_waiting = true;
    box.not_empty.wait(lock, [&] { return !box.queue.empty() || box.closed || sh.abort.load(); });
    box.consumer_waiting = false;
    if (sh.abort || box.queue.empty()) return false;
    std::size_t freed = 0;
    while (!box.queue.empty() && chunk.size() < limit) {
      if (box.queue.front().bounded) ++freed;
      chunk.push_back(std::move(box.queue.front()));
      box.queue.pop_front();
    }
    box.bounded -= freed;
    if (freed > 0 && box.producers_waiting > 0) box.not_full.notify_all();
    return true;
  }

  void run_threaded(Source<Event>& source) {
    Shared sh;
    for (const auto& d : topology_.processors()) {
      std::vector<std::unique_ptr<Mailbox>> reps;
      for (std::size_t r = 0; r < d.parallelism; ++r) reps.push_back(std::make_unique<Mailbox>());
      sh.boxes.push_back(std::move(reps));
    }
    const auto start = std::chrono::steady_clock::now();
    const auto tick = std::max<std::chrono::milliseconds::rep>(options_.tick.count(), 1);
    auto clock = [start, tick] {
      const auto ms =
          std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
      return static_cast<std::uint64_t>(ms / tick);
    };

    auto worker = [&](std::size_t p, std::size_t r) {
      detail::OutputPort<Event> port(&topology_, {p, r});
      Mailbox& box = *sh.boxes[p][r];
      std::vector<std::vector<std::vector<Delivery>>> batches(sh.boxes.size());
      for (std::size_t q = 0; q < sh.boxes.size(); ++q) batches[q].resize(sh.boxes[q].size());
      const std::size_t limit = std::max<std::size_t>(1, std::min<std::size_t>(64, topology_.queue_capacity()));
      std::vector<Delivery> chunk;
      while (pop_chunk(sh, box, chunk, limit)) {
        std::int64_t produced = 0;
        try {
          for (auto& d : chunk) {
            auto out = invoke(p, r, d.envelope, clock);
            for (auto& [stream, ev] : out) {
              port.route(stream, std::move(ev), [&](Delivery&& x) {
                ++produced;
                batches[x.processor][x.replica].push_back(std::move(x));
              });
            }
          }
        } catch (const EngineError& e) {
          fail(sh, e.what());
          return;
        }
        sh.in_flight.fetch_add(produced);
        for (std::size_t q = 0; q < batches.size(); ++q) {
          for (std::size_t s = 0; s < batches[q].size(); ++s) {
            auto& b = batches[q][s];
            if (b.empty()) continue;
            if (!push_batch(sh, *sh.boxes[q][s], b)) return;
            b.clear();
          }
        }
        sh.progress.fetch_add(chunk.size(), std::memory_order_relaxed);
        const auto n = static_cast<std::int64_t>(chunk.size());
        if (sh.in_flight.fetch_sub(n) == n) {
          std::lock_guard lock(sh.done_mutex);
          sh.done_cv.notify_all();
        }
      }
    };

    std::vector<std::thread> threads;
    for (std::size_t p = 0; p < sh.boxes.size(); ++p) {
      for (std::size_t r = 0; r < sh.boxes[p].size(); ++r) threads.emplace_back(worker, p, r);
    }

    std::thread feeder([&] {
      ShuffleRouter router;
      const std::size_t entry = topology_.entry();
      const std::size_t n = sh.boxes[entry].size();
      std::uint64_t admitted = 0;
      // Items are handed over in small per-replica batches to save wake-ups.
      const std::size_t limit = std::max<std::size_t>(1, std::min<std::size_t>(32, topology_.queue_capacity()));
      std::vector<std::vector<Delivery>> pending(n);
      auto flush = [&](std::size_t r) {
        if (pending[r].empty()) return true;
        sh.in_flight.fetch_add(static_cast<std::int64_t>(pending[r].size()));
        const bool ok = push_batch(sh, *sh.boxes[entry][r], pending[r]);
        pending[r].clear();
        return ok;
      };
      try {
        bool ok = true;
        while (ok && !sh.abort) {
          auto item = source();
          if (!item) break;
          const std::size_t r = router.next(n);
          pending[r].push_back(
              {entry, r, true, Envelope<Event>{std::move(*item), admitted, detail::source_id(), kSourceStream}});
          ++admitted;
          if (pending[r].size() >= limit) ok = flush(r);
        }
        for (std::size_t r = 0; ok && r < n; ++r) ok = flush(r);
      } catch (const std::exception& e) {
        fail(sh, std::string("source failed: ") + e.what());
      }
      report_.source_items = admitted;
      std::lock_guard lock(sh.done_mutex);
      sh.source_done = true;
      sh.done_cv.notify_all();
    });

    // Supervisor: wait for drain, watching for stalls.
    {
      std::uint64_t last_progress = sh.progress.load();
      auto last_change = std::chrono::steady_clock::now();
      std::unique_lock lock(sh.done_mutex);
      for (;;) {
        if (sh.abort) break;
        if (sh.source_done && sh.in_flight.load() == 0) break;
        sh.done_cv.wait_for(lock, std::chrono::milliseconds(50));
        const auto now_progress = sh.progress.load();
        const auto now = std::chrono::steady_clock::now();
        if (now_progress != last_progress) {
          last_progress = now_progress;
          last_change = now;
        } else if (sh.in_flight.load() > 0 && now - last_change > options_.watchdog) {
          lock.unlock();
          fail(sh, "deadlock detected: no progress for " + std::to_string(options_.watchdog.count()) + " ms with " +
                       std::to_string(sh.in_flight.load()) + " events in flight");
          lock.lock();
        }
      }
    }
    for (auto& reps : sh.boxes) {
      for (auto& box : reps) {
        std::lock_guard lock(box->mutex);
        box->closed = true;
        box->not_empty.notify_all();
      }
    }
    feeder.join();
    for (auto& t : threads) t.join();
    if (sh.error) throw EngineError(*sh.error);
  }

  Topology<Event> topology_;
  RunOptions<Event> options_;
  std::vector<std::vector<std::unique_ptr<Processor<Event>>>> instances_;
  RunReport report_;
};

/// One-shot convenience wrapper.
template <class Event>
RunReport run(const Topology<Event>& topology, Source<Event> source, RunOptions<Event> options = {}) {
  Runner<Event> runner(topology, std::move(options));
  return runner.run(std::move(source));
}

}  // namespace vht::engine
