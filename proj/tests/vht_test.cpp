#include <gtest/gtest.h>

#include <random>
#include <set>

#include "support/streams.hpp"
#include "vht/tree/hoeffding_tree.hpp"
#include "vht/vertical/vht.hpp"

namespace vht::vertical {
namespace {

using testing_streams::mixed_schema;
using testing_streams::mixed_stream;
using testing_streams::sparse_schema;
using testing_streams::sparse_stream;
using testing_streams::VectorSource;

struct Captured {
  std::vector<std::pair<engine::StreamId, ContentEvent>> events;
  ModelAggregator::Emit emit() {
    return [this](engine::StreamId s, ContentEvent e) { events.emplace_back(s, std::move(e)); };
  }
  template <class T>
  std::vector<T> of() const {
    std::vector<T> out;
    for (const auto& [_, e] : events) {
      if (const auto* x = std::get_if<T>(&e)) out.push_back(*x);
      if constexpr (std::is_same_v<T, AttributeEvent>) {
        if (const auto* b = std::get_if<AttributeBatchEvent>(&e)) {
          for (std::size_t i = 0; i < b->values.size(); ++i) out.push_back(b->at(i));
        }
      }
    }
    return out;
  }
  void clear() { events.clear(); }
};

std::shared_ptr<const Schema> share(Schema s) { return std::make_shared<const Schema>(std::move(s)); }

InstanceEvent labeled(std::vector<double> x, ClassIndex y, std::uint64_t i = 0) {
  return {Instance::dense(std::move(x), y), i};
}

// --- model: instance path ---------------------------------------------------

TEST(ModelOnInstance, DenseInstanceFansOutEveryAttribute) {
  ModelAggregator m(share(mixed_schema(2, 1)), {});
  Captured out;
  m.on_instance(labeled({1, 0, 0.5}, 1), 0, out.emit());
  const auto attrs = out.of<AttributeEvent>();
  ASSERT_EQ(attrs.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(attrs[i].attribute, i);
    EXPECT_EQ(attrs[i].leaf, 0u);
    EXPECT_EQ(attrs[i].label, 1u);
  }
  EXPECT_EQ(out.of<PredictionEvent>().size(), 1u);
}

TEST(ModelOnInstance, SparseInstanceSendsOnlyPresentAttributes) {
  ModelAggregator m(share(sparse_schema(10000)), {});
  Captured out;
  m.on_instance({Instance::sparse({{17, 1.0}, {9021, 1.0}}, 10000, 0), 0}, 0, out.emit());
  const auto attrs = out.of<AttributeEvent>();
  ASSERT_EQ(attrs.size(), 2u);
  EXPECT_EQ(attrs[0].attribute, 17u);
  EXPECT_EQ(attrs[1].attribute, 9021u);
}

TEST(ModelOnInstance, GracePeriodTriggersOneCompute) {
  ModelConfig cfg;
  cfg.stats_parallelism = 3;
  ModelAggregator m(share(mixed_schema(2, 0)), cfg);
  Captured out;
  for (int i = 0; i < 199; ++i) m.on_instance(labeled({double(i % 2), 0}, i % 2, i), 0, out.emit());
  EXPECT_TRUE(out.of<ComputeEvent>().empty());
  m.on_instance(labeled({1, 1}, 1, 199), 0, out.emit());
  const auto computes = out.of<ComputeEvent>();
  ASSERT_EQ(computes.size(), 1u);
  EXPECT_EQ(computes[0].leaf, 0u);
  EXPECT_DOUBLE_EQ(computes[0].basis[0] + computes[0].basis[1], 200.0);
  EXPECT_TRUE(m.splitting(0));
}

TEST(ModelOnInstance, UnlabeledInstanceIsOnlyPredicted) {
  ModelAggregator m(share(mixed_schema(2, 0)), {});
  Captured out;
  m.on_instance({Instance::dense({1, 1}, std::nullopt), 0}, 0, out.emit());
  EXPECT_TRUE(out.of<AttributeEvent>().empty());
  ASSERT_EQ(out.of<PredictionEvent>().size(), 1u);
  EXPECT_FALSE(out.of<PredictionEvent>()[0].actual.has_value());
}

// Drives a leaf into a pending attempt, then feeds `extra` instances.
struct DuringSplit {
  std::size_t attribute_events = 0;
  AttemptTrace trace;
};

DuringSplit feed_during_split(Variant v, std::size_t z, int extra) {
  ModelConfig cfg;
  cfg.variant = v;
  cfg.buffer_size = z;
  ModelAggregator m(share(mixed_schema(2, 0)), cfg);
  Captured out;
  for (int i = 0; i < 200; ++i) m.on_instance(labeled({double(i % 2), 0}, i % 2, i), 0, out.emit());
  EXPECT_TRUE(m.splitting(0));
  out.clear();
  for (int i = 0; i < extra; ++i) m.on_instance(labeled({1, 1}, 1, 200 + i), 0, out.emit());
  return {out.of<AttributeEvent>().size(), m.traces().at(0)};
}

TEST(ModelDuringSplit, EmptyBufferBehavesLikeForwarding) {
  const auto a = feed_during_split(Variant::wk, 0, 7);
  const auto b = feed_during_split(Variant::wok, 0, 7);
  EXPECT_EQ(a.attribute_events, b.attribute_events);
  EXPECT_EQ(a.attribute_events, 14u);
  EXPECT_EQ(a.trace.buffered, 0u);
}

TEST(ModelDuringSplit, BufferKeepsAtMostZ) {
  const auto r = feed_during_split(Variant::wk, 10, 15);
  EXPECT_EQ(r.trace.arrivals, 15u);
  EXPECT_EQ(r.trace.buffered, 10u);
  EXPECT_EQ(r.attribute_events, 30u);
}

TEST(ModelDuringSplit, VanillaDiscards) {
  const auto r = feed_during_split(Variant::vanilla, 0, 5);
  EXPECT_EQ(r.attribute_events, 0u);
  EXPECT_EQ(r.trace.arrivals, 5u);
}

// --- statistics ---------------------------------------------------------------

TEST(StatsOnAttribute, LazyCellsAndAccumulation) {
  LocalStatistics s(share(mixed_schema(3, 0)), {});
  s.on_attribute({4, 1, 1.0, 0, 1.0});
  EXPECT_EQ(s.cell_count(), 1u);
  for (int i = 0; i < 99; ++i) s.on_attribute({4, 1, 1.0, 0, 1.0});
  EXPECT_DOUBLE_EQ(std::get<CategoricalStats>(*s.cells(4)->find(1)).count(1, 0), 100.0);
}

TEST(StatsOnAttribute, DroppedLeafIsRecreatedLazily) {
  LocalStatistics s(share(mixed_schema(3, 0)), {});
  s.on_attribute({4, 1, 1.0, 0, 1.0});
  s.on_drop({4});
  EXPECT_FALSE(s.has_leaf(4));
  s.on_attribute({4, 2, 0.0, 1, 1.0});
  EXPECT_TRUE(s.has_leaf(4));
  EXPECT_EQ(s.cell_count(), 1u);
}

TEST(StatsOnCompute, PerfectAttributeBeatsUselessOne) {
  LocalStatistics s(share(mixed_schema(2, 0)), {});
  for (int i = 0; i < 100; ++i) {
    const double y = i % 2;
    s.on_attribute({0, 0, y, static_cast<ClassIndex>(y), 1.0});
    s.on_attribute({0, 1, double((i / 2) % 2), static_cast<ClassIndex>(y), 1.0});
  }
  const auto r = s.on_compute({0, 3, {50, 50}});
  EXPECT_EQ(r.attempt, 3u);
  ASSERT_FALSE(r.top.best.is_no_split());
  EXPECT_EQ(*r.top.best.attribute, 0u);
  EXPECT_TRUE(r.top.second.is_no_split());
  EXPECT_DOUBLE_EQ(r.n_estimate, 100.0);
}

TEST(StatsOnCompute, UnknownLeafAnswersNoSplit) {
  LocalStatistics s(share(mixed_schema(2, 0)), {});
  const auto r = s.on_compute({42, 1, {1, 1}});
  EXPECT_TRUE(r.top.best.is_no_split());
  EXPECT_TRUE(r.top.second.is_no_split());
  EXPECT_DOUBLE_EQ(r.n_estimate, 0.0);
}

TEST(StatsOnDrop, RemovesCellsAndIsIdempotent) {
  LocalStatistics s(share(mixed_schema(5, 0)), {});
  for (AttributeId a = 0; a < 5; ++a) s.on_attribute({9, a, 1.0, 0, 1.0});
  s.on_attribute({10, 0, 1.0, 0, 1.0});
  EXPECT_EQ(s.cell_count(), 6u);
  EXPECT_EQ(s.on_drop({9}), 5u);
  EXPECT_EQ(s.cell_count(), 1u);
  EXPECT_EQ(s.on_drop({9}), 0u);
  EXPECT_EQ(s.on_drop({1234}), 0u);
  EXPECT_EQ(s.leaf_count(), 1u);
}

// Pooled top-two vs. the merge of per-replica top-twos, attributes spread
// over replicas at random.
TEST(MergeOracle, RandomPartitionsMatchPooledTopTwo) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    const int cat = 1 + static_cast<int>(rng() % 5);
    const int num = static_cast<int>(rng() % 4);
    const auto schema = mixed_schema(cat, num);
    const auto rows = mixed_stream(cat, num, 50 + static_cast<int>(rng() % 200), static_cast<unsigned>(rng()), 0.3);
    HoeffdingParams hp;
    hp.grace_period = 1e12;
    HoeffdingTree pooled(schema, hp);
    for (const auto& r : rows) pooled.train(r);
    const auto& basis = pooled.model().leaf(0).basis_counts;
    const auto expected = top_two(leaf_candidates(*pooled.cells(0), schema, basis, hp.split));

    const std::size_t p = 1 + rng() % 4;
    std::vector<std::size_t> owner(schema.num_attributes());
    for (auto& o : owner) o = rng() % p;
    std::vector<LocalStatistics> replicas;
    for (std::size_t r = 0; r < p; ++r) replicas.emplace_back(share(schema), hp.split, r);
    for (const auto& row : rows) {
      row.for_each_present([&](AttributeId a, double v) {
        replicas[owner[a]].on_attribute({0, a, v, row.class_index(), row.weight()});
      });
    }
    TopTwo merged;
    for (const auto& rep : replicas) merged = merge_top_two(merged, rep.on_compute({0, 1, basis}).top);
    ASSERT_EQ(merged, expected) << "trial " << trial;
  }
}

// --- model: result path -------------------------------------------------------

struct PrimedModel {
  std::unique_ptr<ModelAggregator> model;
  Captured out;
};

// A model with a pending attempt on leaf 0 after 200 instances where
// attribute 0 determines the class.
PrimedModel primed(std::size_t p, std::size_t q = 1, std::uint64_t timeout = 30) {
  ModelConfig cfg;
  cfg.stats_parallelism = p;
  cfg.model_parallelism = q;
  cfg.timeout = timeout;
  PrimedModel pm{std::make_unique<ModelAggregator>(share(mixed_schema(4, 0)), cfg), {}};
  const int n = q == 1 ? 200 : 100;
  for (int i = 0; i < n; ++i) pm.model->on_instance(labeled({double(i % 2), 0, 0, 0}, i % 2, i), 0, pm.out.emit());
  pm.out.clear();
  return pm;
}

LocalResultEvent strong_result(std::size_t replica, double n) {
  LocalResultEvent r;
  r.leaf = 0;
  r.attempt = 0;
  r.replica = replica;
  r.top.best.attribute = 0;
  r.top.best.merit = 1.0;
  r.top.best.branches = {{100, 0}, {0, 100}};
  r.n_estimate = n;
  return r;
}

LocalResultEvent empty_result(std::size_t replica) {
  LocalResultEvent r;
  r.leaf = 0;
  r.attempt = 0;
  r.replica = replica;
  return r;
}

TEST(ModelOnLocalResult, AllResultsWithClearWinnerSplit) {
  auto pm = primed(4);
  pm.model->on_local_result(strong_result(0, 200), 1, pm.out.emit());
  for (std::size_t r = 1; r < 4; ++r) {
    EXPECT_EQ(pm.model->model().num_leaves(), 1u);
    pm.model->on_local_result(empty_result(r), 1, pm.out.emit());
  }
  EXPECT_EQ(pm.out.of<DropEvent>().size(), 1u);
  EXPECT_EQ(pm.model->model().num_leaves(), 2u);
  EXPECT_FALSE(pm.model->splitting(0));
  EXPECT_EQ(pm.model->traces()[0].outcome, AttemptOutcome::split);
}

TEST(ModelOnLocalResult, TimeoutWithoutCandidatesDoesNotSplit) {
  auto pm = primed(4, 1, 30);
  pm.model->on_local_result(empty_result(0), 5, pm.out.emit());
  pm.model->on_local_result(empty_result(2), 6, pm.out.emit());
  pm.model->check_timeouts(29, pm.out.emit());
  EXPECT_TRUE(pm.model->splitting(0));
  pm.model->check_timeouts(30, pm.out.emit());
  EXPECT_FALSE(pm.model->splitting(0));
  EXPECT_TRUE(pm.out.of<DropEvent>().empty());
  EXPECT_EQ(pm.model->model().num_leaves(), 1u);
  EXPECT_TRUE(pm.model->traces()[0].timed_out);
  EXPECT_EQ(pm.model->traces()[0].responses, 2u);
  // A late answer is now stale.
  pm.model->on_local_result(strong_result(1, 200), 40, pm.out.emit());
  EXPECT_EQ(pm.model->stale_results(), 1u);
  EXPECT_EQ(pm.model->model().num_leaves(), 1u);
}

TEST(ModelOnLocalResult, ReplicatedModelUsesLargestEstimate) {
  auto pm = primed(4, 2);
  const double estimates[] = {120, 87, 120, 45};
  for (std::size_t r = 0; r < 4; ++r) {
    auto res = empty_result(r);
    res.n_estimate = estimates[r];
    pm.model->on_local_result(res, 1, pm.out.emit());
  }
  EXPECT_DOUBLE_EQ(pm.model->traces()[0].n_used, 120.0);
  ASSERT_EQ(pm.out.of<DecisionEvent>().size(), 1u);
}

TEST(ModelOnLocalResult, DuplicateAndUnknownAnswersAreIgnored) {
  auto pm = primed(2);
  pm.model->on_local_result(empty_result(0), 1, pm.out.emit());
  pm.model->on_local_result(empty_result(0), 1, pm.out.emit());
  EXPECT_TRUE(pm.model->splitting(0));
  auto other = empty_result(1);
  other.attempt = 99;
  pm.model->on_local_result(other, 1, pm.out.emit());
  EXPECT_EQ(pm.model->stale_results(), 2u);
}

TEST(PredictAnytime, UsesPreSplitLeafWhilePending) {
  ModelAggregator fresh(share(mixed_schema(4, 0)), {});
  EXPECT_EQ(fresh.model().predict(Instance::dense({0, 0, 0, 0}, std::nullopt)), 0u);
  auto pm = primed(2);
  const auto before = pm.model->model().dump();
  pm.model->on_instance({Instance::dense({1, 0, 0, 0}, std::nullopt), 500}, 1, pm.out.emit());
  EXPECT_EQ(pm.model->model().dump(), before);
  EXPECT_EQ(pm.out.of<PredictionEvent>().back().leaves, 1u);
}

// --- whole topology -------------------------------------------------------------

template <class Rows>
VhtResult run_local(const Schema& schema, const Rows& rows, VhtConfig cfg) {
  engine::RunOptions<Event> o;
  o.mode = engine::Mode::local;
  return run_vht(cfg, schema, VectorSource{&rows}, {}, o);
}

TEST(VhtTopology, ShapeOfTheGraph) {
  VhtConfig cfg;
  cfg.parallelism = 4;
  const auto t = build_vht_topology(cfg, mixed_schema(2, 0));
  ASSERT_EQ(t.processors().size(), 4u);
  EXPECT_EQ(t.processors()[VhtLayout::source].parallelism, 1u);
  EXPECT_EQ(t.processors()[VhtLayout::model].parallelism, 1u);
  EXPECT_EQ(t.processors()[VhtLayout::statistics].parallelism, 4u);
  int back = 0;
  for (const auto& s : t.streams()) back += s.back_edge;
  EXPECT_EQ(back, 1);
}

TEST(VhtTopology, InvalidConfigRejected) {
  VhtConfig cfg;
  cfg.parallelism = 0;
  EXPECT_THROW(build_vht_topology(cfg, mixed_schema(2, 0)), std::invalid_argument);
  cfg.parallelism = 2;
  cfg.timeout = 0;
  EXPECT_THROW(build_vht_topology(cfg, mixed_schema(2, 0)), std::invalid_argument);
}

TEST(VhtTopology, ComputeReachesEveryStatisticsReplica) {
  const auto schema = mixed_schema(6, 2);
  const auto rows = mixed_stream(6, 2, 2000, 3);
  VhtConfig cfg;
  cfg.parallelism = 4;
  const auto r = run_local(schema, rows, cfg);
  ASSERT_FALSE(r.traces.empty());
  for (const auto& t : r.traces) EXPECT_EQ(t.responses, 4u);
}

TEST(VhtTopology, ProcessesEveryInstanceInThreadedMode) {
  const auto schema = mixed_schema(5, 5);
  const auto rows = mixed_stream(5, 5, 10000, 8);
  VhtConfig cfg;
  cfg.parallelism = 3;
  const auto r = run_vht(cfg, schema, VectorSource{&rows});
  EXPECT_EQ(r.report.events("source"), 10000u);
  EXPECT_EQ(r.report.events("evaluator"), 10000u);
  EXPECT_GE(r.report.events("model"), 10000u);
  // Attributes travel in at most one batch per replica and instance.
  EXPECT_GE(r.report.events("statistics"), 10000u);
  EXPECT_LE(r.report.events("statistics"), 10000u * 3 + 1000);
}

TEST(ModelOnInstance, BatchesGoToTheReplicaOwningEachCell) {
  ModelConfig cfg;
  cfg.stats_parallelism = 4;
  ModelAggregator m(share(mixed_schema(20, 20)), cfg);
  Captured out;
  std::vector<double> x(40, 0.0);
  m.on_instance(labeled(x, 1), 0, out.emit());
  const auto batches = out.of<AttributeBatchEvent>();
  ASSERT_GE(batches.size(), 2u);
  ASSERT_LE(batches.size(), 4u);
  std::set<AttributeId> seen;
  std::set<std::size_t> replicas;
  for (const auto& b : batches) {
    EXPECT_TRUE(replicas.insert(b.replica).second);
    EXPECT_EQ(attribute_partition(ContentEvent{b}, 4), b.replica);
    for (const auto& [a, v] : b.values) {
      EXPECT_EQ(attribute_replica(0, a, 4), b.replica);
      EXPECT_TRUE(seen.insert(a).second);
    }
  }
  EXPECT_EQ(seen.size(), 40u);
}

struct EquivalenceCase {
  std::string name;
  Schema schema;
  std::vector<Instance> rows;
};

std::vector<EquivalenceCase> equivalence_cases() {
  std::vector<EquivalenceCase> cases;
  for (unsigned seed = 1; seed <= 3; ++seed) {
    cases.push_back({"dense" + std::to_string(seed), mixed_schema(6, 4), mixed_stream(6, 4, 6000, seed)});
    cases.push_back({"sparse" + std::to_string(seed), sparse_schema(100), sparse_stream(100, 6000, seed)});
  }
  return cases;
}

TEST(LocalEquivalence, SameTreeAsSequential) {
  for (const auto& c : equivalence_cases()) {
    const auto seq = train_sequential_on(c.schema, c.rows);
    for (std::size_t p : {1, 2, 4, 7}) {
      VhtConfig cfg;
      cfg.parallelism = p;
      const auto r = run_local(c.schema, c.rows, cfg);
      EXPECT_TRUE(r.tree().structurally_equal(seq.model())) << c.name << " p=" << p;
      EXPECT_EQ(r.tree().num_leaves(), seq.leaf_count()) << c.name;
      EXPECT_EQ(r.timeouts, 0u);
      for (int i = 0; i < 200; ++i) {
        EXPECT_EQ(r.tree().predict(c.rows[i]), seq.predict(c.rows[i]));
      }
    }
    EXPECT_GT(seq.split_count(), 0u) << c.name;
  }
}

TEST(Partition, AttributesLiveOnExactlyOneReplica) {
  const auto schema = mixed_schema(8, 4);
  const auto rows = mixed_stream(8, 4, 150, 5);  // below the grace period: no split, no drop
  VhtConfig cfg;
  cfg.parallelism = 3;
  engine::RunOptions<Event> o;
  o.mode = engine::Mode::local;
  engine::Runner<Event> runner(build_vht_topology(cfg, schema), o);
  VectorSource src{&rows};
  std::uint64_t i = 0;
  runner.run([&]() -> std::optional<Event> {
    auto x = src();
    if (!x) return std::nullopt;
    return Event{InstanceEvent{std::move(*x), i++}};
  });
  std::vector<int> seen(schema.num_attributes(), 0);
  std::size_t cells = 0;
  for (std::size_t r = 0; r < 3; ++r) {
    const auto& st = runner.processor_as<StatisticsProcessor>(VhtLayout::statistics, r).statistics();
    cells += st.cell_count();
    if (const auto* c = st.cells(0)) c->for_each([&](AttributeId a, const AttributeStats&) { ++seen[a]; });
  }
  for (int s : seen) EXPECT_EQ(s, 1);
  EXPECT_EQ(cells, schema.num_attributes());
}

TEST(SingleCopy, CellsMatchSequentialTree) {
  const auto schema = mixed_schema(6, 4);
  const auto rows = mixed_stream(6, 4, 8000, 9);
  const auto seq = train_sequential_on(schema, rows);
  VhtConfig cfg;
  cfg.parallelism = 4;
  const auto r = run_local(schema, rows, cfg);
  EXPECT_EQ(r.total_cells(), seq.cell_count());
}

// Randomized interleavings with delayed answers: every attempt resolves, no
// leaf stays pending and no retired leaf ever takes part in a decision.
TEST(Protocol, LivenessAndDropSafetyUnderRandomSchedules) {
  const auto schema = mixed_schema(6, 3);
  const auto rows = mixed_stream(6, 3, 3000, 13);
  std::uint64_t timeouts = 0, stale = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    VhtConfig cfg;
    cfg.parallelism = 1 + seed % 4;
    cfg.timeout = 5 + seed % 40;
    cfg.variant = seed % 3 == 0 ? Variant::wk : Variant::wok;
    cfg.buffer_size = 20;
    cfg.params.grace_period = 100;
    engine::RunOptions<Event> o;
    o.mode = engine::Mode::simulated;
    o.seed = seed;
    auto delay_rng = std::make_shared<std::mt19937_64>(seed * 7919);
    o.delay = [delay_rng](std::size_t, const Event& e) -> std::uint64_t {
      if (std::holds_alternative<LocalResultEvent>(e)) return (*delay_rng)() % 60;
      return 0;
    };
    const auto r = run_vht(cfg, schema, VectorSource{&rows}, {}, o);
    std::set<LeafId> retired;
    std::set<LeafId> pending;
    for (const auto& t : r.traces) {
      EXPECT_NE(t.outcome, AttemptOutcome::pending) << "seed " << seed;
      EXPECT_EQ(retired.count(t.leaf), 0u) << "seed " << seed;
      if (t.outcome == AttemptOutcome::split) retired.insert(t.leaf);
    }
    EXPECT_EQ(r.tree().num_splits(), retired.size());
    for (LeafId id : retired) EXPECT_FALSE(r.tree().has_leaf(id));
    EXPECT_EQ(r.report.events("evaluator"), rows.size());
    timeouts += r.timeouts;
    stale += r.stale_results;
  }
  // The schedules must actually exercise the timeout and stale-answer paths.
  EXPECT_GT(timeouts, 0u);
  EXPECT_GT(stale, 0u);
}

TEST(BufferReplay, ReplaysMinOfZAndArrivals) {
  const auto schema = mixed_schema(4, 2);
  const auto rows = mixed_stream(4, 2, 6000, 21);
  for (std::size_t z : {0, 5, 20, 1000}) {
    VhtConfig cfg;
    cfg.parallelism = 2;
    cfg.variant = Variant::wk;
    cfg.buffer_size = z;
    cfg.timeout = 1000000;
    engine::RunOptions<Event> o;
    o.mode = engine::Mode::simulated;
    o.seed = 3;
    o.delay = [](std::size_t dst, const Event& e) -> std::uint64_t {
      return dst == VhtLayout::model && std::holds_alternative<LocalResultEvent>(e) ? 40 : 0;
    };
    const auto r = run_vht(cfg, schema, VectorSource{&rows}, {}, o);
    std::size_t splits = 0;
    std::uint64_t arrivals = 0;
    for (const auto& t : r.traces) {
      arrivals += t.arrivals;
      EXPECT_EQ(t.buffered, std::min<std::uint64_t>(z, t.arrivals));
      if (t.outcome == AttemptOutcome::split) {
        EXPECT_EQ(t.replayed, t.buffered);
        ++splits;
      } else {
        EXPECT_EQ(t.replayed, 0u);
      }
    }
    EXPECT_GT(splits, 0u);
    EXPECT_GT(arrivals, 20u * splits);  // the delay really opened a window
  }
}

TEST(BufferReplay, SpilledBufferReplaysTheSameInstances) {
  const auto dir = std::filesystem::temp_directory_path() / "vht_spill_test";
  std::filesystem::create_directories(dir);
  InstanceBuffer mem(3);
  InstanceBuffer disk(3, dir / "b.buf");
  const std::vector<Instance> xs{Instance::dense({1, 2.5}, 1), Instance::sparse({{3, 1.0}, {9, 2.0}}, 10, 0, 0.5),
                                 Instance::dense({0, 0}, std::nullopt), Instance::dense({7, 7}, 0)};
  for (const auto& x : xs) {
    mem.push(x);
    disk.push(x);
  }
  EXPECT_EQ(disk.size(), 3u);
  EXPECT_TRUE(std::filesystem::exists(dir / "b.buf"));
  std::vector<Instance> a, b;
  mem.drain([&](Instance i) { a.push_back(std::move(i)); });
  disk.drain([&](Instance i) { b.push_back(std::move(i)); });
  EXPECT_EQ(a, b);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[1], xs[1]);
  EXPECT_FALSE(std::filesystem::exists(dir / "b.buf"));
  std::filesystem::remove_all(dir);
}

TEST(Replication, ReplicasEndStructurallyIdentical) {
  const auto schema = mixed_schema(6, 3);
  const auto rows = mixed_stream(6, 3, 20000, 4);
  for (auto mode : {engine::Mode::local, engine::Mode::simulated, engine::Mode::threaded}) {
    VhtConfig cfg;
    cfg.parallelism = 3;
    cfg.model_replicas = 2;
    cfg.timeout = 1000000;
    engine::RunOptions<Event> o;
    o.mode = mode;
    const auto r = run_vht(cfg, schema, VectorSource{&rows}, {}, o);
    ASSERT_EQ(r.trees.size(), 2u);
    EXPECT_TRUE(r.trees[0].structurally_equal(r.trees[1]));
    EXPECT_GT(r.trees[0].num_splits(), 0u);
    const auto& per = r.report.processors[VhtLayout::model].events_per_replica;
    EXPECT_GE(per[0], 10000u);
    EXPECT_GE(per[1], 10000u);
  }
}

TEST(Replication, SingleModelReplicaIsThePlainPipeline) {
  const auto schema = mixed_schema(6, 3);
  const auto rows = mixed_stream(6, 3, 5000, 4);
  VhtConfig cfg;
  cfg.parallelism = 2;
  const auto a = run_local(schema, rows, cfg);
  cfg.model_replicas = 1;
  const auto b = run_local(schema, rows, cfg);
  EXPECT_EQ(a.tree().dump(), b.tree().dump());
}

}  // namespace
}  // namespace vht::vertical
