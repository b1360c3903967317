#include <gtest/gtest.h>

#include <vector>

#include "support/streams.hpp"
#include "vht/baselines/sequential.hpp"
#include "vht/baselines/sharding.hpp"
#include "vht/tree/serialization.hpp"

using namespace vht;
using namespace vht::baselines;
using namespace testing_streams;

namespace {

double seen_weight(const TreeModel& t) {
  double n = 0;
  for (double c : t.seen_class_counts()) n += c;
  return n;
}

}  // namespace

TEST(MajorityVote, Rules) {
  EXPECT_EQ(majority_vote({1, 1, 1}, 2), 1u);
  EXPECT_EQ(majority_vote({0, 0, 1}, 2), 0u);
  EXPECT_EQ(majority_vote({1, 1, 0}, 2), 1u);
  EXPECT_EQ(majority_vote({0, 1}, 2), 0u);
  EXPECT_EQ(majority_vote({2, 1, 1, 2}, 3), 1u);
  EXPECT_EQ(majority_vote({}, 3), 0u);
}

TEST(ShardEnsemble, RejectsZeroShards) { EXPECT_THROW(ShardEnsemble(mixed_schema(1, 1), 0), std::invalid_argument); }

TEST(ShardEnsemble, SingleShardIsTheSequentialTree) {
  const auto schema = mixed_schema(3, 3);
  const auto rows = mixed_stream(3, 3, 5000, 7);
  ShardEnsemble ens(schema, 1);
  HoeffdingTree seq(schema);
  for (const auto& r : rows) {
    ASSERT_EQ(ens.predict(r), seq.predict(r));
    ens.train(r);
    seq.train(r);
  }
  EXPECT_GT(seq.model().num_splits(), 0u);
  EXPECT_EQ(serialize_tree(ens.shard(0).model()), serialize_tree(seq.model()));
  EXPECT_EQ(ens.shard(0).model().dump(), seq.model().dump());
}

TEST(ShardEnsemble, RoundRobinSplitsTheStream) {
  const auto rows = mixed_stream(2, 2, 1000, 3);
  ShardEnsemble ens(mixed_schema(2, 2), 2);
  for (const auto& r : rows) ens.train(r);
  EXPECT_EQ(seen_weight(ens.shard(0).model()), 500.0);
  EXPECT_EQ(seen_weight(ens.shard(1).model()), 500.0);
  // Shard 1 saw exactly the odd instances.
  HoeffdingTree odd(mixed_schema(2, 2));
  for (std::size_t i = 1; i < rows.size(); i += 2) odd.train(rows[i]);
  EXPECT_EQ(odd.model().dump(), ens.shard(1).model().dump());
}

TEST(ShardEnsemble, ShardsAreIsolated) {
  const auto rows = mixed_stream(3, 3, 6000, 7);
  ShardEnsemble ens(mixed_schema(3, 3), 3);
  for (std::size_t i = 0; i < 300; ++i) ens.train(rows[i]);
  const auto before1 = serialize_tree(ens.shard(1).model());
  const auto before2 = serialize_tree(ens.shard(2).model());
  for (std::size_t i = 300; i < rows.size(); ++i) ens.shard(0).train(rows[i]);
  EXPECT_GT(ens.shard(0).model().num_splits(), 0u);
  EXPECT_EQ(serialize_tree(ens.shard(1).model()), before1);
  EXPECT_EQ(serialize_tree(ens.shard(2).model()), before2);
}

TEST(ShardEnsemble, UnanimousAndSplitVotes) {
  const auto schema = mixed_schema(0, 1);
  ShardEnsemble ens(schema, 3);
  // Shards see only class 1, only class 0, and class 1: votes {1, 0, 1}.
  for (ClassIndex k : {1u, 0u, 1u}) ens.train(Instance::dense({0.5}, k));
  const auto probe = Instance::dense({0.5}, std::nullopt);
  EXPECT_EQ(ens.votes(probe), (std::vector<ClassIndex>{1, 0, 1}));
  EXPECT_EQ(ens.predict(probe), 1u);
  ShardEnsemble two(schema, 2);
  two.train(Instance::dense({0.5}, 1u));
  two.train(Instance::dense({0.5}, 0u));
  EXPECT_EQ(two.votes(probe), (std::vector<ClassIndex>{1, 0}));
  EXPECT_EQ(two.predict(probe), 0u);
}

TEST(ShardEnsemble, CellsGrowWithShards) {
  const auto schema = mixed_schema(20, 20);
  const auto rows = mixed_stream(20, 20, 400, 9);
  HoeffdingTree seq(schema);
  for (const auto& r : rows) seq.train(r);
  for (std::size_t p : {2u, 4u, 8u}) {
    ShardEnsemble ens(schema, p);
    for (const auto& r : rows) ens.train(r);
    // Before any shard splits, every shard holds one cell per attribute at its root.
    EXPECT_EQ(ens.cell_count(), p * 40) << p;
    EXPECT_GE(ens.cell_count(), (p - 1) * seq.cell_count()) << p;
  }
}

TEST(Sequential, RunnerMatchesManualLoop) {
  const auto schema = mixed_schema(3, 3);
  const auto rows = mixed_stream(3, 3, 4000, 13);
  const auto res = run_sequential(schema, VectorSource{&rows}, 1000);
  ASSERT_EQ(res.rows.size(), 4u);
  HoeffdingTree t(schema);
  double ok = 0;
  for (const auto& r : rows) {
    ok += t.predict(r) == r.class_index() ? 1 : 0;
    t.train(r);
  }
  EXPECT_NEAR(res.rows.back().accuracy_cum, 100.0 * ok / 4000, 1e-9);
  EXPECT_EQ(res.rows.back().splits, t.model().num_splits());
  EXPECT_EQ(res.rows.back().leaves, t.model().num_leaves());
  EXPECT_EQ(res.tree.model().dump(), t.model().dump());
}

TEST(Sequential, RejectsInvalidInstance) {
  const auto schema = mixed_schema(1, 1);
  std::vector<Instance> rows{Instance::dense({0.0, 0.5}, 0u), Instance::dense({0.0}, 1u)};
  EXPECT_THROW(run_sequential(schema, VectorSource{&rows}, 10), SchemaError);
}

class ShardingModes : public ::testing::TestWithParam<engine::Mode> {};

TEST_P(ShardingModes, TopologyMatchesEnsemble) {
  const auto schema = mixed_schema(4, 4);
  const auto rows = mixed_stream(4, 4, 6000, 17);
  for (std::size_t p : {1u, 3u}) {
    ShardEnsemble ens(schema, p);
    std::vector<ClassIndex> expected;
    for (const auto& r : rows) {
      expected.push_back(ens.predict(r));
      ens.train(r);
    }
    std::vector<ClassIndex> got(rows.size(), 99);
    std::uint64_t last = 0, count = 0;
    bool ordered = true;
    ShardingConfig cfg;
    cfg.parallelism = p;
    cfg.queue_capacity = 16;
    engine::RunOptions<ShardEvent> o;
    o.mode = GetParam();
    o.seed = 3;
    const auto res = run_sharding(
        cfg, schema, VectorSource{&rows},
        [&](const vertical::PredictionEvent& e) {
          got[e.index] = e.predicted;
          if (count++ > 0 && e.index <= last) ordered = false;
          last = e.index;
        },
        o);
    EXPECT_EQ(got, expected) << "p=" << p;
    EXPECT_TRUE(ordered);
    ASSERT_EQ(res.trees.size(), p);
    for (std::size_t s = 0; s < p; ++s) EXPECT_EQ(res.trees[s].dump(), ens.shard(s).model().dump());
    EXPECT_EQ(res.total_cells(), ens.cell_count());
    EXPECT_EQ(res.report.events("shard"), p * rows.size());
  }
}

INSTANTIATE_TEST_SUITE_P(AllModes, ShardingModes,
                         ::testing::Values(engine::Mode::threaded, engine::Mode::local, engine::Mode::simulated));
