#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vht/datagen/random.hpp"
#include "vht/tree/instance.hpp"

namespace vht::datagen {

struct DenseGenConfig {
  std::size_t categorical = 10;
  std::size_t numerical = 10;
  std::uint32_t values_per_categorical = 2;
  std::uint32_t min_depth = 3;
  std::uint32_t max_depth = 8;
  std::uint64_t seed = 1;

  void validate() const {
    if (categorical + numerical == 0) throw std::invalid_argument("dense generator needs at least one attribute");
    if (categorical > 0 && values_per_categorical < 2) {
      throw std::invalid_argument("categorical attributes need at least two values");
    }
    if (min_depth < 1 || max_depth < min_depth) throw std::invalid_argument("invalid hidden tree depth bounds");
  }
};

/// Labels instances with a hidden random decision tree. A path stops at depth
/// d >= min_depth with probability 1/(max_depth - d + 1), which makes path
/// depths uniform over [min_depth, max_depth]. Leaf classes are balanced by
/// probability mass.
class DenseGenerator {
 public:
  explicit DenseGenerator(DenseGenConfig config) : config_(config) {
    config_.validate();
    for (std::size_t i = 0; i < config_.categorical; ++i) {
      schema_.attributes.push_back(categorical_attribute("cat" + std::to_string(i), config_.values_per_categorical));
    }
    for (std::size_t i = 0; i < config_.numerical; ++i) schema_.attributes.push_back(numeric_attribute("num" + std::to_string(i)));
    schema_.classes = class_labels(2);
    build_tree();
  }

  const Schema& schema() const { return schema_; }
  const DenseGenConfig& config() const { return config_; }

  /// Instance `index` of the stream; a pure function of (config, index).
  Instance instance(std::uint64_t index) const {
    auto rng = rng_for(config_.seed, index, 1);
    std::vector<double> x(schema_.num_attributes());
    for (std::size_t i = 0; i < config_.categorical; ++i) {
      x[i] = static_cast<double>(rng() % config_.values_per_categorical);
    }
    for (std::size_t i = 0; i < config_.numerical; ++i) x[config_.categorical + i] = rng.uniform();
    auto inst = Instance::dense(std::move(x), std::nullopt);
    inst.set_label(classify(inst));
    return inst;
  }

  ClassIndex classify(const Instance& inst) const {
    std::size_t n = 0;
    while (!nodes_[n].leaf) {
      const auto& node = nodes_[n];
      const double v = inst.value(node.attribute);
      if (node.numeric) {
        n = node.children[v <= node.threshold ? 0 : 1];
      } else {
        n = node.children[static_cast<std::size_t>(v)];
      }
    }
    return nodes_[n].label;
  }

  std::size_t hidden_leaves() const {
    return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.leaf; }));
  }
  std::uint32_t hidden_depth() const { return depth_; }

 private:
  struct Node {
    bool leaf = true;
    ClassIndex label = 0;
    AttributeId attribute = 0;
    bool numeric = false;
    double threshold = 0.0;
    std::vector<std::size_t> children;
    double mass = 1.0;
  };

  void build_tree() {
    auto rng = rng_for(config_.seed, 0, 2);
    std::vector<bool> used(config_.categorical, false);
    nodes_.push_back(Node{});
    grow(0, 0, 1.0, used, rng);
    // Greedy mass balancing: heaviest leaves first, each to the lighter class.
    std::vector<std::size_t> leaves;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].leaf) leaves.push_back(i);
    }
    std::stable_sort(leaves.begin(), leaves.end(), [&](auto a, auto b) { return nodes_[a].mass > nodes_[b].mass; });
    double mass[2] = {0.0, 0.0};
    for (auto i : leaves) {
      const ClassIndex k = mass[1] < mass[0] ? 1 : 0;
      nodes_[i].label = k;
      mass[k] += nodes_[i].mass;
    }
  }

  void grow(std::size_t id, std::uint32_t depth, double mass, std::vector<bool>& used, SplitMix64& rng) {
    nodes_[id].mass = mass;
    depth_ = std::max(depth_, depth);
    if (depth >= config_.min_depth) {
      const double stop = 1.0 / static_cast<double>(config_.max_depth - depth + 1);
      if (rng.uniform() < stop) return;
    }
    std::vector<AttributeId> options;
    for (std::size_t i = 0; i < config_.categorical; ++i) {
      if (!used[i]) options.push_back(static_cast<AttributeId>(i));
    }
    for (std::size_t i = 0; i < config_.numerical; ++i) options.push_back(static_cast<AttributeId>(config_.categorical + i));
    if (options.empty()) return;
    const AttributeId a = options[rng() % options.size()];
    Node& node = nodes_[id];
    node.leaf = false;
    node.attribute = a;
    node.numeric = a >= config_.categorical;
    std::vector<double> shares;
    if (node.numeric) {
      node.threshold = rng.uniform();
      shares = {node.threshold, 1.0 - node.threshold};
    } else {
      shares.assign(config_.values_per_categorical, 1.0 / config_.values_per_categorical);
      used[a] = true;
    }
    std::vector<std::size_t> kids;
    for (std::size_t b = 0; b < shares.size(); ++b) {
      kids.push_back(nodes_.size());
      nodes_.push_back(Node{});
    }
    nodes_[id].children = kids;
    for (std::size_t b = 0; b < kids.size(); ++b) grow(kids[b], depth + 1, mass * shares[b], used, rng);
    if (!nodes_[id].numeric) used[a] = false;
  }

  DenseGenConfig config_;
  Schema schema_;
  std::vector<Node> nodes_;
  std::uint32_t depth_ = 0;
};

/// Pull-style stream of the first `n` instances of a generator.
template <class Generator>
class GeneratedStream {
 public:
  GeneratedStream(const Generator& gen, std::uint64_t n, std::uint64_t start = 0) : gen_(&gen), next_(start), end_(start + n) {}
  std::optional<Instance> operator()() {
    if (next_ >= end_) return std::nullopt;
    return gen_->instance(next_++);
  }

 private:
  const Generator* gen_;
  std::uint64_t next_;
  std::uint64_t end_;
};

}  // namespace vht::datagen
