#pragma once

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "vht/tree/instance.hpp"
#include "vht/tree/split.hpp"

namespace vht {

struct LeafNode {
  LeafId id = 0;
  // Class distribution, including what was inherited from the parent split.
  std::vector<double> class_counts;
  // Class distribution of instances that reached this leaf since it was created;
  // exactly what the leaf's attribute statistics have seen.
  std::vector<double> basis_counts;
  double weight_at_last_attempt = 0.0;

  double weight() const {
    double n = 0.0;
    for (double c : class_counts) n += c;
    return n;
  }
  bool is_pure() const {
    int nonzero = 0;
    for (double c : class_counts) nonzero += c > 0.0 ? 1 : 0;
    return nonzero < 2;
  }
};

struct SplitNode {
  AttributeId attribute = 0;
  AttributeKind kind = AttributeKind::categorical;
  double threshold = 0.0;
  std::vector<std::size_t> children;  // node indices
};

using TreeNode = std::variant<LeafNode, SplitNode>;

/// Index of the highest count; ties go to the lowest index.
inline ClassIndex majority_class(const std::vector<double>& counts) {
  ClassIndex best = 0;
  for (ClassIndex k = 1; k < counts.size(); ++k) {
    if (counts[k] > counts[best]) best = k;
  }
  return best;
}

class TreeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Decision tree of split nodes and learning leaves. Leaf ids are never
/// reused: a split retires the leaf's id and hands out fresh ones.
class TreeModel {
 public:
  TreeModel() : TreeModel(Schema{}) {}

  explicit TreeModel(Schema schema) : schema_(std::move(schema)) {
    const auto C = std::max<std::uint32_t>(schema_.num_classes(), 1);
    seen_.assign(C, 0.0);
    LeafNode root;
    root.id = next_leaf_id_++;
    root.class_counts.assign(C, 0.0);
    root.basis_counts.assign(C, 0.0);
    nodes_.emplace_back(std::move(root));
    leaf_index_.emplace(0, 0);
  }

  const Schema& schema() const { return schema_; }
  std::uint32_t num_classes() const { return static_cast<std::uint32_t>(seen_.size()); }

  std::size_t sort_to_node(const Instance& inst) const {
    std::size_t node = 0;
    while (const auto* split = std::get_if<SplitNode>(&nodes_[node])) {
      node = split->children[branch_of(*split, inst)];
    }
    return node;
  }

  LeafId sort_to_leaf(const Instance& inst) const {
    return std::get<LeafNode>(nodes_[sort_to_node(inst)]).id;
  }

  /// Branch taken at `split`; absent sparse attributes read as 0.
  static std::size_t branch_of(const SplitNode& split, const Instance& inst) {
    const double v = inst.value(split.attribute);
    if (split.kind == AttributeKind::numeric) return v <= split.threshold ? 0 : 1;
    const auto b = static_cast<std::size_t>(v);
    return (v >= 0 && b < split.children.size()) ? b : 0;
  }

  bool has_leaf(LeafId id) const { return leaf_index_.count(id) != 0; }

  LeafNode& leaf(LeafId id) { return std::get<LeafNode>(nodes_[node_of(id)]); }
  const LeafNode& leaf(LeafId id) const { return std::get<LeafNode>(nodes_[node_of(id)]); }

  /// Adds weight w of class k to a leaf and to the global class tally.
  void count(LeafId id, ClassIndex k, double w) {
    auto& l = leaf(id);
    l.class_counts[k] += w;
    l.basis_counts[k] += w;
    seen_[k] += w;
  }

  /// Replaces leaf `id` by a split node with one fresh leaf per branch of
  /// `candidate`, each starting from that branch's class distribution.
  /// `first_child_id` pins the id of the first new leaf (consecutive after it).
  std::vector<LeafId> split_leaf(LeafId id, const SplitCandidate& candidate,
                                 std::optional<LeafId> first_child_id = std::nullopt) {
    if (candidate.is_no_split()) throw TreeError("cannot split on the no-split candidate");
    const auto it = leaf_index_.find(id);
    if (it == leaf_index_.end()) {
      throw TreeError("unknown or already split leaf id " + std::to_string(id));
    }
    if (candidate.branches.size() < 2) throw TreeError("a split needs at least two branches");
    const std::size_t node = it->second;
    leaf_index_.erase(it);

    SplitNode split;
    split.attribute = *candidate.attribute;
    split.kind = candidate.kind;
    split.threshold = candidate.threshold;

    LeafId next = first_child_id.value_or(next_leaf_id_);
    std::vector<LeafId> fresh;
    for (const auto& dist : candidate.branches) {
      LeafNode child;
      child.id = next++;
      if (leaf_index_.count(child.id) || child.id == id) throw TreeError("leaf id reuse");
      child.class_counts = dist;
      child.class_counts.resize(num_classes(), 0.0);
      child.basis_counts.assign(num_classes(), 0.0);
      child.weight_at_last_attempt = child.weight();
      split.children.push_back(nodes_.size());
      leaf_index_.emplace(child.id, nodes_.size());
      fresh.push_back(child.id);
      nodes_.emplace_back(std::move(child));
    }
    next_leaf_id_ = std::max(next_leaf_id_, next);
    nodes_[node] = std::move(split);
    ++splits_;
    return fresh;
  }

  ClassIndex predict(const Instance& inst) const {
    const auto& l = std::get<LeafNode>(nodes_[sort_to_node(inst)]);
    if (l.weight() > 0.0) return majority_class(l.class_counts);
    return majority_class(seen_);
  }

  std::size_t num_leaves() const { return leaf_index_.size(); }
  std::size_t num_splits() const { return splits_; }
  std::size_t num_nodes() const { return nodes_.size(); }
  LeafId next_leaf_id() const { return next_leaf_id_; }
  const std::vector<double>& seen_class_counts() const { return seen_; }

  std::vector<LeafId> active_leaves() const {
    std::vector<LeafId> ids;
    ids.reserve(leaf_index_.size());
    for (const auto& [id, _] : leaf_index_) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  const std::vector<TreeNode>& nodes() const { return nodes_; }

  std::size_t depth() const { return depth_of(0); }

  /// Same shape, split attributes and thresholds; leaf ids and counts ignored.
  bool structurally_equal(const TreeModel& other) const { return same_shape(other, 0, 0); }

  /// Indented text, one node per line.
  void dump(std::ostream& out) const { dump_node(out, 0, 0, ""); }

  std::string dump() const {
    std::ostringstream os;
    dump(os);
    return os.str();
  }

  // Raw access for deserialization.
  static TreeModel from_parts(Schema schema, std::vector<TreeNode> nodes, std::vector<double> seen,
                              LeafId next_leaf_id, std::size_t splits) {
    TreeModel t(std::move(schema));
    t.nodes_ = std::move(nodes);
    t.seen_ = std::move(seen);
    t.next_leaf_id_ = next_leaf_id;
    t.splits_ = splits;
    t.leaf_index_.clear();
    for (std::size_t i = 0; i < t.nodes_.size(); ++i) {
      if (const auto* l = std::get_if<LeafNode>(&t.nodes_[i])) t.leaf_index_.emplace(l->id, i);
    }
    return t;
  }

 private:
  std::size_t node_of(LeafId id) const {
    const auto it = leaf_index_.find(id);
    if (it == leaf_index_.end()) throw TreeError("unknown leaf id " + std::to_string(id));
    return it->second;
  }

  std::size_t depth_of(std::size_t node) const {
    const auto* s = std::get_if<SplitNode>(&nodes_[node]);
    if (!s) return 0;
    std::size_t d = 0;
    for (auto c : s->children) d = std::max(d, depth_of(c));
    return d + 1;
  }

  bool same_shape(const TreeModel& other, std::size_t a, std::size_t b) const {
    const auto* sa = std::get_if<SplitNode>(&nodes_[a]);
    const auto* sb = std::get_if<SplitNode>(&other.nodes_[b]);
    if (!sa || !sb) return !sa && !sb;
    if (sa->attribute != sb->attribute || sa->kind != sb->kind || sa->threshold != sb->threshold ||
        sa->children.size() != sb->children.size()) {
      return false;
    }
    for (std::size_t i = 0; i < sa->children.size(); ++i) {
      if (!same_shape(other, sa->children[i], sb->children[i])) return false;
    }
    return true;
  }

  std::string attribute_name(AttributeId id) const {
    if (id < schema_.attributes.size() && !schema_.attributes[id].name.empty()) {
      return schema_.attributes[id].name;
    }
    return "a" + std::to_string(id);
  }

  void dump_node(std::ostream& out, std::size_t node, int depth, const std::string& label) const {
    out << std::string(static_cast<std::size_t>(depth) * 2, ' ') << label;
    if (const auto* l = std::get_if<LeafNode>(&nodes_[node])) {
      out << "Leaf(" << l->id << ") class=" << majority_class(l->class_counts)
          << " weight=" << l->weight() << " counts=[";
      for (std::size_t k = 0; k < l->class_counts.size(); ++k) {
        out << (k ? "," : "") << l->class_counts[k];
      }
      out << "]\n";
      return;
    }
    const auto& s = std::get<SplitNode>(nodes_[node]);
    const auto name = attribute_name(s.attribute);
    out << "Split(" << name << ") attr=" << s.attribute;
    if (s.kind == AttributeKind::numeric) {
      out << " numeric threshold=" << s.threshold << "\n";
    } else {
      out << " categorical branches=" << s.children.size() << "\n";
    }
    for (std::size_t i = 0; i < s.children.size(); ++i) {
      std::ostringstream lab;
      if (s.kind == AttributeKind::numeric) {
        lab << "[" << name << (i == 0 ? " <= " : " > ") << s.threshold << "] ";
      } else {
        lab << "[" << name << " = ";
        const auto& info = s.attribute < schema_.attributes.size() ? schema_.attributes[s.attribute]
                                                                   : AttributeInfo{};
        if (i < info.values.size()) {
          lab << info.values[i];
        } else {
          lab << i;
        }
        lab << "] ";
      }
      dump_node(out, s.children[i], depth + 1, lab.str());
    }
  }

  Schema schema_;
  std::vector<TreeNode> nodes_;
  std::unordered_map<LeafId, std::size_t> leaf_index_;
  std::vector<double> seen_;
  LeafId next_leaf_id_ = 0;
  std::size_t splits_ = 0;
};

}  // namespace vht
