#pragma once

// Independent re-implementation of Hoeffding tree induction for dense,
// categorical-only streams. Every leaf keeps the raw instances that reached
// it and recomputes all counts from scratch at every split attempt.

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

namespace oracle {

struct Row {
  std::vector<int> x;
  int y = 0;
};

struct Node {
  bool leaf = true;
  int attribute = -1;
  std::vector<std::unique_ptr<Node>> children;
  std::vector<double> dist;   // class counts incl. inherited
  std::vector<Row> rows;      // raw rows seen since creation
  double last_attempt = 0.0;
};

class BruteForceTree {
 public:
  BruteForceTree(std::vector<int> values_per_attribute, int num_classes, double delta, double grace,
                 double tau, double min_branch_fraction = 0.01)
      : values_(std::move(values_per_attribute)),
        classes_(num_classes),
        delta_(delta),
        grace_(grace),
        tau_(tau),
        min_frac_(min_branch_fraction) {
    root_ = fresh(std::vector<double>(classes_, 0.0));
  }

  void learn(const Row& r) {
    Node* n = root_.get();
    while (!n->leaf) n = n->children[r.x[n->attribute]].get();
    n->rows.push_back(r);
    n->dist[r.y] += 1.0;
    double total = 0.0;
    int nonzero = 0;
    for (double c : n->dist) {
      total += c;
      nonzero += c > 0 ? 1 : 0;
    }
    if (total - n->last_attempt >= grace_) {
      n->last_attempt = total;
      if (nonzero >= 2) attempt(*n, total);
    }
  }

  const Node& root() const { return *root_; }

 private:
  static double h(const std::vector<double>& c) {
    double t = 0.0;
    for (double v : c) t += v;
    if (t <= 0.0) return 0.0;
    double out = 0.0;
    for (double v : c) {
      if (v > 0.0) out -= (v / t) * std::log2(v / t);
    }
    return out;
  }

  std::unique_ptr<Node> fresh(std::vector<double> dist) {
    auto n = std::make_unique<Node>();
    n->dist = std::move(dist);
    double t = 0.0;
    for (double v : n->dist) t += v;
    n->last_attempt = t;
    return n;
  }

  void attempt(Node& n, double total_weight) {
    struct Cand {
      int attribute;  // -1 = no split
      double merit;
      std::vector<std::vector<double>> branches;
    };
    std::vector<Cand> cands;
    cands.push_back({-1, 0.0, {}});
    for (int a = 0; a < static_cast<int>(values_.size()); ++a) {
      std::vector<std::vector<double>> br(values_[a], std::vector<double>(classes_, 0.0));
      std::vector<double> parent(classes_, 0.0);
      for (const auto& r : n.rows) {
        br[r.x[a]][r.y] += 1.0;
        parent[r.y] += 1.0;
      }
      const double total = static_cast<double>(n.rows.size());
      int populated = 0;
      for (const auto& b : br) {
        double s = 0.0;
        for (double v : b) s += v;
        if (s > 0.0 && s >= min_frac_ * total) ++populated;
      }
      if (populated < 2) continue;
      double after = 0.0;
      for (const auto& b : br) {
        double s = 0.0;
        for (double v : b) s += v;
        if (s > 0.0) after += s / total * h(b);
      }
      cands.push_back({a, h(parent) - after, br});
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
      if (x.merit != y.merit) return x.merit > y.merit;
      if ((x.attribute < 0) != (y.attribute < 0)) return x.attribute < 0;
      return x.attribute < y.attribute;
    });
    const Cand& best = cands[0];
    const double second = cands.size() > 1 ? cands[1].merit : 0.0;
    const double range = std::log2(std::max(classes_, 2));
    const double eps = std::sqrt(range * range * std::log(1.0 / delta_) / (2.0 * total_weight));
    if (best.attribute >= 0 && (best.merit - second > eps || eps < tau_)) {
      n.leaf = false;
      n.attribute = best.attribute;
      n.rows.clear();
      for (const auto& b : best.branches) n.children.push_back(fresh(b));
    }
  }

  std::vector<int> values_;
  int classes_;
  double delta_, grace_, tau_, min_frac_;
  std::unique_ptr<Node> root_;
};

}  // namespace oracle
