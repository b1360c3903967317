#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "vht/tree/attribute_stats.hpp"
#include "vht/tree/criterion.hpp"

namespace vht {

/// A scored way of splitting a leaf. An empty `attribute` is the no-split
/// option, whose merit is the merit of keeping the leaf as is (zero).
struct SplitCandidate {
  std::optional<AttributeId> attribute;
  double merit = 0.0;
  AttributeKind kind = AttributeKind::categorical;
  double threshold = 0.0;
  // Class distribution routed to each branch; the new leaves start from these.
  std::vector<std::vector<double>> branches;

  bool is_no_split() const { return !attribute.has_value(); }

  static SplitCandidate no_split() { return SplitCandidate{}; }

  friend bool operator==(const SplitCandidate&, const SplitCandidate&) = default;
};

/// Strict ordering used everywhere candidates are ranked: higher merit first;
/// on equal merit the no-split option wins, then the lower attribute id.
inline bool ranks_before(const SplitCandidate& a, const SplitCandidate& b) {
  if (a.merit != b.merit) return a.merit > b.merit;
  if (a.is_no_split() != b.is_no_split()) return a.is_no_split();
  if (a.is_no_split()) return false;
  return *a.attribute < *b.attribute;
}

struct TopTwo {
  SplitCandidate best = SplitCandidate::no_split();
  SplitCandidate second = SplitCandidate::no_split();

  friend bool operator==(const TopTwo&, const TopTwo&) = default;
};

/// Best two of `candidates` plus the no-split option (added if missing).
inline TopTwo top_two(std::vector<SplitCandidate> candidates) {
  const bool has_null =
      std::any_of(candidates.begin(), candidates.end(), [](const auto& c) { return c.is_no_split(); });
  if (!has_null) candidates.push_back(SplitCandidate::no_split());
  std::sort(candidates.begin(), candidates.end(), ranks_before);
  TopTwo out;
  out.best = candidates[0];
  if (candidates.size() > 1) out.second = candidates[1];
  return out;
}

/// Merges partial top-two lists into the global top two. Duplicate no-split
/// entries collapse into one.
inline TopTwo merge_top_two(const TopTwo& a, const TopTwo& b) {
  std::vector<SplitCandidate> all;
  all.reserve(4);
  for (const auto* c : {&a.best, &a.second, &b.best, &b.second}) {
    if (c->is_no_split()) continue;
    const bool dup = std::any_of(all.begin(), all.end(),
                                 [&](const auto& x) { return x.attribute == c->attribute; });
    if (!dup) all.push_back(*c);
  }
  return top_two(std::move(all));
}

struct SplitParams {
  Criterion criterion = Criterion::info_gain;
  std::uint32_t numeric_thresholds = 10;
  // A split is only valid if at least two branches carry this fraction of the weight.
  double min_branch_fraction = 0.01;
};

namespace detail {

inline bool enough_populated_branches(const std::vector<std::vector<double>>& branches,
                                      double total, double min_fraction) {
  int populated = 0;
  for (const auto& b : branches) {
    double n = 0.0;
    for (double c : b) n += c;
    if (n > 0.0 && n >= min_fraction * total) ++populated;
  }
  return populated >= 2;
}

inline double implicit_at(std::span<const double> implicit_zero, std::size_t k) {
  return k < implicit_zero.size() ? implicit_zero[k] : 0.0;
}

}  // namespace detail

/// Multiway split candidate, one branch per attribute value. `implicit_zero`
/// holds per-class weight of instances that reached the leaf without this
/// attribute (sparse instances); it is counted as value 0.
inline SplitCandidate categorical_candidate(AttributeId attribute, const CategoricalStats& stats,
                                            std::uint32_t declared_values,
                                            std::span<const double> implicit_zero,
                                            const SplitParams& params) {
  const auto C = stats.num_classes();
  const auto V = std::max({declared_values, stats.num_values_seen(), std::uint32_t{1}});
  std::vector<std::vector<double>> branches(V, std::vector<double>(C, 0.0));
  std::vector<double> parent(C, 0.0);
  double total = 0.0;
  for (std::uint32_t v = 0; v < V; ++v) {
    for (ClassIndex k = 0; k < C; ++k) {
      double c = stats.count(v, k);
      if (v == 0) c += detail::implicit_at(implicit_zero, k);
      branches[v][k] = c;
      parent[k] += c;
      total += c;
    }
  }
  if (total <= 0.0 || !detail::enough_populated_branches(branches, total, params.min_branch_fraction)) {
    return SplitCandidate::no_split();
  }
  SplitCandidate out;
  out.attribute = attribute;
  out.kind = AttributeKind::categorical;
  out.merit = split_merit(params.criterion, parent, branches);
  out.branches = std::move(branches);
  return out;
}

/// Binary split candidate for a numeric attribute: evaluates equally spaced
/// thresholds strictly inside the observed range, estimating each side's
/// class weights from the per-class Gaussians. Left branch is value <= threshold.
inline SplitCandidate numeric_candidate(AttributeId attribute, const NumericStats& stats,
                                        std::span<const double> implicit_zero,
                                        const SplitParams& params) {
  const auto C = stats.num_classes();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  double implicit_total = 0.0;
  for (ClassIndex k = 0; k < C; ++k) {
    if (stats.estimator(k).weight() > 0.0) {
      lo = std::min(lo, stats.min(k));
      hi = std::max(hi, stats.max(k));
    }
    implicit_total += detail::implicit_at(implicit_zero, k);
  }
  if (implicit_total > 0.0) {
    lo = std::min(lo, 0.0);
    hi = std::max(hi, 0.0);
  }
  if (!(lo < hi)) return SplitCandidate::no_split();

  std::vector<double> parent(C, 0.0);
  double total = 0.0;
  for (ClassIndex k = 0; k < C; ++k) {
    parent[k] = stats.estimator(k).weight() + detail::implicit_at(implicit_zero, k);
    total += parent[k];
  }

  SplitCandidate best = SplitCandidate::no_split();
  bool found = false;
  const auto t = params.numeric_thresholds;
  for (std::uint32_t i = 1; i <= t; ++i) {
    const double threshold = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(t + 1);
    std::vector<std::vector<double>> branches(2, std::vector<double>(C, 0.0));
    for (ClassIndex k = 0; k < C; ++k) {
      const auto& est = stats.estimator(k);
      const double w = est.weight();
      double left = 0.0;
      if (w > 0.0) {
        if (threshold < stats.min(k)) {
          left = 0.0;
        } else if (threshold >= stats.max(k)) {
          left = w;
        } else {
          left = std::clamp(est.cdf(threshold) * w, 0.0, w);
        }
      }
      const double implicit = detail::implicit_at(implicit_zero, k);
      branches[0][k] = left + (0.0 <= threshold ? implicit : 0.0);
      branches[1][k] = parent[k] - branches[0][k];
    }
    if (!detail::enough_populated_branches(branches, total, params.min_branch_fraction)) continue;
    const double merit = split_merit(params.criterion, parent, branches);
    if (!found || merit > best.merit) {
      found = true;
      best.attribute = attribute;
      best.kind = AttributeKind::numeric;
      best.threshold = threshold;
      best.merit = merit;
      best.branches = std::move(branches);
    }
  }
  return best;
}

/// Candidate for one attribute's statistics, dispatching on flavor.
inline SplitCandidate attribute_candidate(AttributeId attribute, const AttributeStats& stats,
                                          const Schema& schema,
                                          std::span<const double> implicit_zero,
                                          const SplitParams& params) {
  if (const auto* c = std::get_if<CategoricalStats>(&stats)) {
    return categorical_candidate(attribute, *c, schema.attributes[attribute].num_values(),
                                 implicit_zero, params);
  }
  return numeric_candidate(attribute, std::get<NumericStats>(stats), implicit_zero, params);
}

/// Per-class weight of instances in `basis` that did not carry the attribute.
inline std::vector<double> implicit_zero_weights(std::span<const double> basis,
                                                 const AttributeStats& stats) {
  const auto& seen = class_totals(stats);
  std::vector<double> out(basis.size(), 0.0);
  bool any = false;
  for (std::size_t k = 0; k < basis.size(); ++k) {
    const double missing = basis[k] - (k < seen.size() ? seen[k] : 0.0);
    if (missing > 1e-9 * std::max(1.0, basis[k])) {
      out[k] = missing;
      any = true;
    }
  }
  if (!any) out.clear();
  return out;
}

struct HoeffdingParams {
  double delta = 1e-7;
  double grace_period = 200;
  double tie_threshold = 0.05;
  SplitParams split;
};

struct SplitDecision {
  bool split = false;
  SplitCandidate best = SplitCandidate::no_split();
  SplitCandidate second = SplitCandidate::no_split();
  double epsilon = 0.0;
  double n = 0.0;
};

/// The Hoeffding split guard: split iff the best candidate is a real split and
/// either it beats the runner-up by more than epsilon or epsilon fell below tau.
inline SplitDecision decide_split(const TopTwo& top, double n, std::uint32_t num_classes,
                                  const HoeffdingParams& params) {
  SplitDecision d;
  d.best = top.best;
  d.second = top.second;
  d.n = n;
  d.epsilon = hoeffding_bound(merit_range(params.split.criterion, num_classes), params.delta, n);
  const double gap = top.best.merit - top.second.merit;
  d.split = !top.best.is_no_split() && (gap > d.epsilon || d.epsilon < params.tie_threshold);
  return d;
}

}  // namespace vht
