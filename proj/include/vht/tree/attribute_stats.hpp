#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <variant>
#include <vector>

#include "vht/tree/instance.hpp"

namespace vht {

/// Weighted running mean/variance (West's incremental update).
class GaussianEstimator {
 public:
  void add(double x, double w) {
    if (w <= 0.0) return;
    weight_ += w;
    const double delta = x - mean_;
    mean_ += w * delta / weight_;
    m2_ += w * delta * (x - mean_);
    if (m2_ < 0.0) m2_ = 0.0;
  }

  double weight() const { return weight_; }
  double mean() const { return mean_; }
  double m2() const { return m2_; }
  double variance() const { return weight_ > 1.0 ? m2_ / (weight_ - 1.0) : 0.0; }
  double stddev() const { return std::sqrt(variance()); }

  /// Mass of the fitted normal at or below x.
  double cdf(double x) const {
    const double sd = stddev();
    if (sd <= 0.0) return x >= mean_ ? 1.0 : 0.0;
    return 0.5 * std::erfc(-(x - mean_) / (sd * std::sqrt(2.0)));
  }

 private:
  double weight_ = 0.0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Counts n_ijk for one categorical attribute: value j by class k.
class CategoricalStats {
 public:
  explicit CategoricalStats(std::uint32_t num_classes = 2)
      : num_classes_(num_classes), class_totals_(num_classes, 0.0) {}

  void update(std::uint32_t value, ClassIndex k, double w) {
    if (w == 0.0) return;
    if (value >= num_values_) {
      counts_.resize(static_cast<std::size_t>(value + 1) * num_classes_, 0.0);
      num_values_ = value + 1;
    }
    counts_[static_cast<std::size_t>(value) * num_classes_ + k] += w;
    class_totals_[k] += w;
    total_ += w;
  }

  double count(std::uint32_t value, ClassIndex k) const {
    if (value >= num_values_) return 0.0;
    return counts_[static_cast<std::size_t>(value) * num_classes_ + k];
  }

  std::uint32_t num_values_seen() const { return num_values_; }
  std::uint32_t num_classes() const { return num_classes_; }
  const std::vector<double>& class_totals() const { return class_totals_; }
  double total_weight() const { return total_; }

 private:
  std::uint32_t num_classes_;
  std::uint32_t num_values_ = 0;
  std::vector<double> counts_;
  std::vector<double> class_totals_;
  double total_ = 0.0;
};

/// Per-class Gaussian summaries plus observed per-class value range.
class NumericStats {
 public:
  explicit NumericStats(std::uint32_t num_classes = 2)
      : estimators_(num_classes),
        min_(num_classes, std::numeric_limits<double>::infinity()),
        max_(num_classes, -std::numeric_limits<double>::infinity()),
        class_totals_(num_classes, 0.0) {}

  void update(double value, ClassIndex k, double w) {
    if (w == 0.0) return;
    estimators_[k].add(value, w);
    min_[k] = std::min(min_[k], value);
    max_[k] = std::max(max_[k], value);
    class_totals_[k] += w;
    total_ += w;
  }

  std::uint32_t num_classes() const { return static_cast<std::uint32_t>(estimators_.size()); }
  const GaussianEstimator& estimator(ClassIndex k) const { return estimators_[k]; }
  double min(ClassIndex k) const { return min_[k]; }
  double max(ClassIndex k) const { return max_[k]; }
  const std::vector<double>& class_totals() const { return class_totals_; }
  double total_weight() const { return total_; }

 private:
  std::vector<GaussianEstimator> estimators_;
  std::vector<double> min_;
  std::vector<double> max_;
  std::vector<double> class_totals_;
  double total_ = 0.0;
};

using AttributeStats = std::variant<CategoricalStats, NumericStats>;

inline AttributeStats make_attribute_stats(AttributeKind kind, std::uint32_t num_classes) {
  if (kind == AttributeKind::categorical) return CategoricalStats(num_classes);
  return NumericStats(num_classes);
}

inline void update_stats(AttributeStats& stats, double value, ClassIndex k, double w) {
  if (auto* c = std::get_if<CategoricalStats>(&stats)) {
    c->update(static_cast<std::uint32_t>(value), k, w);
  } else {
    std::get<NumericStats>(stats).update(value, k, w);
  }
}

inline double total_weight(const AttributeStats& stats) {
  return std::visit([](const auto& s) { return s.total_weight(); }, stats);
}

inline const std::vector<double>& class_totals(const AttributeStats& stats) {
  return std::visit([](const auto& s) -> const std::vector<double>& { return s.class_totals(); },
                    stats);
}

}  // namespace vht
