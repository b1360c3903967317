#pragma once

#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace vht {

enum class Criterion { info_gain, gini };

namespace detail {

inline double checked_total(std::span<const double> counts) {
  double total = 0.0;
  for (double c : counts) {
    if (!(c >= 0.0)) throw std::invalid_argument("class counts must be non-negative");
    total += c;
  }
  return total;
}

}  // namespace detail

/// Shannon entropy in bits; 0·log 0 is taken as 0.
inline double entropy(std::span<const double> counts) {
  const double total = detail::checked_total(counts);
  if (total <= 0.0) throw std::invalid_argument("entropy of an all-zero distribution");
  double h = 0.0;
  for (double c : counts) {
    if (c > 0.0) {
      const double p = c / total;
      h -= p * std::log2(p);
    }
  }
  return h;
}

inline double gini(std::span<const double> counts) {
  const double total = detail::checked_total(counts);
  if (total <= 0.0) throw std::invalid_argument("gini of an all-zero distribution");
  double sum_sq = 0.0;
  for (double c : counts) sum_sq += (c / total) * (c / total);
  return 1.0 - sum_sq;
}

namespace detail {

template <typename Impurity>
double impurity_reduction(std::span<const double> parent,
                          const std::vector<std::vector<double>>& branches, Impurity impurity) {
  const double total = checked_total(parent);
  if (total <= 0.0) throw std::invalid_argument("empty parent distribution");
  std::vector<double> sums(parent.size(), 0.0);
  for (const auto& b : branches) {
    if (b.size() != parent.size()) throw std::invalid_argument("branch class count mismatch");
    for (std::size_t k = 0; k < b.size(); ++k) sums[k] += b[k];
  }
  for (std::size_t k = 0; k < parent.size(); ++k) {
    const double tol = 1e-9 * std::max(1.0, std::abs(parent[k]));
    if (std::abs(sums[k] - parent[k]) > tol) {
      throw std::invalid_argument("branch counts do not sum to parent counts");
    }
  }
  double weighted = 0.0;
  for (const auto& b : branches) {
    const double n = checked_total(b);
    if (n > 0.0) weighted += (n / total) * impurity(std::span<const double>(b));
  }
  return impurity(parent) - weighted;
}

}  // namespace detail

/// H(parent) minus the weighted entropy of the branches. Branch counts must
/// add up to the parent counts class by class.
inline double info_gain(std::span<const double> parent,
                        const std::vector<std::vector<double>>& branches) {
  return detail::impurity_reduction(parent, branches,
                                    [](std::span<const double> c) { return entropy(c); });
}

inline double gini_gain(std::span<const double> parent,
                        const std::vector<std::vector<double>>& branches) {
  return detail::impurity_reduction(parent, branches,
                                    [](std::span<const double> c) { return gini(c); });
}

inline double split_merit(Criterion criterion, std::span<const double> parent,
                          const std::vector<std::vector<double>>& branches) {
  return criterion == Criterion::gini ? gini_gain(parent, branches)
                                      : info_gain(parent, branches);
}

/// Range R of the merit; log2(C) bits for information gain, 1 for gini.
inline double merit_range(Criterion criterion, std::size_t num_classes) {
  if (criterion == Criterion::gini) return 1.0;
  return std::log2(static_cast<double>(std::max<std::size_t>(num_classes, 2)));
}

/// epsilon = sqrt(R^2 ln(1/delta) / 2n)
inline double hoeffding_bound(double range, double delta, double n) {
  if (!(n > 0.0)) throw std::invalid_argument("hoeffding bound needs n > 0");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  if (!(range > 0.0)) throw std::invalid_argument("range must be positive");
  return std::sqrt(range * range * std::log(1.0 / delta) / (2.0 * n));
}

}  // namespace vht
