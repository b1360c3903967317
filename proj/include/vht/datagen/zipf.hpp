#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "vht/datagen/random.hpp"

namespace vht::datagen {

/// Zipf law over ranks 0..d-1: P(r) proportional to 1/(r+1)^skew, sampled by
/// binary search in the cumulative table.
class ZipfTable {
 public:
  ZipfTable(double skew, std::size_t d) : skew_(skew) {
    if (d == 0) throw std::invalid_argument("zipf needs at least one rank");
    if (!(skew > 0.0)) throw std::invalid_argument("zipf skew must be positive");
    cdf_.resize(d);
    double sum = 0.0;
    for (std::size_t r = 0; r < d; ++r) {
      sum += std::pow(static_cast<double>(r + 1), -skew);
      cdf_[r] = sum;
    }
    for (auto& c : cdf_) c /= sum;
    cdf_.back() = 1.0;
  }

  std::size_t size() const { return cdf_.size(); }
  double skew() const { return skew_; }
  double cdf(std::size_t r) const { return cdf_.at(r); }
  double pmf(std::size_t r) const { return r == 0 ? cdf_[0] : cdf_.at(r) - cdf_[r - 1]; }

  template <class Rng>
  std::size_t sample(Rng& rng) const {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

 private:
  double skew_;
  std::vector<double> cdf_;
};

template <class Rng>
std::size_t zipf_sample(const ZipfTable& table, Rng& rng) {
  return table.sample(rng);
}

}  // namespace vht::datagen
