#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "vht/datagen/random.hpp"
#include "vht/datagen/zipf.hpp"
#include "vht/tree/instance.hpp"

namespace vht::datagen {

struct SparseGenConfig {
  std::size_t vocabulary = 1000;  // d
  double skew = 1.5;
  double mean_words = 15.0;
  double sd_words = 5.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (vocabulary == 0) throw std::invalid_argument("vocabulary must be at least 1");
    if (!(skew > 0.0)) throw std::invalid_argument("zipf skew must be positive");
    if (!(mean_words >= 1.0) || !(sd_words >= 0.0)) throw std::invalid_argument("invalid tweet size distribution");
  }
};

/// Bag-of-words "tweets": a uniform binary class picks the word ranking (class
/// 1 permutes ranks), the size is a rounded Gaussian clamped to [1, d], and
/// distinct words are drawn from the Zipf law over that ranking.
class SparseGenerator {
 public:
  explicit SparseGenerator(SparseGenConfig config) : config_(config), zipf_((config.validate(), config.skew), config.vocabulary) {
    schema_.attributes.reserve(config_.vocabulary);
    for (std::size_t i = 0; i < config_.vocabulary; ++i) {
      schema_.attributes.push_back(categorical_attribute("w" + std::to_string(i), 2));
    }
    schema_.classes = class_labels(2);
    permutation_.resize(config_.vocabulary);
    std::iota(permutation_.begin(), permutation_.end(), 0);
    auto rng = rng_for(config_.seed, 0, 3);
    std::shuffle(permutation_.begin(), permutation_.end(), rng);
  }

  const Schema& schema() const { return schema_; }
  const ZipfTable& zipf() const { return zipf_; }
  const SparseGenConfig& config() const { return config_; }

  AttributeId word(std::size_t rank, ClassIndex label) const {
    return static_cast<AttributeId>(label == 1 ? permutation_[rank] : rank);
  }

  Instance instance(std::uint64_t index) const {
    auto rng = rng_for(config_.seed, index, 4);
    const ClassIndex label = static_cast<ClassIndex>(rng() & 1);
    std::normal_distribution<double> size_dist(config_.mean_words, config_.sd_words);
    const double raw = std::round(size_dist(rng));
    const std::size_t d = config_.vocabulary;
    const std::size_t size = static_cast<std::size_t>(std::clamp(raw, 1.0, static_cast<double>(d)));
    std::vector<char> taken(d, 0);
    std::vector<AttributeId> words;
    words.reserve(size);
    // Rejection of repeats; a generous cap, then the most likely free ranks.
    std::size_t draws = 0;
    while (words.size() < size && draws < 64 * size + 64) {
      const auto r = zipf_.sample(rng);
      ++draws;
      if (!taken[r]) {
        taken[r] = 1;
        words.push_back(word(r, label));
      }
    }
    for (std::size_t r = 0; words.size() < size && r < d; ++r) {
      if (!taken[r]) {
        taken[r] = 1;
        words.push_back(word(r, label));
      }
    }
    std::sort(words.begin(), words.end());
    std::vector<Instance::Entry> entries;
    entries.reserve(words.size());
    for (auto w : words) entries.emplace_back(w, 1.0);
    return Instance::sparse(std::move(entries), d, label);
  }

 private:
  SparseGenConfig config_;
  ZipfTable zipf_;
  Schema schema_;
  std::vector<std::size_t> permutation_;
};

}  // namespace vht::datagen
