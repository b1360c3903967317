#pragma once

#include <algorithm>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "vht/tree/instance.hpp"

namespace testing_streams {

using vht::AttributeId;
using vht::ClassIndex;
using vht::Instance;
using vht::Schema;

/// `cat` binary categorical attributes then `num` numeric ones in [0,1).
inline Schema mixed_schema(int cat, int num, int classes = 2) {
  Schema s;
  for (int i = 0; i < cat; ++i) s.attributes.push_back(vht::categorical_attribute("c" + std::to_string(i), 2));
  for (int i = 0; i < num; ++i) s.attributes.push_back(vht::numeric_attribute("n" + std::to_string(i)));
  s.classes = vht::class_labels(classes);
  return s;
}

/// Labels follow a small fixed rule with some noise, so trees grow.
inline std::vector<Instance> mixed_stream(int cat, int num, int n, unsigned seed, double noise = 0.1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<Instance> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    std::vector<double> x;
    for (int a = 0; a < cat; ++a) x.push_back(double(rng() % 2));
    for (int a = 0; a < num; ++a) x.push_back(u(rng));
    int y = 0;
    if (cat >= 2) y = (int(x[0]) ^ int(x[1]));
    if (num >= 1) y = (x[cat] > 0.6) ? 1 - y : y;
    if (u(rng) < noise) y = 1 - y;
    out.push_back(Instance::dense(std::move(x), static_cast<ClassIndex>(y)));
  }
  return out;
}

/// Binary bag-of-words stream over `d` words; class 1 favors the upper half.
inline std::vector<Instance> sparse_stream(int d, int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::vector<Instance> out;
  for (int i = 0; i < n; ++i) {
    const int y = static_cast<int>(rng() % 2);
    std::vector<AttributeId> ids;
    const int words = 1 + static_cast<int>(rng() % 6);
    for (int w = 0; w < words; ++w) {
      int id = static_cast<int>(rng() % (d / 2));
      if (y == 1 && rng() % 4 != 0) id += d / 2;
      ids.push_back(static_cast<AttributeId>(id));
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    std::vector<Instance::Entry> entries;
    for (auto id : ids) entries.emplace_back(id, 1.0);
    out.push_back(Instance::sparse(std::move(entries), d, static_cast<ClassIndex>(y)));
  }
  return out;
}

inline Schema sparse_schema(int d) {
  Schema s;
  for (int i = 0; i < d; ++i) s.attributes.push_back(vht::categorical_attribute("w" + std::to_string(i), 2));
  s.classes = vht::class_labels(2);
  return s;
}

/// Adapts a vector to the pull interface used by the learners.
struct VectorSource {
  const std::vector<Instance>* data;
  std::size_t pos = 0;
  std::optional<Instance> operator()() {
    if (pos >= data->size()) return std::nullopt;
    return (*data)[pos++];
  }
};

}  // namespace testing_streams
