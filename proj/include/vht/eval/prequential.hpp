#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "vht/tree/instance.hpp"

namespace vht::eval {

struct MetricsRow {
  std::uint64_t instances = 0;
  double accuracy_cum = 0.0;     // percent
  double accuracy_window = 0.0;  // percent, over the last k instances
  double seconds = 0.0;
  double throughput = 0.0;  // instances per second
  std::uint64_t splits = 0;
  std::uint64_t leaves = 1;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

/// instances / seconds.
inline double measure_throughput(double seconds, std::uint64_t instances) {
  if (!(seconds > 0.0)) throw std::invalid_argument("throughput needs a positive duration");
  return static_cast<double>(instances) / seconds;
}

/// Scores predictions in arrival order and emits a row every `k` labeled
/// instances plus one at the end. Weighted: each instance counts its weight.
class PrequentialEvaluator {
 public:
  using Clock = std::function<double()>;

  explicit PrequentialEvaluator(std::uint64_t report_every, Clock clock = {})
      : k_(report_every), clock_(std::move(clock)) {
    if (k_ == 0) throw std::invalid_argument("report interval must be at least 1");
    if (!clock_) {
      const auto start = std::chrono::steady_clock::now();
      clock_ = [start] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
    }
  }

  void record(ClassIndex predicted, std::optional<ClassIndex> actual, double weight = 1.0, std::uint64_t splits = 0,
              std::uint64_t leaves = 1) {
    if (!actual) return;
    const double hit = predicted == *actual ? weight : 0.0;
    ++count_;
    correct_ += hit;
    total_ += weight;
    window_.push_back({hit, weight});
    window_correct_ += hit;
    window_total_ += weight;
    if (window_.size() > k_) {
      window_correct_ -= window_.front().first;
      window_total_ -= window_.front().second;
      window_.pop_front();
    }
    splits_ = splits;
    leaves_ = leaves;
    if (count_ % k_ == 0) emit();
  }

  /// Closes the run; adds a final row unless one was just emitted.
  const std::vector<MetricsRow>& finish() {
    if (!finished_) {
      if (rows_.empty() || rows_.back().instances != count_) emit();
      finished_ = true;
    }
    return rows_;
  }

  const std::vector<MetricsRow>& rows() const { return rows_; }
  std::uint64_t count() const { return count_; }
  double accuracy() const { return total_ > 0 ? 100.0 * correct_ / total_ : 0.0; }

 private:
  void emit() {
    MetricsRow r;
    r.instances = count_;
    r.accuracy_cum = accuracy();
    r.accuracy_window = window_total_ > 0 ? 100.0 * window_correct_ / window_total_ : 0.0;
    r.seconds = clock_();
    r.throughput = r.seconds > 0 ? measure_throughput(r.seconds, count_) : 0.0;
    r.splits = splits_;
    r.leaves = leaves_;
    rows_.push_back(r);
  }

  std::uint64_t k_;
  Clock clock_;
  std::uint64_t count_ = 0;
  double correct_ = 0.0;
  double total_ = 0.0;
  std::deque<std::pair<double, double>> window_;
  double window_correct_ = 0.0;
  double window_total_ = 0.0;
  std::uint64_t splits_ = 0;
  std::uint64_t leaves_ = 1;
  std::vector<MetricsRow> rows_;
  bool finished_ = false;
};

/// Test-then-train over `next()`: every instance is predicted before the
/// learner sees its label. Learner needs predict(), train(), and optionally
/// split_count()/leaf_count().
template <typename Learner, typename Next>
std::vector<MetricsRow> prequential(Learner& learner, Next&& next, std::uint64_t report_every,
                                    PrequentialEvaluator::Clock clock = {}) {
  PrequentialEvaluator eval(report_every, std::move(clock));
  while (auto inst = next()) {
    const ClassIndex predicted = learner.predict(*inst);
    std::uint64_t splits = 0, leaves = 1;
    if constexpr (requires { learner.split_count(); learner.leaf_count(); }) {
      splits = learner.split_count();
      leaves = learner.leaf_count();
    }
    eval.record(predicted, inst->label(), inst->weight(), splits, leaves);
    if (inst->is_labeled()) learner.train(*inst);
  }
  return eval.finish();
}

struct Stat {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single run
};

/// Mean and spread of the runs' rows at one report point.
struct AggregateRow {
  std::uint64_t instances = 0;
  std::size_t runs = 0;
  Stat accuracy_cum, accuracy_window, seconds, throughput, splits, leaves;
};

inline Stat summarize(const std::vector<double>& xs) {
  Stat s;
  if (xs.empty()) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double sq = 0.0;
    for (double x : xs) sq += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(sq / static_cast<double>(xs.size() - 1));
  }
  return s;
}

/// Aligns runs by row index; the shortest run bounds the output.
inline std::vector<AggregateRow> aggregate(const std::vector<std::vector<MetricsRow>>& runs) {
  std::vector<AggregateRow> out;
  if (runs.empty()) return out;
  std::size_t len = runs.front().size();
  for (const auto& r : runs) len = std::min(len, r.size());
  for (std::size_t i = 0; i < len; ++i) {
    auto column = [&](auto field) {
      std::vector<double> xs;
      for (const auto& run : runs) xs.push_back(static_cast<double>(field(run[i])));
      return summarize(xs);
    };
    AggregateRow a;
    a.instances = runs.front()[i].instances;
    a.runs = runs.size();
    a.accuracy_cum = column([](const MetricsRow& r) { return r.accuracy_cum; });
    a.accuracy_window = column([](const MetricsRow& r) { return r.accuracy_window; });
    a.seconds = column([](const MetricsRow& r) { return r.seconds; });
    a.throughput = column([](const MetricsRow& r) { return r.throughput; });
    a.splits = column([](const MetricsRow& r) { return r.splits; });
    a.leaves = column([](const MetricsRow& r) { return r.leaves; });
    out.push_back(a);
  }
  return out;
}

}  // namespace vht::eval
