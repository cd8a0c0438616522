#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "sre/env/river_env.hpp"

namespace sre::bench {

struct ResetEvent {
  std::uint64_t step = 0;  // global step of the terminal transition
  env::Outcome outcome = env::Outcome::Running;
};

struct CostRates {
  double total = 0.0, tight = 0.0, loose = 0.0;
};

/// Violation resets per training step so far; successes and other
/// non-violations do not count. Events after current_step are ignored.
CostRates cost_rate(std::span<const ResetEvent> events, std::uint64_t current_step);

/// Counts per outcome, indexed like env::kAllOutcomes.
struct FailureHistogram {
  std::array<std::size_t, env::kAllOutcomes.size()> counts{};

  std::size_t operator[](env::Outcome o) const { return counts[static_cast<std::size_t>(o)]; }
  std::size_t total() const;
};

FailureHistogram failure_histogram(std::span<const env::Outcome> outcomes);

/// Mean of the last `window` pushed values.
class MovingAverage {
 public:
  explicit MovingAverage(std::size_t window = 50) : window_(window) {}
  void push(double v);
  bool empty() const { return values_.empty(); }
  double mean() const;  // NaN when empty

 private:
  std::size_t window_;
  std::deque<double> values_;
};

struct MeanStd {
  double mean = 0.0, std = 0.0;
};
/// Population standard deviation; zeros for an empty input.
MeanStd mean_std(std::span<const double> values);

}  // namespace sre::bench
