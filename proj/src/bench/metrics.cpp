#include "sre/bench/metrics.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace sre::bench {

CostRates cost_rate(std::span<const ResetEvent> events, std::uint64_t current_step) {
  if (current_step == 0) throw std::invalid_argument("cost_rate needs current_step >= 1");
  std::size_t tight = 0, loose = 0;
  for (const auto& e : events) {
    if (e.step > current_step) continue;
    tight += env::is_tight(e.outcome) ? 1 : 0;
    loose += env::is_loose(e.outcome) ? 1 : 0;
  }
  const double n = static_cast<double>(current_step);
  return {static_cast<double>(tight + loose) / n, static_cast<double>(tight) / n, static_cast<double>(loose) / n};
}

std::size_t FailureHistogram::total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

FailureHistogram failure_histogram(std::span<const env::Outcome> outcomes) {
  FailureHistogram h;
  for (auto o : outcomes) ++h.counts[static_cast<std::size_t>(o)];
  return h;
}

void MovingAverage::push(double v) {
  values_.push_back(v);
  if (values_.size() > window_) values_.pop_front();
}

double MovingAverage::mean() const {
  if (values_.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(values_.begin(), values_.end(), 0.0) / static_cast<double>(values_.size());
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) return {};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / n)};
}

}  // namespace sre::bench
