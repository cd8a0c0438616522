#pragma once

#include <span>
#include <string>
#include <vector>

#include "sre/vision/dataset.hpp"

namespace sre::vision {

inline constexpr double kReFloor = 1e-9;

struct ReResult {
  std::vector<double> per_feature;
  double mean = 0.0;
  std::size_t bin_count = 0;
  double range_lo = -2.0, range_hi = 2.0;
};

/// ceil(sqrt(n)).
std::size_t bin_count_for(std::size_t samples);

/// Maps the column's min/max onto lo/hi (a constant column maps to the midpoint).
std::vector<double> rescale_column(std::span<const double> column, double lo = -2.0, double hi = 2.0);

/// Equal-width bins over [lo, hi]; the top edge belongs to the last bin.
std::vector<double> histogram(std::span<const double> values, std::size_t bins, double lo = -2.0, double hi = 2.0);

/// sum over P > 0 of P ln(P / max(Q, floor)).
double discrete_relative_entropy(std::span<const double> p, std::span<const double> q, double floor = kReFloor);

/// Per-feature rescale, histogram and relative entropy, averaged over features.
/// Bins follow the smaller sample count of the two datasets.
ReResult relative_entropy(const EncodingDataset& p, const EncodingDataset& q);

std::string re_result_json(const ReResult& result);

}  // namespace sre::vision
