#include "sre/vision/relative_entropy.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <stdexcept>

namespace sre::vision {

std::size_t bin_count_for(std::size_t samples) {
  std::size_t r = static_cast<std::size_t>(std::sqrt(static_cast<double>(samples)));
  while (r * r > samples) --r;
  while ((r + 1) * (r + 1) <= samples) ++r;
  return r * r == samples ? r : r + 1;
}

std::vector<double> rescale_column(std::span<const double> column, double lo, double hi) {
  std::vector<double> out(column.size(), 0.5 * (lo + hi));
  if (column.empty()) return out;
  const auto [mn, mx] = std::minmax_element(column.begin(), column.end());
  const double span = *mx - *mn;
  if (!(span > 0.0)) return out;
  for (std::size_t i = 0; i < column.size(); ++i) out[i] = lo + (hi - lo) * (column[i] - *mn) / span;
  return out;
}

std::vector<double> histogram(std::span<const double> values, std::size_t bins, double lo, double hi) {
  if (bins == 0) throw std::invalid_argument("histogram needs at least one bin");
  std::vector<double> h(bins, 0.0);
  if (values.empty()) return h;
  const double width = (hi - lo) / static_cast<double>(bins);
  for (double v : values) {
    auto k = static_cast<long>(std::floor((v - lo) / width));
    k = std::clamp<long>(k, 0, static_cast<long>(bins) - 1);
    h[static_cast<std::size_t>(k)] += 1.0;
  }
  for (double& x : h) x /= static_cast<double>(values.size());
  return h;
}

double discrete_relative_entropy(std::span<const double> p, std::span<const double> q, double floor) {
  if (p.size() != q.size()) throw std::invalid_argument("relative entropy: distributions differ in length");
  double re = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) re += p[i] * std::log(p[i] / std::max(q[i], floor));
  return re;
}

ReResult relative_entropy(const EncodingDataset& p, const EncodingDataset& q) {
  if (p.dim != q.dim) throw std::invalid_argument("relative entropy: latent dimensions differ");
  if (p.dim == 0) throw std::invalid_argument("relative entropy: empty encodings");
  if (p.rows() < 4 || q.rows() < 4) throw std::invalid_argument("relative entropy: need at least 4 samples");
  ReResult r;
  r.bin_count = bin_count_for(std::min(p.rows(), q.rows()));
  std::vector<double> cp(p.rows()), cq(q.rows());
  for (std::size_t j = 0; j < p.dim; ++j) {
    for (std::size_t i = 0; i < p.rows(); ++i) cp[i] = p.at(i, j);
    for (std::size_t i = 0; i < q.rows(); ++i) cq[i] = q.at(i, j);
    const auto hp = histogram(rescale_column(cp, r.range_lo, r.range_hi), r.bin_count, r.range_lo, r.range_hi);
    const auto hq = histogram(rescale_column(cq, r.range_lo, r.range_hi), r.bin_count, r.range_lo, r.range_hi);
    r.per_feature.push_back(discrete_relative_entropy(hp, hq));
  }
  double total = 0.0;
  for (double v : r.per_feature) total += v;
  r.mean = total / static_cast<double>(r.per_feature.size());
  return r;
}

std::string re_result_json(const ReResult& r) {
  nlohmann::ordered_json j;
  j["mean"] = r.mean;
  j["bin_count"] = r.bin_count;
  j["range"] = {r.range_lo, r.range_hi};
  j["per_feature"] = r.per_feature;
  return j.dump(2);
}

}  // namespace sre::vision
