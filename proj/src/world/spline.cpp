#include "sre/world/spline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sre::world {

RiverSpline::RiverSpline(std::vector<Vec3> control_points, std::size_t segment_count)
    : control_points_(std::move(control_points)), segment_count_(segment_count) {
  if (control_points_.size() < 4) throw std::invalid_argument("closed spline needs at least 4 control points");
  if (segment_count_ < 8) throw std::invalid_argument("segment count must be at least 8");

  const std::size_t spans = control_points_.size();
  table_.assign(spans * kTableRes + 1, 0.0);
  Vec3 prev = eval(0, 0.0);
  for (std::size_t i = 1; i <= spans * kTableRes; ++i) {
    const std::size_t span = (i - 1) / kTableRes;
    const double t = static_cast<double>(i - span * kTableRes) / kTableRes;
    const Vec3 p = eval(span, t);
    table_[i] = table_[i - 1] + norm(p - prev);
    prev = p;
  }
  arc_length_ = table_.back();
  if (!(arc_length_ > 0.0)) throw std::invalid_argument("degenerate spline with zero length");

  const std::size_t dense = segment_count_ * kDensePerSegment;
  dense_points_.resize(dense);
  for (std::size_t i = 0; i < dense; ++i)
    dense_points_[i] = sample(arc_length_ * static_cast<double>(i) / static_cast<double>(dense)).position;
}

double RiverSpline::wrap(double s) const {
  double w = std::fmod(s, arc_length_);
  if (w < 0.0) w += arc_length_;
  if (w >= arc_length_) w = 0.0;
  return w;
}

std::size_t RiverSpline::segment_of(double s) const {
  const auto k = static_cast<std::size_t>(wrap(s) / segment_length());
  return std::min(k, segment_count_ - 1);
}

Vec3 RiverSpline::eval(std::size_t span, double t) const {
  const std::size_t n = control_points_.size();
  const Vec3& p0 = control_points_[(span + n - 1) % n];
  const Vec3& p1 = control_points_[span % n];
  const Vec3& p2 = control_points_[(span + 1) % n];
  const Vec3& p3 = control_points_[(span + 2) % n];
  const double t2 = t * t, t3 = t2 * t;
  return 0.5 * ((2.0 * p1) + t * (p2 - p0) + t2 * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) +
                t3 * (3.0 * p1 - p0 - 3.0 * p2 + p3));
}

Vec3 RiverSpline::derivative(std::size_t span, double t) const {
  const std::size_t n = control_points_.size();
  const Vec3& p0 = control_points_[(span + n - 1) % n];
  const Vec3& p1 = control_points_[span % n];
  const Vec3& p2 = control_points_[(span + 1) % n];
  const Vec3& p3 = control_points_[(span + 2) % n];
  return 0.5 * ((p2 - p0) + (2.0 * t) * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) +
                (3.0 * t * t) * (3.0 * p1 - p0 - 3.0 * p2 + p3));
}

SplineSample RiverSpline::sample(double s) const {
  const double w = wrap(s);
  // first table entry strictly greater than w
  const auto it = std::upper_bound(table_.begin(), table_.end(), w);
  std::size_t hi = static_cast<std::size_t>(it - table_.begin());
  hi = std::clamp<std::size_t>(hi, 1, table_.size() - 1);
  const std::size_t lo = hi - 1;
  const double len = table_[hi] - table_[lo];
  const double frac = len > 0.0 ? (w - table_[lo]) / len : 0.0;
  const std::size_t span = lo / kTableRes;
  const double t = (static_cast<double>(lo - span * kTableRes) + frac) / kTableRes;
  return {eval(span, t), normalized(derivative(span, t))};
}

double RiverSpline::min_curvature_radius() const {
  const std::size_t n = dense_points_.size();
  double best = std::numeric_limits<double>::infinity();
  // three-point circumradius on a coarser stride to avoid chord noise
  const std::size_t stride = kDensePerSegment / 2;
  for (std::size_t i = 0; i < n; i += 1) {
    const Vec3& a = dense_points_[(i + n - stride) % n];
    const Vec3& b = dense_points_[i];
    const Vec3& c = dense_points_[(i + stride) % n];
    const double ab = horizontal_distance(a, b), bc = horizontal_distance(b, c), ca = horizontal_distance(c, a);
    const double cross = std::abs((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x));
    if (cross < 1e-12) continue;
    best = std::min(best, ab * bc * ca / (2.0 * cross));
  }
  return best;
}

}  // namespace sre::world
