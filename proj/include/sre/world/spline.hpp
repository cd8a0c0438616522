#pragma once

#include <cstddef>
#include <vector>

#include "sre/world/geometry.hpp"

namespace sre::world {

struct SplineSample {
  Vec3 position;
  Vec3 tangent;  // unit length
};

/// Closed uniform Catmull-Rom curve through the control points, parameterized
/// by arc length and split into `segment_count` equal-length segments.
class RiverSpline {
 public:
  RiverSpline() = default;
  RiverSpline(std::vector<Vec3> control_points, std::size_t segment_count);

  const std::vector<Vec3>& control_points() const { return control_points_; }
  double arc_length() const { return arc_length_; }
  std::size_t segment_count() const { return segment_count_; }
  double segment_length() const { return arc_length_ / static_cast<double>(segment_count_); }
  double segment_start(std::size_t k) const { return segment_length() * static_cast<double>(k); }
  std::size_t segment_of(double s) const;

  /// Wraps s into [0, arc_length).
  double wrap(double s) const;
  /// Position and unit tangent at arc coordinate s (wrapped).
  SplineSample sample(double s) const;

  /// Uniformly spaced arc samples used by the geometric queries.
  const std::vector<Vec3>& dense_points() const { return dense_points_; }
  double dense_spacing() const { return arc_length_ / static_cast<double>(dense_points_.size()); }
  static constexpr std::size_t kDensePerSegment = 16;

  /// Minimum radius of curvature over the dense samples (horizontal plane).
  double min_curvature_radius() const;

 private:
  Vec3 eval(std::size_t span, double t) const;
  Vec3 derivative(std::size_t span, double t) const;

  std::vector<Vec3> control_points_;
  std::size_t segment_count_ = 0;
  double arc_length_ = 0.0;
  // cumulative arc length at parameter samples; size spans * kTableRes + 1
  std::vector<double> table_;
  std::vector<Vec3> dense_points_;
  static constexpr std::size_t kTableRes = 256;
};

}  // namespace sre::world
