#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sre::world {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(Vec3 a, Vec3 b) = default;
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }
inline double horizontal_distance(Vec3 a, Vec3 b) { return std::hypot(a.x - b.x, a.y - b.y); }
inline Vec3 normalized(Vec3 a) {
  const double n = norm(a);
  return {a.x / n, a.y / n, a.z / n};
}

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

/// Agent kinematic state. Altitude z is measured above the water surface.
struct Pose {
  double x = 0.0, y = 0.0, z = 0.0;
  double yaw = 0.0;  // radians, (-pi, pi]

  Vec3 position() const { return {x, y, z}; }
  friend bool operator==(const Pose&, const Pose&) = default;
};

struct Box {
  Vec3 min, max;

  Vec3 center() const { return 0.5 * (min + max); }
  /// Euclidean distance from p to the box (0 inside).
  double distance(Vec3 p) const {
    const double dx = std::max({min.x - p.x, 0.0, p.x - max.x});
    const double dy = std::max({min.y - p.y, 0.0, p.y - max.y});
    const double dz = std::max({min.z - p.z, 0.0, p.z - max.z});
    return std::sqrt(dx * dx + dy * dy + dz * dz);
  }
};

struct Disc {
  double x = 0.0, y = 0.0, radius = 0.0;
};

}  // namespace sre::world
