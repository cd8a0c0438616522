#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sre/world/geometry.hpp"
#include "sre/world/spline.hpp"

namespace sre::world {

enum class Level { Easy, Medium, Hard };

std::string_view to_string(Level level);
std::optional<Level> parse_level(std::string_view text);

inline constexpr std::size_t kSegmentCount = 200;
inline constexpr double kArcLength = 420.0;  // meters, every level
inline constexpr double kAgentRadius = 0.5;

struct WidthKnot {
  double arc = 0.0;    // meters
  double width = 0.0;  // meters
};

/// Parameters that determine a world.
struct WorldSpec {
  Level level = Level::Easy;
  std::uint64_t seed = 0;
  int bridge_count = 0;
  int island_count = 0;
  int turn_count = 8;
  // Periodic piecewise-cosine width profile along the arc.
  std::vector<WidthKnot> width_profile;
  double volume_margin = 2.0;
  double volume_floor = 2.0;
  double volume_ceiling = 12.0;

  /// Difficulty table for a level; the width profile is filled by generation.
  static WorldSpec for_level(Level level, std::uint64_t seed);
  double width_at(double arc, double arc_length) const;
};

enum class Containment { Inside, OutHorizontal, OutVertical };

struct SegmentQuery {
  std::size_t segment = 0;
  double lateral_offset = 0.0;  // signed, positive to the left of the tangent
  double arc = 0.0;
};

struct Palette {
  Vec3 water{0.10, 0.30, 0.55};
  Vec3 terrain{0.30, 0.45, 0.20};
  Vec3 sky{0.62, 0.78, 0.95};
  Vec3 bridge{0.46, 0.42, 0.40};
  Vec3 island{0.78, 0.70, 0.48};
};

enum class SurfaceClass : std::uint8_t { Terrain = 0, Water = 1, Island = 2 };

/// Top-down classification of the ground plane.
struct GroundMap {
  double origin_x = 0.0, origin_y = 0.0;
  double cell = 0.25;  // meters
  std::size_t cols = 0, rows = 0;
  std::vector<SurfaceClass> cells;

  SurfaceClass at(double x, double y) const;
};

/// Immutable generated world; safe to share across threads.
class World {
 public:
  World(WorldSpec spec, RiverSpline spline, std::vector<Box> bridges, std::vector<Disc> islands);

  const WorldSpec& spec() const { return spec_; }
  const RiverSpline& spline() const { return spline_; }
  const std::vector<Box>& bridges() const { return bridges_; }
  const std::vector<Disc>& islands() const { return islands_; }
  const Palette& palette() const { return palette_; }
  const GroundMap& ground() const { return ground_; }

  double width_at(double arc) const { return spec_.width_at(arc, spline_.arc_length()); }

  bool operator==(const World& other) const;

 private:
  WorldSpec spec_;
  RiverSpline spline_;
  std::vector<Box> bridges_;
  std::vector<Disc> islands_;
  Palette palette_;
  GroundMap ground_;
};

/// Deterministic in (level, seed). Spline candidates whose ribbon would fold or
/// touch itself are discarded and redrawn.
World generate_world(Level level, std::uint64_t seed);

/// Builds a world around an explicit spline (test fixtures, custom maps).
World make_world(WorldSpec spec, RiverSpline spline, std::vector<Box> bridges = {},
                 std::vector<Disc> islands = {});

SplineSample sample_spline(const World& world, double s);
SegmentQuery nearest_segment(const World& world, Vec3 position);
Containment inside_volume(const World& world, const Pose& pose);
/// Same test with a nearest-segment query already computed for pose.
Containment inside_volume(const World& world, const Pose& pose, const SegmentQuery& query);
bool check_collision(const World& world, const Pose& pose);

/// Segments with at least one dense centerline sample within `radius`
/// (horizontal distance) of `position`, ascending.
std::vector<std::size_t> covered_segments(const World& world, Vec3 position, double radius);

std::string world_spec_json(const WorldSpec& spec);
WorldSpec world_spec_from_json(const std::string& text);

}  // namespace sre::world
