#include "sre/world/world.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "sre/nd/rng.hpp"

namespace sre::world {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeckBottom = 6.0;
constexpr double kDeckTop = 8.5;

bool ribbon_is_valid(const WorldSpec& spec, const RiverSpline& spline) {
  double max_width = 0.0;
  for (const auto& k : spec.width_profile) max_width = std::max(max_width, k.width);
  if (spline.min_curvature_radius() < std::max(15.0, max_width / 2.0 + spec.volume_margin + 5.0)) return false;

  const auto& pts = spline.dense_points();
  const std::size_t n = pts.size();
  const std::size_t stride = 4;
  const double L = spline.arc_length();
  const double ds = spline.dense_spacing();
  for (std::size_t i = 0; i < n; i += stride) {
    const double wi = spec.width_at(ds * i, L);
    for (std::size_t j = i + stride; j < n; j += stride) {
      const double wj = spec.width_at(ds * j, L);
      const double required = 0.5 * (wi + wj) + 2.0 * spec.volume_margin + 4.0;
      const double gap = ds * static_cast<double>(j - i);
      const double arc_sep = std::min(gap, L - gap);
      if (arc_sep <= 2.0 * required) continue;
      if (horizontal_distance(pts[i], pts[j]) < required) return false;
    }
  }
  return true;
}

Box bridge_box(const RiverSpline& spline, double arc, double width, double margin) {
  const auto [c, t] = spline.sample(arc);
  const double reach = width / 2.0 + margin + 1.0;
  constexpr double deck_half = 1.5;
  const double tx = std::abs(t.x), ty = std::abs(t.y);
  double hx, hy;
  if (tx >= ty) {
    hx = deck_half;
    hy = reach / tx + deck_half * ty / tx;
  } else {
    hy = deck_half;
    hx = reach / ty + deck_half * tx / ty;
  }
  return Box{{c.x - hx, c.y - hy, kDeckBottom}, {c.x + hx, c.y + hy, kDeckTop}};
}

GroundMap build_ground(const WorldSpec& spec, const RiverSpline& spline, const std::vector<Disc>& islands) {
  GroundMap g;
  const auto& pts = spline.dense_points();
  double min_x = std::numeric_limits<double>::infinity(), min_y = min_x;
  double max_x = -min_x, max_y = -min_x;
  for (const auto& p : pts) {
    min_x = std::min(min_x, p.x);
    min_y = std::min(min_y, p.y);
    max_x = std::max(max_x, p.x);
    max_y = std::max(max_y, p.y);
  }
  constexpr double pad = 60.0;
  g.origin_x = min_x - pad;
  g.origin_y = min_y - pad;
  g.cols = static_cast<std::size_t>(std::ceil((max_x - min_x + 2 * pad) / g.cell));
  g.rows = static_cast<std::size_t>(std::ceil((max_y - min_y + 2 * pad) / g.cell));
  g.cells.assign(g.cols * g.rows, SurfaceClass::Terrain);

  auto stamp = [&](double cx, double cy, double r, SurfaceClass cls) {
    const auto c0 = static_cast<long>(std::floor((cx - r - g.origin_x) / g.cell));
    const auto c1 = static_cast<long>(std::floor((cx + r - g.origin_x) / g.cell));
    const auto r0 = static_cast<long>(std::floor((cy - r - g.origin_y) / g.cell));
    const auto r1 = static_cast<long>(std::floor((cy + r - g.origin_y) / g.cell));
    for (long row = std::max(0L, r0); row <= std::min<long>(r1, static_cast<long>(g.rows) - 1); ++row) {
      const double y = g.origin_y + (static_cast<double>(row) + 0.5) * g.cell;
      for (long col = std::max(0L, c0); col <= std::min<long>(c1, static_cast<long>(g.cols) - 1); ++col) {
        const double x = g.origin_x + (static_cast<double>(col) + 0.5) * g.cell;
        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) < r * r) g.cells[row * g.cols + col] = cls;
      }
    }
  };
  const double ds = spline.dense_spacing();
  for (std::size_t i = 0; i < pts.size(); ++i)
    stamp(pts[i].x, pts[i].y, spec.width_at(ds * i, spline.arc_length()) / 2.0, SurfaceClass::Water);
  for (const auto& d : islands) stamp(d.x, d.y, d.radius, SurfaceClass::Island);
  return g;
}

}  // namespace

std::string_view to_string(Level level) {
  switch (level) {
    case Level::Easy: return "easy";
    case Level::Medium: return "medium";
    case Level::Hard: return "hard";
  }
  return "unknown";
}

std::optional<Level> parse_level(std::string_view text) {
  if (text == "easy") return Level::Easy;
  if (text == "medium") return Level::Medium;
  if (text == "hard") return Level::Hard;
  return std::nullopt;
}

WorldSpec WorldSpec::for_level(Level level, std::uint64_t seed) {
  WorldSpec s;
  s.level = level;
  s.seed = seed;
  switch (level) {
    case Level::Easy:
      s.bridge_count = 0;
      s.island_count = 0;
      s.turn_count = 8;
      break;
    case Level::Medium:
      s.bridge_count = 2;
      s.island_count = 1;
      s.turn_count = 12;
      break;
    case Level::Hard:
      s.bridge_count = 4;
      s.island_count = 3;
      s.turn_count = 16;
      break;
  }
  return s;
}

double WorldSpec::width_at(double arc, double arc_length) const {
  if (width_profile.empty()) throw std::logic_error("world spec has no width profile");
  if (width_profile.size() == 1) return width_profile.front().width;
  double s = std::fmod(arc, arc_length);
  if (s < 0.0) s += arc_length;
  // knots are sorted by arc; find the enclosing pair (periodic)
  const std::size_t n = width_profile.size();
  std::size_t hi = 0;
  while (hi < n && width_profile[hi].arc <= s) ++hi;
  const WidthKnot& a = width_profile[(hi + n - 1) % n];
  const WidthKnot& b = width_profile[hi % n];
  double span = b.arc - a.arc;
  double off = s - a.arc;
  if (span <= 0.0) span += arc_length;
  if (off < 0.0) off += arc_length;
  const double u = 0.5 - 0.5 * std::cos(kPi * off / span);
  return a.width + (b.width - a.width) * u;
}

SurfaceClass GroundMap::at(double x, double y) const {
  const double fc = std::floor((x - origin_x) / cell);
  const double fr = std::floor((y - origin_y) / cell);
  if (fc < 0 || fr < 0 || fc >= static_cast<double>(cols) || fr >= static_cast<double>(rows))
    return SurfaceClass::Terrain;
  return cells[static_cast<std::size_t>(fr) * cols + static_cast<std::size_t>(fc)];
}

World::World(WorldSpec spec, RiverSpline spline, std::vector<Box> bridges, std::vector<Disc> islands)
    : spec_(std::move(spec)), spline_(std::move(spline)), bridges_(std::move(bridges)), islands_(std::move(islands)) {
  if (spec_.width_profile.empty()) throw std::invalid_argument("world spec needs a width profile");
  for (const auto& k : spec_.width_profile)
    if (!(k.width > 0.0)) throw std::invalid_argument("river width must be positive");
  ground_ = build_ground(spec_, spline_, islands_);
}

bool World::operator==(const World& other) const {
  auto same_boxes = [](const std::vector<Box>& a, const std::vector<Box>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (!(a[i].min == b[i].min) || !(a[i].max == b[i].max)) return false;
    return true;
  };
  auto same_discs = [](const std::vector<Disc>& a, const std::vector<Disc>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i].x != b[i].x || a[i].y != b[i].y || a[i].radius != b[i].radius) return false;
    return true;
  };
  return world_spec_json(spec_) == world_spec_json(other.spec_) &&
         spline_.control_points() == other.spline_.control_points() &&
         spline_.arc_length() == other.spline_.arc_length() && same_boxes(bridges_, other.bridges_) &&
         same_discs(islands_, other.islands_) && ground_.cells == other.ground_.cells;
}

World make_world(WorldSpec spec, RiverSpline spline, std::vector<Box> bridges, std::vector<Disc> islands) {
  return World(std::move(spec), std::move(spline), std::move(bridges), std::move(islands));
}

World generate_world(Level level, std::uint64_t seed) {
  const WorldSpec base = WorldSpec::for_level(level, seed);
  double width_lo = 12.0, width_hi = 12.0, radial_jitter = 0.10;
  switch (level) {
    case Level::Easy: break;
    case Level::Medium:
      width_lo = 8.0;
      width_hi = 14.0;
      radial_jitter = 0.22;
      break;
    case Level::Hard:
      width_lo = 6.0;
      width_hi = 16.0;
      radial_jitter = 0.28;
      break;
  }

  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(level) * 1'000'003ULL + attempt));
    WorldSpec spec = base;
    const int n = spec.turn_count;
    const double step = 2.0 * kPi / n;
    // Low-harmonic radial profile; independent per-point jitter folds the spline.
    double phase[3], weight[3], total = 0.0;
    const double lo[3] = {0.5, 0.3, 0.0}, hi[3] = {1.0, 0.7, 0.3};
    for (int h = 0; h < 3; ++h) {
      phase[h] = rng.uniform(0.0, 2.0 * kPi);
      weight[h] = rng.uniform(lo[h], hi[h]);
      total += weight[h];
    }
    std::vector<Vec3> ctrl(n);
    for (int i = 0; i < n; ++i) {
      const double angle = step * i + rng.uniform(-0.1, 0.1) * step;
      double wave = 0.0;
      for (int h = 0; h < 3; ++h) wave += weight[h] * std::cos((h + 2) * angle + phase[h]);
      const double radius = 1.0 + radial_jitter * wave / total;
      ctrl[i] = {radius * std::cos(angle), radius * std::sin(angle), 0.0};
    }
    const double unit_length = RiverSpline(ctrl, kSegmentCount).arc_length();
    for (auto& p : ctrl) p = (kArcLength / unit_length) * p;
    RiverSpline spline(std::move(ctrl), kSegmentCount);
    const double L = spline.arc_length();

    spec.width_profile.clear();
    if (width_lo == width_hi) {
      spec.width_profile.push_back({0.0, width_lo});
    } else {
      for (int i = 0; i < n; ++i) spec.width_profile.push_back({L * i / n, rng.uniform(width_lo, width_hi)});
    }
    if (!ribbon_is_valid(spec, spline)) continue;

    // Bridges and islands share a set of evenly spread anchor slots so they never overlap.
    const int features = spec.bridge_count + spec.island_count;
    std::vector<Box> bridges;
    std::vector<Disc> islands;
    if (features > 0) {
      const double phase = rng.uniform(0.0, L);
      std::vector<double> anchors(features);
      for (int i = 0; i < features; ++i)
        anchors[i] = spline.wrap(phase + L * (i + 0.5 + rng.uniform(-0.15, 0.15)) / features);
      for (int i = 0; i < features; ++i) {
        const double arc = anchors[i];
        const double w = spec.width_at(arc, L);
        // alternate bridge / island while both remain
        const bool as_bridge = (i % 2 == 0 && static_cast<int>(bridges.size()) < spec.bridge_count) ||
                               static_cast<int>(islands.size()) >= spec.island_count;
        if (as_bridge) {
          bridges.push_back(bridge_box(spline, arc, w, spec.volume_margin));
        } else {
          const auto [c, t] = spline.sample(arc);
          const double r = 0.22 * w;
          const double off = rng.uniform(-0.5, 0.5) * (w / 2.0 - r - 0.5);
          islands.push_back({c.x - t.y * off, c.y + t.x * off, r});
        }
      }
    }
    return World(std::move(spec), std::move(spline), std::move(bridges), std::move(islands));
  }
}

SplineSample sample_spline(const World& world, double s) { return world.spline().sample(s); }

SegmentQuery nearest_segment(const World& world, Vec3 position) {
  const auto& spline = world.spline();
  const auto& pts = spline.dense_points();
  const std::size_t n = pts.size();
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = pts[i].x - position.x, dy = pts[i].y - position.y;
    const double d2 = dx * dx + dy * dy;
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  const double ds = spline.dense_spacing();
  double arc = ds * static_cast<double>(best);
  double dist = std::sqrt(best_d2);
  // refine on the two polyline edges around the closest sample
  for (const std::size_t a : {(best + n - 1) % n, best}) {
    const Vec3& p = pts[a];
    const Vec3& q = pts[(a + 1) % n];
    const double ex = q.x - p.x, ey = q.y - p.y;
    const double len2 = ex * ex + ey * ey;
    if (len2 <= 0.0) continue;
    const double u = std::clamp(((position.x - p.x) * ex + (position.y - p.y) * ey) / len2, 0.0, 1.0);
    const double d = std::hypot(p.x + u * ex - position.x, p.y + u * ey - position.y);
    if (d < dist) {
      dist = d;
      arc = ds * (static_cast<double>(a) + u);
    }
  }
  // golden-section polish on the curve itself
  {
    auto d2 = [&](double s) {
      const Vec3 c = spline.sample(s).position;
      return (c.x - position.x) * (c.x - position.x) + (c.y - position.y) * (c.y - position.y);
    };
    constexpr double g = 0.6180339887498949;
    double a = arc - ds, b = arc + ds;
    double x1 = b - g * (b - a), x2 = a + g * (b - a);
    double f1 = d2(x1), f2 = d2(x2);
    for (int it = 0; it < 40; ++it) {
      if (f1 < f2) {
        b = x2, x2 = x1, f2 = f1;
        x1 = b - g * (b - a), f1 = d2(x1);
      } else {
        a = x1, x1 = x2, f1 = f2;
        x2 = a + g * (b - a), f2 = d2(x2);
      }
    }
    const double s = 0.5 * (a + b), f = d2(s);
    if (std::sqrt(f) < dist) {
      dist = std::sqrt(f);
      arc = s;
    }
  }
  arc = spline.wrap(arc);
  const auto [c, t] = spline.sample(arc);
  const double cross = t.x * (position.y - c.y) - t.y * (position.x - c.x);
  SegmentQuery q;
  q.arc = arc;
  q.segment = spline.segment_of(arc);
  q.lateral_offset = cross >= 0.0 ? dist : -dist;
  return q;
}

Containment inside_volume(const World& world, const Pose& pose) {
  const auto& spec = world.spec();
  if (pose.z < spec.volume_floor || pose.z > spec.volume_ceiling) return Containment::OutVertical;
  return inside_volume(world, pose, nearest_segment(world, pose.position()));
}

Containment inside_volume(const World& world, const Pose& pose, const SegmentQuery& q) {
  const auto& spec = world.spec();
  if (pose.z < spec.volume_floor || pose.z > spec.volume_ceiling) return Containment::OutVertical;
  if (std::abs(q.lateral_offset) > world.width_at(q.arc) / 2.0 + spec.volume_margin) return Containment::OutHorizontal;
  return Containment::Inside;
}

bool check_collision(const World& world, const Pose& pose) {
  const Vec3 p = pose.position();
  return std::any_of(world.bridges().begin(), world.bridges().end(),
                     [&](const Box& b) { return b.distance(p) <= kAgentRadius; });
}

std::vector<std::size_t> covered_segments(const World& world, Vec3 position, double radius) {
  const auto& pts = world.spline().dense_points();
  std::vector<std::size_t> out;
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double dx = pts[i].x - position.x, dy = pts[i].y - position.y;
    if (dx * dx + dy * dy > r2) continue;
    const std::size_t seg = i / RiverSpline::kDensePerSegment;
    if (out.empty() || out.back() != seg) out.push_back(seg);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string world_spec_json(const WorldSpec& spec) {
  nlohmann::ordered_json j;
  j["level"] = std::string(to_string(spec.level));
  j["seed"] = spec.seed;
  j["bridge_count"] = spec.bridge_count;
  j["island_count"] = spec.island_count;
  j["turn_count"] = spec.turn_count;
  auto& profile = j["width_profile"] = nlohmann::ordered_json::array();
  for (const auto& k : spec.width_profile) profile.push_back({{"arc", k.arc}, {"width", k.width}});
  j["volume_margin"] = spec.volume_margin;
  j["volume_floor"] = spec.volume_floor;
  j["volume_ceiling"] = spec.volume_ceiling;
  return j.dump(2);
}

WorldSpec world_spec_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  WorldSpec s;
  const auto level = parse_level(j.at("level").get<std::string>());
  if (!level) throw std::invalid_argument("unknown level in world spec");
  s.level = *level;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.bridge_count = j.at("bridge_count").get<int>();
  s.island_count = j.at("island_count").get<int>();
  s.turn_count = j.at("turn_count").get<int>();
  for (const auto& k : j.at("width_profile")) s.width_profile.push_back({k.at("arc").get<double>(), k.at("width").get<double>()});
  s.volume_margin = j.at("volume_margin").get<double>();
  s.volume_floor = j.at("volume_floor").get<double>();
  s.volume_ceiling = j.at("volume_ceiling").get<double>();
  return s;
}

}  // namespace sre::world
