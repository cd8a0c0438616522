#include "sre/world/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "sre/nd/rng.hpp"

namespace sre::world {

namespace {

// Slab test; returns entry distance along the ray or +inf.
double ray_box(Vec3 o, Vec3 d, const Box& b) {
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  const double os[3] = {o.x, o.y, o.z}, ds[3] = {d.x, d.y, d.z};
  const double lo[3] = {b.min.x, b.min.y, b.min.z}, hi[3] = {b.max.x, b.max.y, b.max.z};
  for (int a = 0; a < 3; ++a) {
    if (std::abs(ds[a]) < 1e-15) {
      if (os[a] < lo[a] || os[a] > hi[a]) return std::numeric_limits<double>::infinity();
      continue;
    }
    double ta = (lo[a] - os[a]) / ds[a], tb = (hi[a] - os[a]) / ds[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::numeric_limits<double>::infinity();
  }
  return t0;
}

Vec3 terrain_color(const Palette& pal, double x, double y) {
  const auto cx = static_cast<std::int64_t>(std::floor(x / 2.0));
  const auto cy = static_cast<std::int64_t>(std::floor(y / 2.0));
  const std::uint64_t h = mix_seed(static_cast<std::uint64_t>(cx), static_cast<std::uint64_t>(cy) * 0x632BE5ABULL);
  const double tint = (static_cast<double>(h >> 11) * 0x1.0p-53 - 0.5) * 0.12;
  return {pal.terrain.x + tint, pal.terrain.y + tint, pal.terrain.z + 0.5 * tint};
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

void read_header(std::istream& is, const char* magic, std::size_t& w, std::size_t& h) {
  std::string m;
  int maxval = 0;
  is >> m;
  if (m != magic) throw std::runtime_error(std::string("expected ") + magic + " image");
  is >> w >> h >> maxval;
  if (!is || maxval != 255) throw std::runtime_error("unsupported netpbm header");
  is.get();
}

}  // namespace

std::size_t channel_count(ChannelConfig config) {
  switch (config) {
    case ChannelConfig::RGB: return 3;
    case ChannelConfig::Mask: return 1;
    case ChannelConfig::RGBMask: return 4;
  }
  return 0;
}

std::string_view to_string(ChannelConfig config) {
  switch (config) {
    case ChannelConfig::RGB: return "rgb";
    case ChannelConfig::Mask: return "mask";
    case ChannelConfig::RGBMask: return "rgbmask";
  }
  return "unknown";
}

std::optional<ChannelConfig> parse_channels(std::string_view text) {
  if (text == "rgb") return ChannelConfig::RGB;
  if (text == "mask") return ChannelConfig::Mask;
  if (text == "rgbmask") return ChannelConfig::RGBMask;
  return std::nullopt;
}

double Frame::mask_fraction() const {
  const auto m = mask();
  double total = 0.0;
  for (double v : m) total += v;
  return m.empty() ? 0.0 : total / static_cast<double>(m.size());
}

std::vector<double> Frame::channels(ChannelConfig config) const {
  switch (config) {
    case ChannelConfig::RGB: return {data.begin(), data.begin() + 3 * plane_size()};
    case ChannelConfig::Mask: return {data.begin() + 3 * plane_size(), data.end()};
    case ChannelConfig::RGBMask: return data;
  }
  return {};
}

bool valid_resolution(std::size_t resolution) { return resolution == 32 || resolution == 64 || resolution == 128; }

Frame render_frame(const World& world, const Pose& pose, std::size_t resolution, const Camera& camera) {
  if (!valid_resolution(resolution)) throw std::invalid_argument("resolution must be 32, 64 or 128");
  Frame frame(resolution, resolution);
  const Palette& pal = world.palette();
  const double pitch = deg2rad(camera.pitch_deg);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  const double cy = std::cos(pose.yaw), sy = std::sin(pose.yaw);
  const Vec3 forward{cp * cy, cp * sy, sp};
  const Vec3 right{sy, -cy, 0.0};
  const Vec3 up{-sp * cy, -sp * sy, cp};
  const double half = std::tan(deg2rad(camera.fov_deg) / 2.0);
  const Vec3 origin = pose.position();
  const std::size_t n = resolution;

  auto R = frame.plane(0), G = frame.plane(1), B = frame.plane(2), M = frame.plane(3);
  for (std::size_t row = 0; row < n; ++row) {
    const double v = (1.0 - 2.0 * (static_cast<double>(row) + 0.5) / n) * half;
    for (std::size_t col = 0; col < n; ++col) {
      const double u = (2.0 * (static_cast<double>(col) + 0.5) / n - 1.0) * half;
      const Vec3 dir = forward + u * right + v * up;

      double t_ground = std::numeric_limits<double>::infinity();
      if (dir.z < 0.0) t_ground = -origin.z / dir.z;
      double t_box = std::numeric_limits<double>::infinity();
      for (const auto& b : world.bridges()) t_box = std::min(t_box, ray_box(origin, dir, b));

      Vec3 color = pal.sky;
      double mask = 0.0;
      if (t_box < t_ground && t_box < camera.far_m * norm(dir)) {
        color = pal.bridge;
      } else if (std::isfinite(t_ground)) {
        const double hx = origin.x + t_ground * dir.x, hy = origin.y + t_ground * dir.y;
        const double dist = t_ground * norm(dir);
        const SurfaceClass cls = dist <= camera.far_m ? world.ground().at(hx, hy) : SurfaceClass::Terrain;
        switch (cls) {
          case SurfaceClass::Water:
            color = pal.water;
            mask = 1.0;
            break;
          case SurfaceClass::Island: color = pal.island; break;
          case SurfaceClass::Terrain: color = terrain_color(pal, hx, hy); break;
        }
      }
      const std::size_t idx = row * n + col;
      R[idx] = color.x;
      G[idx] = color.y;
      B[idx] = color.z;
      M[idx] = mask;
    }
  }
  return frame;
}

RgbImage render_top_down(const World& world, double meters_per_pixel) {
  const GroundMap& g = world.ground();
  const Palette& pal = world.palette();
  RgbImage img;
  const double extent_x = g.cell * static_cast<double>(g.cols), extent_y = g.cell * static_cast<double>(g.rows);
  img.width = static_cast<std::size_t>(extent_x / meters_per_pixel);
  img.height = static_cast<std::size_t>(extent_y / meters_per_pixel);
  img.rgb.resize(3 * img.width * img.height);
  for (std::size_t r = 0; r < img.height; ++r) {
    // image rows run north to south
    const double y = g.origin_y + extent_y - (static_cast<double>(r) + 0.5) * meters_per_pixel;
    for (std::size_t c = 0; c < img.width; ++c) {
      const double x = g.origin_x + (static_cast<double>(c) + 0.5) * meters_per_pixel;
      Vec3 color;
      switch (g.at(x, y)) {
        case SurfaceClass::Water: color = pal.water; break;
        case SurfaceClass::Island: color = pal.island; break;
        case SurfaceClass::Terrain: color = terrain_color(pal, x, y); break;
      }
      for (const auto& b : world.bridges())
        if (x >= b.min.x && x <= b.max.x && y >= b.min.y && y <= b.max.y) color = pal.bridge;
      std::uint8_t* px = img.rgb.data() + 3 * (r * img.width + c);
      px[0] = to_byte(color.x);
      px[1] = to_byte(color.y);
      px[2] = to_byte(color.z);
    }
  }
  return img;
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(image.rgb.data()), static_cast<std::streamsize>(image.rgb.size()));
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

void write_frame_ppm(const std::filesystem::path& path, const Frame& frame) {
  RgbImage img{frame.width, frame.height, std::vector<std::uint8_t>(3 * frame.plane_size())};
  for (std::size_t i = 0; i < frame.plane_size(); ++i)
    for (std::size_t c = 0; c < 3; ++c) img.rgb[3 * i + c] = to_byte(frame.plane(c)[i]);
  write_ppm(path, img);
}

void write_mask_pgm(const std::filesystem::path& path, const Frame& frame) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << "P5\n" << frame.width << ' ' << frame.height << "\n255\n";
  for (double v : frame.mask()) os.put(static_cast<char>(v > 0.5 ? 255 : 0));
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

Frame read_frame(const std::filesystem::path& ppm, const std::filesystem::path& pgm) {
  std::ifstream a(ppm, std::ios::binary), b(pgm, std::ios::binary);
  if (!a) throw std::runtime_error("cannot open " + ppm.string());
  if (!b) throw std::runtime_error("cannot open " + pgm.string());
  std::size_t w = 0, h = 0, w2 = 0, h2 = 0;
  read_header(a, "P6", w, h);
  read_header(b, "P5", w2, h2);
  if (w != w2 || h != h2) throw std::runtime_error("image and mask sizes differ");
  Frame f(w, h);
  std::vector<std::uint8_t> rgb(3 * w * h), m(w * h);
  a.read(reinterpret_cast<char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  b.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size()));
  if (!a || !b) throw std::runtime_error("truncated image data");
  for (std::size_t i = 0; i < w * h; ++i) {
    for (std::size_t c = 0; c < 3; ++c) f.plane(c)[i] = rgb[3 * i + c] / 255.0;
    f.plane(3)[i] = m[i] > 127 ? 1.0 : 0.0;
  }
  return f;
}

}  // namespace sre::world
