#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sre/world/world.hpp"

namespace sre::world {

enum class ChannelConfig { RGB, Mask, RGBMask };

std::size_t channel_count(ChannelConfig config);
std::string_view to_string(ChannelConfig config);
std::optional<ChannelConfig> parse_channels(std::string_view text);

/// Rendered observation, stored channel-major: R, G, B planes in [0, 1]
/// followed by the water mask plane in {0, 1}.
struct Frame {
  std::size_t width = 0, height = 0;
  std::vector<double> data;

  static constexpr std::size_t kChannels = 4;
  static constexpr std::size_t kMaskChannel = 3;

  Frame() = default;
  Frame(std::size_t w, std::size_t h) : width(w), height(h), data(kChannels * w * h, 0.0) {}

  std::size_t plane_size() const { return width * height; }
  std::span<double> plane(std::size_t c) { return {data.data() + c * plane_size(), plane_size()}; }
  std::span<const double> plane(std::size_t c) const { return {data.data() + c * plane_size(), plane_size()}; }
  std::span<const double> mask() const { return plane(kMaskChannel); }
  double mask_fraction() const;

  /// Concatenated planes selected by the configuration (RGB: 0-2, Mask: 3, RGBMask: 0-3).
  std::vector<double> channels(ChannelConfig config) const;

  bool operator==(const Frame&) const = default;
};

struct Camera {
  double pitch_deg = -20.0;  // negative looks down
  double fov_deg = 70.0;     // horizontal and vertical
  double far_m = 250.0;
};

bool valid_resolution(std::size_t resolution);

/// Pinhole render from the pose with flat-shaded surface classes.
/// Resolution must be 32, 64 or 128.
Frame render_frame(const World& world, const Pose& pose, std::size_t resolution, const Camera& camera = {});

struct RgbImage {
  std::size_t width = 0, height = 0;
  std::vector<std::uint8_t> rgb;  // interleaved
};

/// Orthographic top-down view of the ground map with bridges drawn on top.
RgbImage render_top_down(const World& world, double meters_per_pixel = 0.5);

void write_ppm(const std::filesystem::path& path, const RgbImage& image);
void write_frame_ppm(const std::filesystem::path& path, const Frame& frame);
void write_mask_pgm(const std::filesystem::path& path, const Frame& frame);
/// Reassembles a frame from an RGB PPM (P6) and a mask PGM (P5).
Frame read_frame(const std::filesystem::path& ppm, const std::filesystem::path& pgm);

}  // namespace sre::world
