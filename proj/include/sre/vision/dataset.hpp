#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sre/env/river_env.hpp"
#include "sre/vision/vae.hpp"

namespace sre::vision {

/// Frames rendered from random safe poses of one world.
struct FrameDataset {
  std::string level;
  std::uint64_t seed = 0;
  std::size_t resolution = 32;
  std::vector<world::Frame> frames;
  std::vector<world::Pose> poses;

  std::size_t size() const { return frames.size(); }
};

FrameDataset collect_frames(const world::World& world, std::size_t count, std::uint64_t seed,
                            std::size_t resolution, const env::EnvConfig& config = {});

/// Layout: <dir>/frames/NNNNNN.ppm + .pgm and <dir>/index.json.
void save_dataset(const std::filesystem::path& dir, const FrameDataset& dataset);
FrameDataset load_dataset(const std::filesystem::path& dir);

/// Row-major matrix of flattened frames for the channel configuration.
std::vector<double> dataset_inputs(const FrameDataset& dataset, ChannelConfig channels);

struct EncodingDataset {
  ChannelConfig source = ChannelConfig::RGBMask;
  std::size_t dim = 0;
  std::vector<double> values;  // rows x dim

  std::size_t rows() const { return dim == 0 ? 0 : values.size() / dim; }
  double at(std::size_t row, std::size_t col) const { return values[row * dim + col]; }
};

EncodingDataset encode_dataset(const Vae& vae, const FrameDataset& dataset);

/// One row per sample, header z0..z{D-1}.
void write_encodings_csv(const std::filesystem::path& path, const EncodingDataset& encodings);
EncodingDataset read_encodings_csv(const std::filesystem::path& path, ChannelConfig source);

}  // namespace sre::vision
