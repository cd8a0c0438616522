#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sre/nd/params.hpp"
#include "sre/world/render.hpp"

namespace sre::vision {

using world::ChannelConfig;

struct VaeConfig {
  std::size_t latent_dim = 16;
  ChannelConfig channels = ChannelConfig::RGBMask;
  std::size_t resolution = 32;
  std::size_t hidden = 256;
  std::size_t conv1 = 8, conv2 = 16, conv3 = 32;
  double beta = 1.0;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;

  std::size_t input_size() const { return world::channel_count(channels) * resolution * resolution; }
};

/// Convolutional VAE: three stride-2 convolutions to a dense hidden layer,
/// then mu / logvar heads; the decoder mirrors it with transposed convolutions.
class Vae {
 public:
  Vae() = default;
  explicit Vae(const VaeConfig& config);

  const VaeConfig& config() const { return config_; }
  nd::ParameterSet& params() { return params_; }
  const nd::ParameterSet& params() const { return params_; }

  /// Latent means for a batch of flattened inputs (rows of input_size()).
  std::vector<double> encode_batch(std::span<const double> inputs, std::size_t rows) const;
  std::vector<double> encode(std::span<const double> input) const;
  std::vector<double> encode(const world::Frame& frame) const;
  /// Decodes mu (no sampling).
  std::vector<double> reconstruct(std::span<const double> input) const;

  struct Graph {
    nd::Var mu, logvar, recon;
  };
  /// Records the forward pass on `tape`; eps (rows x D) enables sampling.
  Graph forward(nd::Tape& tape, std::span<const nd::Var> bound, nd::Var input, const nd::Tensor* eps) const;

  void save(const std::filesystem::path& path) const;
  static Vae load(const std::filesystem::path& path);

  bool operator==(const Vae& other) const { return params_ == other.params_; }

 private:
  VaeConfig config_;
  nd::ParameterSet params_;
};

/// Flattens the frame's planes selected by the channel configuration.
std::vector<double> frame_input(const world::Frame& frame, ChannelConfig channels);

struct VaeTraining {
  Vae vae;
  std::vector<double> loss_curve;  // mean per-sample loss per epoch
};

/// Each row of `inputs` is one flattened frame. Loss per sample is the summed
/// squared reconstruction error plus beta times the KL to the unit Gaussian.
VaeTraining train_vae(std::span<const double> inputs, std::size_t rows, const VaeConfig& config);

/// Mean squared error between inputs and mu-decoded reconstructions.
double reconstruction_loss(const Vae& vae, std::span<const double> inputs, std::size_t rows);

struct SweepRow {
  std::size_t latent_dim;
  double loss;
};

/// Trains one model per latent dimension from the same base config (shared seed).
std::vector<SweepRow> latent_sweep(std::span<const double> inputs, std::size_t rows,
                                   std::span<const std::size_t> dims, const VaeConfig& base);

}  // namespace sre::vision
