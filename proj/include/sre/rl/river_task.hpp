#pragma once

#include <memory>

#include "sre/rl/environment.hpp"
#include "sre/vision/vae.hpp"

namespace sre::rl {

/// River environment seen through a frozen VAE: observations are latent means.
class RiverTask final : public Environment {
 public:
  RiverTask(std::shared_ptr<const world::World> world, std::shared_ptr<const vision::Vae> encoder,
            env::EnvConfig config = {});

  std::size_t obs_dim() const override;
  std::vector<std::size_t> action_branches() const override { return {3, 3, 3, 3}; }
  std::vector<double> reset(std::uint64_t seed) override;
  Transition step(std::span<const int> action) override;

  const env::RiverEnv& river() const { return env_; }
  const vision::Vae& encoder() const { return *encoder_; }

 private:
  env::RiverEnv env_;
  std::shared_ptr<const vision::Vae> encoder_;
};

}  // namespace sre::rl
