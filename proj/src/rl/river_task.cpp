#include "sre/rl/river_task.hpp"

#include <stdexcept>

namespace sre::rl {

namespace {

env::EnvConfig with_rendering(env::EnvConfig cfg) {
  cfg.render = true;
  return cfg;
}

}  // namespace

RiverTask::RiverTask(std::shared_ptr<const world::World> world, std::shared_ptr<const vision::Vae> encoder,
                     env::EnvConfig config)
    : env_(std::move(world), with_rendering(std::move(config))), encoder_(std::move(encoder)) {
  if (!encoder_) throw std::invalid_argument("river task needs an encoder");
  if (encoder_->config().resolution != env_.config().resolution)
    throw std::invalid_argument("encoder resolution does not match the camera resolution");
}

std::size_t RiverTask::obs_dim() const { return encoder_->config().latent_dim; }

std::vector<double> RiverTask::reset(std::uint64_t seed) { return encoder_->encode(env_.reset(seed)); }

Transition RiverTask::step(std::span<const int> action) {
  if (action.size() != 4) throw std::invalid_argument("river actions have four branches");
  env::MultiDiscreteAction a;
  for (std::size_t i = 0; i < 4; ++i) a.branch[i] = action[i];
  auto r = env_.step(a);
  return {encoder_->encode(r.frame), r.reward, r.cost, r.done, r.outcome};
}

}  // namespace sre::rl
