#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sre/env/river_env.hpp"

namespace sre::rl {

struct Transition {
  std::vector<double> obs;
  double reward = 0.0;
  double cost = 0.0;
  bool done = false;
  env::Outcome outcome = env::Outcome::Running;
};

/// Vector-observation, multi-discrete-action episodic task.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::size_t obs_dim() const = 0;
  virtual std::vector<std::size_t> action_branches() const = 0;
  virtual std::vector<double> reset(std::uint64_t seed) = 0;
  virtual Transition step(std::span<const int> action) = 0;
};

}  // namespace sre::rl
