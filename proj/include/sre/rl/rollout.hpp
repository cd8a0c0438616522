#pragma once

#include <cstdint>
#include <vector>

#include "sre/rl/environment.hpp"
#include "sre/rl/policy.hpp"

namespace sre::rl {

struct EpisodeRecord {
  double ret = 0.0;
  double cost = 0.0;
  double discounted_cost = 0.0;
  int length = 0;
  env::Outcome outcome = env::Outcome::Running;
  std::uint64_t end_step = 0;  // global step index of the terminal transition (1-based)
};

/// One on-policy batch. Per-step arrays have `size()` entries; obs, actions
/// and logits are row-major with obs_dim, branch and logit widths.
struct RolloutBuffer {
  std::size_t obs_dim = 0, branch_count = 0, logit_count = 0;
  std::vector<double> obs;
  std::vector<int> actions;
  std::vector<double> logits;  // behavior policy logits
  std::vector<double> logp;
  std::vector<double> rewards, costs;
  std::vector<double> value_r, value_c;
  std::vector<std::uint8_t> dones;
  std::vector<env::Outcome> outcomes;
  double last_value_r = 0.0, last_value_c = 0.0;  // bootstrap after the final step

  std::vector<double> adv_r, adv_c, ret_r, ret_c;
  std::vector<EpisodeRecord> episodes;  // completed inside this buffer

  std::size_t size() const { return rewards.size(); }
  /// Mean discounted episodic cost of completed episodes (0 when none completed).
  double cost_estimate() const;
};

/// Steps an environment with auto-reset; episode k is reset with mix_seed(seed, k).
class RolloutCollector {
 public:
  RolloutCollector(Environment& env, std::uint64_t seed, double gamma);

  RolloutBuffer collect(const PolicyNet& policy, const ValueNet& value_r, const ValueNet& value_c, std::size_t steps);

  std::uint64_t total_steps() const { return total_steps_; }
  std::uint64_t episodes_started() const { return episode_; }

 private:
  Environment& env_;
  std::uint64_t seed_;
  double gamma_;
  Rng rng_;
  std::vector<double> obs_;
  std::uint64_t episode_ = 0;
  std::uint64_t total_steps_ = 0;
  EpisodeRecord current_;
  double discount_ = 1.0;
};

/// Generalized advantage estimation, independently on the reward and cost
/// streams. A done flag stops bootstrapping across the episode boundary.
void compute_gae(RolloutBuffer& buffer, double gamma, double lambda);

}  // namespace sre::rl
