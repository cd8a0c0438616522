#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "sre/rl/rollout.hpp"

namespace sre::rl {

enum class Algorithm { PPO, PPOLag, FOCOPS, P3O, OnCRPO };

std::string_view to_string(Algorithm algo);
std::optional<Algorithm> parse_algorithm(std::string_view text);

struct AlgoConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  std::size_t rollout_steps = 4096;
  std::size_t epochs = 4;
  std::size_t minibatch = 256;
  double policy_lr = 3e-4;
  double value_lr = 1e-3;
  double clip = 0.2;
  double target_kl = 0.02;  // delta; policy epochs stop past 1.5 * delta
  double max_grad_norm = 0.5;
  double cost_limit = 0.1;  // d
  std::vector<std::size_t> policy_hidden{64, 64};
  std::vector<std::size_t> value_hidden{64};

  // PPOLag
  double lambda_lr = 0.05;
  double lambda_init = 0.0;
  double lambda_max = 10.0;
  // FOCOPS
  double focops_temperature = 1.5;  // lambda_f
  double nu_lr = 0.05;
  double nu_max = 2.0;
  // P3O
  double kappa = 1.0;
  // OnCRPO: tolerance eta = crpo_tolerance_ratio * d
  double crpo_tolerance_ratio = 0.05;
};

struct LagrangeState {
  double lambda = 0.0;
  double learning_rate = 0.05;
  double budget = 0.1;
  double lambda_max = 10.0;
};

/// Projected dual ascent: lambda <- clamp(lambda + lr * (J^C - d), 0, lambda_max).
void lagrange_update(LagrangeState& state, double cost_estimate);

struct UpdateStats {
  double mean_kl = 0.0;    // KL(pi_old || pi_new) averaged over the buffer
  double clip_frac = 0.0;  // over policy minibatch steps taken
  double policy_loss = 0.0;
  double value_loss_r = 0.0, value_loss_c = 0.0;
  std::size_t policy_steps = 0;
  bool early_stopped = false;
  bool rolled_back = false;
  double cost_estimate = 0.0;
  double lambda = 0.0;  // PPOLag multiplier after its update
  double nu = 0.0;      // FOCOPS multiplier after its update
  bool hinge_active = false;
  bool cost_branch = false;  // OnCRPO: true when the cost objective was optimized
};

/// Policy, reward/cost value heads, their optimizers and dual variables.
class SafeAgent {
 public:
  SafeAgent(std::size_t obs_dim, std::vector<std::size_t> branches, AlgoConfig config, std::uint64_t seed);

  PolicyNet policy;
  ValueNet value_r, value_c;
  nd::Adam policy_opt, value_r_opt, value_c_opt;
  LagrangeState lagrange;
  double nu = 0.0;
  AlgoConfig config;
  Rng shuffle_rng;
};

/// Runs GAE on the buffer (if not done yet) and the algorithm's update.
UpdateStats update(Algorithm algo, SafeAgent& agent, RolloutBuffer& buffer);

UpdateStats ppo_update(SafeAgent& agent, RolloutBuffer& buffer);
UpdateStats ppolag_update(SafeAgent& agent, RolloutBuffer& buffer);
UpdateStats focops_update(SafeAgent& agent, RolloutBuffer& buffer);
UpdateStats p3o_update(SafeAgent& agent, RolloutBuffer& buffer);
UpdateStats oncrpo_update(SafeAgent& agent, RolloutBuffer& buffer);

/// Zero-mean, unit-variance copy.
std::vector<double> normalized(const std::vector<double>& x);
/// Buffer-average KL(behavior || current policy).
double buffer_kl(const PolicyNet& policy, const RolloutBuffer& buffer);

}  // namespace sre::rl
