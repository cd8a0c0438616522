#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sre/rl/environment.hpp"
#include "sre/rl/policy.hpp"

namespace sre::bench {

/// Tiny deterministic CMDP used as an exact oracle for the safe RL updates.
/// next[s][a] == -1 ends the episode. Episodes start in state 0.
struct ChainCmdpSpec {
  std::size_t states = 0, actions = 0;
  std::vector<std::vector<double>> reward, cost;
  std::vector<std::vector<int>> next;
  double gamma = 0.99;
  double budget = 0.15;
  std::vector<std::string> action_names;

  void validate() const;  // throws std::invalid_argument
};

/// n = 5 forward chain; "safe" r 0.1 c 0, "risky" r 1.0 c 0.3; gamma 0.99, d 0.15.
ChainCmdpSpec reference_chain();

struct ChainValue {
  double reward = 0.0, cost = 0.0;  // discounted, from state 0
};

/// Exact discounted returns of a stochastic stationary policy probs[s][a].
ChainValue evaluate_chain_policy(const ChainCmdpSpec& spec, const std::vector<std::vector<double>>& probs);
ChainValue evaluate_chain_policy(const ChainCmdpSpec& spec, const std::vector<int>& actions);

struct ChainOracle {
  std::optional<double> feasible_return;  // empty: no deterministic policy meets the budget
  std::vector<int> feasible_policy;
  double unconstrained_return = 0.0;
  std::vector<int> unconstrained_policy;
  double unconstrained_cost = 0.0;
};

/// Enumerates all |A|^n deterministic stationary policies.
ChainOracle oracle_solve_chain_cmdp(const ChainCmdpSpec& spec);

/// The chain as an RL task: one-hot state observation, one action branch.
class ChainEnv final : public rl::Environment {
 public:
  explicit ChainEnv(ChainCmdpSpec spec, int max_length = 1000);

  std::size_t obs_dim() const override { return spec_.states; }
  std::vector<std::size_t> action_branches() const override { return {spec_.actions}; }
  std::vector<double> reset(std::uint64_t seed) override;
  rl::Transition step(std::span<const int> action) override;

  const ChainCmdpSpec& spec() const { return spec_; }

 private:
  std::vector<double> observe() const;

  ChainCmdpSpec spec_;
  int max_length_;
  int state_ = 0;
  int length_ = 0;
};

/// Action probabilities of a policy in every chain state.
std::vector<std::vector<double>> chain_policy_probs(const rl::PolicyNet& policy, std::size_t states);

}  // namespace sre::bench
