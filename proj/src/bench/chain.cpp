#include "sre/bench/chain.hpp"

#include <Eigen/Dense>
#include <stdexcept>

#include "sre/nd/ops.hpp"

namespace sre::bench {

void ChainCmdpSpec::validate() const {
  if (states == 0 || states > 8 || actions < 2 || actions > 3)
    throw std::invalid_argument("chain CMDP must have 1..8 states and 2..3 actions");
  auto check = [&](const auto& table) {
    if (table.size() != states) return false;
    for (const auto& row : table)
      if (row.size() != actions) return false;
    return true;
  };
  if (!check(reward) || !check(cost) || !check(next)) throw std::invalid_argument("chain CMDP table shape mismatch");
  for (const auto& row : next)
    for (int s : row)
      if (s < -1 || s >= static_cast<int>(states)) throw std::invalid_argument("chain CMDP transition out of range");
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("chain CMDP discount must be in (0, 1)");
  if (budget < 0.0) throw std::invalid_argument("chain CMDP budget must be nonnegative");
}

ChainCmdpSpec reference_chain() {
  ChainCmdpSpec s;
  s.states = 5;
  s.actions = 2;
  s.action_names = {"safe", "risky"};
  for (std::size_t i = 0; i < s.states; ++i) {
    const int nxt = i + 1 < s.states ? static_cast<int>(i + 1) : -1;
    s.reward.push_back({0.1, 1.0});
    s.cost.push_back({0.0, 0.3});
    s.next.push_back({nxt, nxt});
  }
  s.gamma = 0.99;
  s.budget = 0.15;
  return s;
}

ChainValue evaluate_chain_policy(const ChainCmdpSpec& spec, const std::vector<std::vector<double>>& probs) {
  spec.validate();
  if (probs.size() != spec.states) throw std::invalid_argument("policy table has the wrong state count");
  const auto n = static_cast<Eigen::Index>(spec.states);
  // (I - gamma P_pi) V = r_pi
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(n), c = Eigen::VectorXd::Zero(n);
  for (std::size_t s = 0; s < spec.states; ++s) {
    if (probs[s].size() != spec.actions) throw std::invalid_argument("policy table has the wrong action count");
    for (std::size_t a = 0; a < spec.actions; ++a) {
      const double p = probs[s][a];
      r(s) += p * spec.reward[s][a];
      c(s) += p * spec.cost[s][a];
      if (spec.next[s][a] >= 0) A(s, spec.next[s][a]) -= spec.gamma * p;
    }
  }
  const auto lu = A.partialPivLu();
  return {lu.solve(r)(0), lu.solve(c)(0)};
}

ChainValue evaluate_chain_policy(const ChainCmdpSpec& spec, const std::vector<int>& actions) {
  std::vector<std::vector<double>> probs(spec.states, std::vector<double>(spec.actions, 0.0));
  if (actions.size() != spec.states) throw std::invalid_argument("policy has the wrong state count");
  for (std::size_t s = 0; s < spec.states; ++s) probs[s].at(static_cast<std::size_t>(actions[s])) = 1.0;
  return evaluate_chain_policy(spec, probs);
}

ChainOracle oracle_solve_chain_cmdp(const ChainCmdpSpec& spec) {
  spec.validate();
  ChainOracle out;
  std::size_t total = 1;
  for (std::size_t i = 0; i < spec.states; ++i) total *= spec.actions;
  std::vector<int> pi(spec.states);
  bool first = true;
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t k = code;
    for (std::size_t s = 0; s < spec.states; ++s, k /= spec.actions) pi[s] = static_cast<int>(k % spec.actions);
    const auto v = evaluate_chain_policy(spec, pi);
    // strict comparisons keep the lowest code among ties
    if (first || v.reward > out.unconstrained_return) {
      out.unconstrained_return = v.reward;
      out.unconstrained_cost = v.cost;
      out.unconstrained_policy = pi;
    }
    first = false;
    if (v.cost <= spec.budget && (!out.feasible_return || v.reward > *out.feasible_return)) {
      out.feasible_return = v.reward;
      out.feasible_policy = pi;
    }
  }
  return out;
}

ChainEnv::ChainEnv(ChainCmdpSpec spec, int max_length) : spec_(std::move(spec)), max_length_(max_length) {
  spec_.validate();
}

std::vector<double> ChainEnv::observe() const {
  std::vector<double> o(spec_.states, 0.0);
  o[static_cast<std::size_t>(state_)] = 1.0;
  return o;
}

std::vector<double> ChainEnv::reset(std::uint64_t) {
  state_ = 0;
  length_ = 0;
  return observe();
}

rl::Transition ChainEnv::step(std::span<const int> action) {
  if (action.size() != 1 || action[0] < 0 || static_cast<std::size_t>(action[0]) >= spec_.actions)
    throw std::invalid_argument("chain action out of range");
  const auto s = static_cast<std::size_t>(state_);
  const auto a = static_cast<std::size_t>(action[0]);
  rl::Transition tr;
  tr.reward = spec_.reward[s][a];
  tr.cost = spec_.cost[s][a];
  ++length_;
  const int nxt = spec_.next[s][a];
  if (nxt < 0) {
    tr.done = true;
    tr.outcome = env::Outcome::Success;
  } else if (length_ >= max_length_) {
    tr.done = true;
    tr.outcome = env::Outcome::MaxStepReached;
  }
  state_ = nxt < 0 ? 0 : nxt;
  tr.obs = observe();
  return tr;
}

std::vector<std::vector<double>> chain_policy_probs(const rl::PolicyNet& policy, std::size_t states) {
  std::vector<std::vector<double>> probs;
  for (std::size_t s = 0; s < states; ++s) {
    std::vector<double> o(states, 0.0);
    o[s] = 1.0;
    probs.push_back(nd::softmax(policy.logits(o, 1)));
  }
  return probs;
}

}  // namespace sre::bench
