#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sre/nd/params.hpp"

namespace sre::rl {

/// MLP with tanh hidden layers and one categorical head per action branch.
class PolicyNet {
 public:
  PolicyNet() = default;
  PolicyNet(std::size_t obs_dim, std::vector<std::size_t> branches, std::vector<std::size_t> hidden, std::uint64_t seed);

  std::size_t obs_dim() const { return obs_dim_; }
  const std::vector<std::size_t>& branches() const { return branches_; }
  std::size_t logit_count() const { return logit_count_; }
  nd::ParameterSet& params() { return params_; }
  const nd::ParameterSet& params() const { return params_; }

  /// Logits for a batch (rows x obs_dim) without a tape.
  std::vector<double> logits(std::span<const double> obs, std::size_t rows) const;
  nd::Var logits(nd::Tape& tape, std::span<const nd::Var> bound, nd::Var obs) const;

  /// Sum of branch log-probabilities of `action` under `logits` (one row).
  double log_prob(std::span<const double> logits, std::span<const int> action) const;
  /// Flat column index of each chosen action, for gather_sum.
  std::vector<std::size_t> action_columns(std::span<const int> actions, std::size_t rows) const;

  std::vector<int> sample(std::span<const double> logits, Rng& rng) const;
  std::vector<int> greedy(std::span<const double> logits) const;
  /// Sum over branches of KL(p || q) for one row of logits.
  double kl(std::span<const double> p_logits, std::span<const double> q_logits) const;

  bool operator==(const PolicyNet& other) const { return params_ == other.params_; }

 private:
  std::size_t obs_dim_ = 0;
  std::vector<std::size_t> branches_;
  std::size_t logit_count_ = 0;
  std::size_t layers_ = 0;
  nd::ParameterSet params_;
};

/// Scalar state-value network.
class ValueNet {
 public:
  ValueNet() = default;
  ValueNet(std::size_t obs_dim, std::vector<std::size_t> hidden, std::uint64_t seed);

  nd::ParameterSet& params() { return params_; }
  const nd::ParameterSet& params() const { return params_; }
  std::vector<double> predict(std::span<const double> obs, std::size_t rows) const;
  nd::Var predict(nd::Tape& tape, std::span<const nd::Var> bound, nd::Var obs) const;

 private:
  std::size_t layers_ = 0;
  nd::ParameterSet params_;
};

}  // namespace sre::rl
