#include "sre/rl/rollout.hpp"

#include <stdexcept>

namespace sre::rl {

double RolloutBuffer::cost_estimate() const {
  if (episodes.empty()) return 0.0;
  double total = 0.0;
  for (const auto& e : episodes) total += e.discounted_cost;
  return total / static_cast<double>(episodes.size());
}

RolloutCollector::RolloutCollector(Environment& env, std::uint64_t seed, double gamma)
    : env_(env), seed_(seed), gamma_(gamma), rng_(mix_seed(seed, 0xC011EC7)) {}

RolloutBuffer RolloutCollector::collect(const PolicyNet& policy, const ValueNet& value_r, const ValueNet& value_c,
                                        std::size_t steps) {
  if (steps == 0) throw std::invalid_argument("rollout length must be positive");
  if (policy.obs_dim() != env_.obs_dim()) throw std::invalid_argument("policy input does not match the environment");
  RolloutBuffer buf;
  buf.obs_dim = env_.obs_dim();
  buf.branch_count = policy.branches().size();
  buf.logit_count = policy.logit_count();

  for (std::size_t t = 0; t < steps; ++t) {
    if (obs_.empty()) {
      obs_ = env_.reset(mix_seed(seed_, episode_++));
      current_ = {};
      discount_ = 1.0;
    }
    const auto logits = policy.logits(obs_, 1);
    const auto action = policy.sample(logits, rng_);
    buf.obs.insert(buf.obs.end(), obs_.begin(), obs_.end());
    buf.actions.insert(buf.actions.end(), action.begin(), action.end());
    buf.logits.insert(buf.logits.end(), logits.begin(), logits.end());
    buf.logp.push_back(policy.log_prob(logits, action));
    buf.value_r.push_back(value_r.predict(obs_, 1)[0]);
    buf.value_c.push_back(value_c.predict(obs_, 1)[0]);

    Transition tr = env_.step(action);
    ++total_steps_;
    buf.rewards.push_back(tr.reward);
    buf.costs.push_back(tr.cost);
    buf.dones.push_back(tr.done ? 1 : 0);
    buf.outcomes.push_back(tr.outcome);

    current_.ret += tr.reward;
    current_.cost += tr.cost;
    current_.discounted_cost += discount_ * tr.cost;
    discount_ *= gamma_;
    ++current_.length;
    if (tr.done) {
      current_.outcome = tr.outcome;
      current_.end_step = total_steps_;
      buf.episodes.push_back(current_);
      obs_.clear();
    } else {
      obs_ = std::move(tr.obs);
    }
  }
  if (!obs_.empty()) {
    buf.last_value_r = value_r.predict(obs_, 1)[0];
    buf.last_value_c = value_c.predict(obs_, 1)[0];
  }
  return buf;
}

void compute_gae(RolloutBuffer& buf, double gamma, double lambda) {
  const std::size_t T = buf.size();
  if (buf.value_r.size() != T || buf.value_c.size() != T || buf.dones.size() != T || buf.costs.size() != T)
    throw std::invalid_argument("compute_gae: buffer arrays disagree in length");
  auto run = [&](const std::vector<double>& r, const std::vector<double>& v, double last, std::vector<double>& adv,
                 std::vector<double>& ret) {
    adv.assign(T, 0.0);
    ret.assign(T, 0.0);
    double gae = 0.0;
    for (std::size_t i = T; i-- > 0;) {
      const double live = buf.dones[i] ? 0.0 : 1.0;
      const double next = i + 1 < T ? v[i + 1] : last;
      const double delta = r[i] + gamma * next * live - v[i];
      gae = delta + gamma * lambda * live * gae;
      adv[i] = gae;
      ret[i] = gae + v[i];
    }
  };
  run(buf.rewards, buf.value_r, buf.last_value_r, buf.adv_r, buf.ret_r);
  run(buf.costs, buf.value_c, buf.last_value_c, buf.adv_c, buf.ret_c);
}

}  // namespace sre::rl
