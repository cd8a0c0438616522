#include <doctest.h>

#include <cmath>
#include <numeric>

#include "gradcheck.hpp"
#include "sre/nd/ops.hpp"
#include "sre/rl/algorithms.hpp"
#include "sre/rl/river_task.hpp"

using namespace sre;
using namespace sre::rl;
using nd::Shape;
using nd::Tape;
using nd::Tensor;
using nd::Var;
using testing::max_gradient_error;
using testing::random_tensor;

namespace {

// Two-step-per-episode toy task: reward for branch 0 choosing 2, cost for branch 1 choosing 0.
class ToyEnv final : public Environment {
 public:
  explicit ToyEnv(int horizon = 5, double cost_on = 1.0) : horizon_(horizon), cost_on_(cost_on) {}
  std::size_t obs_dim() const override { return 3; }
  std::vector<std::size_t> action_branches() const override { return {3, 3}; }
  std::vector<double> reset(std::uint64_t seed) override {
    rng_ = Rng(seed);
    t_ = 0;
    return obs();
  }
  Transition step(std::span<const int> a) override {
    ++t_;
    Transition tr;
    tr.reward = a[0] == 2 ? 1.0 : 0.0;
    tr.cost = a[1] == 0 ? cost_on_ : 0.0;
    tr.done = t_ >= horizon_;
    tr.outcome = tr.done ? env::Outcome::MaxStepReached : env::Outcome::Running;
    tr.obs = obs();
    return tr;
  }

 private:
  std::vector<double> obs() { return {rng_.normal(), rng_.normal(), static_cast<double>(t_) / horizon_}; }
  int horizon_;
  double cost_on_;
  int t_ = 0;
  Rng rng_{0};
};

RolloutBuffer random_stream(Rng& rng, std::size_t T) {
  RolloutBuffer b;
  for (std::size_t i = 0; i < T; ++i) {
    b.rewards.push_back(rng.normal());
    b.costs.push_back(rng.uniform());
    b.value_r.push_back(rng.normal());
    b.value_c.push_back(rng.normal());
    b.dones.push_back(rng.uniform() < 0.25 ? 1 : 0);
  }
  b.last_value_r = rng.normal();
  b.last_value_c = rng.normal();
  return b;
}

// Direct evaluation of sum_l (gamma lambda)^l delta_{t+l}, truncated at episode ends.
std::vector<double> gae_oracle(const RolloutBuffer& b, const std::vector<double>& r, const std::vector<double>& v,
                               double last, double gamma, double lambda) {
  const std::size_t T = r.size();
  std::vector<double> adv(T, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    double weight = 1.0;
    for (std::size_t k = t; k < T; ++k) {
      const bool done = b.dones[k] != 0;
      const double next = done ? 0.0 : (k + 1 < T ? v[k + 1] : last);
      adv[t] += weight * (r[k] + gamma * next - v[k]);
      if (done) break;
      weight *= gamma * lambda;
    }
  }
  return adv;
}

AlgoConfig small_config() {
  AlgoConfig c;
  c.rollout_steps = 200;
  c.minibatch = 50;
  c.epochs = 2;
  c.policy_hidden = {16, 16};
  c.value_hidden = {16};
  return c;
}

RolloutBuffer toy_buffer(const SafeAgent& agent, ToyEnv& env, std::size_t steps, std::uint64_t seed) {
  RolloutCollector col(env, seed, agent.config.gamma);
  return col.collect(agent.policy, agent.value_r, agent.value_c, steps);
}

}  // namespace

TEST_CASE("GAE matches the double-loop sum on random streams") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto b = random_stream(rng, 10);
    compute_gae(b, 0.97, 0.9);
    const auto ar = gae_oracle(b, b.rewards, b.value_r, b.last_value_r, 0.97, 0.9);
    const auto ac = gae_oracle(b, b.costs, b.value_c, b.last_value_c, 0.97, 0.9);
    for (std::size_t i = 0; i < 10; ++i) {
      CHECK(std::abs(b.adv_r[i] - ar[i]) <= 1e-12);
      CHECK(std::abs(b.adv_c[i] - ac[i]) <= 1e-12);
      CHECK(std::abs(b.ret_r[i] - (ar[i] + b.value_r[i])) <= 1e-12);
    }
  }
}

TEST_CASE("GAE with gamma = lambda = 1 telescopes to return-to-go minus value") {
  Rng rng(5);
  auto b = random_stream(rng, 12);
  b.dones.assign(12, 0);
  b.dones[4] = 1;
  b.dones[11] = 1;
  compute_gae(b, 1.0, 1.0);
  for (std::size_t t = 0; t < 12; ++t) {
    const std::size_t end = t <= 4 ? 4 : 11;
    double g = 0.0;
    for (std::size_t k = t; k <= end; ++k) g += b.rewards[k];
    CHECK(std::abs(b.adv_r[t] - (g - b.value_r[t])) <= 1e-12);
  }
}

TEST_CASE("GAE of a zero stream is zero") {
  RolloutBuffer b;
  b.rewards.assign(8, 0.0);
  b.costs.assign(8, 0.0);
  b.value_r.assign(8, 0.0);
  b.value_c.assign(8, 0.0);
  b.dones.assign(8, 0);
  compute_gae(b, 0.99, 0.95);
  for (double a : b.adv_r) CHECK(a == 0.0);
  for (double a : b.adv_c) CHECK(a == 0.0);
}

TEST_CASE("joint log-prob equals the sum of branch log-probs over all 81 actions") {
  PolicyNet pi(6, {3, 3, 3, 3}, {32, 32}, 9);
  Rng rng(1);
  for (auto& t : pi.params().tensors())
    for (auto& v : t.tensor.values()) v += 0.5 * rng.normal();  // break the near-uniform init
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> s(6);
    for (double& x : s) x = rng.normal();
    const auto logits = pi.logits(s, 1);
    double total = 0.0;
    for (int code = 0; code < 81; ++code) {
      std::vector<int> a{code % 3, code / 3 % 3, code / 9 % 3, code / 27};
      double direct = 1.0;
      for (std::size_t b = 0; b < 4; ++b) direct *= nd::softmax(std::span(logits).subspan(3 * b, 3))[a[b]];
      const double lp = pi.log_prob(logits, a);
      CHECK(std::abs(std::exp(lp) - direct) <= 1e-12);
      total += std::exp(lp);
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);
  }
}

TEST_CASE("policy and value heads pass the finite-difference check") {
  Rng rng(2);
  PolicyNet pi(4, {3, 2}, {8, 8}, 4);
  const Tensor obs = random_tensor(rng, {5, 4});
  const std::vector<int> acts{0, 1, 2, 0, 1, 1, 2, 1, 0, 0};
  const auto cols = pi.action_columns(acts, 5);
  std::vector<Tensor> params;
  for (const auto& t : pi.params().tensors()) params.push_back(t.tensor);
  for (auto& p : params)
    for (auto& v : p.values()) v += 0.3 * rng.normal();
  auto policy_loss = [&](Tape& tape, const std::vector<Var>& p) {
    Var lp = nd::gather_sum(nd::log_softmax(pi.logits(tape, p, tape.constant(obs)), pi.branches()), cols);
    return nd::mean(nd::mul(nd::exp(lp), tape.constant(Tensor(Shape{5}, {1.0, -0.5, 0.3, 2.0, -1.0}))));
  };
  CHECK(max_gradient_error(policy_loss, params) <= 1e-5);

  ValueNet v(4, {8}, 6);
  std::vector<Tensor> vparams;
  for (const auto& t : v.params().tensors()) vparams.push_back(t.tensor);
  const Tensor target = random_tensor(rng, {5});
  auto value_loss = [&](Tape& tape, const std::vector<Var>& p) {
    return nd::mse(v.predict(tape, p, tape.constant(obs)), tape.constant(target));
  };
  CHECK(max_gradient_error(value_loss, vparams) <= 1e-5);
}

TEST_CASE("rollouts are on-policy and exactly T steps long") {
  ToyEnv env;
  SafeAgent agent(env.obs_dim(), env.action_branches(), small_config(), 11);
  RolloutCollector col(env, 4, 0.99);
  const auto b = col.collect(agent.policy, agent.value_r, agent.value_c, 123);
  CHECK(b.size() == 123);
  CHECK(b.obs.size() == 123 * 3);
  CHECK(b.actions.size() == 123 * 2);
  const auto logits = agent.policy.logits(b.obs, b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto lp = agent.policy.log_prob(std::span(logits).subspan(i * 6, 6), std::span(b.actions).subspan(i * 2, 2));
    CHECK(std::abs(lp - b.logp[i]) <= 1e-12);
  }
  CHECK(b.episodes.size() == 24);  // horizon 5, 123 steps
  CHECK(col.episodes_started() == 25);
  // collection continues the open episode
  const auto b2 = col.collect(agent.policy, agent.value_r, agent.value_c, 2);
  CHECK(b2.episodes.size() == 1);
  CHECK(b2.episodes[0].length == 5);
}

TEST_CASE("river task rollouts stay within the return bound") {
  auto world = std::make_shared<const world::World>(world::generate_world(world::Level::Easy, 0));
  vision::VaeConfig vc;
  vc.latent_dim = 4;
  auto vae = std::make_shared<const vision::Vae>(vc);
  RiverTask task(world, vae);
  CHECK(task.obs_dim() == 4);
  AlgoConfig cfg = small_config();
  SafeAgent agent(task.obs_dim(), task.action_branches(), cfg, 1);
  RolloutCollector col(task, 7, cfg.gamma);
  const auto b = col.collect(agent.policy, agent.value_r, agent.value_c, 400);
  CHECK(b.size() == 400);
  CHECK(!b.episodes.empty());
  for (const auto& e : b.episodes) {
    CHECK(e.ret >= 0.0);
    CHECK(e.ret <= 10.0 + 1e-9);
    CHECK(e.cost == doctest::Approx(env::outcome_cost(e.outcome)));
  }
  vision::VaeConfig wrong = vc;
  wrong.resolution = 16;
  CHECK_THROWS_AS(RiverTask(world, std::make_shared<const vision::Vae>(wrong)), std::invalid_argument);
}

TEST_CASE("lagrange update examples and monotone response") {
  LagrangeState s{0.5, 0.05, 0.2, 10.0};
  lagrange_update(s, 0.8);
  CHECK(s.lambda == doctest::Approx(0.53).epsilon(1e-12));
  const double before = s.lambda;
  lagrange_update(s, 0.2);
  CHECK(s.lambda == before);
  LagrangeState z{0.01, 0.05, 0.2, 10.0};
  lagrange_update(z, 0.0);
  CHECK(z.lambda == 0.0);

  Rng rng(8);
  LagrangeState m{0.0, 0.05, 0.2, 10.0};
  for (int i = 0; i < 2000; ++i) {
    const double j = rng.uniform(0.0, 1.0);
    const double prev = m.lambda;
    lagrange_update(m, j);
    CHECK(m.lambda >= 0.0);
    CHECK(m.lambda <= 10.0);
    if (j > 0.2 && prev < 10.0) CHECK(m.lambda > prev);
    if (j < 0.2) CHECK(m.lambda <= prev);
  }
}

TEST_CASE("zero advantages leave the policy unchanged") {
  ToyEnv env;
  for (Algorithm algo : {Algorithm::PPO, Algorithm::FOCOPS}) {
    CAPTURE(to_string(algo));
    SafeAgent agent(env.obs_dim(), env.action_branches(), small_config(), 2);
    auto b = toy_buffer(agent, env, 200, 3);
    compute_gae(b, 0.99, 0.95);
    b.adv_r.assign(b.size(), 0.0);
    b.adv_c.assign(b.size(), 0.0);
    b.episodes.clear();  // J^C = 0 keeps nu at zero
    const PolicyNet before = agent.policy;
    const auto vr_before = agent.value_r.params();
    const auto stats = update(algo, agent, b);
    CHECK(stats.policy_steps > 0);
    CHECK(!(agent.value_r.params() == vr_before));  // value heads still trained
    if (algo == Algorithm::PPO) {
      CHECK(agent.policy == before);
    } else {
      // Pure KL anchoring: the gradient at pi_k is roundoff, which Adam
      // rescales, so parameters jitter while the distribution stays put.
      CHECK(stats.nu == 0.0);
      CHECK(buffer_kl(agent.policy, b) <= 1e-6);
    }
  }
}

TEST_CASE("PPOLag with lambda 0 and P3O with an inactive hinge reproduce PPO") {
  ToyEnv env(5, 0.0);  // cost-free, so J^C = 0 < d
  auto run = [&](Algorithm algo) {
    SafeAgent agent(env.obs_dim(), env.action_branches(), small_config(), 21);
    auto b = toy_buffer(agent, env, 200, 5);
    const auto stats = update(algo, agent, b);
    return std::pair{agent.policy, stats};
  };
  const auto [ppo, s0] = run(Algorithm::PPO);
  const auto [lag, s1] = run(Algorithm::PPOLag);
  const auto [p3o, s2] = run(Algorithm::P3O);
  CHECK(s1.lambda == 0.0);
  CHECK(!s2.hinge_active);
  CHECK(ppo == lag);
  CHECK(ppo == p3o);
  CHECK(s0.policy_steps > 0);
}

TEST_CASE("large lambda turns the PPOLag direction toward cost descent") {
  // combined advantage with A^C > 0 everywhere
  const std::vector<double> ar{1.0, -1.0, 0.5, -0.5};
  const auto n = normalized(ar);
  const double lambda = 1e3;
  for (double a : n) CHECK((a - lambda * 1.0) / (1.0 + lambda) < 0.0);
}

TEST_CASE("P3O hinge activates on an infeasible buffer") {
  ToyEnv env(5, 1.0);
  SafeAgent agent(env.obs_dim(), env.action_branches(), small_config(), 4);
  auto b = toy_buffer(agent, env, 200, 6);
  REQUIRE(b.cost_estimate() > agent.config.cost_limit);
  const auto stats = p3o_update(agent, b);
  CHECK(stats.hinge_active);
}

TEST_CASE("FOCOPS keeps nu clipped and the trust region") {
  ToyEnv env(5, 1.0);
  AlgoConfig cfg = small_config();
  cfg.nu_lr = 1.0;
  SafeAgent agent(env.obs_dim(), env.action_branches(), cfg, 6);
  RolloutCollector col(env, 9, cfg.gamma);
  for (int it = 0; it < 6; ++it) {
    auto b = col.collect(agent.policy, agent.value_r, agent.value_c, cfg.rollout_steps);
    const auto stats = focops_update(agent, b);
    CHECK(agent.nu >= 0.0);
    CHECK(agent.nu <= cfg.nu_max);
    CHECK(stats.mean_kl <= 2.0 * cfg.target_kl);
  }
  CHECK(agent.nu == cfg.nu_max);  // cost 1 per episode step keeps J^C far above d
}

TEST_CASE("OnCRPO switches objectives at d + eta inclusive") {
  ToyEnv env;
  auto branch_for = [&](double jc) {
    SafeAgent agent(env.obs_dim(), env.action_branches(), small_config(), 1);
    auto b = toy_buffer(agent, env, 60, 2);
    b.episodes.assign(1, EpisodeRecord{});
    b.episodes[0].discounted_cost = jc;
    return oncrpo_update(agent, b).cost_branch;
  };
  CHECK(!branch_for(0.0));
  CHECK(branch_for(0.5));
  CHECK(!branch_for(0.1 + 0.05 * 0.1));
  CHECK(branch_for(0.1 + 0.05 * 0.1 + 1e-9));
}

TEST_CASE("PPO on the toy task learns the rewarded branch") {
  ToyEnv env(5, 0.0);
  AlgoConfig cfg = small_config();
  cfg.policy_lr = 3e-3;
  SafeAgent agent(env.obs_dim(), env.action_branches(), cfg, 12);
  RolloutCollector col(env, 13, cfg.gamma);
  double first = 0.0, last = 0.0;
  for (int it = 0; it < 15; ++it) {
    auto b = col.collect(agent.policy, agent.value_r, agent.value_c, cfg.rollout_steps);
    const double mean_reward = std::accumulate(b.rewards.begin(), b.rewards.end(), 0.0) / b.size();
    if (it == 0) first = mean_reward;
    last = mean_reward;
    const auto stats = ppo_update(agent, b);
    CHECK(stats.mean_kl >= 0.0);
    CHECK(stats.clip_frac >= 0.0);
    CHECK(stats.clip_frac <= 1.0);
  }
  CHECK(last > first + 0.2);
}

TEST_CASE("algorithm names round trip") {
  for (Algorithm a : {Algorithm::PPO, Algorithm::PPOLag, Algorithm::FOCOPS, Algorithm::P3O, Algorithm::OnCRPO})
    CHECK(parse_algorithm(to_string(a)) == a);
  CHECK(!parse_algorithm("sac"));
}
