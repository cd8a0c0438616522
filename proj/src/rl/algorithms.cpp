#include "sre/rl/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

#include "sre/nd/ops.hpp"

namespace sre::rl {

using nd::Shape;
using nd::Tape;
using nd::Tensor;
using nd::Var;

std::string_view to_string(Algorithm algo) {
  switch (algo) {
    case Algorithm::PPO: return "ppo";
    case Algorithm::PPOLag: return "ppolag";
    case Algorithm::FOCOPS: return "focops";
    case Algorithm::P3O: return "p3o";
    case Algorithm::OnCRPO: return "oncrpo";
  }
  return "unknown";
}

std::optional<Algorithm> parse_algorithm(std::string_view text) {
  for (Algorithm a : {Algorithm::PPO, Algorithm::PPOLag, Algorithm::FOCOPS, Algorithm::P3O, Algorithm::OnCRPO})
    if (to_string(a) == text) return a;
  return std::nullopt;
}

void lagrange_update(LagrangeState& s, double cost_estimate) {
  s.lambda = std::clamp(s.lambda + s.learning_rate * (cost_estimate - s.budget), 0.0, s.lambda_max);
}

SafeAgent::SafeAgent(std::size_t obs_dim, std::vector<std::size_t> branches, AlgoConfig cfg, std::uint64_t seed)
    : policy(obs_dim, std::move(branches), cfg.policy_hidden, mix_seed(seed, 1)),
      value_r(obs_dim, cfg.value_hidden, mix_seed(seed, 2)),
      value_c(obs_dim, cfg.value_hidden, mix_seed(seed, 3)),
      policy_opt(policy.params(), {cfg.policy_lr}),
      value_r_opt(value_r.params(), {cfg.value_lr}),
      value_c_opt(value_c.params(), {cfg.value_lr}),
      lagrange{cfg.lambda_init, cfg.lambda_lr, cfg.cost_limit, cfg.lambda_max},
      config(std::move(cfg)),
      shuffle_rng(mix_seed(seed, 4)) {}

std::vector<double> normalized(const std::vector<double>& x) {
  if (x.empty()) return {};
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(x.size()));
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) / (sd + 1e-8);
  return out;
}

double buffer_kl(const PolicyNet& policy, const RolloutBuffer& buf) {
  const std::size_t T = buf.size(), L = buf.logit_count;
  if (T == 0) return 0.0;
  const auto now = policy.logits(buf.obs, T);
  double total = 0.0;
  for (std::size_t i = 0; i < T; ++i)
    total += policy.kl(std::span(buf.logits).subspan(i * L, L), std::span(now).subspan(i * L, L));
  return total / static_cast<double>(T);
}

namespace {

struct Minibatch {
  Tape& tape;
  const std::vector<std::size_t>& rows;
  Var logp_all;      // [B, L] grouped log-softmax
  Tensor old_logp_all;  // [B, L]
  Var ratio;         // [B]

  Tensor gather(const std::vector<double>& src) const {
    Tensor t(Shape{rows.size()});
    for (std::size_t i = 0; i < rows.size(); ++i) t[i] = src[rows[i]];
    return t;
  }
};

using LossFn = std::function<Var(Minibatch&, UpdateStats&)>;

Var clipped_surrogate_loss(Minibatch& mb, const std::vector<double>& adv, double clip) {
  Var a = mb.tape.constant(mb.gather(adv));
  Var s1 = nd::mul(mb.ratio, a);
  Var s2 = nd::mul(nd::clamp(mb.ratio, 1.0 - clip, 1.0 + clip), a);
  return nd::neg(nd::mean(nd::minimum(s1, s2)));
}

void ensure_advantages(const SafeAgent& agent, RolloutBuffer& buf) {
  if (buf.adv_r.size() != buf.size()) compute_gae(buf, agent.config.gamma, agent.config.gae_lambda);
}

Tensor gather_rows(const std::vector<double>& src, std::size_t width, const std::vector<std::size_t>& rows) {
  Tensor t(Shape{rows.size(), width});
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(rows[i] * width), width, t.data() + i * width);
  return t;
}

double fit_value(const ValueNet& net, nd::ParameterSet& params, nd::Adam& opt, const Tensor& obs, Tensor target,
                 double max_grad_norm) {
  Tape tape;
  const auto p = params.bind(tape);
  Var pred = net.predict(tape, p, tape.constant(obs));
  Var loss = nd::mse(pred, tape.constant(std::move(target)));
  tape.backward(loss);
  opt.step(params, tape, p, max_grad_norm);
  return loss.value().item();
}

UpdateStats run_update(SafeAgent& agent, RolloutBuffer& buf, const LossFn& policy_loss, bool hard_trust_region) {
  const AlgoConfig& cfg = agent.config;
  const std::size_t T = buf.size();
  if (T == 0) throw std::invalid_argument("empty rollout buffer");
  const std::size_t D = buf.obs_dim, L = buf.logit_count, K = buf.branch_count;
  const std::vector<std::size_t>& groups = agent.policy.branches();

  UpdateStats stats;
  stats.cost_estimate = buf.cost_estimate();
  std::vector<std::size_t> order(T);
  std::iota(order.begin(), order.end(), 0);
  bool policy_active = true;
  double clip_sum = 0.0, loss_sum = 0.0, vr_sum = 0.0, vc_sum = 0.0;
  std::size_t value_steps = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = T; i > 1; --i) std::swap(order[i - 1], order[agent.shuffle_rng.below(i)]);
    for (std::size_t start = 0; start < T; start += cfg.minibatch) {
      const std::size_t B = std::min(cfg.minibatch, T - start);
      const std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(start + B));
      const Tensor obs = gather_rows(buf.obs, D, rows);

      Tensor tr(Shape{B}), tc(Shape{B});
      for (std::size_t i = 0; i < B; ++i) tr[i] = buf.ret_r[rows[i]], tc[i] = buf.ret_c[rows[i]];
      vr_sum += fit_value(agent.value_r, agent.value_r.params(), agent.value_r_opt, obs, std::move(tr), cfg.max_grad_norm);
      vc_sum += fit_value(agent.value_c, agent.value_c.params(), agent.value_c_opt, obs, std::move(tc), cfg.max_grad_norm);
      ++value_steps;

      if (!policy_active) continue;
      std::vector<nd::NamedTensor> snapshot;
      if (hard_trust_region) snapshot = agent.policy.params().tensors();

      Tape tape;
      const auto p = agent.policy.params().bind(tape);
      Var logits = agent.policy.logits(tape, p, tape.constant(obs));
      Var logp_all = nd::log_softmax(logits, groups);
      std::vector<int> acts(B * K);
      for (std::size_t i = 0; i < B; ++i)
        std::copy_n(buf.actions.begin() + static_cast<std::ptrdiff_t>(rows[i] * K), K, acts.begin() + i * K);
      const auto cols = agent.policy.action_columns(acts, B);
      Var logp_new = nd::gather_sum(logp_all, cols);
      Tensor old_lp(Shape{B});
      Tensor old_all(Shape{B, L});
      for (std::size_t i = 0; i < B; ++i) {
        old_lp[i] = buf.logp[rows[i]];
        std::size_t off = 0;
        for (std::size_t g : groups) {
          const auto ls = nd::log_softmax(std::span(buf.logits).subspan(rows[i] * L + off, g));
          std::copy(ls.begin(), ls.end(), old_all.data() + i * L + off);
          off += g;
        }
      }
      Var ratio = nd::exp(nd::sub(logp_new, tape.constant(std::move(old_lp))));
      Minibatch mb{tape, rows, logp_all, std::move(old_all), ratio};
      Var loss = policy_loss(mb, stats);
      tape.backward(loss);
      agent.policy_opt.step(agent.policy.params(), tape, p, cfg.max_grad_norm);
      ++stats.policy_steps;
      loss_sum += loss.value().item();
      std::size_t clipped = 0;
      for (double r : ratio.value().values()) clipped += std::abs(r - 1.0) > cfg.clip ? 1 : 0;
      clip_sum += static_cast<double>(clipped) / static_cast<double>(B);

      const double kl = buffer_kl(agent.policy, buf);
      if (hard_trust_region && kl > 2.0 * cfg.target_kl) {
        agent.policy.params().assign(snapshot);
        stats.rolled_back = true;
        policy_active = false;
      } else if (kl > 1.5 * cfg.target_kl) {
        stats.early_stopped = true;
        policy_active = false;
      }
    }
  }
  stats.mean_kl = buffer_kl(agent.policy, buf);
  if (stats.policy_steps > 0) {
    stats.clip_frac = clip_sum / static_cast<double>(stats.policy_steps);
    stats.policy_loss = loss_sum / static_cast<double>(stats.policy_steps);
  }
  stats.value_loss_r = vr_sum / static_cast<double>(value_steps);
  stats.value_loss_c = vc_sum / static_cast<double>(value_steps);
  stats.lambda = agent.lagrange.lambda;
  stats.nu = agent.nu;
  return stats;
}

}  // namespace

UpdateStats ppo_update(SafeAgent& agent, RolloutBuffer& buf) {
  ensure_advantages(agent, buf);
  const auto adv = normalized(buf.adv_r);
  const double clip = agent.config.clip;
  return run_update(agent, buf, [&](Minibatch& mb, UpdateStats&) { return clipped_surrogate_loss(mb, adv, clip); },
                    false);
}

UpdateStats ppolag_update(SafeAgent& agent, RolloutBuffer& buf) {
  ensure_advantages(agent, buf);
  lagrange_update(agent.lagrange, buf.cost_estimate());
  const double lambda = agent.lagrange.lambda;
  const auto ar = normalized(buf.adv_r), ac = normalized(buf.adv_c);
  std::vector<double> adv(ar.size());
  for (std::size_t i = 0; i < adv.size(); ++i) adv[i] = (ar[i] - lambda * ac[i]) / (1.0 + lambda);
  const double clip = agent.config.clip;
  return run_update(agent, buf, [&](Minibatch& mb, UpdateStats&) { return clipped_surrogate_loss(mb, adv, clip); },
                    false);
}

UpdateStats focops_update(SafeAgent& agent, RolloutBuffer& buf) {
  ensure_advantages(agent, buf);
  const AlgoConfig& cfg = agent.config;
  agent.nu = std::clamp(agent.nu + cfg.nu_lr * (buf.cost_estimate() - cfg.cost_limit), 0.0, cfg.nu_max);
  const double nu = agent.nu;
  const auto ar = normalized(buf.adv_r), ac = normalized(buf.adv_c);
  std::vector<double> adv(ar.size());
  for (std::size_t i = 0; i < adv.size(); ++i) adv[i] = ar[i] - nu * ac[i];
  const double inv_temp = 1.0 / cfg.focops_temperature;
  const double delta = cfg.target_kl;
  return run_update(
      agent, buf,
      [&](Minibatch& mb, UpdateStats&) {
        // per-state KL(pi_theta || pi_k)
        Var kl = nd::row_sum(nd::mul(nd::exp(mb.logp_all), nd::sub(mb.logp_all, mb.tape.constant(mb.old_logp_all))));
        Tensor mask(Shape{mb.rows.size()});
        for (std::size_t i = 0; i < mb.rows.size(); ++i) mask[i] = kl.value()[i] <= delta ? 1.0 : 0.0;
        Var a = mb.tape.constant(mb.gather(adv));
        Var term = nd::sub(kl, nd::scale(nd::mul(mb.ratio, a), inv_temp));
        return nd::mean(nd::mul(term, mb.tape.constant(std::move(mask))));
      },
      true);
}

UpdateStats p3o_update(SafeAgent& agent, RolloutBuffer& buf) {
  ensure_advantages(agent, buf);
  const AlgoConfig& cfg = agent.config;
  const auto adv = normalized(buf.adv_r);
  const double slack = buf.cost_estimate() - cfg.cost_limit;
  return run_update(
      agent, buf,
      [&](Minibatch& mb, UpdateStats& stats) {
        Var reward_loss = clipped_surrogate_loss(mb, adv, cfg.clip);
        Var ac = mb.tape.constant(mb.gather(buf.adv_c));  // cost units, like the slack
        Var c1 = nd::mul(mb.ratio, ac);
        Var c2 = nd::mul(nd::clamp(mb.ratio, 1.0 - cfg.clip, 1.0 + cfg.clip), ac);
        Var cost_surrogate = nd::mean(nd::neg(nd::minimum(nd::neg(c1), nd::neg(c2))));
        Var hinge = nd::relu(nd::add_scalar(cost_surrogate, slack));
        if (hinge.value().item() > 0.0) stats.hinge_active = true;
        return nd::add(reward_loss, nd::scale(hinge, cfg.kappa));
      },
      false);
}

UpdateStats oncrpo_update(SafeAgent& agent, RolloutBuffer& buf) {
  ensure_advantages(agent, buf);
  const AlgoConfig& cfg = agent.config;
  const double eta = cfg.crpo_tolerance_ratio * cfg.cost_limit;
  const bool cost_branch = buf.cost_estimate() > cfg.cost_limit + eta;
  std::vector<double> adv;
  if (cost_branch) {
    std::vector<double> neg(buf.adv_c.size());
    for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -buf.adv_c[i];
    adv = normalized(neg);
  } else {
    adv = normalized(buf.adv_r);
  }
  auto stats = run_update(
      agent, buf, [&](Minibatch& mb, UpdateStats&) { return clipped_surrogate_loss(mb, adv, cfg.clip); }, false);
  stats.cost_branch = cost_branch;
  return stats;
}

UpdateStats update(Algorithm algo, SafeAgent& agent, RolloutBuffer& buf) {
  switch (algo) {
    case Algorithm::PPO: return ppo_update(agent, buf);
    case Algorithm::PPOLag: return ppolag_update(agent, buf);
    case Algorithm::FOCOPS: return focops_update(agent, buf);
    case Algorithm::P3O: return p3o_update(agent, buf);
    case Algorithm::OnCRPO: return oncrpo_update(agent, buf);
  }
  throw std::invalid_argument("unknown algorithm");
}

}  // namespace sre::rl
