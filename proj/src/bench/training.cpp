#include "sre/bench/training.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

#include "sre/nd/checkpoint.hpp"
#include "sre/rl/river_task.hpp"
#include "sre/version.hpp"
#include "sre/vision/dataset.hpp"

namespace sre::bench {

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double parse_double(std::string_view s) {
  if (s == "nan") return std::nan("");
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw std::invalid_argument("not a number: " + std::string(s));
  return v;
}

std::uint64_t parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
    throw std::invalid_argument("not a nonnegative integer: " + std::string(s));
  return v;
}

std::vector<std::uint64_t> parse_list(std::string_view s) {
  std::vector<std::uint64_t> out;
  while (!s.empty()) {
    const auto comma = s.find(',');
    auto item = s.substr(0, comma);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    out.push_back(parse_u64(item));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

nd::NamedTensor vector_tensor(std::string name, const std::vector<double>& values) {
  return {std::move(name), nd::Tensor(nd::Shape{values.size()}, values)};
}

void append_prefixed(std::vector<nd::NamedTensor>& out, const std::string& prefix, const nd::ParameterSet& p) {
  for (const auto& t : p.tensors()) out.push_back({prefix + t.name, t.tensor});
}

std::vector<nd::NamedTensor> take_prefixed(const std::vector<nd::NamedTensor>& all, const std::string& prefix) {
  std::vector<nd::NamedTensor> out;
  for (const auto& t : all)
    if (t.name.rfind(prefix, 0) == 0) out.push_back({t.name.substr(prefix.size()), t.tensor});
  return out;
}

}  // namespace

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows) {
  out << kMetricsHeader << '\n';
  for (const auto& r : rows)
    out << r.step << ',' << fmt(r.ep_ret_ma50) << ',' << fmt(r.cost_rate_total) << ',' << fmt(r.cost_rate_tight) << ','
        << fmt(r.cost_rate_loose) << ',' << fmt(r.lambda) << ',' << fmt(r.mean_kl) << ',' << fmt(r.clip_frac) << '\n';
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRow> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_metrics_csv(out, rows);
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw std::runtime_error("bad metrics header in " + path.string());
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rest = line;
    for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos; rest.remove_prefix(pos + 1))
      f.push_back(rest.substr(0, pos));
    f.push_back(rest);
    if (f.size() != 8) throw std::runtime_error("bad metrics row in " + path.string());
    rows.push_back({parse_u64(f[0]), parse_double(f[1]), parse_double(f[2]), parse_double(f[3]), parse_double(f[4]),
                    parse_double(f[5]), parse_double(f[6]), parse_double(f[7])});
  }
  return rows;
}

TrainLog train_agent(rl::Environment& env, rl::Algorithm algo, rl::SafeAgent& agent, std::uint64_t seed,
                     std::uint64_t total_steps, const UpdateHook& hook) {
  if (total_steps == 0) throw std::invalid_argument("total_steps must be positive");
  rl::RolloutCollector collector(env, seed, agent.config.gamma);
  MovingAverage ma(50);
  TrainLog log;
  std::uint64_t step = 0;
  while (step < total_steps) {
    const auto n = std::min<std::uint64_t>(agent.config.rollout_steps, total_steps - step);
    auto buf = collector.collect(agent.policy, agent.value_r, agent.value_c, n);
    step += n;
    for (const auto& e : buf.episodes) {
      log.episodes.push_back(e);
      ma.push(e.ret);
      if (env::is_violation(e.outcome)) log.resets.push_back({e.end_step, e.outcome});
    }
    const auto stats = rl::update(algo, agent, buf);
    const auto rates = cost_rate(log.resets, step);
    double dual = 0.0;
    if (algo == rl::Algorithm::PPOLag) dual = stats.lambda;
    if (algo == rl::Algorithm::FOCOPS) dual = stats.nu;
    log.rows.push_back({step, ma.mean(), rates.total, rates.tight, rates.loose, dual, stats.mean_kl, stats.clip_frac});
    log.updates.push_back(stats);
    if (hook) hook(step, buf, stats, agent);
  }
  return log;
}

void save_agent(const std::filesystem::path& path, const rl::SafeAgent& agent) {
  const auto& c = agent.config;
  std::vector<double> meta{static_cast<double>(agent.policy.obs_dim()),
                           static_cast<double>(agent.policy.branches().size())};
  for (auto b : agent.policy.branches()) meta.push_back(static_cast<double>(b));
  meta.push_back(static_cast<double>(c.policy_hidden.size()));
  for (auto h : c.policy_hidden) meta.push_back(static_cast<double>(h));
  meta.push_back(static_cast<double>(c.value_hidden.size()));
  for (auto h : c.value_hidden) meta.push_back(static_cast<double>(h));
  std::vector<nd::NamedTensor> all{vector_tensor("agent.meta", meta),
                                   vector_tensor("agent.duals", {agent.lagrange.lambda, agent.nu})};
  append_prefixed(all, "pi/", agent.policy.params());
  append_prefixed(all, "vr/", agent.value_r.params());
  append_prefixed(all, "vc/", agent.value_c.params());
  nd::save_checkpoint(path, all);
}

rl::SafeAgent load_agent(const std::filesystem::path& path, rl::AlgoConfig config) {
  const auto all = nd::load_checkpoint(path);
  if (all.size() < 2 || all[0].name != "agent.meta" || all[1].name != "agent.duals")
    throw std::runtime_error(path.string() + " is not an agent checkpoint");
  const auto meta = all[0].tensor.values();
  std::size_t i = 0;
  auto next = [&]() -> std::size_t {
    if (i >= meta.size()) throw std::runtime_error("truncated agent metadata");
    return static_cast<std::size_t>(meta[i++]);
  };
  const std::size_t obs = next();
  std::vector<std::size_t> branches(next());
  for (auto& b : branches) b = next();
  config.policy_hidden.assign(next(), 0);
  for (auto& h : config.policy_hidden) h = next();
  config.value_hidden.assign(next(), 0);
  for (auto& h : config.value_hidden) h = next();
  rl::SafeAgent agent(obs, branches, config, 0);
  agent.policy.params().assign(take_prefixed(all, "pi/"));
  agent.value_r.params().assign(take_prefixed(all, "vr/"));
  agent.value_c.params().assign(take_prefixed(all, "vc/"));
  agent.lagrange.lambda = all[1].tensor[0];
  agent.nu = all[1].tensor[1];
  return agent;
}

std::map<std::string, std::string> config_entries(const RunConfig& c) {
  const auto& a = c.algo;
  return {
      {"algo", std::string(rl::to_string(c.algorithm))},
      {"level", std::string(world::to_string(c.level))},
      {"seeds", join(c.seeds)},
      {"steps", std::to_string(c.total_steps)},
      {"episodes", std::to_string(c.eval_episodes)},
      {"checkpoint_interval", std::to_string(c.checkpoint_interval)},
      {"out", c.out_dir.string()},
      {"encoder", c.encoder.string()},
      {"encoder_frames", std::to_string(c.encoder_frames)},
      {"encoder_world_seed", std::to_string(c.encoder_world_seed)},
      {"latent_dim", std::to_string(c.vae.latent_dim)},
      {"channels", std::string(world::to_string(c.vae.channels))},
      {"resolution", std::to_string(c.vae.resolution)},
      {"vae_epochs", std::to_string(c.vae.epochs)},
      {"vae_seed", std::to_string(c.vae.seed)},
      {"gamma", fmt(a.gamma)},
      {"gae_lambda", fmt(a.gae_lambda)},
      {"rollout_steps", std::to_string(a.rollout_steps)},
      {"update_epochs", std::to_string(a.epochs)},
      {"minibatch", std::to_string(a.minibatch)},
      {"policy_lr", fmt(a.policy_lr)},
      {"value_lr", fmt(a.value_lr)},
      {"clip", fmt(a.clip)},
      {"target_kl", fmt(a.target_kl)},
      {"max_grad_norm", fmt(a.max_grad_norm)},
      {"cost_limit", fmt(a.cost_limit)},
      {"policy_hidden", join(a.policy_hidden)},
      {"value_hidden", join(a.value_hidden)},
      {"lambda_lr", fmt(a.lambda_lr)},
      {"lambda_init", fmt(a.lambda_init)},
      {"lambda_max", fmt(a.lambda_max)},
      {"focops_temperature", fmt(a.focops_temperature)},
      {"nu_lr", fmt(a.nu_lr)},
      {"nu_max", fmt(a.nu_max)},
      {"kappa", fmt(a.kappa)},
      {"crpo_tolerance_ratio", fmt(a.crpo_tolerance_ratio)},
  };
}

void apply_config_entry(RunConfig& c, const std::string& key, const std::string& value) {
  auto& a = c.algo;
  auto positive = [&](std::uint64_t v) {
    if (v == 0) throw std::invalid_argument(key + " must be positive");
    return v;
  };
  if (key == "algo") {
    const auto algo = rl::parse_algorithm(value);
    if (!algo) throw std::invalid_argument("unknown algorithm: " + value);
    c.algorithm = *algo;
  } else if (key == "level") {
    const auto level = world::parse_level(value);
    if (!level) throw std::invalid_argument("unknown level: " + value);
    c.level = *level;
  } else if (key == "seeds") {
    c.seeds = parse_list(value);
  } else if (key == "steps") {
    c.total_steps = positive(parse_u64(value));
  } else if (key == "episodes") {
    c.eval_episodes = positive(parse_u64(value));
  } else if (key == "checkpoint_interval") {
    c.checkpoint_interval = parse_u64(value);
  } else if (key == "out") {
    c.out_dir = value;
  } else if (key == "encoder") {
    c.encoder = value;
  } else if (key == "encoder_frames") {
    c.encoder_frames = positive(parse_u64(value));
  } else if (key == "encoder_world_seed") {
    c.encoder_world_seed = parse_u64(value);
  } else if (key == "latent_dim") {
    c.vae.latent_dim = positive(parse_u64(value));
  } else if (key == "channels") {
    const auto ch = world::parse_channels(value);
    if (!ch) throw std::invalid_argument("unknown channel config: " + value);
    c.vae.channels = *ch;
  } else if (key == "resolution") {
    const auto r = parse_u64(value);
    if (r != 32 && r != 64 && r != 128) throw std::invalid_argument("resolution must be 32, 64 or 128");
    c.vae.resolution = c.env.resolution = r;
  } else if (key == "vae_epochs") {
    c.vae.epochs = positive(parse_u64(value));
  } else if (key == "vae_seed") {
    c.vae.seed = parse_u64(value);
  } else if (key == "gamma") {
    a.gamma = parse_double(value);
  } else if (key == "gae_lambda") {
    a.gae_lambda = parse_double(value);
  } else if (key == "rollout_steps") {
    a.rollout_steps = positive(parse_u64(value));
  } else if (key == "update_epochs") {
    a.epochs = positive(parse_u64(value));
  } else if (key == "minibatch") {
    a.minibatch = positive(parse_u64(value));
  } else if (key == "policy_lr") {
    a.policy_lr = parse_double(value);
  } else if (key == "value_lr") {
    a.value_lr = parse_double(value);
  } else if (key == "clip") {
    a.clip = parse_double(value);
  } else if (key == "target_kl") {
    a.target_kl = parse_double(value);
  } else if (key == "max_grad_norm") {
    a.max_grad_norm = parse_double(value);
  } else if (key == "cost_limit") {
    a.cost_limit = parse_double(value);
  } else if (key == "policy_hidden" || key == "value_hidden") {
    std::vector<std::size_t> h;
    for (auto v : parse_list(value)) h.push_back(static_cast<std::size_t>(positive(v)));
    (key == "policy_hidden" ? a.policy_hidden : a.value_hidden) = h;
  } else if (key == "lambda_lr") {
    a.lambda_lr = parse_double(value);
  } else if (key == "lambda_init") {
    a.lambda_init = parse_double(value);
  } else if (key == "lambda_max") {
    a.lambda_max = parse_double(value);
  } else if (key == "focops_temperature") {
    a.focops_temperature = parse_double(value);
  } else if (key == "nu_lr") {
    a.nu_lr = parse_double(value);
  } else if (key == "nu_max") {
    a.nu_max = parse_double(value);
  } else if (key == "kappa") {
    a.kappa = parse_double(value);
  } else if (key == "crpo_tolerance_ratio") {
    a.crpo_tolerance_ratio = parse_double(value);
  } else {
    throw std::invalid_argument("unknown config key: " + key);
  }
  if (!(a.gamma > 0.0 && a.gamma <= 1.0)) throw std::invalid_argument("gamma must be in (0, 1]");
  if (a.target_kl <= 0.0) throw std::invalid_argument("target_kl must be positive");
  if (a.cost_limit < 0.0) throw std::invalid_argument("cost_limit must be nonnegative");
  if (a.focops_temperature <= 0.0) throw std::invalid_argument("focops_temperature must be positive");
}

std::filesystem::path encoder_path(const RunConfig& c) {
  if (!c.encoder.empty()) return c.encoder;
  std::ostringstream name;
  name << "encoder_" << world::to_string(c.level) << '_' << world::to_string(c.vae.channels) << "_d" << c.vae.latent_dim
       << "_r" << c.vae.resolution << "_n" << c.encoder_frames << "_e" << c.vae.epochs << "_w" << c.encoder_world_seed
       << "_s" << c.vae.seed << ".ndm";
  return c.out_dir / name.str();
}

std::shared_ptr<const vision::Vae> resolve_encoder(const RunConfig& c) {
  const auto path = encoder_path(c);
  if (!c.encoder.empty() && !std::filesystem::exists(path))
    throw std::runtime_error("encoder not found: " + path.string());
  std::shared_ptr<const vision::Vae> vae;
  if (std::filesystem::exists(path)) {
    vae = std::make_shared<const vision::Vae>(vision::Vae::load(path));
  } else {
    // deterministic in its settings, so the cached file can be reused
    const auto w = world::generate_world(c.level, c.encoder_world_seed);
    const auto ds = vision::collect_frames(w, c.encoder_frames, c.vae.seed, c.vae.resolution, c.env);
    auto trained = vision::train_vae(vision::dataset_inputs(ds, c.vae.channels), ds.size(), c.vae);
    std::filesystem::create_directories(path.parent_path());
    trained.vae.save(path);
    vae = std::make_shared<const vision::Vae>(std::move(trained.vae));
  }
  if (vae->config().resolution != c.env.resolution)
    throw std::invalid_argument("encoder resolution does not match the camera resolution");
  return vae;
}

namespace {

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

}  // namespace

std::vector<SeedRun> run_training(const RunConfig& config) {
  if (config.seeds.empty()) throw std::invalid_argument("no seeds");
  if (config.vae.resolution != config.env.resolution)
    throw std::invalid_argument("encoder and camera resolutions differ");
  std::filesystem::create_directories(config.out_dir);
  const std::string started = timestamp();
  auto encoder = resolve_encoder(config);

  std::vector<SeedRun> runs;
  for (auto seed : config.seeds) {
    SeedRun run;
    run.seed = seed;
    const auto dir = config.out_dir / ("seed_" + std::to_string(seed));
    std::filesystem::create_directories(dir);
    auto world = std::make_shared<const world::World>(world::generate_world(config.level, seed));
    rl::RiverTask task(world, encoder, config.env);
    rl::SafeAgent agent(task.obs_dim(), task.action_branches(), config.algo, seed);
    std::uint64_t next_ckpt = config.checkpoint_interval;
    run.log = train_agent(task, config.algorithm, agent, seed, config.total_steps,
                          [&](std::uint64_t step, const rl::RolloutBuffer&, const rl::UpdateStats&, const rl::SafeAgent& a) {
                            if (config.checkpoint_interval == 0 || step < next_ckpt || step >= config.total_steps) return;
                            const auto p = dir / ("ckpt_" + std::to_string(step) + ".ndm");
                            save_agent(p, a);
                            run.checkpoints.push_back(p);
                            while (next_ckpt <= step) next_ckpt += config.checkpoint_interval;
                          });
    run.final_checkpoint = dir / "final.ndm";
    save_agent(run.final_checkpoint, agent);
    run.checkpoints.push_back(run.final_checkpoint);
    run.metrics_csv = dir / "metrics.csv";
    write_metrics_csv(run.metrics_csv, run.log.rows);
    runs.push_back(std::move(run));
  }

  nlohmann::json manifest;
  manifest["version"] = kVersion;
  manifest["config"] = config_entries(config);
  manifest["seeds"] = config.seeds;
  manifest["encoder_path"] = encoder_path(config).string();
  manifest["started"] = started;
  manifest["finished"] = timestamp();
  for (const auto& r : runs) {
    nlohmann::json j;
    j["seed"] = r.seed;
    j["metrics"] = r.metrics_csv.string();
    j["final_checkpoint"] = r.final_checkpoint.string();
    for (const auto& p : r.checkpoints) j["checkpoints"].push_back(p.string());
    j["episodes"] = r.log.episodes.size();
    manifest["runs"].push_back(j);
  }
  std::ofstream(config.out_dir / "manifest.json") << manifest.dump(2) << '\n';
  return runs;
}

EvalResult evaluate(const rl::PolicyNet& policy, std::shared_ptr<const vision::Vae> encoder, world::Level level,
                    std::size_t episodes, std::span<const std::uint64_t> seeds, const env::EnvConfig& env_config) {
  EvalResult res;
  for (auto seed : seeds) {
    auto world = std::make_shared<const world::World>(world::generate_world(level, seed));
    rl::RiverTask task(world, encoder, env_config);
    for (std::size_t k = 0; k < episodes; ++k) {
      EpisodeResult ep;
      ep.world_seed = seed;
      ep.reset_seed = mix_seed(seed, 0xE7A1 + k);
      auto obs = task.reset(ep.reset_seed);
      for (;;) {
        const auto action = policy.greedy(policy.logits(obs, 1));
        auto tr = task.step(action);
        ep.ret += tr.reward;
        ep.cost += tr.cost;
        ++ep.length;
        if (tr.done) {
          ep.outcome = tr.outcome;
          break;
        }
        obs = std::move(tr.obs);
      }
      res.episodes.push_back(ep);
    }
  }
  return merge_eval(std::span(&res, 1));
}

EvalResult merge_eval(std::span<const EvalResult> parts) {
  EvalResult res;
  for (const auto& p : parts) res.episodes.insert(res.episodes.end(), p.episodes.begin(), p.episodes.end());
  std::vector<double> rets, costs;
  std::vector<env::Outcome> outcomes;
  for (const auto& e : res.episodes) {
    rets.push_back(e.ret);
    costs.push_back(e.cost);
    outcomes.push_back(e.outcome);
  }
  res.ret = mean_std(rets);
  res.cost = mean_std(costs);
  res.histogram = failure_histogram(outcomes);
  return res;
}

std::string format_mean_std(const MeanStd& v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << v.mean << " ± " << v.std;
  return s.str();
}

std::string eval_json(const EvalResult& r, int indent) {
  nlohmann::json j;
  j["return"] = {{"mean", r.ret.mean}, {"std", r.ret.std}};
  j["cost"] = {{"mean", r.cost.mean}, {"std", r.cost.std}};
  j["summary"] = {{"return", format_mean_std(r.ret)}, {"cost", format_mean_std(r.cost)}};
  nlohmann::json hist = nlohmann::json::object();
  for (auto o : env::kAllOutcomes)
    if (o != env::Outcome::Running) hist[std::string(env::to_string(o))] = r.histogram[o];
  j["histogram"] = hist;
  j["episodes"] = nlohmann::json::array();
  for (const auto& e : r.episodes)
    j["episodes"].push_back({{"world_seed", e.world_seed},
                             {"reset_seed", e.reset_seed},
                             {"return", e.ret},
                             {"cost", e.cost},
                             {"length", e.length},
                             {"outcome", std::string(env::to_string(e.outcome))}});
  return j.dump(indent);
}

}  // namespace sre::bench
