#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sre/bench/metrics.hpp"
#include "sre/rl/algorithms.hpp"
#include "sre/vision/vae.hpp"
#include "sre/world/world.hpp"

namespace sre::bench {

struct MetricsRow {
  std::uint64_t step = 0;
  double ep_ret_ma50 = 0.0;  // NaN until an episode completes
  double cost_rate_total = 0.0, cost_rate_tight = 0.0, cost_rate_loose = 0.0;
  double lambda = 0.0;  // PPOLag lambda, FOCOPS nu, 0 otherwise
  double mean_kl = 0.0, clip_frac = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "step,ep_ret_ma50,cost_rate_total,cost_rate_tight,cost_rate_loose,lambda,mean_kl,clip_frac";
void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows);
void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRow> rows);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

struct TrainLog {
  std::vector<MetricsRow> rows;
  std::vector<ResetEvent> resets;
  std::vector<rl::EpisodeRecord> episodes;
  std::vector<rl::UpdateStats> updates;
};

/// Called after every update with the global step count.
using UpdateHook = std::function<void(std::uint64_t step, const rl::RolloutBuffer&, const rl::UpdateStats&,
                                      const rl::SafeAgent&)>;

/// Collect/update cycles until total_steps environment steps have been taken.
/// The last rollout is shortened to land exactly on total_steps.
TrainLog train_agent(rl::Environment& env, rl::Algorithm algo, rl::SafeAgent& agent, std::uint64_t seed,
                     std::uint64_t total_steps, const UpdateHook& hook = {});

/// Policy, value heads and dual variables in one NDM1 file.
void save_agent(const std::filesystem::path& path, const rl::SafeAgent& agent);
/// Restores networks and duals; optimizer state starts fresh.
rl::SafeAgent load_agent(const std::filesystem::path& path, rl::AlgoConfig config = {});

struct RunConfig {
  rl::Algorithm algorithm = rl::Algorithm::PPO;
  world::Level level = world::Level::Medium;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::uint64_t total_steps = 200000;
  std::size_t eval_episodes = 20;
  std::uint64_t checkpoint_interval = 50000;
  rl::AlgoConfig algo;
  env::EnvConfig env;
  std::filesystem::path out_dir = "runs";

  // Encoder: loaded from `encoder` when set, else trained from frames of
  // the training level (world seed encoder_world_seed) and saved in out_dir.
  std::filesystem::path encoder;
  vision::VaeConfig vae = [] {
    vision::VaeConfig v;
    v.epochs = 30;
    return v;
  }();
  std::size_t encoder_frames = 1000;
  std::uint64_t encoder_world_seed = 0;
};

/// Flat key/value view of every resolved setting (manifest, config files).
std::map<std::string, std::string> config_entries(const RunConfig& config);
/// Applies one `key = value` setting; throws std::invalid_argument on unknown
/// keys or unparsable values.
void apply_config_entry(RunConfig& config, const std::string& key, const std::string& value);

/// config.encoder when set, else the cache file of the default encoder in out_dir.
std::filesystem::path encoder_path(const RunConfig& config);
/// Encoder for a run: loads encoder_path(config), training and saving the
/// default encoder first when it is not cached yet.
std::shared_ptr<const vision::Vae> resolve_encoder(const RunConfig& config);

struct SeedRun {
  std::uint64_t seed = 0;
  std::filesystem::path metrics_csv, final_checkpoint;
  std::vector<std::filesystem::path> checkpoints;
  TrainLog log;
};

/// One metrics CSV and checkpoint series per seed plus manifest.json under out_dir.
/// World for seed s is generate_world(level, s).
std::vector<SeedRun> run_training(const RunConfig& config);

struct EpisodeResult {
  std::uint64_t world_seed = 0, reset_seed = 0;
  double ret = 0.0, cost = 0.0;
  int length = 0;
  env::Outcome outcome = env::Outcome::Running;
};

struct EvalResult {
  std::vector<EpisodeResult> episodes;
  MeanStd ret, cost;
  FailureHistogram histogram;
};

/// Greedy (argmax per branch) evaluation: `episodes` per seed on
/// generate_world(level, seed), resets mix_seed(seed, 0xE7A1 + k).
EvalResult evaluate(const rl::PolicyNet& policy, std::shared_ptr<const vision::Vae> encoder, world::Level level,
                    std::size_t episodes, std::span<const std::uint64_t> seeds, const env::EnvConfig& env_config = {});

/// Concatenates episodes and recomputes the aggregates.
EvalResult merge_eval(std::span<const EvalResult> parts);

/// "6.30 ± 4.41"
std::string format_mean_std(const MeanStd& v);
std::string eval_json(const EvalResult& result, int indent = 2);

}  // namespace sre::bench
