#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

#include "sre/world/render.hpp"
#include "sre/world/world.hpp"

namespace sre::env {

using world::Frame;
using world::Pose;
using world::World;

/// Branch order: vertical, yaw, longitudinal, lateral. Each value in {0, 1, 2}
/// maps to {-1, 0, +1} times the branch step.
struct MultiDiscreteAction {
  std::array<int, 4> branch{1, 1, 1, 1};

  static constexpr std::size_t kBranches = 4;
  static constexpr int kChoices = 3;

  bool valid() const;
  friend bool operator==(const MultiDiscreteAction&, const MultiDiscreteAction&) = default;
};

enum class Outcome {
  Running,
  Success,
  Collision,
  OutOfVolumeHorizontally,
  OutOfVolumeVertically,
  YawOverDeviation,
  Idle,
  MaxStepReached,
};

inline constexpr std::array<Outcome, 8> kAllOutcomes = {
    Outcome::Running,          Outcome::Success,          Outcome::Collision,
    Outcome::OutOfVolumeHorizontally, Outcome::OutOfVolumeVertically, Outcome::YawOverDeviation,
    Outcome::Idle,             Outcome::MaxStepReached,
};

std::string_view to_string(Outcome outcome);
std::optional<Outcome> parse_outcome(std::string_view text);
bool is_tight(Outcome outcome);
bool is_loose(Outcome outcome);
bool is_violation(Outcome outcome);
/// 1.0 for tight, 0.2 for loose, 0 otherwise.
double outcome_cost(Outcome outcome);

struct EnvConfig {
  double longitudinal_step = 1.0;  // m
  double lateral_step = 1.0;       // m
  double vertical_step = 0.5;      // m
  double yaw_step_deg = 6.0;
  double visit_radius = 6.0;  // m, horizontal
  double yaw_limit_deg = 60.0;
  int yaw_patience = 20;
  int idle_patience = 100;
  int max_steps = 500;
  std::size_t resolution = 32;
  world::Camera camera;
  bool render = true;  // off: step results carry an empty frame

  // reset distribution
  double reset_altitude_lo = 3.0;
  double reset_altitude_hi = 11.0;
  double reset_yaw_deg = 30.0;
  double reset_lateral_fraction = 0.25;  // of the local width
};

Pose apply_action(const Pose& pose, const MultiDiscreteAction& action, const EnvConfig& config = {});

/// Marks covered segments as visited and returns 10 * (newly visited) / M.
double compute_reward(std::vector<bool>& visited, std::span<const std::size_t> covered);

struct StepResult {
  Frame frame;
  double reward = 0.0;
  double cost = 0.0;
  bool done = false;
  Outcome outcome = Outcome::Running;
};

/// Episode lifecycle over a shared world. Transitions are deterministic;
/// randomness only enters through reset's seed.
class RiverEnv {
 public:
  explicit RiverEnv(std::shared_ptr<const World> world, EnvConfig config = {});

  Frame reset(std::uint64_t seed);
  /// Throws std::logic_error when the episode is done or was never reset.
  StepResult step(const MultiDiscreteAction& action);

  /// Places the agent at an explicit pose with fresh bookkeeping.
  Frame reset_to(const Pose& pose);

  const World& world() const { return *world_; }
  std::shared_ptr<const World> shared_world() const { return world_; }
  const EnvConfig& config() const { return config_; }
  const Pose& pose() const { return pose_; }
  const std::vector<bool>& visited() const { return visited_; }
  std::size_t visited_count() const { return visited_count_; }
  int step_count() const { return step_count_; }
  int idle_counter() const { return idle_counter_; }
  int yaw_counter() const { return yaw_counter_; }
  bool done() const { return done_; }
  bool started() const { return started_; }

  /// Signed heading error of the pose against the local river tangent.
  double yaw_deviation(const Pose& pose) const;
  Frame render() const;

 private:
  std::shared_ptr<const World> world_;
  EnvConfig config_;
  Pose pose_;
  std::vector<bool> visited_;
  std::size_t visited_count_ = 0;
  int step_count_ = 0;
  int idle_counter_ = 0;
  int yaw_counter_ = 0;
  bool done_ = false;
  bool started_ = false;
};

/// Rejection sampler for safe starting poses. Also used for dataset collection.
Pose sample_safe_pose(const World& world, std::uint64_t seed, const EnvConfig& config = {});
bool is_safe_pose(const World& world, const Pose& pose, const EnvConfig& config = {});

/// Scripted controller that tracks the centerline at a collision-free altitude.
MultiDiscreteAction centerline_pilot(const RiverEnv& env);

/// JSON-lines episode trace, one record per step.
class TraceWriter {
 public:
  explicit TraceWriter(std::ostream& os) : os_(os) {}
  void write(int episode, int step, const Pose& pose, const MultiDiscreteAction& action, const StepResult& result);

 private:
  std::ostream& os_;
};

}  // namespace sre::env
