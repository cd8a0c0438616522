#include "sre/env/river_env.hpp"

#include <cmath>
#include <json.hpp>
#include <stdexcept>

#include "sre/nd/rng.hpp"

namespace sre::env {

using world::Containment;
using world::Vec3;

bool MultiDiscreteAction::valid() const {
  for (int b : branch)
    if (b < 0 || b >= kChoices) return false;
  return true;
}

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::Running: return "Running";
    case Outcome::Success: return "Success";
    case Outcome::Collision: return "Collision";
    case Outcome::OutOfVolumeHorizontally: return "OutOfVolumeHorizontally";
    case Outcome::OutOfVolumeVertically: return "OutOfVolumeVertically";
    case Outcome::YawOverDeviation: return "YawOverDeviation";
    case Outcome::Idle: return "Idle";
    case Outcome::MaxStepReached: return "MaxStepReached";
  }
  return "Unknown";
}

std::optional<Outcome> parse_outcome(std::string_view text) {
  for (Outcome o : kAllOutcomes)
    if (to_string(o) == text) return o;
  return std::nullopt;
}

bool is_tight(Outcome o) {
  return o == Outcome::Collision || o == Outcome::OutOfVolumeHorizontally || o == Outcome::OutOfVolumeVertically;
}

bool is_loose(Outcome o) {
  return o == Outcome::YawOverDeviation || o == Outcome::Idle || o == Outcome::MaxStepReached;
}

bool is_violation(Outcome o) { return is_tight(o) || is_loose(o); }

double outcome_cost(Outcome o) {
  if (is_tight(o)) return 1.0;
  if (is_loose(o)) return 0.2;
  return 0.0;
}

Pose apply_action(const Pose& pose, const MultiDiscreteAction& action, const EnvConfig& config) {
  if (!action.valid()) throw std::invalid_argument("action branches must be in {0, 1, 2}");
  const double dz = (action.branch[0] - 1) * config.vertical_step;
  const double dyaw = (action.branch[1] - 1) * world::deg2rad(config.yaw_step_deg);
  const double fwd = (action.branch[2] - 1) * config.longitudinal_step;
  const double left = (action.branch[3] - 1) * config.lateral_step;
  const double c = std::cos(pose.yaw), s = std::sin(pose.yaw);
  Pose next = pose;
  next.x += fwd * c - left * s;
  next.y += fwd * s + left * c;
  next.z += dz;
  next.yaw = world::wrap_angle(pose.yaw + dyaw);
  return next;
}

double compute_reward(std::vector<bool>& visited, std::span<const std::size_t> covered) {
  std::size_t fresh = 0;
  for (std::size_t k : covered) {
    if (k >= visited.size()) throw std::out_of_range("segment index out of range");
    if (!visited[k]) {
      visited[k] = true;
      ++fresh;
    }
  }
  return 10.0 * static_cast<double>(fresh) / static_cast<double>(visited.size());
}

namespace {

double heading_error(const World& w, const Pose& pose, double arc) {
  const auto t = world::sample_spline(w, arc).tangent;
  return world::wrap_angle(pose.yaw - std::atan2(t.y, t.x));
}

}  // namespace

bool is_safe_pose(const World& w, const Pose& pose, const EnvConfig& config) {
  const auto q = world::nearest_segment(w, pose.position());
  if (world::inside_volume(w, pose, q) != Containment::Inside) return false;
  if (world::check_collision(w, pose)) return false;
  return std::abs(heading_error(w, pose, q.arc)) < world::deg2rad(config.yaw_limit_deg);
}

Pose sample_safe_pose(const World& w, std::uint64_t seed, const EnvConfig& config) {
  Rng rng(mix_seed(seed, 0x5EEDF00DULL));
  const double L = w.spline().arc_length();
  for (;;) {
    const double arc = rng.uniform(0.0, L);
    const auto [c, t] = world::sample_spline(w, arc);
    const double half = config.reset_lateral_fraction * w.width_at(arc);
    const double off = rng.uniform(-half, half);
    Pose p;
    p.x = c.x - t.y * off;
    p.y = c.y + t.x * off;
    p.z = rng.uniform(config.reset_altitude_lo, config.reset_altitude_hi);
    const double jitter = world::deg2rad(config.reset_yaw_deg);
    p.yaw = world::wrap_angle(std::atan2(t.y, t.x) + rng.uniform(-jitter, jitter));
    if (is_safe_pose(w, p, config)) return p;
  }
}

RiverEnv::RiverEnv(std::shared_ptr<const World> world, EnvConfig config)
    : world_(std::move(world)), config_(config) {
  if (!world_) throw std::invalid_argument("environment needs a world");
  if (config_.render && !world::valid_resolution(config_.resolution))
    throw std::invalid_argument("resolution must be 32, 64 or 128");
  visited_.assign(world_->spline().segment_count(), false);
}

Frame RiverEnv::reset(std::uint64_t seed) { return reset_to(sample_safe_pose(*world_, seed, config_)); }

Frame RiverEnv::reset_to(const Pose& pose) {
  pose_ = pose;
  pose_.yaw = world::wrap_angle(pose_.yaw);
  std::fill(visited_.begin(), visited_.end(), false);
  visited_count_ = 0;
  step_count_ = 0;
  idle_counter_ = 0;
  yaw_counter_ = 0;
  done_ = false;
  started_ = true;
  return render();
}

double RiverEnv::yaw_deviation(const Pose& pose) const {
  return heading_error(*world_, pose, world::nearest_segment(*world_, pose.position()).arc);
}

Frame RiverEnv::render() const {
  if (!config_.render) return {};
  return world::render_frame(*world_, pose_, config_.resolution, config_.camera);
}

StepResult RiverEnv::step(const MultiDiscreteAction& action) {
  if (!started_) throw std::logic_error("reset the environment before stepping");
  if (done_) throw std::logic_error("episode is done; reset before stepping");
  const World& w = *world_;
  pose_ = apply_action(pose_, action, config_);
  ++step_count_;

  const auto q = world::nearest_segment(w, pose_.position());
  const auto covered = world::covered_segments(w, pose_.position(), config_.visit_radius);
  std::size_t fresh = 0;
  for (std::size_t k : covered) fresh += visited_[k] ? 0 : 1;

  idle_counter_ = fresh > 0 ? 0 : idle_counter_ + 1;
  const bool yaw_off = std::abs(heading_error(w, pose_, q.arc)) > world::deg2rad(config_.yaw_limit_deg);
  yaw_counter_ = yaw_off ? yaw_counter_ + 1 : 0;

  Outcome outcome = Outcome::Running;
  const Containment where = world::inside_volume(w, pose_, q);
  if (world::check_collision(w, pose_))
    outcome = Outcome::Collision;
  else if (where == Containment::OutVertical)
    outcome = Outcome::OutOfVolumeVertically;
  else if (where == Containment::OutHorizontal)
    outcome = Outcome::OutOfVolumeHorizontally;
  else if (yaw_counter_ >= config_.yaw_patience)
    outcome = Outcome::YawOverDeviation;
  else if (idle_counter_ >= config_.idle_patience)
    outcome = Outcome::Idle;
  else if (step_count_ >= config_.max_steps)
    outcome = Outcome::MaxStepReached;
  else if (visited_count_ + fresh == visited_.size())
    outcome = Outcome::Success;

  StepResult r;
  r.outcome = outcome;
  r.cost = outcome_cost(outcome);
  // A violating step earns nothing, so a full return always means Success.
  if (!is_violation(outcome)) {
    r.reward = compute_reward(visited_, covered);
    visited_count_ += fresh;
  }
  r.done = outcome != Outcome::Running;
  done_ = r.done;
  r.frame = render();
  return r;
}

MultiDiscreteAction centerline_pilot(const RiverEnv& env) {
  const World& w = env.world();
  const Pose& p = env.pose();
  const auto q = world::nearest_segment(w, p.position());
  const Vec3 ahead = world::sample_spline(w, q.arc + 4.0).position;
  const Vec3 here = world::sample_spline(w, q.arc).position;
  const double yaw_step = world::deg2rad(env.config().yaw_step_deg);

  MultiDiscreteAction a;
  const double err = world::wrap_angle(std::atan2(ahead.y - p.y, ahead.x - p.x) - p.yaw);
  if (err > 0.5 * yaw_step) a.branch[1] = 2;
  if (err < -0.5 * yaw_step) a.branch[1] = 0;

  const double c = std::cos(p.yaw), s = std::sin(p.yaw);
  const double left = -s * (here.x - p.x) + c * (here.y - p.y);
  if (left > 0.5) a.branch[3] = 2;
  if (left < -0.5) a.branch[3] = 0;

  // cruise below or above the bridge decks, whichever is closer
  const double cruise = p.z >= 7.25 ? 10.0 : 4.0;
  if (p.z < cruise - 0.25) a.branch[0] = 2;
  if (p.z > cruise + 0.25) a.branch[0] = 0;

  a.branch[2] = std::abs(err) < world::deg2rad(45.0) ? 2 : 1;
  // hold position while still inside a deck's height band
  const Pose probe = apply_action(p, {{1, 1, 2, 1}}, env.config());
  for (const auto& b : w.bridges())
    if (b.distance(probe.position()) <= world::kAgentRadius + 0.5) a.branch[2] = 1;
  return a;
}

void TraceWriter::write(int episode, int step, const Pose& pose, const MultiDiscreteAction& action,
                        const StepResult& result) {
  nlohmann::ordered_json j;
  j["episode"] = episode;
  j["step"] = step;
  j["pose"] = {{"x", pose.x}, {"y", pose.y}, {"z", pose.z}, {"yaw", pose.yaw}};
  j["action"] = action.branch;
  j["reward"] = result.reward;
  j["cost"] = result.cost;
  j["done"] = result.done;
  j["outcome"] = std::string(to_string(result.outcome));
  os_ << j.dump() << '\n';
}

}  // namespace sre::env
