#include <doctest.h>

#include <cmath>
#include <json.hpp>
#include <numbers>
#include <sstream>

#include "sre/env/river_env.hpp"
#include "sre/nd/rng.hpp"

using namespace sre;
using namespace sre::env;
using world::Box;
using world::Level;

namespace {

std::shared_ptr<const World> shared(Level level, std::uint64_t seed) {
  return std::make_shared<const World>(world::generate_world(level, seed));
}

EnvConfig headless() {
  EnvConfig c;
  c.render = false;
  return c;
}

Pose on_centerline(const World& w, double arc, double z) {
  const auto s = world::sample_spline(w, arc);
  return {s.position.x, s.position.y, z, std::atan2(s.tangent.y, s.tangent.x)};
}

MultiDiscreteAction random_action(Rng& rng) {
  MultiDiscreteAction a;
  for (int& b : a.branch) b = static_cast<int>(rng.below(3));
  return a;
}

}  // namespace

TEST_CASE("apply_action") {
  const Pose start{1.0, 2.0, 5.0, 0.0};
  CHECK(apply_action(start, {{1, 1, 1, 1}}) == start);

  const Pose fwd = apply_action(start, {{1, 1, 2, 1}});
  CHECK(fwd.x == 2.0);
  CHECK(fwd.y == 2.0);
  CHECK(fwd.z == 5.0);

  const Pose turned = apply_action(apply_action(start, {{1, 2, 1, 1}}), {{1, 0, 1, 1}});
  CHECK(std::abs(turned.yaw - start.yaw) <= 1e-12);

  // lateral +1 is body-left; at yaw 90 degrees that is -x
  const Pose left = apply_action({0.0, 0.0, 5.0, std::numbers::pi / 2}, {{1, 1, 1, 2}});
  CHECK(left.x == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(std::abs(left.y) <= 1e-12);

  CHECK(apply_action(start, {{2, 1, 1, 1}}).z == 5.5);
  CHECK(apply_action(start, {{0, 1, 1, 1}}).z == 4.5);

  // yaw stays wrapped
  Pose p{0, 0, 5, std::numbers::pi - 0.01};
  p = apply_action(p, {{1, 2, 1, 1}});
  CHECK(p.yaw <= std::numbers::pi);
  CHECK(p.yaw > -std::numbers::pi);

  CHECK_THROWS_AS(apply_action(start, {{3, 1, 1, 1}}), std::invalid_argument);
}

TEST_CASE("compute_reward") {
  std::vector<bool> visited(200, false);
  const std::vector<std::size_t> five{3, 4, 5, 6, 7};
  CHECK(compute_reward(visited, five) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(compute_reward(visited, five) == 0.0);
  const std::vector<std::size_t> mixed{6, 7, 8};
  CHECK(compute_reward(visited, mixed) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(std::count(visited.begin(), visited.end(), true) == 6);
}

TEST_CASE("outcome taxonomy") {
  CHECK(outcome_cost(Outcome::Collision) == 1.0);
  CHECK(outcome_cost(Outcome::OutOfVolumeHorizontally) == 1.0);
  CHECK(outcome_cost(Outcome::OutOfVolumeVertically) == 1.0);
  CHECK(outcome_cost(Outcome::YawOverDeviation) == 0.2);
  CHECK(outcome_cost(Outcome::Idle) == 0.2);
  CHECK(outcome_cost(Outcome::MaxStepReached) == 0.2);
  CHECK(outcome_cost(Outcome::Success) == 0.0);
  CHECK(outcome_cost(Outcome::Running) == 0.0);
  for (Outcome o : kAllOutcomes) {
    CHECK(parse_outcome(to_string(o)) == o);
    const int classes = int(is_tight(o)) + int(is_loose(o)) + int(o == Outcome::Success || o == Outcome::Running);
    CHECK(classes == 1);
  }
}

TEST_CASE("reset") {
  const auto w = shared(Level::Hard, 3);
  RiverEnv env(w);
  CHECK_THROWS_AS(env.step({}), std::logic_error);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Frame f = env.reset(seed);
    CHECK(f.width == 32);
    CHECK(world::inside_volume(*w, env.pose()) == world::Containment::Inside);
    CHECK_FALSE(world::check_collision(*w, env.pose()));
    CHECK(env.visited_count() == 0);
    CHECK(env.step_count() == 0);
    CHECK(std::abs(env.yaw_deviation(env.pose())) <= world::deg2rad(30.0) + 1e-9);
  }
  RiverEnv other(w);
  env.reset(9);
  other.reset(9);
  CHECK(env.pose() == other.pose());
}

TEST_CASE("scripted pilot completes every level") {
  for (Level level : {Level::Easy, Level::Medium, Level::Hard}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      RiverEnv env(shared(level, seed), headless());
      env.reset(seed);
      double ret = 0.0;
      StepResult r;
      while (!env.done()) {
        r = env.step(centerline_pilot(env));
        ret += r.reward;
      }
      CHECK(r.outcome == Outcome::Success);
      CHECK(std::abs(ret - 10.0) <= 1e-9);
      CHECK(env.step_count() < 500);
      CHECK(r.cost == 0.0);
    }
  }
}

TEST_CASE("termination paths") {
  SUBCASE("idle") {
    RiverEnv env(shared(Level::Easy, 1), headless());
    env.reset(1);
    const StepResult first = env.step({});
    CHECK(first.reward > 0.0);  // the start area is new on step one
    StepResult r;
    while (!env.done()) r = env.step({});
    CHECK(r.outcome == Outcome::Idle);
    CHECK(r.cost == 0.2);
    CHECK(env.step_count() == 101);
    CHECK_THROWS_AS(env.step({}), std::logic_error);
  }
  SUBCASE("max steps") {
    EnvConfig c = headless();
    c.idle_patience = 10000;
    RiverEnv env(shared(Level::Easy, 1), c);
    env.reset(1);
    StepResult r;
    while (!env.done()) r = env.step({});
    CHECK(r.outcome == Outcome::MaxStepReached);
    CHECK(r.cost == 0.2);
    CHECK(env.step_count() == 500);
  }
  SUBCASE("yaw over deviation") {
    RiverEnv env(shared(Level::Easy, 2), headless());
    env.reset_to(on_centerline(env.world(), 10.0, 4.0));
    StepResult r;
    while (!env.done()) r = env.step({{1, 2, 1, 1}});
    CHECK(r.outcome == Outcome::YawOverDeviation);
    CHECK(r.cost == 0.2);
    // deviation first exceeds 60 degrees on step 11, tripping after 20 steps
    CHECK(env.step_count() == 30);
  }
  SUBCASE("out of volume vertically") {
    RiverEnv env(shared(Level::Easy, 2), headless());
    env.reset_to(on_centerline(env.world(), 10.0, 11.0));
    StepResult r;
    while (!env.done()) r = env.step({{2, 1, 1, 1}});
    CHECK(r.outcome == Outcome::OutOfVolumeVertically);
    CHECK(r.cost == 1.0);
    CHECK(r.reward == 0.0);
    CHECK(env.step_count() == 3);
  }
  SUBCASE("out of volume horizontally") {
    RiverEnv env(shared(Level::Easy, 2), headless());
    env.reset_to(on_centerline(env.world(), 10.0, 4.0));
    StepResult r;
    while (!env.done()) r = env.step({{1, 1, 1, 2}});
    CHECK(r.outcome == Outcome::OutOfVolumeHorizontally);
    CHECK(r.cost == 1.0);
  }
  SUBCASE("collision beats out of volume") {
    const auto w = shared(Level::Hard, 4);
    REQUIRE_FALSE(w->bridges().empty());
    const Box& b = w->bridges().front();
    const auto q = world::nearest_segment(*w, b.center());
    Pose p = on_centerline(*w, q.arc, 5.0);
    RiverEnv env(w, headless());
    env.reset_to(p);
    const StepResult r = env.step({{2, 1, 1, 1}});  // climb into the deck's clearance
    CHECK(r.outcome == Outcome::Collision);
    CHECK(r.cost == 1.0);
    CHECK(r.reward == 0.0);
  }
}

TEST_CASE("random-action episodes respect the cost and return invariants") {
  const auto w = shared(Level::Medium, 5);
  RiverEnv env(w, headless());
  Rng rng(17);
  for (int ep = 0; ep < 300; ++ep) {
    env.reset(static_cast<std::uint64_t>(ep));
    double ret = 0.0, cost = 0.0;
    int cost_events = 0;
    std::size_t last_visited = 0;
    StepResult r;
    while (!env.done()) {
      r = env.step(random_action(rng));
      ret += r.reward;
      cost += r.cost;
      if (r.cost > 0.0) {
        ++cost_events;
        CHECK(r.done);
      }
      if (r.reward > 0.0) CHECK(env.visited_count() > last_visited);
      CHECK(env.visited_count() >= last_visited);
      last_visited = env.visited_count();
    }
    CHECK(cost_events <= 1);
    CHECK((cost == 0.0 || cost == 0.2 || cost == 1.0));
    CHECK(cost == outcome_cost(r.outcome));
    CHECK(ret >= 0.0);
    CHECK(ret <= 10.0 + 1e-9);
    if (std::abs(ret - 10.0) <= 1e-9) CHECK(r.outcome == Outcome::Success);
  }
}

TEST_CASE("trajectories are deterministic and traceable") {
  const auto w = shared(Level::Hard, 8);
  auto run = [&]() {
    RiverEnv env(w);
    std::ostringstream os;
    TraceWriter trace(os);
    Rng rng(99);
    std::vector<Frame> frames;
    for (int ep = 0; ep < 3; ++ep) {
      env.reset(static_cast<std::uint64_t>(ep));
      int t = 0;
      while (!env.done()) {
        const auto a = random_action(rng);
        const StepResult r = env.step(a);
        trace.write(ep, t++, env.pose(), a, r);
        frames.push_back(r.frame);
      }
    }
    return std::make_pair(os.str(), frames);
  };
  const auto a = run(), b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);

  std::istringstream lines(a.first);
  std::string line;
  int records = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("action").size() == 4);
    CHECK(parse_outcome(j.at("outcome").get<std::string>()).has_value());
    ++records;
  }
  CHECK(records == static_cast<int>(a.second.size()));
}
