// Python bindings: worlds, the river environment, the chain oracle and
// relative entropy. Frames come back as (4, H, W) float64 arrays.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sre/bench/chain.hpp"
#include "sre/env/river_env.hpp"
#include "sre/rl/algorithms.hpp"
#include "sre/version.hpp"
#include "sre/vision/relative_entropy.hpp"

namespace py = pybind11;
using namespace sre;

namespace {

py::array_t<double> frame_array(const world::Frame& f) {
  py::array_t<double> out({world::Frame::kChannels, f.height, f.width});
  std::copy(f.data.begin(), f.data.end(), out.mutable_data());
  return out;
}

vision::EncodingDataset encodings(py::array_t<double, py::array::c_style | py::array::forcecast> a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D array (samples x features)");
  vision::EncodingDataset e;
  e.dim = static_cast<std::size_t>(a.shape(1));
  e.values.assign(a.data(), a.data() + a.size());
  return e;
}

world::Level level_arg(const std::string& s) {
  const auto l = world::parse_level(s);
  if (!l) throw std::invalid_argument("unknown level: " + s);
  return *l;
}

}  // namespace

PYBIND11_MODULE(_sre, m) {
  m.attr("__version__") = std::string(kVersion);

  py::class_<world::Pose>(m, "Pose")
      .def(py::init<>())
      .def(py::init([](double x, double y, double z, double yaw) { return world::Pose{x, y, z, yaw}; }), py::arg("x"),
           py::arg("y"), py::arg("z"), py::arg("yaw"))
      .def_readwrite("x", &world::Pose::x)
      .def_readwrite("y", &world::Pose::y)
      .def_readwrite("z", &world::Pose::z)
      .def_readwrite("yaw", &world::Pose::yaw)
      .def("__repr__", [](const world::Pose& p) {
        return "Pose(" + std::to_string(p.x) + ", " + std::to_string(p.y) + ", " + std::to_string(p.z) + ", " +
               std::to_string(p.yaw) + ")";
      });

  py::class_<world::World, std::shared_ptr<world::World>>(m, "World")
      .def_property_readonly("spec_json", [](const world::World& w) { return world::world_spec_json(w.spec()); })
      .def("top_down", [](const world::World& w, double mpp) {
        const auto img = world::render_top_down(w, mpp);
        py::array_t<std::uint8_t> out({img.height, img.width, std::size_t{3}});
        std::copy(img.rgb.begin(), img.rgb.end(), out.mutable_data());
        return out;
      }, py::arg("meters_per_pixel") = 0.5);

  m.def("generate_world", [](const std::string& level, std::uint64_t seed) {
    return std::make_shared<world::World>(world::generate_world(level_arg(level), seed));
  }, py::arg("level"), py::arg("seed"));

  py::class_<env::StepResult>(m, "StepResult")
      .def_property_readonly("frame", [](const env::StepResult& r) { return frame_array(r.frame); })
      .def_readonly("reward", &env::StepResult::reward)
      .def_readonly("cost", &env::StepResult::cost)
      .def_readonly("done", &env::StepResult::done)
      .def_property_readonly("outcome", [](const env::StepResult& r) { return std::string(env::to_string(r.outcome)); });

  py::class_<env::RiverEnv>(m, "RiverEnv")
      .def(py::init([](std::shared_ptr<world::World> w, std::size_t resolution, bool render, int max_steps) {
             env::EnvConfig c;
             c.resolution = resolution;
             c.render = render;
             c.max_steps = max_steps;
             return env::RiverEnv(std::move(w), c);
           }),
           py::arg("world"), py::arg("resolution") = 32, py::arg("render") = true, py::arg("max_steps") = 500)
      .def("reset", [](env::RiverEnv& e, std::uint64_t seed) { return frame_array(e.reset(seed)); }, py::arg("seed"))
      .def("step", [](env::RiverEnv& e, std::array<int, 4> branch) {
        env::MultiDiscreteAction a{branch};
        if (!a.valid()) throw std::invalid_argument("action branches must be 0, 1 or 2");
        return e.step(a);
      }, py::arg("action"))
      .def("pilot_action", [](const env::RiverEnv& e) { return env::centerline_pilot(e).branch; })
      .def_property_readonly("pose", &env::RiverEnv::pose)
      .def_property_readonly("done", &env::RiverEnv::done)
      .def_property_readonly("step_count", &env::RiverEnv::step_count)
      .def_property_readonly("visited_count", &env::RiverEnv::visited_count);

  m.def("outcome_cost", [](const std::string& name) {
    const auto o = env::parse_outcome(name);
    if (!o) throw std::invalid_argument("unknown outcome: " + name);
    return env::outcome_cost(*o);
  });

  m.def("relative_entropy", [](py::array_t<double> p, py::array_t<double> q) {
    const auto r = vision::relative_entropy(encodings(p), encodings(q));
    return py::make_tuple(r.mean, r.per_feature);
  }, py::arg("p"), py::arg("q"), "Mean and per-feature histogram KL(P || Q) between two encoding sets.");
  m.def("discrete_relative_entropy", [](std::vector<double> p, std::vector<double> q) {
    return vision::discrete_relative_entropy(p, q);
  });

  m.def("lagrange_update", [](double lambda, double cost, double budget, double lr, double lambda_max) {
    rl::LagrangeState s{lambda, lr, budget, lambda_max};
    rl::lagrange_update(s, cost);
    return s.lambda;
  }, py::arg("lam"), py::arg("cost"), py::arg("budget"), py::arg("lr") = 0.05, py::arg("lambda_max") = 10.0);

  m.def("chain_oracle", [] {
    const auto o = bench::oracle_solve_chain_cmdp(bench::reference_chain());
    py::dict d;
    d["feasible_return"] = o.feasible_return ? py::cast(*o.feasible_return) : py::none();
    d["feasible_policy"] = o.feasible_policy;
    d["unconstrained_return"] = o.unconstrained_return;
    d["unconstrained_cost"] = o.unconstrained_cost;
    return d;
  }, "Enumeration optimum of the reference 5-state chain.");
  m.def("evaluate_chain_policy", [](std::vector<std::vector<double>> probs) {
    const auto v = bench::evaluate_chain_policy(bench::reference_chain(), probs);
    return py::make_tuple(v.reward, v.cost);
  }, py::arg("probs"), "Exact discounted (reward, cost) of a stochastic policy on the reference chain.");
}
