#include "sre/rl/policy.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "sre/nd/ops.hpp"

namespace sre::rl {

using nd::Shape;
using nd::Tensor;
using nd::Var;

namespace {

void build_mlp(nd::ParameterSet& params, const char* prefix, std::size_t in, const std::vector<std::size_t>& hidden,
               std::size_t out, double out_gain, Rng& rng) {
  std::size_t width = in;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    const std::string name = std::string(prefix) + ".l" + std::to_string(i);
    params.add(name + ".w", nd::glorot_uniform(rng, {width, hidden[i]}, width, hidden[i]));
    params.add(name + ".b", Tensor(Shape{hidden[i]}));
    width = hidden[i];
  }
  params.add(std::string(prefix) + ".out.w", nd::glorot_uniform(rng, {width, out}, width, out, out_gain));
  params.add(std::string(prefix) + ".out.b", Tensor(Shape{out}));
}

std::vector<double> mlp_value(const nd::ParameterSet& params, std::size_t layers, std::span<const double> obs,
                              std::size_t rows) {
  const auto& t = params.tensors();
  const std::size_t in = t[0].tensor.dim(0);
  if (obs.size() != rows * in) throw std::invalid_argument("observation batch has the wrong width");
  Tensor x(Shape{rows, in}, std::vector<double>(obs.begin(), obs.end()));
  for (std::size_t i = 0; i < layers; ++i) {
    x = nd::value::linear(x, t[2 * i].tensor, t[2 * i + 1].tensor);
    nd::value::tanh_inplace(x);
  }
  x = nd::value::linear(x, t[2 * layers].tensor, t[2 * layers + 1].tensor);
  return {x.values().begin(), x.values().end()};
}

Var mlp_graph(std::size_t layers, std::span<const Var> p, Var x) {
  for (std::size_t i = 0; i < layers; ++i) x = nd::tanh(nd::linear(x, p[2 * i], p[2 * i + 1]));
  return nd::linear(x, p[2 * layers], p[2 * layers + 1]);
}

}  // namespace

PolicyNet::PolicyNet(std::size_t obs_dim, std::vector<std::size_t> branches, std::vector<std::size_t> hidden,
                     std::uint64_t seed)
    : obs_dim_(obs_dim), branches_(std::move(branches)), layers_(hidden.size()) {
  if (obs_dim_ == 0 || branches_.empty()) throw std::invalid_argument("policy needs inputs and action branches");
  for (std::size_t b : branches_)
    if (b < 2) throw std::invalid_argument("each action branch needs at least two choices");
  logit_count_ = std::accumulate(branches_.begin(), branches_.end(), std::size_t{0});
  Rng rng(mix_seed(seed, 0x9011C7));
  build_mlp(params_, "pi", obs_dim_, hidden, logit_count_, 0.01, rng);
}

std::vector<double> PolicyNet::logits(std::span<const double> obs, std::size_t rows) const {
  return mlp_value(params_, layers_, obs, rows);
}

Var PolicyNet::logits(nd::Tape&, std::span<const Var> bound, Var obs) const { return mlp_graph(layers_, bound, obs); }

double PolicyNet::log_prob(std::span<const double> logits, std::span<const int> action) const {
  if (action.size() != branches_.size()) throw std::invalid_argument("action has the wrong branch count");
  double lp = 0.0;
  std::size_t off = 0;
  for (std::size_t b = 0; b < branches_.size(); ++b) {
    const auto ls = nd::log_softmax(logits.subspan(off, branches_[b]));
    lp += ls.at(static_cast<std::size_t>(action[b]));
    off += branches_[b];
  }
  return lp;
}

std::vector<std::size_t> PolicyNet::action_columns(std::span<const int> actions, std::size_t rows) const {
  const std::size_t k = branches_.size();
  if (actions.size() != rows * k) throw std::invalid_argument("action batch has the wrong width");
  std::vector<std::size_t> cols(rows * k);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t off = 0;
    for (std::size_t b = 0; b < k; ++b) {
      const int a = actions[r * k + b];
      if (a < 0 || static_cast<std::size_t>(a) >= branches_[b]) throw std::invalid_argument("action out of range");
      cols[r * k + b] = off + static_cast<std::size_t>(a);
      off += branches_[b];
    }
  }
  return cols;
}

std::vector<int> PolicyNet::sample(std::span<const double> logits, Rng& rng) const {
  std::vector<int> a(branches_.size());
  std::size_t off = 0;
  for (std::size_t b = 0; b < branches_.size(); ++b) {
    const auto p = nd::softmax(logits.subspan(off, branches_[b]));
    double u = rng.uniform(), acc = 0.0;
    int choice = static_cast<int>(branches_[b]) - 1;
    for (std::size_t i = 0; i < p.size(); ++i) {
      acc += p[i];
      if (u < acc) {
        choice = static_cast<int>(i);
        break;
      }
    }
    a[b] = choice;
    off += branches_[b];
  }
  return a;
}

std::vector<int> PolicyNet::greedy(std::span<const double> logits) const {
  std::vector<int> a(branches_.size());
  std::size_t off = 0;
  for (std::size_t b = 0; b < branches_.size(); ++b) {
    const auto first = logits.begin() + static_cast<std::ptrdiff_t>(off);
    a[b] = static_cast<int>(std::max_element(first, first + static_cast<std::ptrdiff_t>(branches_[b])) - first);
    off += branches_[b];
  }
  return a;
}

double PolicyNet::kl(std::span<const double> p_logits, std::span<const double> q_logits) const {
  double total = 0.0;
  std::size_t off = 0;
  for (std::size_t b : branches_) {
    total += nd::categorical_kl(p_logits.subspan(off, b), q_logits.subspan(off, b));
    off += b;
  }
  return total;
}

ValueNet::ValueNet(std::size_t obs_dim, std::vector<std::size_t> hidden, std::uint64_t seed) : layers_(hidden.size()) {
  if (obs_dim == 0) throw std::invalid_argument("value net needs inputs");
  Rng rng(mix_seed(seed, 0x7A1E));
  build_mlp(params_, "v", obs_dim, hidden, 1, 1.0, rng);
}

std::vector<double> ValueNet::predict(std::span<const double> obs, std::size_t rows) const {
  return mlp_value(params_, layers_, obs, rows);
}

Var ValueNet::predict(nd::Tape&, std::span<const Var> bound, Var obs) const {
  return nd::reshape(mlp_graph(layers_, bound, obs), {obs.value().dim(0)});
}

}  // namespace sre::rl
