#include "sre/nd/params.hpp"

#include <cmath>
#include <stdexcept>

namespace sre::nd {

void ParameterSet::add(std::string name, Tensor value) {
  for (const auto& t : tensors_)
    if (t.name == name) throw std::invalid_argument("duplicate parameter name: " + name);
  tensors_.push_back({std::move(name), std::move(value)});
}

std::size_t ParameterSet::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < tensors_.size(); ++i)
    if (tensors_[i].name == name) return i;
  throw std::out_of_range("no parameter named " + std::string(name));
}

Tensor& ParameterSet::get(std::string_view name) { return tensors_[index_of(name)].tensor; }
const Tensor& ParameterSet::get(std::string_view name) const { return tensors_[index_of(name)].tensor; }

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.tensor.size();
  return n;
}

std::vector<Var> ParameterSet::bind(Tape& tape) const {
  std::vector<Var> out;
  out.reserve(tensors_.size());
  for (const auto& t : tensors_) out.push_back(tape.parameter(t.tensor));
  return out;
}

void ParameterSet::assign(std::span<const NamedTensor> values) {
  if (values.size() != tensors_.size()) throw std::invalid_argument("checkpoint tensor count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].name != tensors_[i].name) throw std::invalid_argument("checkpoint name mismatch: " + values[i].name);
    if (values[i].tensor.shape() != tensors_[i].tensor.shape())
      throw std::invalid_argument("checkpoint shape mismatch for " + values[i].name);
  }
  for (std::size_t i = 0; i < values.size(); ++i) tensors_[i].tensor = values[i].tensor;
}

bool ParameterSet::operator==(const ParameterSet& other) const {
  if (tensors_.size() != other.tensors_.size()) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i)
    if (tensors_[i].name != other.tensors_[i].name || !(tensors_[i].tensor == other.tensors_[i].tensor)) return false;
  return true;
}

Adam::Adam(const ParameterSet& params, AdamConfig config) {
  for (const auto& t : params.tensors()) states_.emplace_back(t.tensor.shape(), config);
}

double Adam::step(ParameterSet& params, Tape& tape, std::span<const Var> bound, double max_grad_norm) {
  if (bound.size() != states_.size() || params.size() != states_.size())
    throw std::invalid_argument("optimizer and parameter set disagree");
  std::vector<Tensor> grads;
  grads.reserve(bound.size());
  for (const Var& v : bound) grads.push_back(tape.grad(v));
  double norm = 0.0;
  if (max_grad_norm > 0.0) {
    norm = clip_grad_norm(grads, max_grad_norm);
  } else {
    for (const auto& g : grads)
      for (double x : g.values()) norm += x * x;
    norm = std::sqrt(norm);
  }
  for (std::size_t i = 0; i < grads.size(); ++i) adam_step(params.tensors()[i].tensor, grads[i], states_[i]);
  return norm;
}

void Adam::set_learning_rate(double lr) {
  for (auto& s : states_) s.config.learning_rate = lr;
}

Tensor glorot_uniform(Rng& rng, Shape shape, std::size_t fan_in, std::size_t fan_out, double gain) {
  const double a = gain * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(std::move(shape));
  for (double& x : t.values()) x = rng.uniform(-a, a);
  return t;
}

}  // namespace sre::nd
