#include "sre/vision/vae.hpp"

#include <numeric>
#include <stdexcept>

#include "sre/nd/checkpoint.hpp"
#include "sre/nd/ops.hpp"

namespace sre::vision {

using nd::Shape;
using nd::Tape;
using nd::Tensor;
using nd::Var;

namespace {

constexpr std::size_t kKernel = 4, kStride = 2, kPad = 1;

enum Slot : std::size_t {
  kC1W, kC1B, kC2W, kC2B, kC3W, kC3B, kFcW, kFcB, kMuW, kMuB, kLvW, kLvB,
  kD1W, kD1B, kD2W, kD2B, kT1W, kT1B, kT2W, kT2B, kT3W, kT3B,
};

std::size_t bottleneck(const VaeConfig& c) { return c.resolution / 8; }

std::size_t flat_size(const VaeConfig& c) { return c.conv3 * bottleneck(c) * bottleneck(c); }

void validate(const VaeConfig& c) {
  if (c.latent_dim == 0) throw std::invalid_argument("latent_dim must be positive");
  if (c.resolution < 8 || c.resolution % 8 != 0) throw std::invalid_argument("resolution must be a multiple of 8");
  if (c.hidden == 0 || c.conv1 == 0 || c.conv2 == 0 || c.conv3 == 0) throw std::invalid_argument("layer widths must be positive");
  if (c.batch_size == 0) throw std::invalid_argument("batch_size must be positive");
}

Tensor config_tensor(const VaeConfig& c) {
  return Tensor::vector({double(c.latent_dim), double(static_cast<int>(c.channels)), double(c.resolution),
                         double(c.hidden), double(c.conv1), double(c.conv2), double(c.conv3), c.beta});
}

}  // namespace

std::vector<double> frame_input(const world::Frame& frame, ChannelConfig channels) { return frame.channels(channels); }

Vae::Vae(const VaeConfig& config) : config_(config) {
  validate(config_);
  Rng rng(mix_seed(config_.seed, 0xAE01));
  const std::size_t C = world::channel_count(config_.channels), D = config_.latent_dim, Hd = config_.hidden;
  const std::size_t c1 = config_.conv1, c2 = config_.conv2, c3 = config_.conv3, F = flat_size(config_);
  const std::size_t KK = kKernel * kKernel;
  auto conv = [&](const char* name, std::size_t out, std::size_t in) {
    params_.add(std::string(name) + ".w", nd::glorot_uniform(rng, {out, in, kKernel, kKernel}, in * KK, out * KK));
    params_.add(std::string(name) + ".b", Tensor(Shape{out}));
  };
  auto deconv = [&](const char* name, std::size_t in, std::size_t out) {
    params_.add(std::string(name) + ".w", nd::glorot_uniform(rng, {in, out, kKernel, kKernel}, in * KK, out * KK));
    params_.add(std::string(name) + ".b", Tensor(Shape{out}));
  };
  auto dense = [&](const char* name, std::size_t in, std::size_t out, double gain = 1.0) {
    params_.add(std::string(name) + ".w", nd::glorot_uniform(rng, {in, out}, in, out, gain));
    params_.add(std::string(name) + ".b", Tensor(Shape{out}));
  };
  conv("enc.conv1", c1, C);
  conv("enc.conv2", c2, c1);
  conv("enc.conv3", c3, c2);
  dense("enc.fc", F, Hd);
  dense("enc.mu", Hd, D);
  dense("enc.logvar", Hd, D, 0.1);
  dense("dec.fc1", D, Hd);
  dense("dec.fc2", Hd, F);
  deconv("dec.deconv1", c3, c2);
  deconv("dec.deconv2", c2, c1);
  deconv("dec.deconv3", c1, C);
}

Vae::Graph Vae::forward(Tape& tape, std::span<const Var> p, Var input, const Tensor* eps) const {
  const std::size_t B = input.value().dim(0), C = world::channel_count(config_.channels), R = config_.resolution;
  const std::size_t b = bottleneck(config_);
  Var x = nd::reshape(input, {B, C, R, R});
  x = nd::relu(nd::conv2d(x, p[kC1W], p[kC1B], kStride, kPad));
  x = nd::relu(nd::conv2d(x, p[kC2W], p[kC2B], kStride, kPad));
  x = nd::relu(nd::conv2d(x, p[kC3W], p[kC3B], kStride, kPad));
  x = nd::reshape(x, {B, flat_size(config_)});
  Var h = nd::relu(nd::linear(x, p[kFcW], p[kFcB]));
  Graph g;
  g.mu = nd::linear(h, p[kMuW], p[kMuB]);
  g.logvar = nd::linear(h, p[kLvW], p[kLvB]);
  Var z = g.mu;
  if (eps) z = nd::add(g.mu, nd::mul(nd::exp(nd::scale(g.logvar, 0.5)), tape.constant(*eps)));
  Var y = nd::relu(nd::linear(z, p[kD1W], p[kD1B]));
  y = nd::relu(nd::linear(y, p[kD2W], p[kD2B]));
  y = nd::reshape(y, {B, config_.conv3, b, b});
  y = nd::relu(nd::conv_transpose2d(y, p[kT1W], p[kT1B], kStride, kPad));
  y = nd::relu(nd::conv_transpose2d(y, p[kT2W], p[kT2B], kStride, kPad));
  y = nd::sigmoid(nd::conv_transpose2d(y, p[kT3W], p[kT3B], kStride, kPad));
  g.recon = nd::reshape(y, {B, config_.input_size()});
  return g;
}

std::vector<double> Vae::encode_batch(std::span<const double> inputs, std::size_t rows) const {
  const std::size_t n = config_.input_size();
  if (rows == 0 || inputs.size() != rows * n)
    throw std::invalid_argument("encode: expected rows of " + std::to_string(n) + " values");
  const auto& t = params_.tensors();
  const std::size_t C = world::channel_count(config_.channels), R = config_.resolution;
  Tensor x(Shape{rows, C, R, R}, std::vector<double>(inputs.begin(), inputs.end()));
  x = nd::value::conv2d(x, t[kC1W].tensor, t[kC1B].tensor, kStride, kPad);
  nd::value::relu_inplace(x);
  x = nd::value::conv2d(x, t[kC2W].tensor, t[kC2B].tensor, kStride, kPad);
  nd::value::relu_inplace(x);
  x = nd::value::conv2d(x, t[kC3W].tensor, t[kC3B].tensor, kStride, kPad);
  nd::value::relu_inplace(x);
  x = x.reshaped({rows, flat_size(config_)});
  Tensor h = nd::value::linear(x, t[kFcW].tensor, t[kFcB].tensor);
  nd::value::relu_inplace(h);
  Tensor mu = nd::value::linear(h, t[kMuW].tensor, t[kMuB].tensor);
  return {mu.values().begin(), mu.values().end()};
}

std::vector<double> Vae::encode(std::span<const double> input) const { return encode_batch(input, 1); }

std::vector<double> Vae::encode(const world::Frame& frame) const {
  if (frame.width != config_.resolution || frame.height != config_.resolution)
    throw std::invalid_argument("frame resolution does not match the encoder");
  return encode(frame_input(frame, config_.channels));
}

std::vector<double> Vae::reconstruct(std::span<const double> input) const {
  if (input.size() != config_.input_size()) throw std::invalid_argument("reconstruct: input size mismatch");
  Tape tape;
  const auto p = params_.bind(tape);
  Var x = tape.constant(Tensor(Shape{1, input.size()}, std::vector<double>(input.begin(), input.end())));
  const auto g = forward(tape, p, x, nullptr);
  const auto v = g.recon.value().values();
  return {v.begin(), v.end()};
}

void Vae::save(const std::filesystem::path& path) const {
  std::vector<nd::NamedTensor> all{{"vae.config", config_tensor(config_)}};
  all.insert(all.end(), params_.tensors().begin(), params_.tensors().end());
  nd::save_checkpoint(path, all);
}

Vae Vae::load(const std::filesystem::path& path) {
  auto all = nd::load_checkpoint(path);
  if (all.empty() || all.front().name != "vae.config" || all.front().tensor.size() != 8)
    throw std::runtime_error(path.string() + " is not a VAE checkpoint");
  const Tensor& c = all.front().tensor;
  VaeConfig cfg;
  cfg.latent_dim = static_cast<std::size_t>(c[0]);
  cfg.channels = static_cast<ChannelConfig>(static_cast<int>(c[1]));
  cfg.resolution = static_cast<std::size_t>(c[2]);
  cfg.hidden = static_cast<std::size_t>(c[3]);
  cfg.conv1 = static_cast<std::size_t>(c[4]);
  cfg.conv2 = static_cast<std::size_t>(c[5]);
  cfg.conv3 = static_cast<std::size_t>(c[6]);
  cfg.beta = c[7];
  Vae vae(cfg);
  vae.params_.assign(std::span(all).subspan(1));
  return vae;
}

VaeTraining train_vae(std::span<const double> inputs, std::size_t rows, const VaeConfig& config) {
  if (rows == 0) throw std::invalid_argument("train_vae: empty dataset");
  const std::size_t n = config.input_size();
  if (inputs.size() != rows * n) throw std::invalid_argument("train_vae: inputs do not match the channel config");

  VaeTraining out{Vae(config), {}};
  Vae& vae = out.vae;
  nd::Adam adam(vae.params(), {config.learning_rate});
  Rng order_rng(mix_seed(config.seed, 0xAE02));
  Rng noise_rng(mix_seed(config.seed, 0xAE03));
  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = rows; i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
    double total = 0.0;
    for (std::size_t start = 0; start < rows; start += config.batch_size) {
      const std::size_t B = std::min(config.batch_size, rows - start);
      Tensor batch(Shape{B, n});
      for (std::size_t r = 0; r < B; ++r)
        std::copy_n(inputs.begin() + static_cast<std::ptrdiff_t>(order[start + r] * n), n, batch.data() + r * n);
      Tensor eps(Shape{B, config.latent_dim});
      for (double& e : eps.values()) e = noise_rng.normal();

      Tape tape;
      const auto p = vae.params().bind(tape);
      Var x = tape.constant(std::move(batch));
      const auto g = vae.forward(tape, p, x, &eps);
      // per-sample summed squared error + beta * KL, averaged over the batch
      Var rec = nd::scale(nd::mse(g.recon, x), static_cast<double>(n));
      Var kl = nd::scale(nd::gaussian_kl_unit(g.mu, g.logvar), config.beta / static_cast<double>(B));
      Var loss = nd::add(rec, kl);
      tape.backward(loss);
      adam.step(vae.params(), tape, p);
      total += loss.value().item() * static_cast<double>(B);
    }
    out.loss_curve.push_back(total / static_cast<double>(rows));
  }
  return out;
}

double reconstruction_loss(const Vae& vae, std::span<const double> inputs, std::size_t rows) {
  const std::size_t n = vae.config().input_size();
  if (rows == 0 || inputs.size() != rows * n) throw std::invalid_argument("reconstruction_loss: bad dataset");
  double total = 0.0;
  constexpr std::size_t chunk = 64;
  for (std::size_t start = 0; start < rows; start += chunk) {
    const std::size_t B = std::min(chunk, rows - start);
    Tape tape;
    const auto p = vae.params().bind(tape);
    const auto x = inputs.subspan(start * n, B * n);
    Var in = tape.constant(Tensor(Shape{B, n}, std::vector<double>(x.begin(), x.end())));
    const auto g = vae.forward(tape, p, in, nullptr);
    const auto r = g.recon.value().values();
    for (std::size_t i = 0; i < B * n; ++i) total += (r[i] - x[i]) * (r[i] - x[i]);
  }
  return total / static_cast<double>(rows * n);
}

std::vector<SweepRow> latent_sweep(std::span<const double> inputs, std::size_t rows,
                                   std::span<const std::size_t> dims, const VaeConfig& base) {
  if (dims.empty()) throw std::invalid_argument("latent_sweep: no dimensions");
  std::vector<SweepRow> table;
  for (std::size_t d : dims) {
    VaeConfig cfg = base;
    cfg.latent_dim = d;
    const auto trained = train_vae(inputs, rows, cfg);
    table.push_back({d, reconstruction_loss(trained.vae, inputs, rows)});
  }
  return table;
}

}  // namespace sre::vision
