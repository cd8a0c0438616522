#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "gradcheck.hpp"
#include "sre/nd/ops.hpp"
#include "sre/vision/dataset.hpp"
#include "sre/vision/relative_entropy.hpp"

using namespace sre;
using namespace sre::vision;
using world::ChannelConfig;

namespace {

EncodingDataset random_encodings(Rng& rng, std::size_t rows, std::size_t dim, double skew = 0.0) {
  EncodingDataset e;
  e.dim = dim;
  for (std::size_t i = 0; i < rows * dim; ++i) {
    const double g = rng.normal();
    e.values.push_back(g + skew * g * g);
  }
  return e;
}

// Independent per-feature computation: counts via direct index arithmetic.
double oracle_re(const EncodingDataset& p, const EncodingDataset& q) {
  const std::size_t n = std::min(p.rows(), q.rows());
  std::size_t bins = 1;
  while (bins * bins < n) ++bins;
  double total = 0.0;
  for (std::size_t j = 0; j < p.dim; ++j) {
    auto hist = [&](const EncodingDataset& e) {
      double mn = 1e300, mx = -1e300;
      for (std::size_t i = 0; i < e.rows(); ++i) mn = std::min(mn, e.at(i, j)), mx = std::max(mx, e.at(i, j));
      std::vector<double> h(bins, 0.0);
      for (std::size_t i = 0; i < e.rows(); ++i) {
        const double u = (e.at(i, j) - mn) / (mx - mn);  // in [0, 1]
        std::size_t k = static_cast<std::size_t>(u * static_cast<double>(bins));
        if (k == bins) k = bins - 1;
        h[k] += 1.0 / static_cast<double>(e.rows());
      }
      return h;
    };
    const auto hp = hist(p), hq = hist(q);
    for (std::size_t k = 0; k < bins; ++k)
      if (hp[k] > 0) total += hp[k] * std::log(hp[k] / std::max(hq[k], 1e-9));
  }
  return total / static_cast<double>(p.dim);
}

VaeConfig tiny_config(ChannelConfig channels = ChannelConfig::RGBMask) {
  VaeConfig c;
  c.channels = channels;
  c.resolution = 32;
  c.latent_dim = 4;
  c.hidden = 32;
  c.conv1 = 4;
  c.conv2 = 4;
  c.conv3 = 8;
  c.epochs = 3;
  c.batch_size = 16;
  c.seed = 3;
  return c;
}

const FrameDataset& small_dataset() {
  static const FrameDataset ds = collect_frames(world::generate_world(world::Level::Medium, 1), 64, 11, 32);
  return ds;
}

}  // namespace

TEST_CASE("bin count") {
  CHECK(bin_count_for(2000) == 45);
  CHECK(bin_count_for(4) == 2);
  CHECK(bin_count_for(5) == 3);
  CHECK(bin_count_for(1) == 1);
  CHECK(bin_count_for(2025) == 45);
  CHECK(bin_count_for(2026) == 46);
}

TEST_CASE("two-bin closed form") {
  const std::vector<double> p{0.8, 0.2}, q{0.5, 0.5};
  CHECK(std::abs(discrete_relative_entropy(p, q) - (0.8 * std::log(1.6) + 0.2 * std::log(0.4))) <= 1e-15);
  CHECK(std::abs(discrete_relative_entropy(p, q) - 0.1927) <= 1e-4);
  // empty Q bin under P support hits the floor
  const std::vector<double> p2{1.0, 0.0}, q2{0.0, 1.0};
  CHECK(discrete_relative_entropy(p2, q2) == doctest::Approx(std::log(1e9)));
}

TEST_CASE("histogram and rescale") {
  const std::vector<double> col{3.0, 5.0, 7.0, 9.0};
  const auto r = rescale_column(col);
  CHECK(r.front() == -2.0);
  CHECK(r.back() == 2.0);
  const auto h = histogram(r, 2);
  CHECK(h[0] == 0.5);
  CHECK(h[1] == 0.5);
  const std::vector<double> flat{1.0, 1.0, 1.0, 1.0};
  const auto hf = histogram(rescale_column(flat), 3);
  CHECK(hf[1] == 1.0);
}

TEST_CASE("relative entropy properties") {
  Rng rng(5);
  const auto x = random_encodings(rng, 500, 8);
  const auto self = relative_entropy(x, x);
  CHECK(std::abs(self.mean) <= 1e-12);
  CHECK(self.bin_count == 23);
  CHECK(self.per_feature.size() == 8);

  for (int trial = 0; trial < 100; ++trial) {
    const auto a = random_encodings(rng, 200, 4, rng.uniform(0.0, 1.0));
    const auto b = random_encodings(rng, 200, 4, rng.uniform(0.0, 1.0));
    const auto r = relative_entropy(a, b);
    CHECK(r.mean >= -1e-12);
    for (double v : r.per_feature) CHECK(v >= -1e-12);
    double m = 0.0;
    for (double v : r.per_feature) m += v;
    CHECK(std::abs(r.mean - m / 4.0) <= 1e-15);
    CHECK(std::abs(r.mean - oracle_re(a, b)) <= 1e-9);
  }

  const auto a = random_encodings(rng, 400, 3, 0.0), b = random_encodings(rng, 400, 3, 0.8);
  CHECK(std::abs(relative_entropy(a, b).mean - relative_entropy(b, a).mean) > 1e-6);

  // positive affine maps of a column are absorbed by the rescale
  EncodingDataset t = a;
  for (std::size_t i = 0; i < t.rows(); ++i) t.values[i * t.dim + 1] = 3.5 * t.values[i * t.dim + 1] - 7.0;
  CHECK(std::abs(relative_entropy(t, b).mean - relative_entropy(a, b).mean) <= 1e-12);

  CHECK_THROWS_AS(relative_entropy(a, random_encodings(rng, 400, 4)), std::invalid_argument);
  CHECK_THROWS_AS(relative_entropy(random_encodings(rng, 3, 3), a), std::invalid_argument);
}

TEST_CASE("vae gradients match finite differences") {
  VaeConfig c;
  c.channels = ChannelConfig::Mask;
  c.resolution = 8;
  c.latent_dim = 2;
  c.hidden = 3;
  c.conv1 = c.conv2 = c.conv3 = 2;
  const Vae vae(c);
  Rng rng(8);
  std::vector<nd::Tensor> inputs;
  for (const auto& t : vae.params().tensors()) inputs.push_back(testing::random_tensor(rng, t.tensor.shape(), 0.7));
  nd::Tensor x(nd::Shape{2, c.input_size()});
  for (double& v : x.values()) v = rng.uniform();
  nd::Tensor eps(nd::Shape{2, 2});
  for (double& v : eps.values()) v = rng.normal();
  const auto build = [&](nd::Tape& tape, const std::vector<nd::Var>& p) {
    nd::Var in = tape.constant(x);
    const auto g = vae.forward(tape, p, in, &eps);
    return nd::add(nd::scale(nd::mse(g.recon, in), double(c.input_size())), nd::scale(nd::gaussian_kl_unit(g.mu, g.logvar), 0.5));
  };
  CHECK(testing::max_gradient_error(build, inputs) <= 1e-4);
}

TEST_CASE("encode") {
  const auto& ds = small_dataset();
  const Vae vae(tiny_config());
  const auto z = vae.encode(ds.frames[0]);
  CHECK(z.size() == 4);
  CHECK(vae.encode(ds.frames[0]) == z);
  for (double v : z) CHECK(std::isfinite(v));

  // tape-free encoder agrees with the differentiable graph
  nd::Tape tape;
  const auto p = vae.params().bind(tape);
  const auto in = frame_input(ds.frames[0], ChannelConfig::RGBMask);
  const auto g = vae.forward(tape, p, tape.constant(nd::Tensor(nd::Shape{1, in.size()}, in)), nullptr);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(g.mu.value()[i] - z[i]) <= 1e-12);

  VaeConfig d16 = tiny_config();
  d16.latent_dim = 16;
  CHECK(Vae(d16).encode(ds.frames[1]).size() == 16);

  const Vae rgb(tiny_config(ChannelConfig::RGB));
  CHECK_THROWS_AS(rgb.encode(std::span<const double>(in)), std::invalid_argument);
  const auto small = world::render_frame(world::generate_world(world::Level::Easy, 0), ds.poses[0], 64);
  CHECK_THROWS_AS(vae.encode(small), std::invalid_argument);
}

TEST_CASE("training is deterministic and reduces the loss") {
  const auto& ds = small_dataset();
  const auto inputs = dataset_inputs(ds, ChannelConfig::RGBMask);
  VaeConfig c = tiny_config();
  c.epochs = 6;
  const auto a = train_vae(inputs, ds.size(), c);
  const auto b = train_vae(inputs, ds.size(), c);
  CHECK(a.vae == b.vae);
  CHECK(a.loss_curve == b.loss_curve);
  REQUIRE(a.loss_curve.size() == 6);
  CHECK(a.loss_curve.back() < a.loss_curve.front());

  const Vae untrained(c);
  const double before = reconstruction_loss(untrained, inputs, ds.size());
  const double after = reconstruction_loss(a.vae, inputs, ds.size());
  CHECK(after <= before);

  // permutation invariance of the dataset loss
  std::vector<double> reversed;
  const std::size_t n = c.input_size();
  for (std::size_t r = ds.size(); r-- > 0;) reversed.insert(reversed.end(), inputs.begin() + r * n, inputs.begin() + (r + 1) * n);
  CHECK(reconstruction_loss(a.vae, reversed, ds.size()) == doctest::Approx(after).epsilon(1e-12));

  CHECK_THROWS_AS(train_vae({}, 0, c), std::invalid_argument);
}

TEST_CASE("vae checkpoint round trip") {
  const Vae vae(tiny_config(ChannelConfig::Mask));
  const auto path = std::filesystem::temp_directory_path() / "sre_vae_rt.ndm";
  vae.save(path);
  const Vae back = Vae::load(path);
  CHECK(back == vae);
  CHECK(back.config().channels == ChannelConfig::Mask);
  CHECK(back.config().latent_dim == 4);
  std::filesystem::remove(path);
}

TEST_CASE("latent sweep shape") {
  const auto& ds = small_dataset();
  const auto inputs = dataset_inputs(ds, ChannelConfig::Mask);
  VaeConfig c = tiny_config(ChannelConfig::Mask);
  c.epochs = 1;
  const std::vector<std::size_t> dims{2, 4, 8};
  const auto t1 = latent_sweep(inputs, ds.size(), dims, c);
  REQUIRE(t1.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(t1[i].latent_dim == dims[i]);
  const auto t2 = latent_sweep(inputs, ds.size(), dims, c);
  for (std::size_t i = 0; i < 3; ++i) CHECK(t1[i].loss == t2[i].loss);
}

TEST_CASE("dataset and encodings round trip on disk") {
  const auto dir = std::filesystem::temp_directory_path() / "sre_ds_rt";
  std::filesystem::remove_all(dir);
  const auto ds = collect_frames(world::generate_world(world::Level::Easy, 2), 10, 4, 32);
  save_dataset(dir, ds);
  const auto back = load_dataset(dir);
  REQUIRE(back.size() == 10);
  CHECK(back.poses == ds.poses);
  for (std::size_t i = 0; i < 10; ++i) CHECK(back.frames[i].mask()[0] == ds.frames[i].mask()[0]);
  CHECK(std::filesystem::exists(dir / "frames" / "000009.ppm"));

  const auto enc = encode_dataset(Vae(tiny_config()), ds);
  CHECK(enc.rows() == 10);
  write_encodings_csv(dir / "enc.csv", enc);
  const auto enc2 = read_encodings_csv(dir / "enc.csv", enc.source);
  CHECK(enc2.values == enc.values);
  CHECK(enc2.dim == enc.dim);
  std::filesystem::remove_all(dir);
}

TEST_CASE("every collected pose is safe") {
  const auto w = world::generate_world(world::Level::Hard, 6);
  const auto ds = collect_frames(w, 50, 1, 32);
  for (const auto& p : ds.poses) CHECK(env::is_safe_pose(w, p));
}
