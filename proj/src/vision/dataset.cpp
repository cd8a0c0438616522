#include "sre/vision/dataset.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

namespace sre::vision {

namespace {

std::string frame_stem(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06zu", i);
  return buf;
}

}  // namespace

FrameDataset collect_frames(const world::World& w, std::size_t count, std::uint64_t seed, std::size_t resolution,
                            const env::EnvConfig& config) {
  if (count == 0) throw std::invalid_argument("collect: count must be at least 1");
  if (!world::valid_resolution(resolution)) throw std::invalid_argument("resolution must be 32, 64 or 128");
  FrameDataset ds;
  ds.level = std::string(world::to_string(w.spec().level));
  ds.seed = seed;
  ds.resolution = resolution;
  ds.frames.reserve(count);
  ds.poses.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const world::Pose p = env::sample_safe_pose(w, mix_seed(seed, i), config);
    ds.poses.push_back(p);
    ds.frames.push_back(world::render_frame(w, p, resolution, config.camera));
  }
  return ds;
}

void save_dataset(const std::filesystem::path& dir, const FrameDataset& ds) {
  std::filesystem::create_directories(dir / "frames");
  nlohmann::ordered_json index;
  index["level"] = ds.level;
  index["seed"] = ds.seed;
  index["resolution"] = ds.resolution;
  index["count"] = ds.size();
  auto& entries = index["entries"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::string stem = frame_stem(i);
    world::write_frame_ppm(dir / "frames" / (stem + ".ppm"), ds.frames[i]);
    world::write_mask_pgm(dir / "frames" / (stem + ".pgm"), ds.frames[i]);
    const auto& p = ds.poses[i];
    entries.push_back({{"rgb", "frames/" + stem + ".ppm"},
                       {"mask", "frames/" + stem + ".pgm"},
                       {"pose", {p.x, p.y, p.z, p.yaw}}});
  }
  std::ofstream os(dir / "index.json");
  if (!os) throw std::runtime_error("cannot write " + (dir / "index.json").string());
  os << index.dump(2) << '\n';
}

FrameDataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream is(dir / "index.json");
  if (!is) throw std::runtime_error("missing dataset index " + (dir / "index.json").string());
  const auto index = nlohmann::json::parse(is);
  FrameDataset ds;
  ds.level = index.at("level").get<std::string>();
  ds.seed = index.at("seed").get<std::uint64_t>();
  ds.resolution = index.at("resolution").get<std::size_t>();
  for (const auto& e : index.at("entries")) {
    ds.frames.push_back(world::read_frame(dir / e.at("rgb").get<std::string>(), dir / e.at("mask").get<std::string>()));
    const auto& p = e.at("pose");
    ds.poses.push_back({p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>(), p.at(3).get<double>()});
  }
  if (ds.frames.size() != index.at("count").get<std::size_t>()) throw std::runtime_error("dataset index count mismatch");
  return ds;
}

std::vector<double> dataset_inputs(const FrameDataset& ds, ChannelConfig channels) {
  std::vector<double> out;
  if (ds.frames.empty()) return out;
  out.reserve(ds.size() * world::channel_count(channels) * ds.resolution * ds.resolution);
  for (const auto& f : ds.frames) {
    const auto v = frame_input(f, channels);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

EncodingDataset encode_dataset(const Vae& vae, const FrameDataset& ds) {
  EncodingDataset enc;
  enc.source = vae.config().channels;
  enc.dim = vae.config().latent_dim;
  const auto inputs = dataset_inputs(ds, enc.source);
  const std::size_t n = vae.config().input_size();
  constexpr std::size_t chunk = 128;
  for (std::size_t start = 0; start < ds.size(); start += chunk) {
    const std::size_t rows = std::min(chunk, ds.size() - start);
    const auto mu = vae.encode_batch(std::span(inputs).subspan(start * n, rows * n), rows);
    enc.values.insert(enc.values.end(), mu.begin(), mu.end());
  }
  return enc;
}

void write_encodings_csv(const std::filesystem::path& path, const EncodingDataset& enc) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t j = 0; j < enc.dim; ++j) os << (j ? "," : "") << 'z' << j;
  os << '\n';
  char buf[32];
  for (std::size_t i = 0; i < enc.rows(); ++i) {
    for (std::size_t j = 0; j < enc.dim; ++j) {
      const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, enc.at(i, j));
      (void)ec;
      if (j) os << ',';
      os.write(buf, end - buf);
    }
    os << '\n';
  }
}

EncodingDataset read_encodings_csv(const std::filesystem::path& path, ChannelConfig source) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  EncodingDataset enc;
  enc.source = source;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty encodings file " + path.string());
  enc.dim = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::size_t cols = 0;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p < end) {
      double v = 0.0;
      const auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) throw std::runtime_error("malformed number in " + path.string());
      enc.values.push_back(v);
      ++cols;
      p = next;
      if (p < end && *p == ',') ++p;
    }
    if (cols != enc.dim) throw std::runtime_error("ragged row in " + path.string());
  }
  return enc;
}

}  // namespace sre::vision
