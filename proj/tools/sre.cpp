// sre: command-line front end (gen, collect, train-vae, re-analyze, train, eval, report).
//
// Exit codes: 0 success, 2 missing or unwritable resource, 3 invalid configuration.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "sre/bench/report.hpp"
#include "sre/bench/training.hpp"
#include "sre/vision/dataset.hpp"
#include "sre/vision/relative_entropy.hpp"

namespace fs = std::filesystem;
using namespace sre;

namespace {

constexpr int kExitResource = 2;
constexpr int kExitConfig = 3;

struct ResourceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// `key = value` lines, `#` comments.
std::vector<std::pair<std::string, std::string>> read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ResourceError("cannot read config file " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int n = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path.string() + ":" + std::to_string(n) + ": expected key = value");
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

void ensure_writable_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  const auto probe = dir / ".sre_write_probe";
  std::ofstream f(probe);
  if (ec || !f) throw ResourceError("cannot write to " + dir.string());
  f.close();
  fs::remove(probe, ec);
}

world::Level level_of(const std::string& s) {
  const auto l = world::parse_level(s);
  if (!l) throw std::invalid_argument("unknown level: " + s);
  return *l;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ResourceError("cannot write " + p.string());
  out << text;
}

vision::FrameDataset load_frames(const fs::path& dir) {
  if (!fs::exists(dir / "index.json")) throw ResourceError("no dataset at " + dir.string());
  return vision::load_dataset(dir);
}

const std::vector<std::string> kLevels{"easy", "medium", "hard"};
const std::vector<std::string> kChannels{"rgb", "mask", "rgbmask"};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safe riverine environment toolkit"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Top-down preview and world JSON");
  std::string gen_level = "easy", gen_out = ".";
  std::uint64_t gen_seed = 0;
  gen->add_option("--level", gen_level)->check(CLI::IsMember(kLevels));
  gen->add_option("--seed", gen_seed);
  gen->add_option("--out", gen_out);

  // collect
  auto* collect = app.add_subcommand("collect", "Frame/mask pairs from random safe poses");
  std::string col_level = "medium", col_out = "dataset";
  std::uint64_t col_seed = 0;
  std::size_t col_count = 2000, col_res = 32;
  collect->add_option("--level", col_level)->check(CLI::IsMember(kLevels));
  collect->add_option("--seed", col_seed, "world and pose-sampler seed");
  collect->add_option("--count", col_count)->check(CLI::PositiveNumber);
  collect->add_option("--resolution", col_res)->check(CLI::IsMember({32, 64, 128}));
  collect->add_option("--out", col_out);

  // train-vae
  auto* tvae = app.add_subcommand("train-vae", "Train a VAE on a collected dataset");
  std::string tv_data, tv_out = "vae", tv_channels = "rgbmask", tv_sweep;
  vision::VaeConfig tv_cfg;
  tvae->add_option("--data", tv_data)->required();
  tvae->add_option("--out", tv_out);
  tvae->add_option("--channels", tv_channels)->check(CLI::IsMember(kChannels));
  tvae->add_option("--latent-dim", tv_cfg.latent_dim)->check(CLI::PositiveNumber);
  tvae->add_option("--epochs", tv_cfg.epochs)->check(CLI::PositiveNumber);
  tvae->add_option("--seed", tv_cfg.seed);
  tvae->add_option("--beta", tv_cfg.beta);
  tvae->add_option("--sweep", tv_sweep, "comma-separated latent dims; writes sweep.csv instead of one model");

  // re-analyze
  auto* rea = app.add_subcommand("re-analyze", "Relative entropy between channel-config encodings");
  std::string re_data, re_out = "re";
  vision::VaeConfig re_cfg;
  rea->add_option("--data", re_data)->required();
  rea->add_option("--out", re_out);
  rea->add_option("--latent-dim", re_cfg.latent_dim)->check(CLI::PositiveNumber);
  rea->add_option("--epochs", re_cfg.epochs)->check(CLI::PositiveNumber);
  rea->add_option("--seed", re_cfg.seed);

  // train
  auto* train = app.add_subcommand("train", "Train safe RL agents");
  std::string tr_config, tr_algo, tr_level, tr_out, tr_encoder, tr_channels;
  std::optional<std::uint64_t> tr_seed, tr_seeds, tr_steps;
  std::optional<std::size_t> tr_latent, tr_res;
  std::vector<std::string> tr_set;
  train->add_option("--config", tr_config, "key = value file");
  train->add_option("--algo", tr_algo);
  train->add_option("--level", tr_level);
  train->add_option("--seed", tr_seed, "single seed");
  train->add_option("--seeds", tr_seeds, "seed count (0..n-1)");
  train->add_option("--steps", tr_steps);
  train->add_option("--out", tr_out);
  train->add_option("--encoder", tr_encoder, "pretrained VAE checkpoint");
  train->add_option("--latent-dim", tr_latent);
  train->add_option("--channels", tr_channels);
  train->add_option("--resolution", tr_res);
  train->add_option("--set", tr_set, "extra key=value overrides");

  // eval
  auto* ev = app.add_subcommand("eval", "Greedy evaluation of a trained run");
  std::string ev_run, ev_level, ev_out;
  std::size_t ev_episodes = 20;
  std::optional<std::size_t> ev_seeds;
  ev->add_option("--run", ev_run, "run directory (manifest.json)")->required();
  ev->add_option("--level", ev_level, "test level (default: training level)");
  ev->add_option("--episodes", ev_episodes, "episodes per seed")->check(CLI::PositiveNumber);
  ev->add_option("--seeds", ev_seeds, "use the first n seeds of the run");
  ev->add_option("--out", ev_out, "default: the run directory");

  // report
  auto* rep = app.add_subcommand("report", "Plot data and summary table from runs");
  std::string rep_runs, rep_out = "report";
  rep->add_option("--runs", rep_runs)->required();
  rep->add_option("--out", rep_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kExitConfig;
  }

  try {
    if (*gen) {
      const auto level = level_of(gen_level);
      ensure_writable_dir(gen_out);
      const auto w = world::generate_world(level, gen_seed);
      const std::string stem = "world_" + gen_level + "_" + std::to_string(gen_seed);
      world::write_ppm(fs::path(gen_out) / (stem + ".ppm"), world::render_top_down(w));
      write_text(fs::path(gen_out) / (stem + ".json"), world::world_spec_json(w.spec()) + "\n");
      std::cout << (fs::path(gen_out) / stem).string() << ".{ppm,json}\n";
    } else if (*collect) {
      ensure_writable_dir(col_out);
      const auto w = world::generate_world(level_of(col_level), col_seed);
      const auto ds = vision::collect_frames(w, col_count, col_seed, col_res);
      vision::save_dataset(col_out, ds);
      std::cout << ds.size() << " pairs in " << col_out << "\n";
    } else if (*tvae) {
      const auto ds = load_frames(tv_data);
      tv_cfg.channels = *world::parse_channels(tv_channels);
      tv_cfg.resolution = ds.resolution;
      ensure_writable_dir(tv_out);
      const auto inputs = vision::dataset_inputs(ds, tv_cfg.channels);
      if (!tv_sweep.empty()) {
        std::vector<std::size_t> dims;
        std::stringstream ss(tv_sweep);
        for (std::string item; std::getline(ss, item, ',');) dims.push_back(std::stoul(item));
        const auto rows = vision::latent_sweep(inputs, ds.size(), dims, tv_cfg);
        std::ostringstream csv;
        csv << "latent_dim,reconstruction_loss\n";
        for (const auto& r : rows) csv << r.latent_dim << ',' << r.loss << '\n';
        write_text(fs::path(tv_out) / "sweep.csv", csv.str());
        std::cout << csv.str();
      } else {
        const auto trained = vision::train_vae(inputs, ds.size(), tv_cfg);
        trained.vae.save(fs::path(tv_out) / "vae.ndm");
        std::ostringstream csv;
        csv << "epoch,loss\n";
        for (std::size_t i = 0; i < trained.loss_curve.size(); ++i) csv << i + 1 << ',' << trained.loss_curve[i] << '\n';
        write_text(fs::path(tv_out) / "loss_curve.csv", csv.str());
        const double recon = vision::reconstruction_loss(trained.vae, inputs, ds.size());
        write_text(fs::path(tv_out) / "reconstruction.json",
                   nlohmann::json{{"reconstruction_loss", recon}, {"samples", ds.size()}}.dump(2) + "\n");
        std::cout << "reconstruction loss " << recon << "\n";
      }
    } else if (*rea) {
      const auto ds = load_frames(re_data);
      re_cfg.resolution = ds.resolution;
      ensure_writable_dir(re_out);
      const world::ChannelConfig order[] = {world::ChannelConfig::RGB, world::ChannelConfig::Mask,
                                            world::ChannelConfig::RGBMask};
      std::vector<vision::EncodingDataset> enc;
      for (auto ch : order) {
        auto cfg = re_cfg;
        cfg.channels = ch;
        const auto trained = vision::train_vae(vision::dataset_inputs(ds, ch), ds.size(), cfg);
        enc.push_back(vision::encode_dataset(trained.vae, ds));
        vision::write_encodings_csv(fs::path(re_out) / ("encodings_" + std::string(world::to_string(ch)) + ".csv"),
                                    enc.back());
      }
      nlohmann::json j;
      std::ostringstream table;
      table << "P \\ Q     rgb      mask     rgbmask\n";
      for (std::size_t p = 0; p < 3; ++p) {
        table << std::left << std::setw(9) << world::to_string(order[p]);
        for (std::size_t q = 0; q < 3; ++q) {
          if (p == q) {
            table << std::setw(9) << "-";
            continue;
          }
          const auto r = vision::relative_entropy(enc[p], enc[q]);
          j[std::string(world::to_string(order[p]))][std::string(world::to_string(order[q]))] =
              nlohmann::json::parse(vision::re_result_json(r));
          std::ostringstream cell;
          cell << std::fixed << std::setprecision(3) << r.mean;
          table << std::setw(9) << cell.str();
        }
        table << '\n';
      }
      write_text(fs::path(re_out) / "relative_entropy.json", j.dump(2) + "\n");
      write_text(fs::path(re_out) / "relative_entropy.txt", table.str());
      std::cout << table.str();
    } else if (*train) {
      bench::RunConfig cfg;
      cfg.out_dir = "runs";
      if (!tr_config.empty())
        for (const auto& [k, v] : read_config_file(tr_config)) bench::apply_config_entry(cfg, k, v);
      auto set = [&](const std::string& k, const std::string& v) { bench::apply_config_entry(cfg, k, v); };
      if (!tr_algo.empty()) set("algo", tr_algo);
      if (!tr_level.empty()) set("level", tr_level);
      if (tr_seed && tr_seeds) throw std::invalid_argument("use either --seed or --seeds");
      if (tr_seed) set("seeds", std::to_string(*tr_seed));
      if (tr_seeds) {
        if (*tr_seeds == 0) throw std::invalid_argument("--seeds must be positive");
        std::string list;
        for (std::uint64_t i = 0; i < *tr_seeds; ++i) list += (i ? "," : "") + std::to_string(i);
        set("seeds", list);
      }
      if (tr_steps) set("steps", std::to_string(*tr_steps));
      if (!tr_out.empty()) set("out", tr_out);
      if (!tr_encoder.empty()) set("encoder", tr_encoder);
      if (tr_latent) set("latent_dim", std::to_string(*tr_latent));
      if (!tr_channels.empty()) set("channels", tr_channels);
      if (tr_res) set("resolution", std::to_string(*tr_res));
      for (const auto& kv : tr_set) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value");
        set(kv.substr(0, eq), kv.substr(eq + 1));
      }
      if (!cfg.encoder.empty() && !fs::exists(cfg.encoder)) throw ResourceError("encoder not found: " + cfg.encoder.string());
      ensure_writable_dir(cfg.out_dir);
      const auto runs = bench::run_training(cfg);
      for (const auto& r : runs) std::cout << r.metrics_csv.string() << "\n";
    } else if (*ev) {
      const fs::path run_dir = ev_run;
      if (!fs::exists(run_dir / "manifest.json")) throw ResourceError("no manifest.json in " + run_dir.string());
      std::ifstream min(run_dir / "manifest.json");
      const auto manifest = nlohmann::json::parse(min);
      bench::RunConfig cfg;
      for (const auto& [k, v] : manifest["config"].items()) bench::apply_config_entry(cfg, k, v.get<std::string>());
      const fs::path enc_path = manifest.value("encoder_path", bench::encoder_path(cfg).string());
      if (!fs::exists(enc_path)) throw ResourceError("encoder not found: " + enc_path.string());
      const auto encoder = std::make_shared<const vision::Vae>(vision::Vae::load(enc_path));
      const auto level = ev_level.empty() ? cfg.level : level_of(ev_level);
      std::size_t n = manifest["runs"].size();
      if (ev_seeds) {
        if (*ev_seeds == 0 || *ev_seeds > n) throw std::invalid_argument("--seeds must be in 1.." + std::to_string(n));
        n = *ev_seeds;
      }
      std::vector<bench::EvalResult> parts;
      for (std::size_t i = 0; i < n; ++i) {
        const auto& r = manifest["runs"][i];
        const fs::path ckpt = r["final_checkpoint"].get<std::string>();
        if (!fs::exists(ckpt)) throw ResourceError("checkpoint not found: " + ckpt.string());
        const auto agent = bench::load_agent(ckpt, cfg.algo);
        const std::uint64_t seed = r["seed"].get<std::uint64_t>();
        parts.push_back(bench::evaluate(agent.policy, encoder, level, ev_episodes, std::span(&seed, 1), cfg.env));
      }
      const auto result = bench::merge_eval(parts);
      const fs::path out = ev_out.empty() ? run_dir : fs::path(ev_out);
      ensure_writable_dir(out);
      const auto file = out / ("eval_" + std::string(world::to_string(level)) + ".json");
      write_text(file, bench::eval_json(result) + "\n");
      std::cout << "return " << bench::format_mean_std(result.ret) << "  cost " << bench::format_mean_std(result.cost)
                << "  (" << result.episodes.size() << " episodes) -> " << file.string() << "\n";
    } else if (*rep) {
      if (bench::find_runs(rep_runs).empty()) throw ResourceError("no runs under " + rep_runs);
      ensure_writable_dir(rep_out);
      bench::write_report(rep_runs, rep_out);
      std::ifstream s(fs::path(rep_out) / "summary.txt");
      std::cout << s.rdbuf();
    }
  } catch (const ResourceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitResource;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitResource;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitResource;
  }
  return 0;
}
