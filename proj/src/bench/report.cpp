#include "sre/bench/report.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

#include "sre/bench/training.hpp"

namespace sre::bench {

namespace fs = std::filesystem;

namespace {

// Pads to `width` display columns ("±" is two bytes in UTF-8).
std::string cell(const std::string& s, std::size_t width) {
  const auto cols = static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) { return (c & 0xC0) != 0x80; }));
  return s + std::string(cols < width ? width - cols : 1, ' ');
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return nlohmann::json::parse(in);
}

std::string run_label(const fs::path& root, const RunDirectory& r) {
  auto rel = fs::relative(r.dir, root).generic_string();
  if (rel == ".") rel = r.dir.filename().string();
  std::replace(rel.begin(), rel.end(), '/', '_');
  return rel.empty() ? "run" : rel;
}

}  // namespace

std::vector<RunDirectory> find_runs(const fs::path& root) {
  std::vector<fs::path> dirs;
  if (!fs::is_directory(root)) return {};
  if (fs::exists(root / "manifest.json")) dirs.push_back(root);
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().filename() == "manifest.json" && e.path().parent_path() != root)
      dirs.push_back(e.path().parent_path());
  std::sort(dirs.begin(), dirs.end());

  std::vector<RunDirectory> runs;
  for (const auto& d : dirs) {
    const auto m = read_json(d / "manifest.json");
    RunDirectory r;
    r.dir = d;
    r.algorithm = m["config"].value("algo", "?");
    r.level = m["config"].value("level", "?");
    for (const auto& run : m.value("runs", nlohmann::json::array())) {
      fs::path p = run.value("metrics", "");
      if (!p.empty() && fs::exists(p)) r.metrics.push_back(p);
    }
    for (const auto& e : fs::directory_iterator(d)) {
      const auto name = e.path().filename().string();
      if (e.is_regular_file() && name.rfind("eval_", 0) == 0 && e.path().extension() == ".json")
        r.evaluations.push_back(e.path());
    }
    std::sort(r.evaluations.begin(), r.evaluations.end());
    runs.push_back(std::move(r));
  }
  return runs;
}

std::vector<fs::path> write_report(const fs::path& root, const fs::path& out_dir) {
  const auto runs = find_runs(root);
  if (runs.empty()) throw std::runtime_error("no runs (manifest.json) under " + root.string());

  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  std::ostringstream gp;
  gp << "# gnuplot -p plot.gp\nset datafile missing 'nan'\nset key outside\n"
     << "set multiplot layout 2,1\nset xlabel 'step'\nset ylabel 'episodic return (MA50)'\nplot \\\n";
  std::vector<std::pair<std::string, std::string>> curves;  // data file, title

  std::ostringstream table;
  table << std::left << std::setw(10) << "algo" << std::setw(8) << "train" << std::setw(8) << "test" << std::setw(16)
        << "return" << std::setw(16) << "cost" << std::setw(14) << "final MA50" << "final cost rate\n";

  for (const auto& r : runs) {
    const auto label = run_label(root, r);
    std::vector<double> final_ma, final_rate;
    for (std::size_t i = 0; i < r.metrics.size(); ++i) {
      const auto rows = read_metrics_csv(r.metrics[i]);
      const auto seed_dir = r.metrics[i].parent_path().filename().string();
      const auto dat = out_dir / label / (seed_dir + ".dat");
      fs::create_directories(dat.parent_path());
      std::ofstream out(dat);
      out << "# step ep_ret_ma50 cost_rate_total cost_rate_tight cost_rate_loose\n";
      for (const auto& row : rows)
        out << row.step << ' ' << row.ep_ret_ma50 << ' ' << row.cost_rate_total << ' ' << row.cost_rate_tight << ' '
            << row.cost_rate_loose << '\n';
      written.push_back(dat);
      curves.emplace_back(fs::relative(dat, out_dir).generic_string(), label + " " + seed_dir);
      if (!rows.empty()) {
        final_ma.push_back(rows.back().ep_ret_ma50);
        final_rate.push_back(rows.back().cost_rate_total);
      }
    }
    const auto ma = mean_std(final_ma), rate = mean_std(final_rate);
    auto train_cols = [&](std::ostream& o) {
      o << cell(format_mean_std(ma), 14) << format_mean_std({rate.mean * 1000, rate.std * 1000}) << " /1k\n";
    };
    if (r.evaluations.empty()) {
      table << std::setw(10) << r.algorithm << std::setw(8) << r.level << std::setw(8) << "-" << std::setw(16) << "-"
            << std::setw(16) << "-";
      train_cols(table);
    }
    for (const auto& e : r.evaluations) {
      const auto j = read_json(e);
      auto test = e.stem().string().substr(5);
      table << std::setw(10) << r.algorithm << std::setw(8) << r.level << std::setw(8) << test
            << cell(j["summary"]["return"].get<std::string>(), 16) << cell(j["summary"]["cost"].get<std::string>(), 16);
      train_cols(table);
    }
  }

  for (int col : {2, 3}) {
    if (col == 3) gp << "set ylabel 'cost rate'\nplot \\\n";
    for (std::size_t i = 0; i < curves.size(); ++i)
      gp << "  '" << curves[i].first << "' u 1:" << col << " w l t '" << curves[i].second << "'"
         << (i + 1 < curves.size() ? ", \\\n" : "\n");
  }
  gp << "unset multiplot\n";
  std::ofstream(out_dir / "plot.gp") << gp.str();
  std::ofstream(out_dir / "summary.txt") << table.str();
  written.push_back(out_dir / "plot.gp");
  written.push_back(out_dir / "summary.txt");
  return written;
}

}  // namespace sre::bench
