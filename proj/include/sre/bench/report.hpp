#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace sre::bench {

struct RunDirectory {
  std::filesystem::path dir;
  std::string algorithm, level;
  std::vector<std::filesystem::path> metrics;     // one per seed
  std::vector<std::filesystem::path> evaluations;  // eval_<level>.json files
};

/// `root` itself and its subdirectories (any depth) holding a manifest.json.
std::vector<RunDirectory> find_runs(const std::filesystem::path& root);

/// Writes plot data (<run>/seed_<s>.dat: step, return MA50, cost rates), a
/// gnuplot script and summary.txt under out_dir. Throws std::runtime_error
/// before writing anything when `root` holds no runs.
std::vector<std::filesystem::path> write_report(const std::filesystem::path& root,
                                                const std::filesystem::path& out_dir);

}  // namespace sre::bench
