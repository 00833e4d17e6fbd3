#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lrcv/linalg.hpp"
#include "lrcv/mlcv.hpp"
#include "lrcv/mlmc.hpp"
#include "lrcv/models.hpp"

namespace lrcv::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kSchemaVersion = 1;

enum class CostMode { declared, measured };

struct RankPolicy {
  enum class Kind { fixed, tolerance };
  Kind kind = Kind::fixed;
  std::vector<std::size_t> ranks;  // one entry (all levels) or one per level l >= 1
  double tolerance = 0.0;

  linalg::Termination for_level(std::size_t level) const;
};

struct RunConfig {
  std::string model_name;
  nlohmann::json model_params = nlohmann::json::object();
  std::vector<std::size_t> levels;  // empty: all levels of the model
  std::vector<double> epsilons;
  std::vector<mlmc::Method> methods;
  RankPolicy rank_policy;
  double s2 = mlcv::kDefaultS2;
  std::size_t pilot_samples = 200;
  std::uint64_t master_seed = 0;
  CostMode cost_mode = CostMode::declared;
  std::filesystem::path output_dir = "lrcv_out";
  unsigned threads = 1;
  bool update_variances = false;
  std::optional<double> reference;  // reference mean for relative-error curves

  /// Canonical echo of every setting that influences results (not output_dir/threads).
  nlohmann::json echo() const;
  std::string hash() const;
};

/// Validates a parsed config; errors name the offending field path.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& file);

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<unsigned> threads;
};
void apply_overrides(RunConfig& cfg, const Overrides& o);

/// The configured model, restricted to the configured level subset.
std::shared_ptr<const models::LevelHierarchy> make_hierarchy(const RunConfig& cfg);

/// Pilot run: statistics, bases, rates and plans. Writes pilot.json,
/// pilot_samples.json and bases/.
void cmd_pilot(const RunConfig& cfg, std::ostream& log);

/// Main runs for one method (or every configured method) and every epsilon.
void cmd_estimate(const RunConfig& cfg, std::optional<mlmc::Method> method, std::ostream& log);

/// Plan-based cost table compare.csv.
void cmd_compare(const RunConfig& cfg, std::ostream& log);

/// Entry point shared by the executable and the tests. Returns the exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Shortest decimal form that round-trips (used in file names and CSV).
std::string format_double(double x);

}  // namespace lrcv::cli
