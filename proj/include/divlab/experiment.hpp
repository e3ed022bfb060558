#pragma once

// Experiment configuration, orchestration and result files for the divlab
// command line tool.
//
// Exit codes: 0 success, 1 selftest failure, 2 configuration or usage error,
// 3 numeric abort (a run recorded a non-finite loss; outputs are still
// written), 4 file system error.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "divlab/objectives.hpp"

namespace divlab {

enum class Command { MiBench, VarianceLab, SslDemo, Selftest };

std::string_view to_string(Command c);
Command parse_command(std::string_view name);

inline constexpr int kExitOk = 0;
inline constexpr int kExitSelftestFailed = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitIo = 4;

struct ExperimentConfig {
  Command command = Command::MiBench;
  ObjectiveKind objective = ObjectiveKind::MLCPC;
  std::vector<double> alphas;  // one run per value
  double gamma = 2.0;
  double tau = 1.0;
  std::size_t dim = 20;
  std::size_t batch = 128;
  std::size_t hidden = 256;
  double lr = 1e-3;
  std::vector<std::uint64_t> seeds{1};
  std::size_t levels = 4;
  std::size_t steps_per_level = 4000;
  double initial_mi = 2.0;
  std::size_t reps = 1000;
  std::vector<double> kl{1.0, 2.0, 4.0, 8.0};
  std::size_t epochs = 50;
  bool hard = false;
  std::size_t local_views = 0;
  std::string out;

  /// Objective spec for one entry of alphas.
  ObjectiveSpec objective_spec(double alpha) const;
  /// Throws ConfigError for invalid objectives, empty lists, zero counts or a
  /// missing output directory on commands that write files.
  void validate() const;
};

/// Flat key/value view of a config, in a fixed key order. Keys use '_'.
std::vector<std::pair<std::string, std::string>> serialize(const ExperimentConfig& config);

/// Builds a config from key/value pairs on top of the command's defaults.
/// Keys may use '-' or '_'. Throws ConfigError for unknown keys or values
/// that do not parse.
ExperimentConfig config_from_map(const std::map<std::string, std::string>& values);

/// Parses `key = value` lines; '#' starts a comment line. Throws ConfigError
/// on malformed lines or duplicate keys.
std::map<std::string, std::string> parse_key_values(std::istream& in, const std::string& source);

/// Accepts a real number or a fraction "p/q".
double parse_alpha(std::string_view text);

struct ParseOutcome {
  ExperimentConfig config;
  bool help = false;
  std::string help_text;
};

/// divlab <command> [flags]. A --config file is read first and flags
/// override its keys. Throws ConfigError on usage errors.
ParseOutcome parse_config(int argc, const char* const* argv);

/// Reads the `# config:` header lines of a CSV written by run().
ExperimentConfig config_from_csv_header(const std::filesystem::path& csv);

struct RunOutcome {
  int exit_code = kExitOk;
  std::vector<std::filesystem::path> files;
};

/// Executes the configured experiment, writing CSV and JSON files under
/// config.out. Independent cells run on threads_from_env() workers.
/// Progress and the selftest table go to `log`.
RunOutcome run(const ExperimentConfig& config, std::ostream& log);

struct SelftestResult {
  std::string module;
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Quick checks of documented behaviour across all modules.
std::vector<SelftestResult> run_selftest();

}  // namespace divlab
