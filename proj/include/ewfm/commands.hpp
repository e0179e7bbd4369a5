#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace ewfm {

inline constexpr std::string_view kVersion = "0.1.0";
inline constexpr const char* kOutputDirEnv = "EWFM_OUTPUT_DIR";

enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitRuntime = 3 };

/// Run directory: $EWFM_OUTPUT_DIR when set, else the config's output_dir.
std::filesystem::path resolve_output_dir(const std::string& configured);

/// Flat `key = value` file (manifest, report).
std::map<std::string, std::string> read_key_value_file(const std::filesystem::path& path);

struct TrainOptions {
  std::filesystem::path config;
  std::string algo = "iewfm";
  std::size_t log_every = 10;  // epochs between progress lines; 0 silences them
};
int cmd_train(const TrainOptions& opts, std::ostream& out, std::ostream& err);

struct SampleOptions {
  std::filesystem::path checkpoint;
  std::size_t n = 1000;
  bool with_logdensity = false;
  std::filesystem::path out_csv;
  std::uint64_t seed = 0;
  std::size_t ode_steps = 100;
};
int cmd_sample(const SampleOptions& opts, std::ostream& out, std::ostream& err);

struct EvaluateOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path reference;
  std::filesystem::path config;
  /// Defaults to the checkpoint's directory.
  std::optional<std::filesystem::path> out_dir;
};
int cmd_evaluate(const EvaluateOptions& opts, std::ostream& out, std::ostream& err);

struct OracleOptions {
  std::filesystem::path config;
  std::filesystem::path out_csv;
};
int cmd_oracle(const OracleOptions& opts, std::ostream& out, std::ostream& err);

/// Histogram plot data (energy, and pair distance for particle systems) for
/// two sample files under the config's system.
struct ExportOptions {
  std::filesystem::path config;
  std::filesystem::path samples_a;
  std::filesystem::path samples_b;
  std::filesystem::path out_dir;
};
int cmd_export(const ExportOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace ewfm
