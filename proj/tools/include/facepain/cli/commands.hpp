#pragma once

// Command implementations behind the `facepain` executable. Each returns a
// process exit code and writes human-readable output to the given streams.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "facepain/experiment.hpp"
#include "facepain/synth.hpp"

namespace facepain::cli {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2 };

/// Raised for bad invocations (unknown kind, malformed config); maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  bool force = false;
  bool allow_partial = false;
};

struct RunConfig {
  std::optional<std::filesystem::path> data_root;  // existing tree
  std::optional<SynthConfig> synth;                 // or: generate into <output>/data
  SynthLayout synth_layout = SynthLayout::Tree;
  std::filesystem::path output;
  ExperimentConfig experiment;
};

SynthConfig synth_config_from_json(std::string_view text, SynthLayout* layout = nullptr);
RunConfig run_config_from_json(std::string_view text);

/// Loads every recording under `root` and builds one dataset per kind.
Datasets load_datasets(const std::filesystem::path& root, std::span<const FeatureKind> kinds,
                       std::ostream& log);

int cmd_validate(const std::filesystem::path& root, std::ostream& out);
int cmd_featurize(const std::filesystem::path& root, std::string_view kind, const std::filesystem::path& out_dir,
                  const GlobalOptions& options, std::ostream& out);
int cmd_synth(const std::filesystem::path& config_file, const std::filesystem::path& out_root,
              const GlobalOptions& options, std::ostream& out);
int cmd_run(const std::filesystem::path& config_file, const GlobalOptions& options, std::ostream& out,
            std::optional<std::filesystem::path> output_override = std::nullopt);
int cmd_report(const std::filesystem::path& report_json, std::ostream& out);

/// Runs the command-line parser and dispatches; used by main() and tests.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace facepain::cli
