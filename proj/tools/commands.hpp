#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "run_config.hpp"

namespace hwnas::cli {

// Stable process exit codes.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kMissingTable = 3,
  kDataError = 4,
  kDecodeError = 5,
  kMissingArtifact = 6,
};

// A required input produced by an earlier command is absent.
class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommandOptions {
  bool json = false;
  std::optional<std::string> arch;     // decode output / retrain, eval, bench input
  std::optional<std::string> weights;  // eval input
  std::optional<std::string> run_dir;  // report input
};

int cmd_profile(const RunConfig& rc, const CommandOptions& opt);
int cmd_gen_data(const RunConfig& rc, const CommandOptions& opt);
int cmd_search(const RunConfig& rc, const CommandOptions& opt);
int cmd_decode(const RunConfig& rc, const CommandOptions& opt);
int cmd_retrain(const RunConfig& rc, const CommandOptions& opt);
int cmd_eval(const RunConfig& rc, const CommandOptions& opt);
int cmd_bench(const RunConfig& rc, const CommandOptions& opt);
int cmd_report(const RunConfig& rc, const CommandOptions& opt);

// RFC 4180 field quoting.
std::string csv_field(const std::string& value);

}  // namespace hwnas::cli
