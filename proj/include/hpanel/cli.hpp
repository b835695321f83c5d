#pragma once

// Command-line workflows. Every emitted file starts with a provenance block
// (software version, command, seed, config hash); numeric payloads are
// deterministic in the configuration and independent of the worker count.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hpanel/config.hpp"
#include "hpanel/dgp.hpp"
#include "hpanel/inference.hpp"
#include "hpanel/selection.hpp"

namespace hpanel {

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 2,
  kExitNumerical = 3,
  kExitUsage = 64,
};

// Requested factor counts; std::nullopt marks a component to be selected.
struct CountsSpec {
  std::optional<int> global;
  std::optional<int> country;
  std::optional<int> industry;

  bool any_auto() const { return !global || !country || !industry; }
};

// "2,auto,auto" style: global, country, industry; each an integer >= 0 or "auto".
CountsSpec parse_counts_spec(const std::string& text);

struct RunConfig {
  std::string command;
  DgpConfig dgp;
  FitOptions fit;
  SelectionOptions selection;
  BootstrapOptions bootstrap;
  int replications = 200;
  int workers = 1;
  std::string out = ".";
  std::string data;  // input panel CSV
  std::optional<CountsSpec> counts;
  std::string axis = "both";  // jackknife target axis: country | industry | both
  std::string index;          // jackknife target label; empty means every unit
  std::uint64_t seed = 1;
  ConfigMap effective;        // merged file + flag values as given
};

// Builds a RunConfig from merged key/value settings. Unknown keys and
// malformed values raise ValidationError.
RunConfig make_run_config(const std::string& command, const ConfigMap& values);

const char* software_version();

// Runs one subcommand; args excludes the program name. Messages go to out
// and err; the return value is an ExitCode.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hpanel
