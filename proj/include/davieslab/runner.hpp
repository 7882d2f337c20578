#pragma once

#include <optional>
#include <string>

namespace dlab {

struct RunOverrides {
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> suites;  // comma-separated, replaces the config list
};

// Executes the suites selected in the JSON config and writes CSV/JSON
// artifacts plus a manifest. Exit codes: 0 all pass, 1 verdict failure,
// 2 schema violation, 3 capability cap exceeded.
int run_experiment(const std::string& config_path, const RunOverrides& overrides = {});

}  // namespace dlab
