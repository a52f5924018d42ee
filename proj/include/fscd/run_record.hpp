#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace fscd {

// Everything needed to repeat a CLI job byte-for-byte: the subcommand, the
// seed, the fully resolved flag values (preset expansion applied), the
// per-epoch losses, metric aggregates, and the artifact paths (relative to
// the record's directory). Wall-clock data and worker counts are deliberately
// absent — they must never influence outputs.
struct RunRecord {
  std::string subcommand;
  uint64_t seed = 0;
  std::map<std::string, std::string> config;  // flag name -> value text
  std::vector<double> losses;
  std::map<std::string, double> metric_aggregates;
  std::vector<std::string> artifacts;
};

void emit_run_record(const RunRecord& record,
                     const std::filesystem::path& path);

// Rejects a record that lacks any of the six fields, naming the missing one.
RunRecord load_run_record(const std::filesystem::path& path);

// argv (without the program name) that reproduces the run: the subcommand,
// --seed, then every resolved flag.
std::vector<std::string> rerun_args(const RunRecord& record);

}  // namespace fscd
