#include "fscd/run_record.hpp"

#include <fstream>

#include <json.hpp>

#include "fscd/errors.hpp"

namespace fscd {

void emit_run_record(const RunRecord& record,
                     const std::filesystem::path& path) {
  nlohmann::json j{{"subcommand", record.subcommand},
                   {"seed", record.seed},
                   {"config", record.config},
                   {"losses", record.losses},
                   {"metric_aggregates", record.metric_aggregates},
                   {"artifacts", record.artifacts}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

RunRecord load_run_record(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("missing file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": malformed run record: " + e.what());
  }
  for (const char* key : {"subcommand", "seed", "config", "losses",
                          "metric_aggregates", "artifacts"})
    if (!j.contains(key))
      throw IoError(path.string() + ": run record missing field '" +
                    std::string(key) + "'");
  RunRecord r;
  r.subcommand = j.at("subcommand").get<std::string>();
  r.seed = j.at("seed").get<uint64_t>();
  r.config = j.at("config").get<std::map<std::string, std::string>>();
  r.losses = j.at("losses").get<std::vector<double>>();
  r.metric_aggregates =
      j.at("metric_aggregates").get<std::map<std::string, double>>();
  r.artifacts = j.at("artifacts").get<std::vector<std::string>>();
  return r;
}

std::vector<std::string> rerun_args(const RunRecord& record) {
  std::vector<std::string> args{record.subcommand, "--seed",
                                std::to_string(record.seed)};
  for (const auto& [k, v] : record.config) {
    args.push_back("--" + k);
    args.push_back(v);
  }
  return args;
}

}  // namespace fscd
