#pragma once

#include "armpc/simulation.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <ostream>
#include <string>

namespace armpc {

/// Bumped whenever the CSV column set changes.
inline constexpr int kRunLogSchemaVersion = 1;

/// One row per step record. The first line is a "# armpc run log vN"
/// comment followed by the column header.
void write_run_csv(std::ostream& os, const RunLog& log);
std::string run_csv(const RunLog& log);

nlohmann::json run_metrics_json(const RunMetrics& m);
/// Sidecar with the config, metrics and every set snapshot.
nlohmann::json run_sidecar_json(const RunLog& log, const nlohmann::json& config);

/// FNV-1a hash of the CSV text.
std::uint64_t run_hash(const RunLog& log);

/// Writes <dir>/<stem>.csv and <dir>/<stem>.json.
void write_run_files(const std::string& dir, const std::string& stem, const RunLog& log, const nlohmann::json& config);

} // namespace armpc
