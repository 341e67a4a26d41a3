#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace crossres {

/// Renders a markdown comparison of every model bundle found directly
/// under `run_dir` (directories containing a summary.json): TAR@FAR per
/// resolution, identification metrics, and each model's cross-resolution
/// matrix.
std::string render_report(const std::filesystem::path& run_dir);

/// Minimal JSON-schema checker covering the subset our schemas use:
/// type, properties, required, items, enum, minimum. Returns one message
/// per violation; empty means the document conforms.
std::vector<std::string> validate_schema(const nlohmann::json& doc,
                                         const nlohmann::json& schema,
                                         const std::string& path = "$");

/// Validates every known bundle document under run_dir against the
/// schemas in schema_dir (summary.schema.json etc.).
std::vector<std::string> validate_run(const std::filesystem::path& run_dir,
                                      const std::filesystem::path& schema_dir);

}  // namespace crossres
