#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace abmscope::io {

// Written as manifest.json into every output directory. `params` is the fully
// resolved option set (config file contents merged with flags, input paths
// made absolute), which is all `rerun` needs to repeat the command.
struct RunManifest {
    std::string command;
    nlohmann::json params = nlohmann::json::object();
    std::vector<std::string> argv;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs; // artifact names inside the directory
    std::string tool_version;
    std::map<std::string, std::uint64_t> seeds;
    std::string started_at;
    std::string finished_at;
};

inline constexpr const char* kManifestName = "manifest.json";

nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);
RunManifest read_manifest(const std::filesystem::path& path);

// UTC, ISO-8601 with seconds.
std::string utc_timestamp();

} // namespace abmscope::io
