#include "abmscope/io/manifest.hpp"

#include <chrono>
#include <ctime>

#include "abmscope/error.hpp"
#include "abmscope/io/serialize.hpp"

namespace abmscope::io {

nlohmann::json to_json(const RunManifest& m) {
    return {{"command", m.command}, {"params", m.params},         {"argv", m.argv},
            {"inputs", m.inputs},   {"outputs", m.outputs},       {"tool_version", m.tool_version},
            {"seeds", m.seeds},     {"started_at", m.started_at}, {"finished_at", m.finished_at}};
}

RunManifest manifest_from_json(const nlohmann::json& j) {
    RunManifest m;
    try {
        m.command = j.at("command").get<std::string>();
        m.params = j.at("params");
        m.argv = j.value("argv", std::vector<std::string>{});
        m.inputs = j.value("inputs", std::vector<std::string>{});
        m.outputs = j.value("outputs", std::vector<std::string>{});
        m.tool_version = j.value("tool_version", std::string{});
        m.seeds = j.value("seeds", std::map<std::string, std::uint64_t>{});
        m.started_at = j.value("started_at", std::string{});
        m.finished_at = j.value("finished_at", std::string{});
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("manifest", std::string("malformed manifest: ") + e.what());
    }
    return m;
}

RunManifest read_manifest(const std::filesystem::path& path) {
    auto p = path;
    if (std::filesystem::is_directory(p)) p /= kManifestName;
    return manifest_from_json(read_json(p));
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace abmscope::io
