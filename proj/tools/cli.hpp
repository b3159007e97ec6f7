#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "abmscope/io/manifest.hpp"
#include "abmscope/io/output_dir.hpp"

namespace abmscope::cli {

using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitValidation = 2;

// argv without the program name. Returns the exit code; messages go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Runs `command` with fully resolved params into `out_dir` and writes the manifest.
void execute(const std::string& command, const json& params, const std::filesystem::path& out_dir,
             const std::vector<std::string>& argv);

// Implemented in commands.cpp. Handlers write artifacts through `dir` and may
// add seeds/inputs to the manifest.
using Handler = void (*)(const json& params, io::OutputDir& dir, io::RunManifest& manifest);
Handler find_handler(const std::string& command);

} // namespace abmscope::cli
