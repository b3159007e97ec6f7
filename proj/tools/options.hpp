#pragma once

// Option keys shared by the subcommands: their value kinds, the flags that
// set them and the per-command defaults.

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace abmscope::cli {

enum class Kind { count, real, text, reals, counts, boolean, texts };

struct KeySpec {
    std::string_view key;
    Kind kind;
    std::string_view help;
};

struct CommandSpec {
    std::string_view name;
    std::string_view summary;
    nlohmann::json defaults; // every accepted key; null = optional and unset
    std::vector<std::string_view> required;
};

const std::vector<CommandSpec>& commands();
const CommandSpec* find_command(std::string_view name);
const KeySpec& key_spec(std::string_view key); // throws ValidationError(key) if unknown

// Converts a textual value (flag or key = value line) to the key's JSON type.
nlohmann::json parse_value(std::string_view key, const std::string& text);
// Checks a JSON config value against the key's kind, converting list strings.
nlohmann::json coerce_value(std::string_view key, const nlohmann::json& value);

// Reads a flat JSON object or `key = value` lines.
nlohmann::json read_config_file(const std::string& path);

} // namespace abmscope::cli
