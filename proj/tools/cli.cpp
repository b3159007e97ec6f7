#include "cli.hpp"

#include <filesystem>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "abmscope/error.hpp"
#include "abmscope/io/serialize.hpp"
#include "options.hpp"

namespace abmscope::cli {

namespace {

std::string flag_for(std::string_view key) {
    std::string f = "--";
    for (char c : key) f += c == '_' ? '-' : c;
    return f;
}

bool is_path_key(std::string_view key) { return key == "input" || key == "model" || key == "compare"; }

// defaults <- config file <- --set entries <- individual flags
json resolve(const CommandSpec& spec, const std::string& config_path, const std::vector<std::string>& sets,
             const std::map<std::string, std::string>& flags) {
    json params = spec.defaults;
    auto assign = [&](const std::string& key, json value) {
        if (!params.contains(key)) throw ValidationError(key, "not accepted by '" + std::string(spec.name) + "'");
        params[key] = std::move(value);
    };
    if (!config_path.empty()) {
        const json config = read_config_file(config_path);
        for (const auto& [k, v] : config.items()) assign(k, v);
    }
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ValidationError("set", "expected key=value, got '" + s + "'");
        const std::string key = s.substr(0, eq);
        assign(key, parse_value(key, s.substr(eq + 1)));
    }
    for (const auto& [k, v] : flags) assign(k, parse_value(k, v));
    for (auto r : spec.required)
        if (params[std::string(r)].is_null()) throw ValidationError(std::string(r), "required");
    for (auto& [k, v] : params.items())
        if (is_path_key(k) && v.is_string() && !v.get<std::string>().empty())
            v = std::filesystem::absolute(v.get<std::string>()).lexically_normal().string();
    return params;
}

std::string usage() {
    std::string u = "usage: abmscope <command> --out <dir> [--config <path>] [options]\n"
                    "       abmscope rerun --manifest <path> --out <dir>\ncommands:\n";
    for (const auto& c : commands()) {
        u += "  " + std::string(c.name);
        u.append(c.name.size() < 18 ? 18 - c.name.size() : 1, ' ');
        u += std::string(c.summary) + "\n";
    }
    return u;
}

} // namespace

void execute(const std::string& command, const json& params, const std::filesystem::path& out_dir,
             const std::vector<std::string>& argv) {
    const Handler handler = find_handler(command);
    if (!handler) throw ValidationError("command", "unknown subcommand '" + command + "'");
    io::OutputDir dir(out_dir);
    io::RunManifest manifest;
    manifest.command = command;
    manifest.params = params;
    manifest.argv = argv;
    manifest.tool_version = ABMSCOPE_VERSION;
    manifest.started_at = io::utc_timestamp();
    for (const char* key : {"input", "model", "compare"})
        if (params.contains(key) && params[key].is_string() && !params[key].get<std::string>().empty())
            manifest.inputs.push_back(params[key].get<std::string>());
    handler(params, dir, manifest);
    manifest.outputs = dir.artifacts();
    manifest.finished_at = io::utc_timestamp();
    io::write_json(dir.staging() / io::kManifestName, io::to_json(manifest));
    dir.commit();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Temporal and distributional analysis of agent-based simulations", "abmscope"};
    app.require_subcommand(1);
    app.set_version_flag("--version", ABMSCOPE_VERSION);

    std::string config_path, out_dir, manifest_path;
    std::vector<std::string> sets;
    std::map<std::string, std::map<std::string, std::string>> flag_values;

    for (const auto& spec : commands()) {
        auto* sub = app.add_subcommand(std::string(spec.name), std::string(spec.summary));
        sub->add_option("--config", config_path, "JSON object or key = value file");
        sub->add_option("--out", out_dir, "output directory")->required();
        sub->add_option("--set", sets, "key=value override (repeatable)");
        auto& values = flag_values[std::string(spec.name)];
        for (const auto& [key, _] : spec.defaults.items())
            sub->add_option(flag_for(key), values[key], std::string(key_spec(key).help));
    }
    auto* rerun = app.add_subcommand("rerun", "repeat a recorded run from its manifest");
    rerun->add_option("--manifest", manifest_path, "manifest.json or the directory holding it")->required();
    rerun->add_option("--out", out_dir, "output directory")->required();

    if (!args.empty() && !args.front().empty() && args.front()[0] != '-' && args.front() != "rerun" &&
        !find_command(args.front())) {
        err << "error: unknown subcommand '" << args.front() << "'\n" << usage();
        return kExitValidation;
    }
    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << usage();
        return kExitValidation;
    }

    try {
        auto* chosen = app.get_subcommands().front();
        const std::string command = chosen->get_name();
        if (command == "rerun") {
            const auto m = io::read_manifest(manifest_path);
            execute(m.command, m.params, out_dir, m.argv);
            out << "reran " << m.command << " into " << out_dir << "\n";
            return kExitOk;
        }
        std::map<std::string, std::string> flags;
        for (const auto& [key, value] : flag_values[command])
            if (chosen->count(flag_for(key)) > 0) flags[key] = value;
        const json params = resolve(*find_command(command), config_path, sets, flags);
        execute(command, params, out_dir, args);
        out << command << ": wrote " << out_dir << "\n";
        return kExitOk;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}

} // namespace abmscope::cli
