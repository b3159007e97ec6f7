#include "options.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "abmscope/error.hpp"
#include "abmscope/io/csv.hpp"

namespace abmscope::cli {

using nlohmann::json;

namespace {

const std::vector<KeySpec>& keys() {
    static const std::vector<KeySpec> table{
        {"input", Kind::text, "input file or directory"},
        {"model", Kind::text, "trained diffusion model (model.json)"},
        {"compare", Kind::text, "second sample CSV for a divergence"},
        {"n_elders", Kind::count, "number of elder agents"},
        {"n_caregivers", Kind::count, "number of caregivers"},
        {"grid_side", Kind::count, "neighborhood grid side length"},
        {"horizon", Kind::count, "ticks to simulate"},
        {"caregiver_capacity", Kind::real, "effort per caregiver per tick"},
        {"walkability_decay", Kind::real, "walkability decay rate"},
        {"walkability_renewal", Kind::real, "walkability renewal per unit effort"},
        {"mobility_recovery", Kind::real, "mobility recovery rate"},
        {"noise_level", Kind::real, "uniform noise half-width"},
        {"inert_knob", Kind::real, "placeholder parameter with no dynamical role"},
        {"seed", Kind::count, "random seed"},
        {"param", Kind::text, "parameter to sweep"},
        {"values", Kind::reals, "comma-separated parameter values"},
        {"replicates", Kind::count, "replicates per value"},
        {"var", Kind::text, "variable (walkability, effort, mobility) or series column"},
        {"agent", Kind::count, "agent index (default: population mean)"},
        {"bins", Kind::count, "alphabet size"},
        {"method", Kind::text, "binning method, or clustering method for `cluster`"},
        {"history", Kind::count, "history length L (0 = chosen by BIC)"},
        {"significance", Kind::real, "merge test significance"},
        {"max_order", Kind::count, "largest history length considered by BIC"},
        {"epochs", Kind::count, "training epochs"},
        {"batch", Kind::count, "minibatch size"},
        {"lr", Kind::real, "Adam learning rate"},
        {"hidden", Kind::count, "hidden layer width"},
        {"layers", Kind::count, "number of hidden layers"},
        {"steps", Kind::count, "diffusion steps T"},
        {"n", Kind::count, "number of samples"},
        {"max_k", Kind::count, "largest mixture size for mode counting"},
        {"score_step", Kind::count, "diffusion step for score norms"},
        {"metric", Kind::text, "kl_knn or wasserstein1_sliced"},
        {"window", Kind::real, "final fraction of ticks pooled for geometry"},
        {"max_points", Kind::count, "subsample cap for geometry"},
        {"diffusion", Kind::boolean, "fit a diffusion model per run"},
        {"restarts", Kind::count, "EM restarts for mode counting"},
        {"pipeline_seed", Kind::count, "seed for subsampling, EM and training"},
        {"field", Kind::text, "descriptor field"},
        {"z", Kind::real, "z-score threshold"},
        {"k", Kind::count, "number of clusters"},
        {"eps", Kind::real, "DBSCAN radius"},
        {"min_pts", Kind::count, "DBSCAN core-point threshold"},
        {"scales", Kind::counts, "comma-separated aggregation scales"},
        {"reducer", Kind::text, "mean, max or last"},
        {"ranges", Kind::texts, "name:lo:hi entries for screening"},
        {"delta", Kind::real, "one-at-a-time step"},
        {"r", Kind::count, "screening trajectories"},
    };
    return table;
}

json sim_defaults() {
    return {{"n_elders", 100},       {"n_caregivers", 10},       {"grid_side", 5},
            {"horizon", 400},        {"caregiver_capacity", 4.0}, {"walkability_decay", 0.1},
            {"walkability_renewal", 0.2}, {"mobility_recovery", 0.2}, {"noise_level", 0.02},
            {"inert_knob", 0.0},     {"seed", 1}};
}

json pipeline_defaults() {
    return {{"var", "mobility"}, {"agent", nullptr},   {"bins", 2},          {"method", "quantile"},
            {"history", 0},      {"significance", 0.01}, {"max_order", 4},    {"window", 0.25},
            {"max_points", 1000}, {"diffusion", true}, {"epochs", 40},       {"hidden", 32},
            {"score_step", 20},  {"max_k", 4},         {"restarts", 50},     {"pipeline_seed", 7}};
}

json merged(std::initializer_list<json> parts) {
    json out = json::object();
    for (const auto& p : parts) out.update(p);
    return out;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(text);
    while (std::getline(ss, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t");
        const auto e = cell.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(cell.substr(b, e - b + 1));
    }
    return out;
}

std::uint64_t parse_count(std::string_view key, const std::string& text) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || text.empty())
        throw ValidationError(std::string(key), "expected a non-negative integer, got '" + text + "'");
    return v;
}

} // namespace

const std::vector<CommandSpec>& commands() {
    static const std::vector<CommandSpec> table{
        {"simulate", "run the reference agent-based model", sim_defaults(), {}},
        {"sweep", "simulate a one-parameter sweep with replicates",
         merged({sim_defaults(), {{"param", "caregiver_capacity"}, {"values", nullptr}, {"replicates", 1}}}),
         {"values"}},
        {"symbolize", "discretize a real-valued series",
         {{"input", nullptr}, {"var", ""}, {"bins", 2}, {"method", "quantile"}},
         {"input"}},
        {"emachine", "reconstruct an epsilon-machine from a symbol sequence",
         {{"input", nullptr}, {"history", 0}, {"significance", 0.01}, {"max_order", 4}},
         {"input"}},
        {"diffusion-train", "train a score model on sample rows",
         {{"input", nullptr}, {"epochs", 200}, {"batch", 64}, {"lr", 2e-3}, {"hidden", 64}, {"layers", 2},
          {"steps", 200}, {"seed", 0}},
         {"input"}},
        {"diffusion-sample", "draw samples from a trained model",
         {{"model", nullptr}, {"n", 1000}, {"seed", 0}},
         {"model"}},
        {"descriptors", "geometry descriptors of a sample set",
         {{"input", nullptr}, {"model", nullptr}, {"compare", nullptr}, {"metric", "wasserstein1_sliced"},
          {"max_k", 4}, {"restarts", 50}, {"score_step", 20}, {"seed", 0}},
         {"input"}},
        {"surface", "descriptor response surface over a sweep",
         merged({sim_defaults(), pipeline_defaults(),
                 {{"input", nullptr}, {"param", "caregiver_capacity"}, {"values", nullptr}, {"replicates", 1}}}),
         {}},
        {"regimes", "regime boundaries along a surface",
         {{"input", nullptr}, {"field", "entropy_rate"}, {"z", 2.0}},
         {"input"}},
        {"cluster", "cluster surface descriptor vectors",
         {{"input", nullptr}, {"method", "kmeans"}, {"k", 2}, {"eps", 0.5}, {"min_pts", 4}, {"seed", 11}},
         {"input"}},
        {"tensor", "scale x parameter descriptor grid",
         merged({sim_defaults(), pipeline_defaults(),
                 {{"input", nullptr}, {"param", "caregiver_capacity"}, {"values", nullptr}, {"replicates", 1},
                  {"scales", json::array({1})}, {"reducer", "mean"}}}),
         {}},
        {"report", "two-axis summary of a surface", {{"input", nullptr}}, {"input"}},
        {"effects", "elementary-effects screening of model parameters",
         merged({sim_defaults(), pipeline_defaults(),
                 {{"ranges", json::array({"caregiver_capacity:4:8", "inert_knob:0:1"})}, {"delta", 0.5}, {"r", 4}}}),
         {}},
    };
    return table;
}

const CommandSpec* find_command(std::string_view name) {
    for (const auto& c : commands())
        if (c.name == name) return &c;
    return nullptr;
}

const KeySpec& key_spec(std::string_view key) {
    for (const auto& k : keys())
        if (k.key == key) return k;
    throw ValidationError(std::string(key), "unknown option");
}

json parse_value(std::string_view key, const std::string& text) {
    const auto& spec = key_spec(key);
    switch (spec.kind) {
    case Kind::count: return parse_count(key, text);
    case Kind::real: return io::parse_double(text, std::string(key));
    case Kind::text: return text;
    case Kind::boolean:
        if (text == "true" || text == "1" || text == "yes") return true;
        if (text == "false" || text == "0" || text == "no") return false;
        throw ValidationError(std::string(key), "expected true or false, got '" + text + "'");
    case Kind::reals: {
        json out = json::array();
        for (const auto& c : split_list(text)) out.push_back(io::parse_double(c, std::string(key)));
        if (out.empty()) throw ValidationError(std::string(key), "empty list");
        return out;
    }
    case Kind::counts: {
        json out = json::array();
        for (const auto& c : split_list(text)) out.push_back(parse_count(key, c));
        if (out.empty()) throw ValidationError(std::string(key), "empty list");
        return out;
    }
    case Kind::texts: {
        json out = json::array();
        for (const auto& c : split_list(text)) out.push_back(c);
        return out;
    }
    }
    return text;
}

json coerce_value(std::string_view key, const json& value) {
    const auto& spec = key_spec(key);
    if (value.is_string() && spec.kind != Kind::text) return parse_value(key, value.get<std::string>());
    const std::string k(key);
    switch (spec.kind) {
    case Kind::count:
        if (!value.is_number_unsigned() && !(value.is_number_integer() && value.get<long long>() >= 0))
            throw ValidationError(k, "expected a non-negative integer");
        return value.get<std::uint64_t>();
    case Kind::real:
        if (!value.is_number()) throw ValidationError(k, "expected a number");
        return value.get<double>();
    case Kind::text:
        if (!value.is_string()) throw ValidationError(k, "expected a string");
        return value;
    case Kind::boolean:
        if (!value.is_boolean()) throw ValidationError(k, "expected true or false");
        return value;
    case Kind::reals:
    case Kind::counts:
    case Kind::texts: {
        if (!value.is_array()) throw ValidationError(k, "expected a list");
        json out = json::array();
        for (const auto& v : value) {
            if (spec.kind == Kind::reals && !v.is_number()) throw ValidationError(k, "list entries must be numbers");
            if (spec.kind == Kind::counts && !(v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0)))
                throw ValidationError(k, "list entries must be non-negative integers");
            if (spec.kind == Kind::texts && !v.is_string()) throw ValidationError(k, "list entries must be strings");
            out.push_back(v);
        }
        return out;
    }
    }
    return value;
}

json read_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("config", "cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        try {
            json j = json::parse(text);
            json out = json::object();
            for (const auto& [k, v] : j.items()) out[k] = coerce_value(k, v);
            return out;
        } catch (const json::parse_error& e) {
            throw ValidationError("config", path + " is not valid JSON: " + e.what());
        }
    }
    json out = json::object();
    std::stringstream lines(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config", path + ":" + std::to_string(line_no) + " expected key = value");
        auto trim = [](std::string s) {
            const auto s0 = s.find_first_not_of(" \t\r");
            const auto s1 = s.find_last_not_of(" \t\r");
            return s0 == std::string::npos ? std::string{} : s.substr(s0, s1 - s0 + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        out[key] = parse_value(key, trim(line.substr(eq + 1)));
    }
    return out;
}

} // namespace abmscope::cli
