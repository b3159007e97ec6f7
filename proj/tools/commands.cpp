#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "abmscope/abm.hpp"
#include "abmscope/descriptors.hpp"
#include "abmscope/diffusion.hpp"
#include "abmscope/emachine.hpp"
#include "abmscope/error.hpp"
#include "abmscope/io/correlate.hpp"
#include "abmscope/io/csv.hpp"
#include "abmscope/io/dot.hpp"
#include "abmscope/io/serialize.hpp"
#include "abmscope/io/svg.hpp"
#include "abmscope/regimes.hpp"
#include "abmscope/symbolize.hpp"
#include "cli.hpp"

namespace abmscope::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kSimKeys[] = {"n_elders",   "n_caregivers",        "grid_side",         "horizon",
                                    "caregiver_capacity", "walkability_decay", "walkability_renewal",
                                    "mobility_recovery",  "noise_level",       "inert_knob",        "seed"};

std::size_t count(const json& p, const char* key) { return p.at(key).get<std::size_t>(); }
double real(const json& p, const char* key) { return p.at(key).get<double>(); }
std::string text(const json& p, const char* key) {
    const auto& v = p.at(key);
    return v.is_null() ? std::string{} : v.get<std::string>();
}

sim::SimConfig sim_config(const json& p) {
    json sub = json::object();
    for (const char* k : kSimKeys) sub[k] = p.at(k);
    auto cfg = io::sim_config_from_json(sub);
    sim::validate(cfg);
    return cfg;
}

regimes::PipelineOptions pipeline_options(const json& p) {
    regimes::PipelineOptions o;
    o.variable = sim::parse_variable(text(p, "var"));
    if (!p.at("agent").is_null()) o.agent = count(p, "agent");
    o.n_bins = count(p, "bins");
    o.bin_method = symbolic::parse_bin_method(text(p, "method"));
    if (count(p, "history") > 0) o.emachine.history_length = count(p, "history");
    o.emachine.significance = real(p, "significance");
    o.emachine.max_order = count(p, "max_order");
    o.window_fraction = real(p, "window");
    o.max_geometry_points = count(p, "max_points");
    o.fit_diffusion = p.at("diffusion").get<bool>();
    o.train.epochs = count(p, "epochs");
    o.train.hidden_width = count(p, "hidden");
    o.score_step = count(p, "score_step");
    o.modes.max_k = count(p, "max_k");
    o.modes.restarts = count(p, "restarts");
    o.seed = count(p, "pipeline_seed");
    return o;
}

struct SweepSpec {
    sim::SimConfig base;
    std::string param;
    std::vector<double> values;
    std::size_t replicates = 1;
};

json to_json(const SweepSpec& s) {
    return {{"base", io::to_json(s.base)}, {"param", s.param}, {"values", s.values}, {"replicates", s.replicates}};
}

SweepSpec sweep_from_json(const json& j) {
    SweepSpec s;
    s.base = io::sim_config_from_json(j.at("base"));
    s.param = j.at("param").get<std::string>();
    s.values = j.at("values").get<std::vector<double>>();
    s.replicates = j.at("replicates").get<std::size_t>();
    return s;
}

std::vector<double> sorted_values(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return values;
}

// From --input <sweep dir> when given, else from the sim/param/values keys.
SweepSpec sweep_spec(const json& p, io::RunManifest& manifest) {
    SweepSpec s;
    const std::string input = p.contains("input") ? text(p, "input") : "";
    if (!input.empty()) {
        const fs::path file = fs::is_directory(input) ? fs::path(input) / "sweep.json" : fs::path(input);
        s = sweep_from_json(io::read_json(file));
    } else {
        if (p.at("values").is_null()) throw ValidationError("values", "required without --input");
        s.base = sim_config(p);
        s.param = text(p, "param");
        s.values = p.at("values").get<std::vector<double>>();
        s.replicates = count(p, "replicates");
    }
    if (s.values.empty()) throw ValidationError("values", "empty sweep");
    if (s.replicates < 1) throw ValidationError("replicates", "must be >= 1");
    sim::SimConfig probe = s.base;
    sim::set_parameter(probe, s.param, s.values.front());
    manifest.seeds["sim_base"] = s.base.seed;
    return s;
}

std::vector<sim::SweepRun> run_sweep(const SweepSpec& s) {
    const auto values = sorted_values(s.values);
    return sim::sweep(s.base, s.param, values, s.replicates);
}

void write_series_table(const fs::path& path, const sim::SimulationOutput& out) {
    io::CsvTable t;
    t.header = {"t"};
    for (auto n : sim::kVariableNames) t.header.emplace_back(n);
    std::array<std::vector<double>, sim::kNumVariables> cols;
    for (std::size_t v = 0; v < sim::kNumVariables; ++v) cols[v] = out.mean_series(static_cast<sim::Variable>(v));
    for (std::size_t tick = 0; tick < out.horizon(); ++tick) {
        std::vector<std::string> row{std::to_string(tick)};
        for (const auto& c : cols) row.push_back(io::format_double(c[tick]));
        t.rows.push_back(std::move(row));
    }
    io::write_csv(path, t);
}

json pipeline_json(const regimes::PipelineOptions& o) {
    return {{"variable", sim::variable_name(o.variable)},
            {"agent", o.agent ? json(*o.agent) : json(nullptr)},
            {"bins", o.n_bins},
            {"method", symbolic::method_name(o.bin_method)},
            {"history", o.emachine.history_length ? json(*o.emachine.history_length) : json(nullptr)},
            {"significance", o.emachine.significance},
            {"max_order", o.emachine.max_order},
            {"window", o.window_fraction},
            {"max_points", o.max_geometry_points},
            {"diffusion", o.fit_diffusion},
            {"train", io::to_json(o.train)},
            {"score_step", o.score_step},
            {"max_k", o.modes.max_k},
            {"restarts", o.modes.restarts},
            {"seed", o.seed}};
}

json load_surface_json(const std::string& input) {
    if (input.empty()) throw ValidationError("input", "required");
    const fs::path file = fs::is_directory(input) ? fs::path(input) / "surface.json" : fs::path(input);
    if (!fs::exists(file)) throw ValidationError("input", "no surface at " + file.string());
    return io::read_json(file);
}

// ---------------------------------------------------------------- handlers

void cmd_simulate(const json& p, io::OutputDir& dir, io::RunManifest& m) {
    const auto cfg = sim_config(p);
    m.seeds["sim"] = cfg.seed;
    const auto out = sim::simulate(cfg);
    io::write_json(dir.file("config.json"), io::to_json(cfg));
    io::write_simulation_csv(dir.file("snapshots.csv"), out);
    for (std::size_t v = 0; v < sim::kNumVariables; ++v)
        io::write_sequences_csv(dir.file("sequences_" + std::string(sim::kVariableNames[v]) + ".csv"), out,
                                static_cast<sim::Variable>(v));
    write_series_table(dir.file("series.csv"), out);
}

void cmd_sweep(const json& p, io::OutputDir& dir, io::RunManifest& m) {
    const auto spec = sweep_spec(p, m);
    const auto runs = run_sweep(spec);
    io::write_json(dir.file("sweep.json"), to_json(spec));
    io::CsvTable t;
    t.header = {"value_index", "replicate", "value", "seed", "t"};
    for (auto n : sim::kVariableNames) t.header.emplace_back(n);
    for (const auto& r : runs) {
        std::array<std::vector<double>, sim::kNumVariables> cols;
        for (std::size_t v = 0; v < sim::kNumVariables; ++v)
            cols[v] = r.output.mean_series(static_cast<sim::Variable>(v));
        for (std::size_t tick = 0; tick < r.output.horizon(); ++tick) {
            std::vector<std::string> row{std::to_string(r.value_index), std::to_string(r.replicate),
                                         io::format_double(r.value), std::to_string(r.output.config.seed),
                                         std::to_string(tick)};
            for (const auto& c : cols) row.push_back(io::format_double(c[tick]));
            t.rows.push_back(std::move(row));
        }
    }
    io::write_csv(dir.file("series.csv"), t);
}

void cmd_symbolize(const json& p, io::OutputDir& dir, io::RunManifest&) {
    const auto series = io::read_series_csv(text(p, "input"), text(p, "var"));
    const auto seq = symbolic::discretize(series, count(p, "bins"), symbolic::parse_bin_method(text(p, "method")));
    io::write_symbols(dir.file("symbols.csv"), seq);
    dir.file("symbols.csv.json");
}

void cmd_emachine(const json& p, io::OutputDir& dir, io::RunManifest&) {
    const auto seq = io::read_symbols(text(p, "input"));
    emachine::AnalyzeOptions o;
    if (count(p, "history") > 0) o.history_length = count(p, "history");
    o.significance = real(p, "significance");
    o.max_order = count(p, "max_order");
    const auto an = emachine::analyze(seq, o);
    json mj = io::to_json(an.machine);
    mj["invariants"] = io::to_json(an.invariants);
    io::write_json(dir.file("machine.json"), mj);
    json inv = io::to_json(an.invariants);
    inv["n_states"] = an.machine.n_states;
    inv["selected_order"] = an.selected_order;
    inv["history_length"] = an.machine.history_length;
    inv["max_block"] = an.max_block;
    inv["unifilar"] = emachine::is_unifilar(an.machine);
    inv["stationary_residual"] = emachine::stationary_residual(an.machine);
    inv["stationarity_p_value"] = an.stationarity.p_value;
    io::write_json(dir.file("invariants.json"), inv);
    io::export_machine_diagram(an.machine, dir.file("machine.dot"));
}

void cmd_diffusion_train(const json& p, io::OutputDir& dir, io::RunManifest& m) {
    const Eigen::MatrixXd data = io::read_matrix_csv(text(p, "input"));
    diffusion::TrainConfig cfg;
    cfg.epochs = count(p, "epochs");
    cfg.batch_size = count(p, "batch");
    cfg.learning_rate = real(p, "lr");
    cfg.hidden_width = count(p, "hidden");
    cfg.n_hidden = count(p, "layers");
    cfg.seed = count(p, "seed");
    cfg.validate();
    m.seeds["train"] = cfg.seed;
    const auto model = diffusion::train(data, cfg, diffusion::NoiseSchedule::linear(count(p, "steps")));
    io::write_json(dir.file("model.json"), io::to_json(model));
    io::CsvTable loss;
    loss.header = {"epoch", "mean_loss"};
    for (std::size_t e = 0; e < model.loss_curve.size(); ++e)
        loss.rows.push_back({std::to_string(e + 1), io::format_double(model.loss_curve[e])});
    io::write_csv(dir.file("loss.csv"), loss);
}

void cmd_diffusion_sample(const json& p, io::OutputDir& dir, io::RunManifest& m) {
    const auto model = io::model_from_json(io::read_json(text(p, "model")));
    const std::size_t n = count(p, "n");
    if (n < 1) throw ValidationError("n", "must be >= 1");
    m.seeds["sample"] = count(p, "seed");
    io::write_matrix_csv(dir.file("samples.csv"), diffusion::sample(model, n, count(p, "seed")));
}

void cmd_descriptors(const json& p, io::OutputDir& dir, io::RunManifest& m) {
    const Eigen::MatrixXd x = io::read_matrix_csv(text(p, "input"));
    std::optional<diffusion::ScoreModel> model;
    if (!text(p, "model").empty()) model = io::model_from_json(io::read_json(text(p, "model")));
    descriptors::ShapeOptions o;
    o.modes.max_k = count(p, "max_k");
    o.modes.restarts = count(p, "restarts");
    o.modes.seed = count(p, "seed");
    o.score_step = count(p, "score_step");
    m.seeds["modes"] = o.modes.seed;
    io::write_json(dir.file("geometry.json"), io::to_json(descriptors::shape_summary(x, o, model ? &*model : nullptr)));
    if (!text(p, "compare").empty()) {
        const Eigen::MatrixXd y = io::read_matrix_csv(text(p, "compare"));
        const auto metric = descriptors::parse_metric(text(p, "metric"));
        const auto d = descriptors::divergence_detailed(x, y, metric);
        io::write_json(dir.file("divergence.json"),
                       {{"metric", descriptors::metric_name(metric)}, {"value", d.value}, {"warnings", d.warnings}});
    }
}

void cmd_surface(const json& p, io::OutputDir& dir, io::RunManifest& m) {
    const auto spec = sweep_spec(p, m);
    const auto opts = pipeline_options(p);
    m.seeds["pipeline"] = opts.seed;
    const auto surface = regimes::response_surface(run_sweep(spec), opts);
    json j = io::surface_to_json(surface);
    j["sweep"] = to_json(spec);
    j["pipeline"] = pipeline_json(opts);
    io::write_json(dir.file("surface.json"), j);
    io::write_surface_csv(dir.file("surface.csv"), surface);
}

void cmd_regimes(const json& p, io::OutputDir& dir, io::RunManifest&) {
    const auto surface = io::surface_from_json(load_surface_json(text(p, "input")));
    const std::string field = text(p, "field");
    const double z = real(p, "z");
    const auto boundaries = regimes::detect_regime_shifts(surface, field, z);
    json b = json::array();
    for (auto j : boundaries)
        b.push_back({{"index", j},
                     {"theta_before", surface[j].theta.front()},
                     {"theta_after", surface[j + 1].theta.front()}});
    io::write_json(dir.file("regimes.json"), {{"field", field}, {"z_threshold", z}, {"boundaries", std::move(b)}});
}

void cmd_cluster(const json& p, io::OutputDir& dir, io::RunManifest& m) {
    const auto surface = io::surface_from_json(load_surface_json(text(p, "input")));
    regimes::ClusterOptions o;
    o.method = regimes::parse_cluster_method(text(p, "method"));
    o.k = count(p, "k");
    o.eps = real(p, "eps");
    o.min_pts = count(p, "min_pts");
    o.seed = count(p, "seed");
    m.seeds["cluster"] = o.seed;
    const auto result = regimes::cluster_behaviors(surface, o);
    json j = io::to_json(result);
    j["method"] = regimes::cluster_method_name(o.method);
    json thetas = json::array();
    for (const auto& c : surface) thetas.push_back(c.theta);
    j["theta"] = std::move(thetas);
    io::write_json(dir.file("clusters.json"), j);
}

void cmd_tensor(const json& p, io::OutputDir& dir, io::RunManifest& m) {
    const auto spec = sweep_spec(p, m);
    const auto opts = pipeline_options(p);
    m.seeds["pipeline"] = opts.seed;
    const auto scales = p.at("scales").get<std::vector<std::size_t>>();
    const auto reducer = symbolic::parse_reducer(text(p, "reducer"));
    const auto tensor = regimes::scale_param_tensor(run_sweep(spec), spec.param, scales, reducer, opts);
    json j = io::to_json(tensor);
    j["reducer"] = symbolic::reducer_name(reducer);
    j["sweep"] = to_json(spec);
    j["pipeline"] = pipeline_json(opts);
    io::write_json(dir.file("tensor.json"), j);
    io::write_surface_csv(dir.file("tensor.csv"), tensor.cells, tensor.thetas.size());
}

void cmd_effects(const json& p, io::OutputDir& dir, io::RunManifest& m) {
    const auto base = sim_config(p);
    const auto opts = pipeline_options(p);
    std::vector<regimes::ParamRange> ranges;
    for (const auto& entry : p.at("ranges").get<std::vector<std::string>>()) {
        const auto a = entry.find(':');
        const auto b = entry.find(':', a == std::string::npos ? a : a + 1);
        if (a == std::string::npos || b == std::string::npos)
            throw ValidationError("ranges", "expected name:lo:hi, got '" + entry + "'");
        ranges.push_back({entry.substr(0, a), io::parse_double(entry.substr(a + 1, b - a - 1), "ranges"),
                          io::parse_double(entry.substr(b + 1), "ranges")});
    }
    m.seeds["pipeline"] = opts.seed;
    m.seeds["trajectories"] = base.seed;
    const auto result = regimes::elementary_effects(base, ranges, real(p, "delta"), count(p, "r"), opts, base.seed);
    io::write_json(dir.file("effects.json"), io::to_json(result));
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

void cmd_report(const json& p, io::OutputDir& dir, io::RunManifest&) {
    const json sj = load_surface_json(text(p, "input"));
    const auto surface = io::surface_from_json(sj);
    if (surface.empty()) throw ValidationError("input", "surface has no cells");
    const std::string param = sj.contains("sweep") ? sj["sweep"].at("param").get<std::string>() : "theta";
    const std::string variable = sj.contains("pipeline") ? sj["pipeline"].at("variable").get<std::string>() : "";

    static constexpr const char* kColumns[] = {"entropy_rate",  "statistical_complexity", "excess_entropy",
                                               "effective_dim", "n_modes",                "mean_score_norm"};
    io::CsvTable table;
    table.header = {"variable", param};
    for (const char* c : kColumns) {
        table.header.emplace_back(c);
        table.header.push_back(std::string(c) + "_sd");
    }
    std::string md = "# Two-axis summary\n\nTemporal invariants of `" + variable + "` and geometry of the final-window " +
                     "population snapshots, per value of `" + param + "` (mean ± sd over replicates).\n\n| " + param;
    for (const char* c : kColumns) md += std::string(" | ") + c;
    md += " |\n|---";
    for (std::size_t i = 0; i < std::size(kColumns); ++i) md += "|---";
    md += "|\n";
    for (const auto& cell : surface) {
        std::vector<std::string> row{variable, io::format_double(cell.theta.front())};
        md += "| " + fmt(cell.theta.front());
        for (const char* c : kColumns) {
            if (!cell.ok()) {
                row.insert(row.end(), {"", ""});
                md += " | failed";
                continue;
            }
            const auto& s = cell.field(c);
            row.push_back(io::format_double(s.mean));
            row.push_back(io::format_double(s.sd));
            md += " | " + fmt(s.mean) + " ± " + fmt(s.sd);
        }
        md += " |\n";
        table.rows.push_back(std::move(row));
    }
    io::write_csv(dir.file("summary.csv"), table);

    std::vector<regimes::DescriptorVector> clean;
    for (const auto& c : surface)
        if (c.ok()) clean.push_back(c);
    for (const char* c : kColumns) {
        io::LinePlot plot;
        plot.title = std::string(c) + " vs " + param;
        plot.x_label = param;
        plot.y_label = c;
        for (const auto& cell : clean) {
            plot.xs.push_back(cell.theta.front());
            plot.ys.push_back(cell.field(c).mean);
        }
        if (!plot.xs.empty()) io::write_svg(dir.file(std::string("plots/") + c + ".svg"), plot);
    }

    json corr = json::array();
    if (clean.size() >= 4) {
        md += "\n## Rank correlations across " + param + "\n\n| temporal | geometric | rho |\n|---|---|---|\n";
        for (const auto& a : io::correlate_axes(clean)) {
            corr.push_back({{"temporal", a.temporal},
                            {"geometric", a.geometric},
                            {"rho", a.rho ? json(*a.rho) : json(nullptr)},
                            {"degenerate", a.degenerate}});
            md += "| " + a.temporal + " | " + a.geometric + " | " + (a.rho ? fmt(*a.rho) : std::string("n/a")) + " |\n";
        }
    }
    io::write_json(dir.file("correlations.json"), {{"n_points", clean.size()}, {"pairs", std::move(corr)}});

    // Complexity profile of every variable, rebuilt from the recorded sweep.
    if (sj.contains("sweep") && sj.contains("pipeline")) {
        const auto spec = sweep_from_json(sj["sweep"]);
        const auto& pj = sj["pipeline"];
        emachine::AnalyzeOptions ao;
        if (!pj.at("history").is_null()) ao.history_length = pj.at("history").get<std::size_t>();
        ao.significance = pj.at("significance").get<double>();
        ao.max_order = pj.at("max_order").get<std::size_t>();
        const auto bins = pj.at("bins").get<std::size_t>();
        const auto method = symbolic::parse_bin_method(pj.at("method").get<std::string>());
        const auto runs = run_sweep(spec);
        io::CsvTable prof;
        prof.header = {"variable", param, "replicate", "entropy_rate", "statistical_complexity", "excess_entropy",
                       "n_states"};
        md += "\n## Complexity profile by variable\n\n| variable | " + param +
              " | entropy_rate | statistical_complexity | excess_entropy |\n|---|---|---|---|---|\n";
        for (std::size_t v = 0; v < sim::kNumVariables; ++v) {
            for (const auto& r : runs) {
                const auto series = r.output.mean_series(static_cast<sim::Variable>(v));
                std::vector<std::string> row{std::string(sim::kVariableNames[v]), io::format_double(r.value),
                                             std::to_string(r.replicate)};
                try {
                    const auto an = emachine::analyze(symbolic::discretize(series, bins, method), ao);
                    for (double x : {an.invariants.entropy_rate, an.invariants.statistical_complexity,
                                     an.invariants.excess_entropy})
                        row.push_back(io::format_double(x));
                    row.push_back(std::to_string(an.machine.n_states));
                    if (r.replicate == 0)
                        md += "| " + std::string(sim::kVariableNames[v]) + " | " + fmt(r.value) + " | " +
                              fmt(an.invariants.entropy_rate) + " | " + fmt(an.invariants.statistical_complexity) +
                              " | " + fmt(an.invariants.excess_entropy) + " |\n";
                } catch (const ValidationError& e) {
                    row.insert(row.end(), {"", "", "", ""});
                }
                prof.rows.push_back(std::move(row));
            }
        }
        io::write_csv(dir.file("variables.csv"), prof);
    }
    std::ofstream(dir.file("report.md"), std::ios::binary) << md;
}

} // namespace

Handler find_handler(const std::string& command) {
    static const std::map<std::string, Handler> table{
        {"simulate", cmd_simulate},   {"sweep", cmd_sweep},       {"symbolize", cmd_symbolize},
        {"emachine", cmd_emachine},   {"diffusion-train", cmd_diffusion_train},
        {"diffusion-sample", cmd_diffusion_sample},               {"descriptors", cmd_descriptors},
        {"surface", cmd_surface},     {"regimes", cmd_regimes},   {"cluster", cmd_cluster},
        {"tensor", cmd_tensor},       {"report", cmd_report},     {"effects", cmd_effects},
    };
    const auto it = table.find(command);
    return it == table.end() ? nullptr : it->second;
}

} // namespace abmscope::cli
