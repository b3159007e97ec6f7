#include "abmscope/abm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "abmscope/error.hpp"
#include "abmscope/parallel.hpp"
#include "abmscope/rng.hpp"

namespace abmscope::sim {

namespace {

constexpr std::array<std::string_view, 6> kRealParameters{
    "caregiver_capacity", "walkability_decay", "walkability_renewal",
    "mobility_recovery",  "noise_level",       "inert_knob"};

void require_rate(std::string_view name, double v) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
        throw ValidationError(std::string(name), "must lie in [0, 1], got " + std::to_string(v));
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

} // namespace

void validate(const SimConfig& c) {
    if (c.n_elders < 1) throw ValidationError("n_elders", "must be >= 1");
    if (c.horizon < 1) throw ValidationError("horizon", "must be >= 1");
    if (c.grid_side < 1) throw ValidationError("grid_side", "must be >= 1");
    if (!std::isfinite(c.caregiver_capacity) || c.caregiver_capacity < 0.0)
        throw ValidationError("caregiver_capacity", "must be finite and >= 0");
    require_rate("walkability_decay", c.walkability_decay);
    require_rate("walkability_renewal", c.walkability_renewal);
    require_rate("mobility_recovery", c.mobility_recovery);
    if (!std::isfinite(c.noise_level) || c.noise_level < 0.0)
        throw ValidationError("noise_level", "must be finite and >= 0");
    require_rate("inert_knob", c.inert_knob);
}

std::string_view variable_name(Variable v) { return kVariableNames[static_cast<std::size_t>(v)]; }

Variable parse_variable(std::string_view name) {
    for (std::size_t i = 0; i < kNumVariables; ++i)
        if (kVariableNames[i] == name) return static_cast<Variable>(i);
    throw ValidationError("var", "unknown variable '" + std::string(name) +
                                     "' (expected walkability, effort or mobility)");
}

std::vector<double> SimulationOutput::agent_series(Variable v, std::size_t agent) const {
    const auto col = static_cast<Eigen::Index>(v);
    std::vector<double> out;
    out.reserve(snapshots.size());
    for (const auto& s : snapshots) out.push_back(s(static_cast<Eigen::Index>(agent), col));
    return out;
}

std::vector<double> SimulationOutput::mean_series(Variable v) const {
    const auto col = static_cast<Eigen::Index>(v);
    std::vector<double> out;
    out.reserve(snapshots.size());
    for (const auto& s : snapshots) out.push_back(s.col(col).mean());
    return out;
}

std::vector<double> SimulationOutput::dispensed_effort() const {
    const auto col = static_cast<Eigen::Index>(Variable::effort);
    std::vector<double> out;
    out.reserve(snapshots.size());
    for (const auto& s : snapshots) out.push_back(s.col(col).sum());
    return out;
}

bool SimulationOutput::operator==(const SimulationOutput& other) const {
    if (!(config == other.config) || snapshots.size() != other.snapshots.size()) return false;
    for (std::size_t t = 0; t < snapshots.size(); ++t) {
        const auto& a = snapshots[t];
        const auto& b = other.snapshots[t];
        if (a.rows() != b.rows() || a.cols() != b.cols() || !(a.array() == b.array()).all()) return false;
    }
    return true;
}

SimulationOutput simulate(const SimConfig& config) {
    validate(config);
    const std::size_t n = config.n_elders;
    const std::size_t n_cells = config.grid_side * config.grid_side;
    const double noise = config.noise_level;
    const double recovery = config.mobility_recovery;

    Rng rng(config.seed);
    std::vector<double> walk(n_cells);
    std::vector<double> mob(n);
    for (auto& w : walk) w = rng.uniform();
    for (auto& m : mob) m = rng.uniform();

    std::vector<std::size_t> cell_of(n);
    std::vector<std::size_t> cell_count(n_cells, 0);
    for (std::size_t i = 0; i < n; ++i) {
        cell_of[i] = i % n_cells;
        ++cell_count[cell_of[i]];
    }

    SimulationOutput out;
    out.config = config;
    out.snapshots.reserve(config.horizon);

    std::vector<double> remaining(n);
    std::vector<double> effort(n);
    std::vector<std::size_t> order(n);
    std::vector<double> cell_mob(n_cells);
    std::vector<double> cell_eff(n_cells);

    for (std::size_t tick = 0; tick < config.horizon; ++tick) {
        // Greedy allocation: caregivers in index order pour their capacity
        // into elders ranked by need (1 - m), ties to the lower index.
        for (std::size_t i = 0; i < n; ++i) remaining[i] = 1.0 - mob[i];
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return remaining[a] > remaining[b]; });
        std::fill(effort.begin(), effort.end(), 0.0);
        std::size_t cursor = 0;
        for (std::size_t g = 0; g < config.n_caregivers && cursor < n; ++g) {
            double capacity = config.caregiver_capacity;
            while (capacity > 0.0 && cursor < n) {
                const std::size_t i = order[cursor];
                const double give = std::min(capacity, remaining[i]);
                effort[i] += give;
                remaining[i] -= give;
                capacity -= give;
                if (remaining[i] <= 0.0) ++cursor;
            }
        }

        // Local means over the elders living in each cell; empty cells see
        // the population means.
        std::fill(cell_mob.begin(), cell_mob.end(), 0.0);
        std::fill(cell_eff.begin(), cell_eff.end(), 0.0);
        double pop_mob = 0.0;
        double pop_eff = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            cell_mob[cell_of[i]] += mob[i];
            cell_eff[cell_of[i]] += effort[i];
            pop_mob += mob[i];
            pop_eff += effort[i];
        }
        pop_mob /= static_cast<double>(n);
        pop_eff /= static_cast<double>(n);
        for (std::size_t c = 0; c < n_cells; ++c) {
            const double mbar = cell_count[c] ? cell_mob[c] / static_cast<double>(cell_count[c]) : pop_mob;
            const double ebar = cell_count[c] ? cell_eff[c] / static_cast<double>(cell_count[c]) : pop_eff;
            const double eta = rng.uniform(-noise, noise);
            walk[c] = clamp01(walk[c] - config.walkability_decay * (1.0 - mbar) +
                              config.walkability_renewal * ebar + eta);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double w = walk[cell_of[i]];
            const double eta = rng.uniform(-noise, noise);
            mob[i] = clamp01(mob[i] + recovery * effort[i] * w - (1.0 - w) * recovery / 2.0 + eta);
        }

        Eigen::MatrixXd snap(static_cast<Eigen::Index>(n), 3);
        for (std::size_t i = 0; i < n; ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            snap(r, 0) = walk[cell_of[i]];
            snap(r, 1) = effort[i];
            snap(r, 2) = mob[i];
        }
        out.snapshots.push_back(std::move(snap));
    }
    return out;
}

std::span<const std::string_view> real_parameter_names() { return kRealParameters; }

namespace {

double* parameter_slot(SimConfig& c, std::string_view name) {
    if (name == "caregiver_capacity") return &c.caregiver_capacity;
    if (name == "walkability_decay") return &c.walkability_decay;
    if (name == "walkability_renewal") return &c.walkability_renewal;
    if (name == "mobility_recovery") return &c.mobility_recovery;
    if (name == "noise_level") return &c.noise_level;
    if (name == "inert_knob") return &c.inert_knob;
    return nullptr;
}

[[noreturn]] void unknown_parameter(std::string_view name) {
    std::string valid;
    for (auto p : kRealParameters) {
        if (!valid.empty()) valid += ", ";
        valid += p;
    }
    throw ValidationError("param", "unknown real-valued parameter '" + std::string(name) +
                                       "'; valid names: " + valid);
}

} // namespace

double get_parameter(const SimConfig& config, std::string_view name) {
    SimConfig copy = config;
    if (double* slot = parameter_slot(copy, name)) return *slot;
    unknown_parameter(name);
}

void set_parameter(SimConfig& config, std::string_view name, double value) {
    double* slot = parameter_slot(config, name);
    if (!slot) unknown_parameter(name);
    *slot = value;
}

std::vector<SweepRun> sweep(const SimConfig& base, std::string_view param_name,
                            std::span<const double> values, std::size_t replicates) {
    if (values.empty()) throw ValidationError("values", "sweep needs at least one value");
    if (replicates < 1) throw ValidationError("replicates", "must be >= 1");
    (void)get_parameter(base, param_name);

    std::vector<SimConfig> configs;
    for (std::size_t v = 0; v < values.size(); ++v) {
        for (std::size_t r = 0; r < replicates; ++r) {
            SimConfig c = base;
            set_parameter(c, param_name, values[v]);
            c.seed = base.seed + r;
            validate(c);
            configs.push_back(c);
        }
    }
    std::vector<SweepRun> runs(configs.size());
    parallel_for(configs.size(), [&](std::size_t k) {
        runs[k].value_index = k / replicates;
        runs[k].replicate = k % replicates;
        runs[k].value = values[k / replicates];
        runs[k].output = simulate(configs[k]);
    });
    return runs;
}

} // namespace abmscope::sim
