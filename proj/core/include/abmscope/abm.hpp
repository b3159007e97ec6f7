#pragma once

// Reference elder/caregiver agent-based model. Neighborhood cells carry a
// walkability level, elders carry mobility, caregivers hand out effort to
// the neediest elders. The model is a deliberately small stand-in used to
// exercise the analysis pipelines; it is not calibrated to any dataset.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace abmscope::sim {

struct SimConfig {
    std::size_t n_elders = 100;
    std::size_t n_caregivers = 10;
    std::size_t grid_side = 5;
    std::size_t horizon = 400;
    double caregiver_capacity = 4.0; // effort units per caregiver per tick
    double walkability_decay = 0.1;
    double walkability_renewal = 0.2;
    double mobility_recovery = 0.2;
    double noise_level = 0.02;
    // Accepted, persisted and swept like any other rate but never read by the
    // dynamics. Lets sensitivity screens check that an inert input scores ~0.
    double inert_knob = 0.0;
    std::uint64_t seed = 1;

    bool operator==(const SimConfig&) const = default;
};

// Throws ValidationError naming the first offending field.
void validate(const SimConfig& config);

enum class Variable : std::size_t { walkability = 0, effort = 1, mobility = 2 };
inline constexpr std::size_t kNumVariables = 3;
inline constexpr std::array<std::string_view, kNumVariables> kVariableNames{"walkability", "effort",
                                                                           "mobility"};

std::string_view variable_name(Variable v);
// Throws ValidationError("var", ...) for unknown names.
Variable parse_variable(std::string_view name);

// One population matrix per tick: row = elder, columns = (walkability, effort, mobility).
// Per-agent sequences are column slices across ticks, see agent_series().
struct SimulationOutput {
    std::vector<Eigen::MatrixXd> snapshots;
    SimConfig config;

    std::size_t horizon() const { return snapshots.size(); }
    std::size_t n_agents() const { return snapshots.empty() ? 0 : static_cast<std::size_t>(snapshots.front().rows()); }

    std::vector<double> agent_series(Variable v, std::size_t agent) const;
    // Population mean of v at each tick.
    std::vector<double> mean_series(Variable v) const;
    // Total effort handed out at each tick.
    std::vector<double> dispensed_effort() const;

    bool operator==(const SimulationOutput& other) const;
};

SimulationOutput simulate(const SimConfig& config);

// Real-valued fields that sweep() and the sensitivity screens may vary.
std::span<const std::string_view> real_parameter_names();
double get_parameter(const SimConfig& config, std::string_view name);
// Throws ValidationError("param", ...) listing valid names when `name` is unknown.
void set_parameter(SimConfig& config, std::string_view name, double value);

struct SweepRun {
    std::size_t value_index = 0;
    std::size_t replicate = 0;
    double value = 0.0;
    SimulationOutput output;
};

// |values| x replicates runs ordered by (value_index, replicate); replicate r
// uses seed base.seed + r.
std::vector<SweepRun> sweep(const SimConfig& base, std::string_view param_name,
                            std::span<const double> values, std::size_t replicates);

} // namespace abmscope::sim
