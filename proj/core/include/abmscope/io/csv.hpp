#pragma once

// Plain comma-separated files with a header row. Numbers are written with 17
// significant digits so they reload exactly.

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "abmscope/abm.hpp"
#include "abmscope/regimes.hpp"
#include "abmscope/symbolize.hpp"

namespace abmscope::io {

std::string format_double(double v);
// Throws ValidationError(field) when `text` is not a complete finite number.
double parse_double(const std::string& text, const std::string& field);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Throws ValidationError("input") for a missing column.
    std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

// Single named column of reals.
void write_series_csv(const std::filesystem::path& path, const std::string& name, std::span<const double> values);
// First column, or the column `name` when given. A non-numeric first line is treated as a header.
std::vector<double> read_series_csv(const std::filesystem::path& path, const std::string& name = "");

// Symbols as a single `symbol` column plus a JSON sidecar (<path>.json) holding
// alphabet_size and the bin scheme.
void write_symbols(const std::filesystem::path& path, const symbolic::SymbolSequence& seq);
// Without a sidecar the file is read as raw symbols with an inferred alphabet.
symbolic::SymbolSequence read_symbols(const std::filesystem::path& path);

// Long form: t, agent_id, walkability, effort, mobility.
void write_simulation_csv(const std::filesystem::path& path, const sim::SimulationOutput& out);
sim::SimulationOutput read_simulation_csv(const std::filesystem::path& path, const sim::SimConfig& config);
// Per-agent sequences of one variable: agent_id, t, value.
void write_sequences_csv(const std::filesystem::path& path, const sim::SimulationOutput& out, sim::Variable v);

// Rows = samples, columns x0..x{d-1}.
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m, const std::string& prefix = "x");
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

// Long form, one row per cell per field:
// scale_k, theta_index, theta, field, mean, sd, n_replicates, n_failures.
void write_surface_csv(const std::filesystem::path& path, std::span<const regimes::DescriptorVector> cells,
                       std::size_t thetas_per_scale = 0);

} // namespace abmscope::io
