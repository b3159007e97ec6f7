#pragma once

// Causal-state reconstruction from symbol sequences and the information
// invariants of the resulting machine.
//
// Reconstruction follows the CSSR scheme: histories up to a fixed length are
// grouped by their empirical next-symbol distributions (two-sample
// chi-squared test), then states are split until every (state, symbol) pair
// has a single successor. Entropies are reported in bits.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "abmscope/symbolize.hpp"

namespace abmscope::emachine {

struct Transition {
    std::size_t from = 0;
    std::size_t symbol = 0;
    std::size_t to = 0;
    double prob = 0.0;

    bool operator==(const Transition&) const = default;
};

struct EpsilonMachine {
    std::size_t n_states = 0;
    std::size_t alphabet_size = 0;
    std::size_t history_length = 0;
    std::vector<Transition> transitions; // sorted by (from, symbol)
    std::vector<double> stationary;      // pi, one entry per state
    std::size_t pruned_transient = 0;    // states dropped outside the recurrent part
    std::vector<std::string> warnings;

    const Transition* find(std::size_t state, std::size_t symbol) const;
    // Next-symbol distribution of a state (length alphabet_size).
    std::vector<double> emission(std::size_t state) const;
    // State-to-state matrix, marginalised over symbols.
    Eigen::MatrixXd state_matrix() const;

    bool operator==(const EpsilonMachine&) const = default;
};

struct Invariants {
    double entropy_rate = 0.0;           // h_mu, bits per symbol
    double statistical_complexity = 0.0; // C_mu, bits
    double excess_entropy = 0.0;         // E, bits

    bool operator==(const Invariants&) const = default;
};

// BIC(L) = -2 logL(L) + A^L (A-1) ln(n_transitions) for L = 0..max_order,
// with every order scored on the same n - max_order predicted positions.
std::vector<double> order_bic(const symbolic::SymbolSequence& seq, std::size_t max_order);

// argmin of order_bic, ties to the smaller order.
std::size_t select_order(const symbolic::SymbolSequence& seq, std::size_t max_order);

// Minimum sequence length the reconstruction accepts for a history length.
std::size_t coverage_requirement(std::size_t alphabet_size, std::size_t history_length);

EpsilonMachine reconstruct(const symbolic::SymbolSequence& seq, std::size_t history_length,
                           double significance);
// Pools history statistics over several sequences on one alphabet (e.g. one
// per agent). Coverage is checked against the total number of symbols.
EpsilonMachine reconstruct(std::span<const symbolic::SymbolSequence> seqs, std::size_t history_length,
                           double significance);

double entropy_rate(const EpsilonMachine& m);
double statistical_complexity(const EpsilonMachine& m);

// Empirical block entropies H(0..max_block) in bits.
std::vector<double> block_entropies(const symbolic::SymbolSequence& seq, std::size_t max_block);

// max over L <= max_block of H(L) - L * (H(max_block) - H(max_block - 1)), clamped at 0.
// Requires length >= 100 * A^max_block.
double excess_entropy(const symbolic::SymbolSequence& seq, std::size_t max_block);

// Structural checks used by tests and by analyze().
bool is_unifilar(const EpsilonMachine& m);
double max_row_sum_error(const EpsilonMachine& m);
double stationary_residual(const EpsilonMachine& m); // max |pi - pi P|
// Smallest total-variation distance between two states' emission distributions.
double min_emission_distance(const EpsilonMachine& m);

struct StationarityScreen {
    double p_value = 1.0;
    bool suspect = false;
};
// Chi-squared comparison of first- and second-half symbol histograms.
StationarityScreen stationarity_screen(const symbolic::SymbolSequence& seq, double significance);

struct AnalyzeOptions {
    std::size_t max_order = 4;
    std::optional<std::size_t> history_length; // default: max(1, selected order)
    double significance = 0.01;
    std::optional<std::size_t> max_block; // default: largest block the data supports
    std::size_t max_block_cap = 8;
};

struct Analysis {
    EpsilonMachine machine;
    Invariants invariants;
    std::size_t selected_order = 0;
    std::size_t max_block = 0;
    StationarityScreen stationarity;
};

Analysis analyze(const symbolic::SymbolSequence& seq, const AnalyzeOptions& opts = {});

} // namespace abmscope::emachine
