#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace abmscope::symbolic {

enum class BinMethod { quantile, uniform };

std::string_view method_name(BinMethod m);
BinMethod parse_bin_method(std::string_view name);

// The binning that produced a sequence. A value v is assigned to the number
// of edges strictly below it, so values equal to an edge go to the lower bin.
struct BinScheme {
    BinMethod method = BinMethod::quantile;
    std::size_t n_bins = 1;
    std::vector<double> edges; // n_bins - 1 non-decreasing inner edges
    double lo = 0.0;           // observed min
    double hi = 0.0;           // observed max

    std::string describe() const;
    // Representative value of bin b: midpoint of its [lower, upper] range.
    double midpoint(std::size_t bin) const;

    bool operator==(const BinScheme&) const = default;
};

struct SymbolSequence {
    std::vector<std::uint8_t> symbols;
    std::size_t alphabet_size = 1;
    BinScheme scheme;

    std::size_t size() const { return symbols.size(); }
    bool operator==(const SymbolSequence&) const = default;
};

// Maximum alphabet; symbols are stored as bytes.
inline constexpr std::size_t kMaxAlphabet = 64;

// Throws ValidationError for empty input, non-finite values (with index) or
// n_bins outside [1, kMaxAlphabet].
SymbolSequence discretize(std::span<const double> series, std::size_t n_bins, BinMethod method);

// Re-applies a fixed scheme (no refitting) to new values.
SymbolSequence apply_scheme(std::span<const double> series, const BinScheme& scheme);

// Wraps an already-symbolic series (e.g. a fixture). alphabet_size defaults to 1 + max symbol.
SymbolSequence from_symbols(std::vector<std::uint8_t> symbols, std::size_t alphabet_size = 0);

enum class Reducer { mean, max, last };

std::string_view reducer_name(Reducer r);
Reducer parse_reducer(std::string_view name);

struct AggregationSpec {
    std::size_t k = 1;
    Reducer reducer = Reducer::mean;
};

// Block n maps to reducer(series[n*k .. (n+1)*k - 1]); a trailing partial block is dropped.
std::vector<double> aggregate_series(std::span<const double> series, const AggregationSpec& spec);

// Elementwise version over same-shape matrices.
std::vector<Eigen::MatrixXd> aggregate_snapshots(std::span<const Eigen::MatrixXd> snapshots,
                                                 const AggregationSpec& spec);

} // namespace abmscope::symbolic
