#include "abmscope/symbolize.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "abmscope/error.hpp"

namespace abmscope::symbolic {

std::string_view method_name(BinMethod m) { return m == BinMethod::quantile ? "quantile" : "uniform"; }

BinMethod parse_bin_method(std::string_view name) {
    if (name == "quantile") return BinMethod::quantile;
    if (name == "uniform") return BinMethod::uniform;
    throw ValidationError("method", "expected quantile or uniform, got '" + std::string(name) + "'");
}

std::string BinScheme::describe() const {
    std::ostringstream os;
    os.precision(17);
    os << method_name(method) << " n_bins=" << n_bins << " edges=[";
    for (std::size_t i = 0; i < edges.size(); ++i) os << (i ? "," : "") << edges[i];
    os << "]";
    return os.str();
}

double BinScheme::midpoint(std::size_t bin) const {
    const double lower = bin == 0 ? lo : edges[bin - 1];
    const double upper = bin + 1 >= n_bins ? hi : edges[bin];
    return 0.5 * (lower + upper);
}

namespace {

void check_series(std::span<const double> series) {
    if (series.empty()) throw ValidationError("series", "must be non-empty");
    for (std::size_t i = 0; i < series.size(); ++i)
        if (!std::isfinite(series[i]))
            throw ValidationError("series", "non-finite value at index " + std::to_string(i));
}

std::uint8_t bin_of(double v, const std::vector<double>& edges) {
    // number of edges strictly less than v
    const auto it = std::lower_bound(edges.begin(), edges.end(), v);
    return static_cast<std::uint8_t>(it - edges.begin());
}

} // namespace

SymbolSequence apply_scheme(std::span<const double> series, const BinScheme& scheme) {
    check_series(series);
    SymbolSequence out;
    out.scheme = scheme;
    out.alphabet_size = scheme.n_bins;
    out.symbols.reserve(series.size());
    for (double v : series) out.symbols.push_back(bin_of(v, scheme.edges));
    return out;
}

SymbolSequence discretize(std::span<const double> series, std::size_t n_bins, BinMethod method) {
    check_series(series);
    if (n_bins < 1 || n_bins > kMaxAlphabet)
        throw ValidationError("n_bins", "must be in [1, " + std::to_string(kMaxAlphabet) + "]");

    BinScheme scheme;
    scheme.method = method;
    scheme.n_bins = n_bins;
    const auto [mn, mx] = std::minmax_element(series.begin(), series.end());
    scheme.lo = *mn;
    scheme.hi = *mx;

    if (method == BinMethod::quantile) {
        std::vector<double> sorted(series.begin(), series.end());
        std::sort(sorted.begin(), sorted.end());
        const std::size_t n = sorted.size();
        for (std::size_t b = 1; b < n_bins; ++b) {
            // upper edge of bin b-1: the ceil(b n / B)-th smallest value
            const std::size_t rank = (b * n + n_bins - 1) / n_bins;
            scheme.edges.push_back(sorted[rank == 0 ? 0 : rank - 1]);
        }
        // Bin edges sit on data values; a zero-rank edge (tiny n) just leaves
        // the lowest bin empty.
    } else {
        const double range = scheme.hi - scheme.lo;
        if (range > 0.0) {
            for (std::size_t b = 1; b < n_bins; ++b)
                scheme.edges.push_back(scheme.lo + range * static_cast<double>(b) / static_cast<double>(n_bins));
        } else {
            // Zero range: every inner edge at the constant value, all symbols 0.
            scheme.edges.assign(n_bins - 1, scheme.lo);
        }
    }

    SymbolSequence out = apply_scheme(series, scheme);
    if (method == BinMethod::uniform && scheme.hi > scheme.lo) {
        // The max value belongs to the top bin even if rounding put an edge on it.
        for (std::size_t i = 0; i < series.size(); ++i)
            if (series[i] == scheme.hi) out.symbols[i] = static_cast<std::uint8_t>(n_bins - 1);
    }
    return out;
}

SymbolSequence from_symbols(std::vector<std::uint8_t> symbols, std::size_t alphabet_size) {
    std::size_t max_symbol = 0;
    for (auto s : symbols) max_symbol = std::max<std::size_t>(max_symbol, s);
    if (alphabet_size == 0) alphabet_size = max_symbol + 1;
    if (alphabet_size > kMaxAlphabet)
        throw ValidationError("alphabet_size", "must be <= " + std::to_string(kMaxAlphabet));
    if (!symbols.empty() && max_symbol >= alphabet_size)
        throw ValidationError("symbols", "symbol " + std::to_string(max_symbol) +
                                             " outside alphabet of size " + std::to_string(alphabet_size));
    SymbolSequence out;
    out.symbols = std::move(symbols);
    out.alphabet_size = alphabet_size;
    out.scheme.n_bins = alphabet_size;
    out.scheme.method = BinMethod::uniform;
    for (std::size_t b = 1; b < alphabet_size; ++b) out.scheme.edges.push_back(static_cast<double>(b) - 0.5);
    out.scheme.lo = 0.0;
    out.scheme.hi = static_cast<double>(alphabet_size - 1);
    return out;
}

std::string_view reducer_name(Reducer r) {
    switch (r) {
    case Reducer::mean: return "mean";
    case Reducer::max: return "max";
    case Reducer::last: return "last";
    }
    return "mean";
}

Reducer parse_reducer(std::string_view name) {
    if (name == "mean") return Reducer::mean;
    if (name == "max") return Reducer::max;
    if (name == "last") return Reducer::last;
    throw ValidationError("reducer", "expected mean, max or last, got '" + std::string(name) + "'");
}

namespace {

void check_spec(const AggregationSpec& spec, std::size_t length) {
    if (spec.k < 1) throw ValidationError("k", "block length must be >= 1");
    if (spec.k > length)
        throw ValidationError("k", "block length " + std::to_string(spec.k) + " exceeds series length " +
                                       std::to_string(length));
}

} // namespace

std::vector<double> aggregate_series(std::span<const double> series, const AggregationSpec& spec) {
    check_spec(spec, series.size());
    const std::size_t blocks = series.size() / spec.k;
    std::vector<double> out(blocks);
    for (std::size_t b = 0; b < blocks; ++b) {
        const auto block = series.subspan(b * spec.k, spec.k);
        switch (spec.reducer) {
        case Reducer::mean: {
            double s = 0.0;
            for (double v : block) s += v;
            out[b] = s / static_cast<double>(spec.k);
            break;
        }
        case Reducer::max: out[b] = *std::max_element(block.begin(), block.end()); break;
        case Reducer::last: out[b] = block.back(); break;
        }
    }
    return out;
}

std::vector<Eigen::MatrixXd> aggregate_snapshots(std::span<const Eigen::MatrixXd> snapshots,
                                                 const AggregationSpec& spec) {
    check_spec(spec, snapshots.size());
    for (const auto& s : snapshots)
        if (s.rows() != snapshots.front().rows() || s.cols() != snapshots.front().cols())
            throw ValidationError("snapshots", "all matrices must share one shape");
    const std::size_t blocks = snapshots.size() / spec.k;
    std::vector<Eigen::MatrixXd> out;
    out.reserve(blocks);
    for (std::size_t b = 0; b < blocks; ++b) {
        const auto block = snapshots.subspan(b * spec.k, spec.k);
        Eigen::MatrixXd acc = block.front();
        for (std::size_t j = 1; j < block.size(); ++j) {
            switch (spec.reducer) {
            case Reducer::mean: acc += block[j]; break;
            case Reducer::max: acc = acc.cwiseMax(block[j]); break;
            case Reducer::last: acc = block[j]; break;
            }
        }
        if (spec.reducer == Reducer::mean) acc /= static_cast<double>(spec.k);
        out.push_back(std::move(acc));
    }
    return out;
}

} // namespace abmscope::symbolic
