#pragma once

// Synthetic processes and brute-force oracles shared by the test binaries.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "abmscope/rng.hpp"
#include "abmscope/symbolize.hpp"

namespace testing_support {

inline abmscope::symbolic::SymbolSequence fair_coin(std::size_t n, std::uint64_t seed) {
    abmscope::Rng rng(seed);
    std::vector<std::uint8_t> s(n);
    for (auto& x : s) x = static_cast<std::uint8_t>(rng.below(2));
    return abmscope::symbolic::from_symbols(std::move(s), 2);
}

inline abmscope::symbolic::SymbolSequence period2(std::size_t n, std::uint8_t phase = 0) {
    std::vector<std::uint8_t> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = static_cast<std::uint8_t>((i + phase) % 2);
    return abmscope::symbolic::from_symbols(std::move(s), 2);
}

// No two consecutive 1s; after a 0 the next symbol is a fair coin.
inline abmscope::symbolic::SymbolSequence golden_mean(std::size_t n, std::uint64_t seed) {
    abmscope::Rng rng(seed);
    std::vector<std::uint8_t> s(n);
    std::uint8_t prev = 0;
    for (auto& x : s) {
        x = prev == 1 ? 0 : static_cast<std::uint8_t>(rng.below(2));
        prev = x;
    }
    return abmscope::symbolic::from_symbols(std::move(s), 2);
}

inline double entropy_bits(const std::vector<double>& p) {
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log2(v);
    return h;
}

// Plug-in entropy of length-L words by direct counting (independent of the library).
inline double word_entropy(const std::vector<std::uint8_t>& s, std::size_t L) {
    if (L == 0) return 0.0;
    std::map<std::vector<std::uint8_t>, double> counts;
    for (std::size_t i = 0; i + L <= s.size(); ++i) counts[{s.begin() + i, s.begin() + i + L}] += 1.0;
    const double total = static_cast<double>(s.size() - L + 1);
    std::vector<double> p;
    for (const auto& [_, c] : counts) p.push_back(c / total);
    return entropy_bits(p);
}

inline Eigen::MatrixXd gaussian(std::size_t n, std::size_t d, std::uint64_t seed, double shift = 0.0,
                                double scale = 1.0) {
    abmscope::Rng rng(seed);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = shift + scale * rng.normal();
    return x;
}

// Balanced two-component mixture at +-c along every axis.
inline Eigen::MatrixXd two_blobs(std::size_t n, std::size_t d, double c, std::uint64_t seed) {
    Eigen::MatrixXd x = gaussian(n, d, seed);
    for (Eigen::Index i = 0; i < x.rows(); ++i) x.row(i).array() += (i % 2 == 0 ? c : -c);
    return x;
}

inline Eigen::MatrixXd random_rotation(std::size_t d, std::uint64_t seed) {
    const Eigen::MatrixXd g = gaussian(d, d, seed);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    return qr.householderQ();
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("abmscope_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace testing_support
