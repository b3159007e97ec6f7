#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "abmscope/emachine.hpp"
#include "abmscope/error.hpp"
#include "support.hpp"

namespace em = abmscope::emachine;
using abmscope::symbolic::from_symbols;
using abmscope::symbolic::SymbolSequence;
using namespace testing_support;

namespace {

// Two-state unifilar source given as emission probability of symbol 1 per
// state and the successor for each (state, symbol).
struct TwoState {
    double p1[2];
    int next[2][2];
};

SymbolSequence sample_two_state(const TwoState& m, std::size_t n, std::uint64_t seed) {
    abmscope::Rng rng(seed);
    std::vector<std::uint8_t> s(n);
    int state = 0;
    for (std::size_t i = 0; i < 1000 + n; ++i) {
        const int sym = rng.uniform() < m.p1[state] ? 1 : 0;
        if (i >= 1000) s[i - 1000] = static_cast<std::uint8_t>(sym);
        state = m.next[state][sym];
    }
    return from_symbols(std::move(s), 2);
}

// BIC restated from the model definition with map-based counting.
std::vector<double> bic_oracle(const std::vector<std::uint8_t>& s, std::size_t A, std::size_t max_order) {
    std::vector<double> out;
    const double n_trans = static_cast<double>(s.size() - max_order);
    for (std::size_t L = 0; L <= max_order; ++L) {
        std::map<std::vector<std::uint8_t>, std::map<std::uint8_t, double>> counts;
        for (std::size_t t = max_order; t < s.size(); ++t)
            counts[{s.begin() + static_cast<long>(t - L), s.begin() + static_cast<long>(t)}][s[t]] += 1.0;
        double ll = 0.0;
        for (const auto& [_, next] : counts) {
            double tot = 0.0;
            for (const auto& [__, c] : next) tot += c;
            for (const auto& [__, c] : next) ll += c * std::log(c / tot);
        }
        out.push_back(-2.0 * ll + std::pow(double(A), double(L)) * double(A - 1) * std::log(n_trans));
    }
    return out;
}

double oracle_excess_entropy(const std::vector<std::uint8_t>& s, std::size_t max_block) {
    std::vector<double> H(max_block + 1);
    for (std::size_t L = 0; L <= max_block; ++L) H[L] = word_entropy(s, L);
    const double h = H[max_block] - H[max_block - 1];
    double best = 0.0;
    for (std::size_t L = 0; L <= max_block; ++L) best = std::max(best, H[L] - double(L) * h);
    return best;
}

void expect_well_formed(const em::EpsilonMachine& m) {
    EXPECT_TRUE(em::is_unifilar(m));
    EXPECT_LT(em::max_row_sum_error(m), 1e-9);
    EXPECT_LT(em::stationary_residual(m), 1e-6);
    double total = 0.0;
    for (double p : m.stationary) {
        EXPECT_GE(p, 0.0);
        total += p;
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
    const double h = em::entropy_rate(m);
    const double c = em::statistical_complexity(m);
    EXPECT_GE(h, -1e-12);
    EXPECT_LE(h, std::log2(double(m.alphabet_size)) + 1e-9);
    EXPECT_GE(c, -1e-12);
    EXPECT_LE(c, std::log2(double(m.n_states)) + 1e-9);
}

} // namespace

TEST(SelectOrder, CoinIsOrderZero) { EXPECT_EQ(em::select_order(fair_coin(5000, 1), 4), 0u); }

TEST(SelectOrder, PeriodTwoIsOrderOne) { EXPECT_EQ(em::select_order(period2(1000), 4), 1u); }

TEST(SelectOrder, MaxOrderZero) { EXPECT_EQ(em::select_order(period2(1000), 0), 0u); }

TEST(SelectOrder, GoldenMeanIsOrderOne) { EXPECT_EQ(em::select_order(golden_mean(20000, 4), 4), 1u); }

TEST(SelectOrder, BicMatchesOracle) {
    for (std::uint64_t seed : {1, 2}) {
        const auto seq = golden_mean(3000, seed);
        const auto got = em::order_bic(seq, 3);
        const auto want = bic_oracle(seq.symbols, 2, 3);
        ASSERT_EQ(got.size(), want.size());
        for (std::size_t L = 0; L < got.size(); ++L) EXPECT_NEAR(got[L], want[L], 1e-6 * std::abs(want[L]));
    }
}

TEST(SelectOrder, ThreeSymbolMarkovChain) {
    // Order-1 chain on three symbols with a strongly preferred successor.
    abmscope::Rng rng(9);
    std::vector<std::uint8_t> s(6000);
    std::uint8_t x = 0;
    for (auto& v : s) {
        x = rng.uniform() < 0.8 ? static_cast<std::uint8_t>((x + 1) % 3) : static_cast<std::uint8_t>(rng.below(3));
        v = x;
    }
    EXPECT_EQ(em::select_order(from_symbols(s, 3), 3), 1u);
}

TEST(SelectOrder, TooShortThrows) {
    EXPECT_THROW(em::select_order(period2(3), 4), abmscope::InsufficientDataError);
}

TEST(Reconstruct, CoinHasOneState) {
    const auto seq = fair_coin(10000, 1);
    const auto m = em::reconstruct(seq, 3, 0.01);
    ASSERT_EQ(m.n_states, 1u);
    EXPECT_NEAR(m.emission(0)[1], 0.5, 0.02);
    expect_well_formed(m);
    EXPECT_NEAR(em::entropy_rate(m), 1.0, 0.01);
    EXPECT_NEAR(em::statistical_complexity(m), 0.0, 1e-12);

    // Independent check of the seed: no length-3 history's next-symbol counts
    // differ from the pooled counts at the 1% level (1-dof chi-squared).
    std::map<std::vector<std::uint8_t>, std::array<double, 2>> counts;
    std::array<double, 2> pooled{0, 0};
    const auto& s = seq.symbols;
    for (std::size_t t = 3; t < s.size(); ++t) {
        counts[{s.begin() + long(t) - 3, s.begin() + long(t)}][s[t]] += 1.0;
        pooled[s[t]] += 1.0;
    }
    for (const auto& [hist, c] : counts) {
        const double n1 = c[0] + c[1], n2 = pooled[0] + pooled[1];
        double stat = 0.0;
        for (int k = 0; k < 2; ++k) {
            const double tot = c[k] + pooled[k];
            const double e1 = n1 * tot / (n1 + n2), e2 = n2 * tot / (n1 + n2);
            stat += (c[k] - e1) * (c[k] - e1) / e1 + (pooled[k] - e2) * (pooled[k] - e2) / e2;
        }
        EXPECT_GT(std::erfc(std::sqrt(stat / 2.0)), 0.01);
    }
}

TEST(Reconstruct, PeriodTwo) {
    const auto m = em::reconstruct(period2(1000), 1, 0.01);
    ASSERT_EQ(m.n_states, 2u);
    expect_well_formed(m);
    EXPECT_NEAR(em::entropy_rate(m), 0.0, 1e-12);
    EXPECT_NEAR(em::statistical_complexity(m), 1.0, 1e-9);
    EXPECT_NEAR(em::min_emission_distance(m), 1.0, 1e-12);
}

TEST(Reconstruct, GoldenMean) {
    const auto m = em::reconstruct(golden_mean(20000, 3), 2, 0.01);
    ASSERT_EQ(m.n_states, 2u);
    expect_well_formed(m);
    // The state that can emit 1 does so with probability 1/2; the other never does.
    std::vector<double> p1 = {m.emission(0)[1], m.emission(1)[1]};
    std::sort(p1.begin(), p1.end());
    EXPECT_NEAR(p1[0], 0.0, 1e-12);
    EXPECT_NEAR(p1[1], 0.5, 0.03);
    std::vector<double> pi = m.stationary;
    std::sort(pi.begin(), pi.end());
    EXPECT_NEAR(pi[0], 1.0 / 3.0, 0.03);
    EXPECT_NEAR(pi[1], 2.0 / 3.0, 0.03);
    EXPECT_NEAR(em::entropy_rate(m), 2.0 / 3.0, 0.03);
    EXPECT_NEAR(em::statistical_complexity(m), entropy_bits({1.0 / 3.0, 2.0 / 3.0}), 0.03);
}

TEST(Reconstruct, TwoStateFixtureFamily) {
    const std::vector<TwoState> family = {
        {{0.5, 0.0}, {{0, 1}, {0, 0}}}, // golden mean
        {{0.3, 0.0}, {{0, 1}, {0, 0}}},
        {{0.7, 0.0}, {{0, 1}, {0, 0}}},
        {{0.2, 0.8}, {{0, 1}, {0, 1}}}, // order-1 chains: the last symbol is the state
        {{0.1, 0.6}, {{0, 1}, {0, 1}}},
        {{0.9, 0.3}, {{0, 1}, {0, 1}}},
    };
    for (std::size_t i = 0; i < family.size(); ++i) {
        const auto seq = sample_two_state(family[i], 20000, 100 + i);
        const auto m = em::reconstruct(seq, 3, 0.01);
        EXPECT_EQ(m.n_states, 2u) << "fixture " << i;
        expect_well_formed(m);
        EXPECT_GT(em::min_emission_distance(m), 0.2) << "fixture " << i;
    }
}

TEST(Reconstruct, PooledSequencesMatchConcatenatedStatistics) {
    std::vector<SymbolSequence> parts = {golden_mean(8000, 1), golden_mean(8000, 2), golden_mean(8000, 3)};
    const auto m = em::reconstruct(std::span<const SymbolSequence>(parts), 2, 0.01);
    EXPECT_EQ(m.n_states, 2u);
    expect_well_formed(m);
}

TEST(Reconstruct, CoverageError) {
    const std::size_t need = em::coverage_requirement(2, 3);
    EXPECT_GT(need, 8u);
    EXPECT_THROW(em::reconstruct(fair_coin(need - 1, 1), 3, 0.01), abmscope::InsufficientDataError);
    EXPECT_NO_THROW(em::reconstruct(fair_coin(need + 100, 1), 3, 0.01));
}

TEST(Reconstruct, BadSignificanceRejected) {
    EXPECT_THROW(em::reconstruct(fair_coin(1000, 1), 1, 0.0), abmscope::ValidationError);
    EXPECT_THROW(em::reconstruct(fair_coin(1000, 1), 1, 1.0), abmscope::ValidationError);
}

TEST(Reconstruct, Deterministic) {
    const auto seq = golden_mean(5000, 8);
    EXPECT_EQ(em::reconstruct(seq, 2, 0.01), em::reconstruct(seq, 2, 0.01));
}

TEST(ExcessEntropy, Coin) { EXPECT_NEAR(em::excess_entropy(fair_coin(20000, 2), 4), 0.0, 0.02); }

TEST(ExcessEntropy, PeriodTwo) { EXPECT_NEAR(em::excess_entropy(period2(5000), 4), 1.0, 0.05); }

TEST(ExcessEntropy, GoldenMeanMatchesBlockOracle) {
    const auto seq = golden_mean(50000, 5);
    const double got = em::excess_entropy(seq, 8);
    EXPECT_NEAR(got, oracle_excess_entropy(seq.symbols, 8), 0.05);
}

TEST(ExcessEntropy, BlockEntropiesMatchCounting) {
    const auto seq = golden_mean(4000, 6);
    const auto H = em::block_entropies(seq, 5);
    ASSERT_EQ(H.size(), 6u);
    for (std::size_t L = 0; L <= 5; ++L) EXPECT_NEAR(H[L], word_entropy(seq.symbols, L), 1e-9);
}

TEST(ExcessEntropy, CoverageError) {
    EXPECT_THROW(em::excess_entropy(fair_coin(1000, 1), 8), abmscope::InsufficientDataError);
}

TEST(Stationarity, FlagsLevelShift) {
    std::vector<std::uint8_t> s(4000, 0);
    abmscope::Rng rng(2);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = rng.uniform() < (i < 2000 ? 0.2 : 0.8) ? 1 : 0;
    const auto screen = em::stationarity_screen(from_symbols(s, 2), 0.01);
    EXPECT_TRUE(screen.suspect);
    EXPECT_LT(screen.p_value, 1e-6);
    EXPECT_FALSE(em::stationarity_screen(fair_coin(4000, 3), 0.001).suspect);
}

TEST(Analyze, PeriodTwoEndToEnd) {
    const auto a = em::analyze(period2(4000));
    EXPECT_EQ(a.selected_order, 1u);
    EXPECT_EQ(a.machine.n_states, 2u);
    EXPECT_NEAR(a.invariants.entropy_rate, 0.0, 1e-9);
    EXPECT_NEAR(a.invariants.statistical_complexity, 1.0, 1e-9);
    EXPECT_NEAR(a.invariants.excess_entropy, 1.0, 0.05);
}

TEST(Analyze, ConstantSequenceIsTrivial) {
    const auto a = em::analyze(from_symbols(std::vector<std::uint8_t>(500, 0), 1));
    EXPECT_EQ(a.machine.n_states, 1u);
    EXPECT_NEAR(a.invariants.entropy_rate, 0.0, 1e-12);
    EXPECT_NEAR(a.invariants.statistical_complexity, 0.0, 1e-12);
    EXPECT_NEAR(a.invariants.excess_entropy, 0.0, 1e-12);
}

TEST(Analyze, EmptyInputThrows) {
    EXPECT_THROW(em::analyze(from_symbols({}, 2)), abmscope::InsufficientDataError);
}

TEST(Analyze, ExplicitHistoryLength) {
    em::AnalyzeOptions opts;
    opts.history_length = 2;
    opts.max_block = 6;
    const auto a = em::analyze(golden_mean(20000, 7), opts);
    EXPECT_EQ(a.machine.history_length, 2u);
    EXPECT_EQ(a.max_block, 6u);
    EXPECT_EQ(a.machine.n_states, 2u);
}
