#include <gtest/gtest.h>

#include <algorithm>

#include "abmscope/error.hpp"
#include "abmscope/rng.hpp"
#include "abmscope/symbolize.hpp"

using namespace abmscope::symbolic;

namespace {
std::vector<int> as_ints(const SymbolSequence& s) { return {s.symbols.begin(), s.symbols.end()}; }
} // namespace

TEST(Discretize, ConstantSeriesUniformCollapsesToZero) {
    const std::vector<double> x{5, 5, 5};
    const auto s = discretize(x, 3, BinMethod::uniform);
    EXPECT_EQ(as_ints(s), (std::vector<int>{0, 0, 0}));
    EXPECT_EQ(s.alphabet_size, 3u);
}

TEST(Discretize, QuantileMedianSplit) {
    const std::vector<double> x{1, 2, 3, 4};
    EXPECT_EQ(as_ints(discretize(x, 2, BinMethod::quantile)), (std::vector<int>{0, 0, 1, 1}));
}

TEST(Discretize, UniformEndpoints) {
    const std::vector<double> x{0.0, 1.0};
    EXPECT_EQ(as_ints(discretize(x, 2, BinMethod::uniform)), (std::vector<int>{0, 1}));
}

TEST(Discretize, UniformMaxGoesToTopBin) {
    const std::vector<double> x{0.0, 0.5, 1.0, 0.25, 0.75};
    const auto s = discretize(x, 4, BinMethod::uniform);
    EXPECT_EQ(s.symbols[2], 3);
    EXPECT_EQ(s.symbols[0], 0);
}

TEST(Discretize, QuantileTiesGoLow) {
    const std::vector<double> x{1, 1, 1, 2};
    EXPECT_EQ(as_ints(discretize(x, 2, BinMethod::quantile)), (std::vector<int>{0, 0, 0, 1}));
}

TEST(Discretize, Errors) {
    const std::vector<double> bad{1.0, std::nan(""), 2.0};
    try {
        discretize(bad, 2, BinMethod::quantile);
        FAIL();
    } catch (const abmscope::ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("index 1"), std::string::npos);
    }
    const std::vector<double> ok{1.0, 2.0};
    EXPECT_THROW(discretize(ok, 0, BinMethod::quantile), abmscope::ValidationError);
    EXPECT_THROW(discretize({}, 2, BinMethod::quantile), abmscope::ValidationError);
    const std::vector<double> inf{1.0, std::numeric_limits<double>::infinity()};
    EXPECT_THROW(discretize(inf, 2, BinMethod::uniform), abmscope::ValidationError);
}

TEST(Discretize, QuantileOccupancyIsBalanced) {
    abmscope::Rng rng(4);
    for (std::size_t n : {97u, 1000u, 1237u}) {
        std::vector<double> x(n);
        for (auto& v : x) v = rng.normal();
        for (std::size_t bins : {2u, 3u, 5u, 8u}) {
            const auto s = discretize(x, bins, BinMethod::quantile);
            std::vector<std::size_t> counts(bins, 0);
            for (auto sym : s.symbols) ++counts[sym];
            const double target = static_cast<double>(n) / static_cast<double>(bins);
            for (auto c : counts) EXPECT_LE(std::abs(static_cast<double>(c) - target), 1.0) << n << " " << bins;
        }
    }
}

TEST(Discretize, SymbolsBelowAlphabet) {
    abmscope::Rng rng(8);
    std::vector<double> x(500);
    for (auto& v : x) v = rng.uniform(-3, 7);
    for (auto m : {BinMethod::quantile, BinMethod::uniform}) {
        const auto s = discretize(x, 6, m);
        EXPECT_EQ(s.size(), x.size());
        EXPECT_EQ(s.alphabet_size, 6u);
        for (auto sym : s.symbols) EXPECT_LT(sym, 6);
        EXPECT_EQ(*std::max_element(s.symbols.begin(), s.symbols.end()) + 1u, s.alphabet_size);
    }
}

TEST(Discretize, ResymbolizingMidpointsIsFixedPoint) {
    abmscope::Rng rng(15);
    std::vector<double> x(400);
    for (auto& v : x) v = rng.normal();
    for (auto m : {BinMethod::quantile, BinMethod::uniform}) {
        const auto s = discretize(x, 4, m);
        std::vector<double> mids;
        for (auto sym : s.symbols) mids.push_back(s.scheme.midpoint(sym));
        EXPECT_EQ(apply_scheme(mids, s.scheme).symbols, s.symbols);
        if (m == BinMethod::quantile) {
            // Refitting on the midpoints recovers the same partition of positions.
            EXPECT_EQ(discretize(mids, 4, m).symbols, s.symbols);
        }
    }
}

TEST(Discretize, ApplySchemeDoesNotRefit) {
    const std::vector<double> x{0, 1, 2, 3};
    const auto s = discretize(x, 2, BinMethod::uniform);
    const std::vector<double> y{-5, 1.4, 1.6, 10};
    EXPECT_EQ(as_ints(apply_scheme(y, s.scheme)), (std::vector<int>{0, 0, 1, 1}));
}

TEST(FromSymbols, InfersAlphabet) {
    const auto s = from_symbols({0, 2, 1, 2});
    EXPECT_EQ(s.alphabet_size, 3u);
    EXPECT_THROW(from_symbols({0, 3}, 2), abmscope::ValidationError);
}

TEST(Aggregate, IdentityAtK1) {
    const std::vector<double> x{0.3, -1.0, 2.5};
    EXPECT_EQ(aggregate_series(x, {1, Reducer::mean}), x);
    EXPECT_EQ(aggregate_series(x, {1, Reducer::max}), x);
    EXPECT_EQ(aggregate_series(x, {1, Reducer::last}), x);
}

TEST(Aggregate, HandComputedBlocks) {
    const std::vector<double> p2{0, 1, 0, 1};
    EXPECT_EQ(aggregate_series(p2, {2, Reducer::mean}), (std::vector<double>{0.5, 0.5}));
    const std::vector<double> x{1, 2, 3, 4, 5};
    EXPECT_EQ(aggregate_series(x, {2, Reducer::max}), (std::vector<double>{2, 4}));
    EXPECT_EQ(aggregate_series(x, {2, Reducer::last}), (std::vector<double>{2, 4}));
    EXPECT_THROW(aggregate_series(x, {6, Reducer::mean}), abmscope::ValidationError);
    EXPECT_THROW(aggregate_series(x, {0, Reducer::mean}), abmscope::ValidationError);
}

TEST(Aggregate, MeanCommutesWithAffineMaps) {
    abmscope::Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> x(37);
        for (auto& v : x) v = rng.normal();
        const double a = rng.uniform(-3, 3), b = rng.uniform(-10, 10);
        std::vector<double> y(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = a * x[i] + b;
        const std::size_t k = 1 + rng.below(6);
        const auto ax = aggregate_series(x, {k, Reducer::mean});
        const auto ay = aggregate_series(y, {k, Reducer::mean});
        ASSERT_EQ(ax.size(), x.size() / k);
        for (std::size_t i = 0; i < ax.size(); ++i) EXPECT_NEAR(ay[i], a * ax[i] + b, 1e-12);
    }
}

TEST(AggregateSnapshots, ElementwiseOracles) {
    const Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(4, 3);
    const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(4, 3);
    const Eigen::MatrixXd r = Eigen::MatrixXd::Random(4, 3);

    const std::vector<Eigen::MatrixXd> same{r, r};
    const auto id = aggregate_snapshots(same, {1, Reducer::mean});
    ASSERT_EQ(id.size(), 2u);
    EXPECT_TRUE(id[0] == r);
    const auto collapsed = aggregate_snapshots(same, {2, Reducer::mean});
    ASSERT_EQ(collapsed.size(), 1u);
    EXPECT_TRUE(collapsed[0].isApprox(r, 1e-15));

    const std::vector<Eigen::MatrixXd> zo{zeros, ones};
    const auto half = aggregate_snapshots(zo, {2, Reducer::mean});
    EXPECT_TRUE((half[0].array() == 0.5).all());

    const std::vector<Eigen::MatrixXd> ragged{zeros, Eigen::MatrixXd::Zero(3, 3)};
    EXPECT_THROW(aggregate_snapshots(ragged, {2, Reducer::mean}), abmscope::ValidationError);
}

TEST(Names, RoundTrip) {
    for (auto m : {BinMethod::quantile, BinMethod::uniform}) EXPECT_EQ(parse_bin_method(method_name(m)), m);
    for (auto r : {Reducer::mean, Reducer::max, Reducer::last}) EXPECT_EQ(parse_reducer(reducer_name(r)), r);
    EXPECT_THROW(parse_bin_method("sax"), abmscope::ValidationError);
}
