#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "abmscope/error.hpp"
#include "abmscope/mixture.hpp"
#include "support.hpp"

using namespace abmscope::stats;
using testing_support::gaussian;
using testing_support::two_blobs;

namespace {

// Mixture log-density evaluated directly from the fitted parameters.
double oracle_log_likelihood(const GmmFit& g, const Eigen::MatrixXd& x) {
    const auto d = static_cast<double>(x.cols());
    double total = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double p = 0.0;
        for (std::size_t c = 0; c < g.k; ++c) {
            const auto ci = static_cast<Eigen::Index>(c);
            const Eigen::VectorXd diff = x.row(i).transpose() - g.means.row(ci).transpose();
            const Eigen::MatrixXd& cov = g.covariances[c];
            const double quad = diff.dot(cov.inverse() * diff);
            p += g.weights(ci) * std::exp(-0.5 * quad) /
                 std::sqrt(std::pow(2.0 * std::numbers::pi, d) * cov.determinant());
        }
        total += std::log(p);
    }
    return total;
}

} // namespace

TEST(Covariance, MatchesDefinition) {
    Eigen::MatrixXd x(4, 2);
    x << 1, 2, 3, 6, 5, 4, 7, 0;
    const auto c = covariance(x);
    // Means (4, 3); deviations (-3,-1), (-1,3), (1,1), (3,-3).
    EXPECT_NEAR(c(0, 0), 20.0 / 3.0, 1e-12);
    EXPECT_NEAR(c(1, 1), 20.0 / 3.0, 1e-12);
    EXPECT_NEAR(c(0, 1), -8.0 / 3.0, 1e-12);
    EXPECT_NEAR(c(1, 0), c(0, 1), 0.0);
    EXPECT_EQ(covariance(x.topRows(1)), Eigen::MatrixXd::Zero(2, 2));
}

TEST(Gmm, ParameterCounts) {
    EXPECT_EQ(gmm_parameter_count(1, 1, CovarianceType::full), 2u);
    EXPECT_EQ(gmm_parameter_count(2, 2, CovarianceType::full), 11u);
    EXPECT_EQ(gmm_parameter_count(3, 2, CovarianceType::diagonal), 14u);
}

TEST(Gmm, RecoversTwoBlobs) {
    const auto x = two_blobs(1000, 2, 4.0, 3);
    GmmOptions opts;
    opts.restarts = 10;
    const auto fit = fit_gmm(x, 2, opts);
    ASSERT_TRUE(fit.has_value());
    EXPECT_NEAR(fit->weights.sum(), 1.0, 1e-12);
    for (std::size_t c = 0; c < 2; ++c) {
        EXPECT_NEAR(fit->weights(Eigen::Index(c)), 0.5, 0.05);
        EXPECT_NEAR(std::abs(fit->means(Eigen::Index(c), 0)), 4.0, 0.2);
        EXPECT_NEAR(fit->covariances[c](0, 0), 1.0, 0.2);
    }
    EXPECT_NEAR(fit->log_likelihood, oracle_log_likelihood(*fit, x), 1e-6 * std::abs(fit->log_likelihood));
    const double expected_bic = -2.0 * fit->log_likelihood + 11.0 * std::log(1000.0);
    EXPECT_NEAR(fit->bic, expected_bic, 1e-9 * std::abs(expected_bic));

    const auto labels = fit->assign(x);
    std::size_t agree = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) agree += labels[std::size_t(i)] == labels[0] ? (i % 2 == 0) : (i % 2 == 1);
    EXPECT_GE(agree, 995u);
}

TEST(Gmm, DiagonalCovariancesAreDiagonal) {
    GmmOptions opts;
    opts.covariance = CovarianceType::diagonal;
    opts.restarts = 5;
    const auto fit = fit_gmm(two_blobs(400, 3, 3.0, 1), 2, opts);
    ASSERT_TRUE(fit.has_value());
    for (const auto& c : fit->covariances) {
        Eigen::MatrixXd off = c;
        off.diagonal().setZero();
        EXPECT_EQ(off.cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(Gmm, BicPrefersTwoForSeparatedBlobs) {
    const auto x = two_blobs(600, 2, 5.0, 8);
    EXPECT_LT(fit_gmm(x, 2)->bic, fit_gmm(x, 1)->bic);
    const auto y = gaussian(600, 2, 8);
    EXPECT_LT(fit_gmm(y, 1)->bic, fit_gmm(y, 2)->bic);
}

TEST(Gmm, Deterministic) {
    const auto x = two_blobs(300, 2, 2.0, 4);
    GmmOptions opts;
    opts.seed = 17;
    const auto a = fit_gmm(x, 3, opts);
    const auto b = fit_gmm(x, 3, opts);
    ASSERT_TRUE(a && b);
    EXPECT_EQ(a->log_likelihood, b->log_likelihood);
    EXPECT_EQ(a->means, b->means);
}

TEST(Gmm, FailsWhenNoRestartConverges) {
    GmmOptions opts;
    opts.max_iter = 1;
    opts.restarts = 3;
    const auto fit = fit_gmm(two_blobs(200, 2, 2.0, 4), 2, opts);
    EXPECT_FALSE(fit.has_value());
}

TEST(Gmm, Validation) {
    const auto x = gaussian(5, 2, 1);
    EXPECT_THROW(fit_gmm(x, 0), abmscope::ValidationError);
    EXPECT_THROW(fit_gmm(x, 6), abmscope::ValidationError);
    Eigen::MatrixXd bad = x;
    bad(0, 0) = std::numeric_limits<double>::infinity();
    EXPECT_THROW(fit_gmm(bad, 1), abmscope::ValidationError);
}
