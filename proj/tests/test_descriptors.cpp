#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "abmscope/descriptors.hpp"
#include "abmscope/error.hpp"
#include "support.hpp"

using namespace abmscope::descriptors;
using testing_support::gaussian;
using testing_support::random_rotation;
using testing_support::two_blobs;

namespace {

// W1 between two equal-size 1-D sets: mean absolute difference of order statistics.
double sorted_w1(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s / double(a.size());
}

std::vector<double> column(const Eigen::MatrixXd& x, Eigen::Index j) {
    return {x.col(j).data(), x.col(j).data() + x.rows()};
}

const abmscope::diffusion::ScoreModel& standard_normal_model() {
    static const auto model = [] {
        abmscope::diffusion::TrainConfig cfg;
        cfg.seed = 5;
        return abmscope::diffusion::train(gaussian(2000, 2, 1), cfg, abmscope::diffusion::NoiseSchedule::linear());
    }();
    return model;
}

} // namespace

TEST(EffectiveDim, IsotropicGaussian) {
    EXPECT_NEAR(effective_dimensionality(gaussian(10000, 3, 1)), 3.0, 0.2);
}

TEST(EffectiveDim, Line) {
    Eigen::MatrixXd x(200, 2);
    for (Eigen::Index i = 0; i < 200; ++i) x(i, 0) = x(i, 1) = 0.01 * double(i);
    EXPECT_NEAR(effective_dimensionality(x), 1.0, 1e-9);
}

TEST(EffectiveDim, EqualEigenvalues) {
    // Square corners: covariance is a multiple of the identity.
    Eigen::MatrixXd x(4, 2);
    x << 1, 1, 1, -1, -1, 1, -1, -1;
    EXPECT_DOUBLE_EQ(effective_dimensionality(x), 2.0);
}

TEST(EffectiveDim, DegenerateAndTooFew) {
    EXPECT_EQ(effective_dimensionality(Eigen::MatrixXd::Constant(10, 3, 4.0)), 1.0);
    EXPECT_THROW(effective_dimensionality(gaussian(3, 3, 1)), abmscope::InsufficientDataError);
}

TEST(EffectiveDim, RotationInvariant) {
    Eigen::MatrixXd x = gaussian(500, 4, 2);
    x.col(0) *= 3.0;
    x.col(2) *= 0.2;
    const double base = effective_dimensionality(x);
    EXPECT_LE(base, 4.0 + 1e-9);
    for (std::uint64_t seed : {1, 2, 3}) {
        const Eigen::MatrixXd rotated = x * random_rotation(4, seed).transpose();
        EXPECT_NEAR(effective_dimensionality(rotated), base, 1e-6);
    }
}

TEST(ScoreNorm, ZeroModel) {
    const std::size_t hidden[] = {8};
    auto m = abmscope::diffusion::ScoreModel::initialise(2, hidden, abmscope::diffusion::NoiseSchedule::linear(), 1);
    m.zero_output_layer();
    EXPECT_EQ(mean_score_norm(m, gaussian(20, 2, 1), 10), 0.0);
}

TEST(ScoreNorm, StandardNormalOracle) {
    const auto& m = standard_normal_model();
    EXPECT_LT(mean_score_norm(m, Eigen::MatrixXd::Zero(10, 2), 40), 0.1);
    for (double r : {1.0, 2.0}) {
        Eigen::MatrixXd shell(16, 2);
        for (Eigen::Index i = 0; i < 16; ++i) {
            const double a = 2.0 * M_PI * double(i) / 16.0;
            shell(i, 0) = r * std::cos(a);
            shell(i, 1) = r * std::sin(a);
        }
        EXPECT_NEAR(mean_score_norm(m, shell, 40), r, 0.2 * r);
    }
}

TEST(Modes, SingleBlob) { EXPECT_EQ(count_modes(gaussian(500, 2, 3), 4), 1u); }

TEST(Modes, TwoSeparatedBlobs) {
    // Centres at +-2.5 per axis put the blobs more than 5 sd apart.
    EXPECT_EQ(count_modes(two_blobs(500, 2, 2.5, 4), 4), 2u);
}

TEST(Modes, MaxKOne) { EXPECT_EQ(count_modes(two_blobs(100, 2, 5.0, 4), 1), 1u); }

TEST(Modes, TooFewSamples) {
    EXPECT_THROW(count_modes(gaussian(39, 2, 1), 4), abmscope::InsufficientDataError);
}

TEST(Modes, ConstantDataIsOneMode) {
    EXPECT_EQ(count_modes(Eigen::MatrixXd::Constant(100, 2, 1.5), 4), 1u);
}

TEST(Modes, InvariantUnderTranslationAndScaling) {
    const Eigen::MatrixXd x = two_blobs(400, 2, 2.5, 7);
    const auto base = count_modes(x, 4);
    for (double scale : {0.01, 1.0, 250.0})
        for (double shift : {-40.0, 0.0, 1e3}) {
            const Eigen::MatrixXd y = (x.array() * scale + shift).matrix();
            EXPECT_EQ(count_modes(y, 4), base) << "scale " << scale << " shift " << shift;
        }
}

TEST(Modes, BicReportedPerK) {
    ModeOptions opts;
    opts.max_k = 3;
    const auto mc = count_modes_detailed(two_blobs(300, 2, 4.0, 2), opts);
    ASSERT_EQ(mc.bic.size(), 3u);
    EXPECT_EQ(mc.n_modes, 2u);
    EXPECT_EQ(std::min_element(mc.bic.begin(), mc.bic.end()) - mc.bic.begin(), 1);
}

TEST(Wasserstein, OneDimensionalExact) {
    EXPECT_DOUBLE_EQ(wasserstein1_1d({0.0}, {3.0}), 3.0);
    EXPECT_DOUBLE_EQ(wasserstein1_1d({0.0, 1.0}, {0.0, 1.0}), 0.0);
    // Unequal sizes: F_a - F_b is 1/2 on [0, 2).
    EXPECT_DOUBLE_EQ(wasserstein1_1d({0.0}, {0.0, 2.0}), 1.0);
    const auto a = gaussian(300, 1, 1);
    const auto b = gaussian(300, 1, 2, 0.5);
    EXPECT_NEAR(wasserstein1_1d(column(a, 0), column(b, 0)), sorted_w1(column(a, 0), column(b, 0)), 1e-12);
}

TEST(Wasserstein, SameSetIsZero) {
    const auto a = gaussian(200, 3, 1);
    EXPECT_EQ(divergence(a, a, Metric::wasserstein1_sliced), 0.0);
}

TEST(Wasserstein, ShiftedGaussians) {
    const auto a = gaussian(20000, 1, 1);
    const auto b = gaussian(20000, 1, 2, 2.0);
    EXPECT_NEAR(divergence(a, b, Metric::wasserstein1_sliced), 2.0, 0.1);
}

TEST(Wasserstein, SymmetricAndTriangle) {
    for (std::uint64_t seed : {1, 2, 3, 4}) {
        const auto a = gaussian(150, 2, seed);
        const auto b = gaussian(120, 2, seed + 10, 0.7);
        const auto c = two_blobs(100, 2, 1.5, seed + 20);
        const double ab = divergence(a, b, Metric::wasserstein1_sliced);
        const double ba = divergence(b, a, Metric::wasserstein1_sliced);
        const double bc = divergence(b, c, Metric::wasserstein1_sliced);
        const double ac = divergence(a, c, Metric::wasserstein1_sliced);
        EXPECT_NEAR(ab, ba, 1e-9);
        EXPECT_LE(ac, ab + bc + 1e-9);
    }
}

TEST(KnnKl, ShiftedGaussiansMatchClosedForm) {
    // KL(N(0, I) || N(mu, I)) = |mu|^2 / 2.
    const auto a = gaussian(4000, 1, 3);
    const auto b = gaussian(4000, 1, 4, 1.0);
    EXPECT_NEAR(divergence(a, b, Metric::kl_knn), 0.5, 0.1);
}

TEST(KnnKl, JitteredDuplicatesNearZero) {
    const auto a = gaussian(3000, 2, 5);
    Eigen::MatrixXd b = gaussian(3000, 2, 6);
    abmscope::Rng rng(7);
    for (Eigen::Index i = 0; i < 60; ++i)
        for (Eigen::Index j = 0; j < 2; ++j) b(i, j) = a(i, j) + 1e-6 * rng.normal();
    EXPECT_NEAR(divergence(a, b, Metric::kl_knn), 0.0, 0.1);
}

TEST(KnnKl, BoundedBelowOnSameDistribution) {
    for (std::uint64_t seed : {1, 2, 3, 4, 5})
        EXPECT_GE(divergence(gaussian(300, 3, seed), gaussian(300, 3, seed + 100), Metric::kl_knn), -0.1);
}

TEST(KnnKl, ClampedWithWarning) {
    // Every point of `a` appears five times in `b`, so its fifth foreign
    // neighbour distance is zero and gets floored.
    const auto a = gaussian(100, 2, 1);
    Eigen::MatrixXd b(500, 2);
    for (Eigen::Index r = 0; r < 5; ++r) b.middleRows(r * 100, 100) = a;
    const auto d = divergence_detailed(a, b, Metric::kl_knn);
    EXPECT_EQ(d.value, -0.5);
    EXPECT_EQ(d.warnings.size(), 2u);
    // Against itself the estimate is negative but above the clamp.
    const auto self = divergence_detailed(a, a, Metric::kl_knn);
    EXPECT_LT(self.value, 0.0);
    EXPECT_GT(self.value, -0.5);
}

TEST(Divergence, Validation) {
    EXPECT_THROW(divergence(gaussian(10, 2, 1), gaussian(10, 3, 1), Metric::wasserstein1_sliced),
                 abmscope::ValidationError);
    EXPECT_THROW(divergence(Eigen::MatrixXd(0, 2), gaussian(10, 2, 1), Metric::wasserstein1_sliced),
                 abmscope::ValidationError);
    EXPECT_THROW(divergence(gaussian(4, 2, 1), gaussian(10, 2, 1), Metric::kl_knn), abmscope::InsufficientDataError);
    EXPECT_EQ(parse_metric(metric_name(Metric::kl_knn)), Metric::kl_knn);
    EXPECT_THROW(parse_metric("energy"), abmscope::ValidationError);
}

TEST(Shape, SymmetricGaussian) {
    const auto x = gaussian(10000, 2, 9);
    const auto s = skewness(x);
    EXPECT_LT(s.cwiseAbs().maxCoeff(), 0.1);
}

TEST(Shape, SkewnessSign) {
    Eigen::MatrixXd x = gaussian(5000, 1, 2);
    x = x.array().exp().matrix();
    EXPECT_GT(skewness(x)(0), 1.0);
}

TEST(Shape, TailMassGaussian) {
    EXPECT_NEAR(tail_mass(gaussian(100000, 1, 4)), 0.0027, 0.002);
}

TEST(Shape, IdenticalPoints) {
    const auto g = shape_summary(Eigen::MatrixXd::Constant(50, 3, 2.0));
    EXPECT_EQ(g.covariance, Eigen::MatrixXd::Zero(3, 3));
    EXPECT_EQ(g.effective_dim, 1.0);
    EXPECT_EQ(g.n_modes, 1u);
    EXPECT_EQ(g.skewness, Eigen::VectorXd::Zero(3));
    EXPECT_EQ(g.tail_mass, 0.0);
}

TEST(Shape, SummaryInvariants) {
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto g = shape_summary(two_blobs(400, 3, 1.0 + double(seed), seed));
        EXPECT_LT((g.covariance - g.covariance.transpose()).cwiseAbs().maxCoeff(), 1e-12);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.covariance);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8);
        EXPECT_GE(g.effective_dim, 1.0);
        EXPECT_LE(g.effective_dim, 3.0 + 1e-9);
        EXPECT_GE(g.tail_mass, 0.0);
        EXPECT_LE(g.tail_mass, 1.0);
        EXPECT_GE(g.n_modes, 1u);
        EXPECT_EQ(g.mean_score_norm, 0.0);
    }
}

TEST(Shape, ScoreNormFilledWithModel) {
    ShapeOptions opts;
    opts.score_step = 40;
    const auto g = shape_summary(gaussian(200, 2, 3), opts, &standard_normal_model());
    EXPECT_GT(g.mean_score_norm, 0.5);
    EXPECT_TRUE(std::isfinite(g.mean_score_norm));
}
