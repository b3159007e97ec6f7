#pragma once

// Distributional-geometry descriptors of a sample set (rows = samples).

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "abmscope/diffusion.hpp"

namespace abmscope::descriptors {

using Samples = Eigen::MatrixXd;

struct GeometryDescriptor {
    double effective_dim = 1.0;
    double mean_score_norm = 0.0;
    std::size_t n_modes = 1;
    Eigen::VectorXd skewness;
    Eigen::MatrixXd covariance;
    double tail_mass = 0.0; // fraction of samples with some coordinate beyond 3 sd of its mean
    std::vector<std::string> warnings;

    bool operator==(const GeometryDescriptor& o) const;
};

// Participation ratio (sum lambda)^2 / sum lambda^2 of the covariance
// spectrum; 1 for zero covariance. Needs at least d + 1 samples.
double effective_dimensionality(const Samples& samples);

// Mean over rows of ||score(model, standardize(row), t)||.
double mean_score_norm(const diffusion::ScoreModel& model, const Samples& samples, std::size_t t);

struct ModeOptions {
    std::size_t max_k = 4;
    std::size_t restarts = 50;
    std::size_t max_iter = 200;
    std::uint64_t seed = 0x5eed;
};

struct ModeCount {
    std::size_t n_modes = 1;
    std::vector<double> bic; // per k = 1..max_k, NaN where the fit was skipped
    std::vector<std::string> warnings;
};

// GMM-BIC model choice over k = 1..max_k. Needs n >= 10 * max_k.
ModeCount count_modes_detailed(const Samples& samples, const ModeOptions& opts = {});
std::size_t count_modes(const Samples& samples, std::size_t max_k);

enum class Metric { kl_knn, wasserstein1_sliced };

std::string_view metric_name(Metric m);
Metric parse_metric(std::string_view name);

struct DivergenceOptions {
    std::size_t neighbors = 5;
    std::size_t slices = 64;
    std::uint64_t seed = 0x51ced;
};

struct Divergence {
    double value = 0.0;
    std::vector<std::string> warnings;
};

// Exact 1-D W1 between two empirical measures (any sizes).
double wasserstein1_1d(std::vector<double> a, std::vector<double> b);

Divergence divergence_detailed(const Samples& a, const Samples& b, Metric metric, const DivergenceOptions& opts = {});
double divergence(const Samples& a, const Samples& b, Metric metric, const DivergenceOptions& opts = {});

// Per-coordinate sample skewness (0 for constant coordinates).
Eigen::VectorXd skewness(const Samples& samples);
double tail_mass(const Samples& samples);

struct ShapeOptions {
    ModeOptions modes;
    std::size_t score_step = 20; // diffusion step used for mean_score_norm
};

// Composite descriptor. mean_score_norm is filled only when a model is given.
GeometryDescriptor shape_summary(const Samples& samples, const ShapeOptions& opts = {},
                                 const diffusion::ScoreModel* model = nullptr);

} // namespace abmscope::descriptors
