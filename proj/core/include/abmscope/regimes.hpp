#pragma once

// Parameter-space structure built on top of the temporal (emachine) and
// geometric (descriptors) pipelines: response surfaces over a 1-D sweep,
// regime-boundary detection, clustering of descriptor vectors, one-at-a-time
// sensitivity screening and the scale x parameter descriptor grid.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "abmscope/abm.hpp"
#include "abmscope/descriptors.hpp"
#include "abmscope/diffusion.hpp"
#include "abmscope/emachine.hpp"
#include "abmscope/symbolize.hpp"

namespace abmscope::regimes {

struct FieldStat {
    std::string name;
    double mean = 0.0;
    double sd = 0.0; // sample sd across replicates; 0 for a single replicate

    bool operator==(const FieldStat&) const = default;
};

struct DescriptorVector {
    std::vector<double> theta;
    std::size_t scale_k = 1;
    emachine::Invariants temporal;           // replicate means
    descriptors::GeometryDescriptor geometric; // replicate means; n_modes rounded
    std::vector<FieldStat> stats;            // flattened fields, fixed order
    std::size_t n_replicates = 0;            // successful replicates
    std::vector<std::string> failures;       // one message per failed replicate

    bool ok() const { return n_replicates > 0; }
    // Throws ValidationError("field", ...) for unknown names.
    const FieldStat& field(std::string_view name) const;
    bool operator==(const DescriptorVector&) const;
};

// Flattened descriptor fields: the three temporal invariants, then
// effective_dim, mean_score_norm, n_modes, tail_mass, skewness_<j>, cov_<i>_<j> (i <= j).
std::vector<std::string> field_names(std::size_t dim);
std::vector<double> flatten(const emachine::Invariants& t, const descriptors::GeometryDescriptor& g);

struct PipelineOptions {
    sim::Variable variable = sim::Variable::mobility;
    std::optional<std::size_t> agent; // unset: population mean of `variable`
    std::size_t n_bins = 2;
    symbolic::BinMethod bin_method = symbolic::BinMethod::quantile;
    emachine::AnalyzeOptions emachine;
    double window_fraction = 0.25;     // final share of ticks pooled for geometry
    std::size_t max_geometry_points = 1000;
    bool fit_diffusion = true;         // off: mean_score_norm stays 0
    diffusion::TrainConfig train = fast_train();
    std::size_t score_step = 20;
    descriptors::ModeOptions modes;
    std::uint64_t seed = 7;
    symbolic::AggregationSpec aggregation; // identity by default

    static diffusion::TrainConfig fast_train() {
        diffusion::TrainConfig c;
        c.epochs = 40;
        c.hidden_width = 32;
        return c;
    }
};

struct RunDescriptors {
    emachine::Invariants temporal;
    descriptors::GeometryDescriptor geometric;
    std::size_t n_states = 0;
};

// Pipeline on one simulation. The diffusion, subsampling and EM seeds are
// derived from opts.seed and the run's own config seed, so identical runs give
// identical descriptors.
RunDescriptors analyze_run(const sim::SimulationOutput& run, const PipelineOptions& opts);

// Pooled final-window snapshot rows, subsampled to at most max_points.
Eigen::MatrixXd geometry_window(std::span<const Eigen::MatrixXd> snapshots, double window_fraction,
                                std::size_t max_points, std::uint64_t seed);

// One DescriptorVector per distinct value_index, in index order. Failed
// replicates are recorded on the cell instead of being dropped silently.
std::vector<DescriptorVector> response_surface(std::span<const sim::SweepRun> runs, const PipelineOptions& opts);

// Indices j of first differences d_j = x[j+1] - x[j] with |d_j - mean| >=
// z * sd (population sd). A boundary j lies between points j and j+1.
std::vector<std::size_t> detect_shifts(std::span<const double> series, double z_threshold);
std::vector<std::size_t> detect_regime_shifts(std::span<const DescriptorVector> surface, std::string_view field,
                                              double z_threshold);

enum class ClusterMethod { kmeans, gmm, hierarchical, dbscan };
std::string_view cluster_method_name(ClusterMethod m);
ClusterMethod parse_cluster_method(std::string_view name);

struct ClusterOptions {
    ClusterMethod method = ClusterMethod::kmeans;
    std::size_t k = 2;
    double eps = 0.5;
    std::size_t min_pts = 4;
    std::size_t restarts = 25; // kmeans
    std::size_t gmm_restarts = 50;
    std::uint64_t seed = 11;
};

struct ClusterResult {
    std::vector<int> labels; // canonical: clusters numbered by first appearance, noise = -1
    std::size_t n_clusters = 0;
    std::size_t n_noise = 0;
    std::optional<double> silhouette; // unset when fewer than 2 or more than n-1 clusters
    bool all_noise = false;
    double inertia = 0.0; // kmeans only
    std::vector<std::string> warnings;
};

// Rows = observations; runs on the matrix as given.
ClusterResult cluster_points(const Eigen::MatrixXd& x, const ClusterOptions& opts);
// Z-scores each field across the vectors (constant fields become 0) and clusters.
Eigen::MatrixXd standardized_features(std::span<const DescriptorVector> vectors);
ClusterResult cluster_behaviors(std::span<const DescriptorVector> vectors, const ClusterOptions& opts);

std::optional<double> silhouette_score(const Eigen::MatrixXd& x, std::span<const int> labels);
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

struct ParamRange {
    std::string name;
    double lo = 0.0;
    double hi = 1.0;
};

struct ParamEffects {
    std::string param;
    std::vector<double> mean_abs; // per field
    std::vector<double> mean;
    std::vector<double> sd;
};

struct EffectsResult {
    std::vector<std::string> fields;
    std::vector<ParamEffects> params;
    std::vector<std::string> warnings;
};

using DescriptorFn = std::function<std::vector<double>(const sim::SimConfig&)>;

// r trajectories; trajectory j draws a base point uniformly in [lo, hi - delta]
// for every listed parameter and a simulation seed, then perturbs one
// parameter at a time by +delta with the seed held fixed.
EffectsResult elementary_effects(const sim::SimConfig& base, std::span<const ParamRange> params, double delta,
                                 std::size_t r, const DescriptorFn& fn, std::vector<std::string> fields,
                                 std::uint64_t seed = 3);
// Same using analyze_run on a single simulation as the descriptor function.
EffectsResult elementary_effects(const sim::SimConfig& base, std::span<const ParamRange> params, double delta,
                                 std::size_t r, const PipelineOptions& opts, std::uint64_t seed = 3);

struct ScaleParamTensor {
    std::vector<std::size_t> scales;
    std::vector<double> thetas;
    std::string param;
    std::vector<DescriptorVector> cells; // row-major: cell(i, j) = cells[i * thetas.size() + j]

    const DescriptorVector& cell(std::size_t i, std::size_t j) const { return cells.at(i * thetas.size() + j); }
    bool operator==(const ScaleParamTensor&) const = default;
};

// Scale rows over an existing set of runs; opts.aggregation.k is replaced per row.
ScaleParamTensor scale_param_tensor(std::span<const sim::SweepRun> runs, std::string param,
                                    std::span<const std::size_t> scales, symbolic::Reducer reducer,
                                    const PipelineOptions& opts);
ScaleParamTensor scale_param_tensor(const sim::SimConfig& base, std::string param, std::span<const double> thetas,
                                    std::size_t replicates, std::span<const std::size_t> scales,
                                    symbolic::Reducer reducer, const PipelineOptions& opts);

} // namespace abmscope::regimes
