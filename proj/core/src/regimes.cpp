#include "abmscope/regimes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "abmscope/error.hpp"
#include "abmscope/mixture.hpp"
#include "abmscope/parallel.hpp"
#include "abmscope/rng.hpp"

namespace abmscope::regimes {

namespace {

constexpr std::size_t kTemporalFields = 3;
constexpr std::size_t kScalarGeometryFields = 4;

std::size_t dim_from_field_count(std::size_t n_fields) {
    // n = 7 + d + d(d+1)/2
    for (std::size_t d = 1; d < 64; ++d)
        if (kTemporalFields + kScalarGeometryFields + d + d * (d + 1) / 2 == n_fields) return d;
    throw ValidationError("stats", "field count does not match any dimension");
}

void unflatten(std::span<const double> v, std::size_t d, emachine::Invariants& t, descriptors::GeometryDescriptor& g) {
    std::size_t i = 0;
    t.entropy_rate = v[i++];
    t.statistical_complexity = v[i++];
    t.excess_entropy = v[i++];
    g.effective_dim = v[i++];
    g.mean_score_norm = v[i++];
    g.n_modes = static_cast<std::size_t>(std::max(1.0, std::round(v[i++])));
    g.tail_mass = v[i++];
    g.skewness.resize(static_cast<Eigen::Index>(d));
    for (std::size_t j = 0; j < d; ++j) g.skewness(static_cast<Eigen::Index>(j)) = v[i++];
    g.covariance.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a; b < d; ++b) {
            const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
            g.covariance(ia, ib) = g.covariance(ib, ia) = v[i++];
        }
}

double sample_sd(std::span<const double> xs, double mean) {
    if (xs.size() < 2) return 0.0;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

std::vector<int> canonical_labels(std::span<const int> raw) {
    std::map<int, int> remap;
    std::vector<int> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] < 0) {
            out[i] = -1;
            continue;
        }
        auto [it, inserted] = remap.try_emplace(raw[i], static_cast<int>(remap.size()));
        out[i] = it->second;
    }
    return out;
}

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& x) {
    const auto n = x.rows();
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = (x.row(i) - x.row(j)).norm();
    return d;
}

struct KmeansFit {
    std::vector<int> labels;
    double inertia = std::numeric_limits<double>::infinity();
};

KmeansFit kmeans_once(const Eigen::MatrixXd& x, std::size_t k, Rng& rng) {
    const auto n = static_cast<std::size_t>(x.rows());
    Eigen::MatrixXd centers(static_cast<Eigen::Index>(k), x.cols());
    // k-means++ seeding
    centers.row(0) = x.row(static_cast<Eigen::Index>(rng.below(n)));
    Eigen::VectorXd d2(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) d2(static_cast<Eigen::Index>(i)) = (x.row(static_cast<Eigen::Index>(i)) - centers.row(0)).squaredNorm();
    for (std::size_t c = 1; c < k; ++c) {
        const double total = d2.sum();
        std::size_t pick = 0;
        if (total > 0.0) {
            double u = rng.uniform() * total;
            for (pick = 0; pick + 1 < n; ++pick) {
                u -= d2(static_cast<Eigen::Index>(pick));
                if (u < 0.0) break;
            }
        } else {
            pick = rng.below(n);
        }
        centers.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(pick));
        for (std::size_t i = 0; i < n; ++i)
            d2(static_cast<Eigen::Index>(i)) = std::min(
                d2(static_cast<Eigen::Index>(i)),
                (x.row(static_cast<Eigen::Index>(i)) - centers.row(static_cast<Eigen::Index>(c))).squaredNorm());
    }

    std::vector<int> labels(n, -1);
    for (std::size_t iter = 0; iter < 300; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            Eigen::Index best = 0;
            (centers.rowwise() - x.row(static_cast<Eigen::Index>(i))).rowwise().squaredNorm().minCoeff(&best);
            if (labels[i] != static_cast<int>(best)) {
                labels[i] = static_cast<int>(best);
                changed = true;
            }
        }
        if (!changed) break;
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(centers.rows(), centers.cols());
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            sums.row(labels[i]) += x.row(static_cast<Eigen::Index>(i));
            ++counts[static_cast<std::size_t>(labels[i])];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                centers.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(counts[c]);
                continue;
            }
            // Empty cluster: move it to the point farthest from its center.
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double di = (x.row(static_cast<Eigen::Index>(i)) - centers.row(labels[i])).squaredNorm();
                if (di > far_d) {
                    far_d = di;
                    far = i;
                }
            }
            centers.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(far));
        }
    }
    KmeansFit fit;
    fit.labels = labels;
    fit.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) fit.inertia += (x.row(static_cast<Eigen::Index>(i)) - centers.row(labels[i])).squaredNorm();
    return fit;
}

std::vector<int> average_linkage(const Eigen::MatrixXd& x, std::size_t k) {
    const auto n = static_cast<std::size_t>(x.rows());
    Eigen::MatrixXd d = pairwise_distances(x);
    std::vector<std::vector<std::size_t>> members(n);
    for (std::size_t i = 0; i < n; ++i) members[i] = {i};
    std::vector<bool> alive(n, true);
    std::size_t n_alive = n;
    while (n_alive > k) {
        std::size_t ba = 0, bb = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < n; ++a) {
            if (!alive[a]) continue;
            for (std::size_t b = a + 1; b < n; ++b)
                if (alive[b] && d(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) < best) {
                    best = d(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
                    ba = a;
                    bb = b;
                }
        }
        const double na = static_cast<double>(members[ba].size());
        const double nb = static_cast<double>(members[bb].size());
        for (std::size_t c = 0; c < n; ++c) {
            if (!alive[c] || c == ba || c == bb) continue;
            const auto ic = static_cast<Eigen::Index>(c);
            const double merged = (na * d(static_cast<Eigen::Index>(ba), ic) + nb * d(static_cast<Eigen::Index>(bb), ic)) / (na + nb);
            d(static_cast<Eigen::Index>(ba), ic) = d(ic, static_cast<Eigen::Index>(ba)) = merged;
        }
        members[ba].insert(members[ba].end(), members[bb].begin(), members[bb].end());
        members[bb].clear();
        alive[bb] = false;
        --n_alive;
    }
    std::vector<int> labels(n, 0);
    int next = 0;
    for (std::size_t a = 0; a < n; ++a) {
        if (!alive[a]) continue;
        for (std::size_t i : members[a]) labels[i] = next;
        ++next;
    }
    return labels;
}

std::vector<int> dbscan(const Eigen::MatrixXd& x, double eps, std::size_t min_pts) {
    const auto n = static_cast<std::size_t>(x.rows());
    const Eigen::MatrixXd d = pairwise_distances(x);
    std::vector<std::vector<std::size_t>> nbrs(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) <= eps) nbrs[i].push_back(j);
    constexpr int unvisited = -2;
    std::vector<int> labels(n, unvisited);
    int cluster = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] != unvisited) continue;
        if (nbrs[i].size() < min_pts) {
            labels[i] = -1;
            continue;
        }
        labels[i] = cluster;
        std::vector<std::size_t> frontier(nbrs[i].begin(), nbrs[i].end());
        for (std::size_t f = 0; f < frontier.size(); ++f) {
            const std::size_t q = frontier[f];
            if (labels[q] == -1) labels[q] = cluster; // border point
            if (labels[q] != unvisited) continue;
            labels[q] = cluster;
            if (nbrs[q].size() >= min_pts) frontier.insert(frontier.end(), nbrs[q].begin(), nbrs[q].end());
        }
        ++cluster;
    }
    return labels;
}

void require_clean_surface(std::span<const DescriptorVector> surface) {
    for (std::size_t i = 0; i < surface.size(); ++i)
        if (!surface[i].ok())
            throw ValidationError("surface", "cell " + std::to_string(i) + " has no successful replicate");
}

} // namespace

const FieldStat& DescriptorVector::field(std::string_view name) const {
    for (const auto& s : stats)
        if (s.name == name) return s;
    std::string known;
    for (const auto& s : stats) known += (known.empty() ? "" : ", ") + s.name;
    throw ValidationError("field", "unknown descriptor '" + std::string(name) + "' (known: " + known + ")");
}

bool DescriptorVector::operator==(const DescriptorVector& o) const {
    return theta == o.theta && scale_k == o.scale_k && temporal.entropy_rate == o.temporal.entropy_rate &&
           temporal.statistical_complexity == o.temporal.statistical_complexity &&
           temporal.excess_entropy == o.temporal.excess_entropy && geometric == o.geometric && stats == o.stats &&
           n_replicates == o.n_replicates && failures == o.failures;
}

std::vector<std::string> field_names(std::size_t dim) {
    std::vector<std::string> names{"entropy_rate", "statistical_complexity", "excess_entropy",
                                   "effective_dim", "mean_score_norm",        "n_modes",
                                   "tail_mass"};
    for (std::size_t j = 0; j < dim; ++j) names.push_back("skewness_" + std::to_string(j));
    for (std::size_t a = 0; a < dim; ++a)
        for (std::size_t b = a; b < dim; ++b) names.push_back("cov_" + std::to_string(a) + "_" + std::to_string(b));
    return names;
}

std::vector<double> flatten(const emachine::Invariants& t, const descriptors::GeometryDescriptor& g) {
    std::vector<double> v{t.entropy_rate,    t.statistical_complexity,         t.excess_entropy,
                          g.effective_dim,   g.mean_score_norm,                static_cast<double>(g.n_modes),
                          g.tail_mass};
    for (Eigen::Index j = 0; j < g.skewness.size(); ++j) v.push_back(g.skewness(j));
    for (Eigen::Index a = 0; a < g.covariance.rows(); ++a)
        for (Eigen::Index b = a; b < g.covariance.cols(); ++b) v.push_back(g.covariance(a, b));
    return v;
}

Eigen::MatrixXd geometry_window(std::span<const Eigen::MatrixXd> snapshots, double window_fraction,
                                std::size_t max_points, std::uint64_t seed) {
    if (snapshots.empty()) throw InsufficientDataError("snapshots", "no snapshots to pool");
    if (!(window_fraction > 0.0 && window_fraction <= 1.0))
        throw ValidationError("window_fraction", "must lie in (0, 1]");
    if (max_points < 1) throw ValidationError("max_geometry_points", "must be >= 1");
    const std::size_t n_ticks = snapshots.size();
    const auto width = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(window_fraction * static_cast<double>(n_ticks) - 1e-9)));
    const std::size_t first = n_ticks - std::min(width, n_ticks);
    const Eigen::Index rows = snapshots[first].rows();
    const Eigen::Index cols = snapshots[first].cols();
    const std::size_t total = (n_ticks - first) * static_cast<std::size_t>(rows);

    std::vector<std::size_t> pick(total);
    std::iota(pick.begin(), pick.end(), 0);
    if (total > max_points) {
        Rng rng(seed);
        for (std::size_t i = 0; i < max_points; ++i) std::swap(pick[i], pick[i + rng.below(total - i)]);
        pick.resize(max_points);
        std::sort(pick.begin(), pick.end());
    }
    Eigen::MatrixXd out(static_cast<Eigen::Index>(pick.size()), cols);
    for (std::size_t r = 0; r < pick.size(); ++r) {
        const std::size_t tick = first + pick[r] / static_cast<std::size_t>(rows);
        out.row(static_cast<Eigen::Index>(r)) = snapshots[tick].row(static_cast<Eigen::Index>(pick[r] % static_cast<std::size_t>(rows)));
    }
    return out;
}

RunDescriptors analyze_run(const sim::SimulationOutput& run, const PipelineOptions& opts) {
    if (run.snapshots.empty()) throw InsufficientDataError("run", "simulation has no ticks");
    const std::uint64_t run_seed = derive_seed(opts.seed, run.config.seed);

    std::vector<double> series;
    if (opts.agent) {
        if (*opts.agent >= run.n_agents()) throw ValidationError("agent", "agent index out of range");
        series = run.agent_series(opts.variable, *opts.agent);
    } else {
        series = run.mean_series(opts.variable);
    }
    series = symbolic::aggregate_series(series, opts.aggregation);
    const auto seq = symbolic::discretize(series, opts.n_bins, opts.bin_method);
    const auto an = emachine::analyze(seq, opts.emachine);

    const auto snaps = opts.aggregation.k == 1 ? run.snapshots
                                                : symbolic::aggregate_snapshots(run.snapshots, opts.aggregation);
    const Eigen::MatrixXd window =
        geometry_window(snaps, opts.window_fraction, opts.max_geometry_points, derive_seed(run_seed, 1));

    descriptors::ShapeOptions shape;
    shape.modes = opts.modes;
    shape.modes.seed = derive_seed(run_seed, 2);
    shape.score_step = opts.score_step;
    std::optional<diffusion::ScoreModel> model;
    if (opts.fit_diffusion) {
        diffusion::TrainConfig cfg = opts.train;
        cfg.seed = derive_seed(run_seed, 3);
        model = diffusion::train(window, cfg, diffusion::NoiseSchedule::linear());
    }
    RunDescriptors out;
    out.temporal = an.invariants;
    out.n_states = an.machine.n_states;
    out.geometric = descriptors::shape_summary(window, shape, model ? &*model : nullptr);
    return out;
}

std::vector<DescriptorVector> response_surface(std::span<const sim::SweepRun> runs, const PipelineOptions& opts) {
    if (runs.empty()) throw ValidationError("sweep", "no runs supplied");
    std::size_t n_cells = 0;
    for (const auto& r : runs) n_cells = std::max(n_cells, r.value_index + 1);
    std::vector<std::vector<std::size_t>> members(n_cells);
    for (std::size_t i = 0; i < runs.size(); ++i) members[runs[i].value_index].push_back(i);
    for (std::size_t c = 0; c < n_cells; ++c)
        if (members[c].empty())
            throw ValidationError("sweep", "parameter value " + std::to_string(c) + " has no replicate");

    std::vector<std::optional<RunDescriptors>> results(runs.size());
    std::vector<std::string> errors(runs.size());
    parallel_for(runs.size(), [&](std::size_t i) {
        try {
            results[i] = analyze_run(runs[i].output, opts);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });

    std::vector<DescriptorVector> surface(n_cells);
    for (std::size_t c = 0; c < n_cells; ++c) {
        DescriptorVector& cell = surface[c];
        cell.theta = {runs[members[c].front()].value};
        cell.scale_k = opts.aggregation.k;
        std::vector<std::vector<double>> rows;
        for (std::size_t i : members[c]) {
            if (results[i]) {
                rows.push_back(flatten(results[i]->temporal, results[i]->geometric));
                for (const auto& w : results[i]->geometric.warnings)
                    cell.geometric.warnings.push_back("replicate " + std::to_string(runs[i].replicate) + ": " + w);
            } else {
                cell.failures.push_back("replicate " + std::to_string(runs[i].replicate) + ": " + errors[i]);
            }
        }
        cell.n_replicates = rows.size();
        // Failed cells keep zeroed fields in the 3-variable layout so the grid stays rectangular.
        const std::size_t n_fields = rows.empty() ? field_names(sim::kNumVariables).size() : rows.front().size();
        const std::size_t dim = dim_from_field_count(n_fields);
        const auto names = field_names(dim);
        std::vector<double> means(n_fields, 0.0);
        for (std::size_t f = 0; f < n_fields; ++f) {
            std::vector<double> col;
            for (const auto& r : rows) col.push_back(r[f]);
            double m = 0.0;
            for (double v : col) m += v;
            m = col.empty() ? 0.0 : m / static_cast<double>(col.size());
            means[f] = m;
            cell.stats.push_back({names[f], m, sample_sd(col, m)});
        }
        auto warnings = std::move(cell.geometric.warnings);
        unflatten(means, dim, cell.temporal, cell.geometric);
        cell.geometric.warnings = std::move(warnings);
    }
    return surface;
}

std::vector<std::size_t> detect_shifts(std::span<const double> series, double z_threshold) {
    if (series.size() < 4) throw InsufficientDataError("surface", "regime detection needs >= 4 points");
    if (!(z_threshold > 0.0)) throw ValidationError("z", "threshold must be positive");
    std::vector<double> delta(series.size() - 1);
    for (std::size_t j = 0; j + 1 < series.size(); ++j) delta[j] = series[j + 1] - series[j];
    const double n = static_cast<double>(delta.size());
    double mean = 0.0, scale = 0.0;
    for (double d : delta) {
        mean += d;
        scale = std::max(scale, std::abs(d));
    }
    mean /= n;
    double var = 0.0;
    for (double d : delta) var += (d - mean) * (d - mean);
    const double sd = std::sqrt(var / n);
    if (scale == 0.0 || sd <= 1e-12 * scale) return {};
    // Relative slack so that exact hand-computed ties (|d - mean| == z sd) count as flagged.
    const double cut = z_threshold * sd * (1.0 - 1e-9);
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < delta.size(); ++j)
        if (std::abs(delta[j] - mean) >= cut) out.push_back(j);
    return out;
}

std::vector<std::size_t> detect_regime_shifts(std::span<const DescriptorVector> surface, std::string_view field,
                                              double z_threshold) {
    require_clean_surface(surface);
    std::vector<double> series;
    for (std::size_t i = 0; i < surface.size(); ++i) {
        if (surface[i].theta.size() != 1)
            throw ValidationError("theta", "regime detection supports 1-D sweeps only");
        if (i > 0 && surface[i].theta[0] < surface[i - 1].theta[0])
            throw ValidationError("theta", "surface must be sorted by theta");
        series.push_back(surface[i].field(field).mean);
    }
    return detect_shifts(series, z_threshold);
}

std::string_view cluster_method_name(ClusterMethod m) {
    switch (m) {
    case ClusterMethod::kmeans: return "kmeans";
    case ClusterMethod::gmm: return "gmm";
    case ClusterMethod::hierarchical: return "hierarchical";
    case ClusterMethod::dbscan: return "dbscan";
    }
    return "kmeans";
}

ClusterMethod parse_cluster_method(std::string_view name) {
    for (auto m : {ClusterMethod::kmeans, ClusterMethod::gmm, ClusterMethod::hierarchical, ClusterMethod::dbscan})
        if (cluster_method_name(m) == name) return m;
    throw ValidationError("method", "expected kmeans, gmm, hierarchical or dbscan, got '" + std::string(name) + "'");
}

std::optional<double> silhouette_score(const Eigen::MatrixXd& x, std::span<const int> labels) {
    std::vector<Eigen::Index> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] >= 0) idx.push_back(static_cast<Eigen::Index>(i));
    std::map<int, std::size_t> sizes;
    for (auto i : idx) ++sizes[labels[static_cast<std::size_t>(i)]];
    if (sizes.size() < 2 || sizes.size() > idx.size() - 1) return std::nullopt;
    double total = 0.0;
    for (auto i : idx) {
        const int li = labels[static_cast<std::size_t>(i)];
        if (sizes[li] == 1) continue; // singleton contributes 0
        std::map<int, double> sum;
        for (auto j : idx)
            if (j != i) sum[labels[static_cast<std::size_t>(j)]] += (x.row(i) - x.row(j)).norm();
        const double a = sum[li] / static_cast<double>(sizes[li] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (const auto& [l, s] : sum)
            if (l != li) b = std::min(b, s / static_cast<double>(sizes[l]));
        const double denom = std::max(a, b);
        total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    return total / static_cast<double>(idx.size());
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) throw ValidationError("labels", "label vectors differ in length");
    const auto n = static_cast<double>(a.size());
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> ra, rb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[{a[i], b[i]}] += 1.0;
        ra[a[i]] += 1.0;
        rb[b[i]] += 1.0;
    }
    auto c2 = [](double v) { return v * (v - 1.0) / 2.0; };
    double sum_joint = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (const auto& [_, v] : joint) sum_joint += c2(v);
    for (const auto& [_, v] : ra) sum_a += c2(v);
    for (const auto& [_, v] : rb) sum_b += c2(v);
    const double expected = sum_a * sum_b / c2(n);
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return 1.0; // both partitions trivial in the same way
    return (sum_joint - expected) / (max_index - expected);
}

ClusterResult cluster_points(const Eigen::MatrixXd& x, const ClusterOptions& opts) {
    const auto n = static_cast<std::size_t>(x.rows());
    if (n < 2) throw InsufficientDataError("vectors", "clustering needs >= 2 points");
    if (!x.allFinite()) throw ValidationError("vectors", "features contain non-finite values");
    ClusterResult out;
    std::vector<int> raw;
    switch (opts.method) {
    case ClusterMethod::kmeans:
    case ClusterMethod::gmm:
    case ClusterMethod::hierarchical:
        if (opts.k < 1) throw ValidationError("k", "must be >= 1");
        if (opts.k > n) throw ValidationError("k", "k=" + std::to_string(opts.k) + " exceeds " + std::to_string(n) + " points");
        break;
    case ClusterMethod::dbscan:
        if (!(opts.eps > 0.0)) throw ValidationError("eps", "must be positive");
        if (opts.min_pts < 1) throw ValidationError("min_pts", "must be >= 1");
        break;
    }
    if (opts.method == ClusterMethod::kmeans) {
        KmeansFit best;
        for (std::size_t r = 0; r < std::max<std::size_t>(opts.restarts, 1); ++r) {
            Rng rng(derive_seed(opts.seed, r));
            auto fit = kmeans_once(x, opts.k, rng);
            if (fit.inertia < best.inertia) best = std::move(fit);
        }
        raw = best.labels;
        out.inertia = best.inertia;
    } else if (opts.method == ClusterMethod::gmm) {
        stats::GmmOptions g;
        g.restarts = opts.gmm_restarts;
        g.covariance = stats::CovarianceType::diagonal;
        g.seed = opts.seed;
        const auto fit = stats::fit_gmm(x, opts.k, g);
        if (!fit) throw InsufficientDataError("k", "EM failed on every restart for k=" + std::to_string(opts.k));
        raw = fit->assign(x);
    } else if (opts.method == ClusterMethod::hierarchical) {
        raw = average_linkage(x, opts.k);
    } else {
        raw = dbscan(x, opts.eps, opts.min_pts);
    }
    out.labels = canonical_labels(raw);
    int max_label = -1;
    for (int l : out.labels) {
        max_label = std::max(max_label, l);
        out.n_noise += l < 0 ? 1 : 0;
    }
    out.n_clusters = static_cast<std::size_t>(max_label + 1);
    out.all_noise = out.n_noise == n;
    if (out.all_noise) out.warnings.push_back("every point labelled noise");
    out.silhouette = silhouette_score(x, out.labels);
    return out;
}

Eigen::MatrixXd standardized_features(std::span<const DescriptorVector> vectors) {
    require_clean_surface(vectors);
    if (vectors.empty()) throw InsufficientDataError("vectors", "no descriptor vectors");
    const std::size_t n_fields = vectors.front().stats.size();
    Eigen::MatrixXd x(static_cast<Eigen::Index>(vectors.size()), static_cast<Eigen::Index>(n_fields));
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        if (vectors[i].stats.size() != n_fields) throw ValidationError("vectors", "descriptor layouts differ");
        for (std::size_t f = 0; f < n_fields; ++f)
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) = vectors[i].stats[f].mean;
    }
    const Eigen::RowVectorXd mu = x.colwise().mean();
    x.rowwise() -= mu;
    for (Eigen::Index f = 0; f < x.cols(); ++f) {
        const double sd = std::sqrt(x.col(f).squaredNorm() / static_cast<double>(x.rows()));
        const double scale = x.col(f).cwiseAbs().maxCoeff();
        if (sd > 1e-12 * std::max(scale, std::abs(mu(f))) && sd > 0.0)
            x.col(f) /= sd;
        else
            x.col(f).setZero();
    }
    return x;
}

ClusterResult cluster_behaviors(std::span<const DescriptorVector> vectors, const ClusterOptions& opts) {
    if (vectors.size() < 2) throw InsufficientDataError("vectors", "clustering needs >= 2 descriptor vectors");
    return cluster_points(standardized_features(vectors), opts);
}

EffectsResult elementary_effects(const sim::SimConfig& base, std::span<const ParamRange> params, double delta,
                                 std::size_t r, const DescriptorFn& fn, std::vector<std::string> fields,
                                 std::uint64_t seed) {
    if (!(delta > 0.0)) throw ValidationError("delta", "must be positive");
    if (r < 1) throw ValidationError("r", "need at least one trajectory");
    if (params.empty()) throw ValidationError("params", "no parameters to screen");
    for (const auto& p : params) {
        sim::SimConfig probe = base;
        sim::set_parameter(probe, p.name, p.lo); // rejects unknown names
        if (!(p.hi - p.lo > delta))
            throw ValidationError("delta", "range of '" + p.name + "' must exceed delta");
    }

    const std::size_t per_traj = params.size() + 1;
    std::vector<sim::SimConfig> configs(r * per_traj, base);
    for (std::size_t j = 0; j < r; ++j) {
        Rng rng(derive_seed(seed, j));
        sim::SimConfig point = base;
        point.seed = rng.next();
        for (const auto& p : params) sim::set_parameter(point, p.name, rng.uniform(p.lo, p.hi - delta));
        sim::validate(point);
        configs[j * per_traj] = point;
        for (std::size_t p = 0; p < params.size(); ++p) {
            sim::SimConfig moved = point;
            sim::set_parameter(moved, params[p].name, sim::get_parameter(point, params[p].name) + delta);
            sim::validate(moved);
            configs[j * per_traj + p + 1] = moved;
        }
    }
    std::vector<std::vector<double>> values(configs.size());
    parallel_for(configs.size(), [&](std::size_t i) { values[i] = fn(configs[i]); });
    for (const auto& v : values)
        if (v.size() != fields.size()) throw ValidationError("fields", "descriptor function returned wrong length");

    EffectsResult out;
    out.fields = std::move(fields);
    const std::size_t nf = out.fields.size();
    for (std::size_t p = 0; p < params.size(); ++p) {
        ParamEffects pe;
        pe.param = params[p].name;
        pe.mean_abs.assign(nf, 0.0);
        pe.mean.assign(nf, 0.0);
        pe.sd.assign(nf, 0.0);
        for (std::size_t f = 0; f < nf; ++f) {
            std::vector<double> effects(r);
            for (std::size_t j = 0; j < r; ++j)
                effects[j] = (values[j * per_traj + p + 1][f] - values[j * per_traj][f]) / delta;
            double m = 0.0, ma = 0.0;
            for (double e : effects) {
                m += e;
                ma += std::abs(e);
            }
            pe.mean[f] = m / static_cast<double>(r);
            pe.mean_abs[f] = ma / static_cast<double>(r);
            pe.sd[f] = sample_sd(effects, pe.mean[f]);
        }
        out.params.push_back(std::move(pe));
    }
    if (r == 1) out.warnings.push_back("single trajectory: effect sd reported as 0");
    return out;
}

EffectsResult elementary_effects(const sim::SimConfig& base, std::span<const ParamRange> params, double delta,
                                 std::size_t r, const PipelineOptions& opts, std::uint64_t seed) {
    auto fn = [&opts](const sim::SimConfig& cfg) {
        const auto d = analyze_run(sim::simulate(cfg), opts);
        return flatten(d.temporal, d.geometric);
    };
    return elementary_effects(base, params, delta, r, fn, field_names(sim::kNumVariables), seed);
}

ScaleParamTensor scale_param_tensor(std::span<const sim::SweepRun> runs, std::string param,
                                    std::span<const std::size_t> scales, symbolic::Reducer reducer,
                                    const PipelineOptions& opts) {
    if (scales.empty()) throw ValidationError("scales", "need at least one scale");
    for (std::size_t k : scales)
        if (k < 1) throw ValidationError("scales", "every scale must be >= 1");
    ScaleParamTensor t;
    t.param = std::move(param);
    t.scales.assign(scales.begin(), scales.end());
    for (std::size_t k : scales) {
        PipelineOptions row_opts = opts;
        row_opts.aggregation = {k, reducer};
        auto row = response_surface(runs, row_opts);
        if (t.thetas.empty())
            for (const auto& c : row) t.thetas.push_back(c.theta.front());
        t.cells.insert(t.cells.end(), std::make_move_iterator(row.begin()), std::make_move_iterator(row.end()));
    }
    return t;
}

ScaleParamTensor scale_param_tensor(const sim::SimConfig& base, std::string param, std::span<const double> thetas,
                                    std::size_t replicates, std::span<const std::size_t> scales,
                                    symbolic::Reducer reducer, const PipelineOptions& opts) {
    const auto runs = sim::sweep(base, param, thetas, replicates);
    return scale_param_tensor(runs, std::move(param), scales, reducer, opts);
}

} // namespace abmscope::regimes
