#include "abmscope/descriptors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "abmscope/error.hpp"
#include "abmscope/mixture.hpp"
#include "abmscope/rng.hpp"

namespace abmscope::descriptors {

bool GeometryDescriptor::operator==(const GeometryDescriptor& o) const {
    auto same = [](const auto& a, const auto& b) {
        return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
    };
    return effective_dim == o.effective_dim && mean_score_norm == o.mean_score_norm && n_modes == o.n_modes &&
           same(skewness, o.skewness) && same(covariance, o.covariance) && tail_mass == o.tail_mass &&
           warnings == o.warnings;
}

namespace {

void require_samples(const Samples& s, std::string_view what) {
    if (s.rows() < 1 || s.cols() < 1) throw ValidationError(std::string(what), "sample set must be non-empty");
    if (!s.allFinite()) throw ValidationError(std::string(what), "sample set contains non-finite values");
}

} // namespace

double effective_dimensionality(const Samples& samples) {
    require_samples(samples, "samples");
    if (samples.rows() < samples.cols() + 1)
        throw InsufficientDataError("samples", "effective dimensionality needs >= d + 1 samples");
    const Eigen::MatrixXd cov = stats::covariance(samples);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(0.0);
    const double sum = lambda.sum();
    const double sum_sq = lambda.squaredNorm();
    if (!(sum > 0.0) || !(sum_sq > 0.0)) return 1.0;
    return std::min(sum * sum / sum_sq, static_cast<double>(samples.cols()));
}

double mean_score_norm(const diffusion::ScoreModel& model, const Samples& samples, std::size_t t) {
    require_samples(samples, "samples");
    if (samples.cols() != static_cast<Eigen::Index>(model.input_dim))
        throw ValidationError("samples", "dimension differs from the model's input_dim");
    if (t < 1 || t > model.schedule.n_steps()) throw ValidationError("t", "diffusion step out of range");
    Eigen::MatrixXd z = samples.transpose();
    z = (z.colwise() - model.data_mean).array().colwise() / model.data_scale.array();
    const Eigen::MatrixXd eps = model.predict_noise(z, t);
    const double scale = 1.0 / std::sqrt(1.0 - model.schedule.alpha_bar(t));
    return scale * eps.colwise().norm().mean();
}

ModeCount count_modes_detailed(const Samples& samples, const ModeOptions& opts) {
    require_samples(samples, "samples");
    if (opts.max_k < 1) throw ValidationError("max_k", "must be >= 1");
    const auto n = static_cast<std::size_t>(samples.rows());
    if (n < 10 * opts.max_k)
        throw InsufficientDataError("samples", "mode counting up to k=" + std::to_string(opts.max_k) + " needs >= " +
                                                   std::to_string(10 * opts.max_k) + " samples");
    ModeCount out;
    out.bic.assign(opts.max_k, std::numeric_limits<double>::quiet_NaN());
    if (opts.max_k == 1 || !(stats::covariance(samples).trace() > 0.0)) {
        out.n_modes = 1;
        return out;
    }
    stats::GmmOptions g;
    g.restarts = opts.restarts;
    g.max_iter = opts.max_iter;
    g.seed = opts.seed;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k <= opts.max_k; ++k) {
        const auto fit = stats::fit_gmm(samples, k, g);
        if (!fit) {
            out.warnings.push_back("EM failed on every restart for k=" + std::to_string(k) + "; skipped");
            continue;
        }
        out.bic[k - 1] = fit->bic;
        if (fit->bic < best) {
            best = fit->bic;
            out.n_modes = k;
        }
    }
    return out;
}

std::size_t count_modes(const Samples& samples, std::size_t max_k) {
    ModeOptions o;
    o.max_k = max_k;
    return count_modes_detailed(samples, o).n_modes;
}

std::string_view metric_name(Metric m) { return m == Metric::kl_knn ? "kl_knn" : "wasserstein1_sliced"; }

Metric parse_metric(std::string_view name) {
    if (name == "kl_knn") return Metric::kl_knn;
    if (name == "wasserstein1_sliced") return Metric::wasserstein1_sliced;
    throw ValidationError("metric", "expected kl_knn or wasserstein1_sliced, got '" + std::string(name) + "'");
}

double wasserstein1_1d(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw ValidationError("samples", "W1 needs non-empty sets");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double fa = 0.0, fb = 0.0;
    double prev = std::min(a.front(), b.front());
    double total = 0.0;
    // Integrate |F_a - F_b| between consecutive breakpoints of the merged support.
    while (i < a.size() || j < b.size()) {
        const double x = j >= b.size() || (i < a.size() && a[i] <= b[j]) ? a[i] : b[j];
        total += std::abs(fa - fb) * (x - prev);
        while (i < a.size() && a[i] == x) ++i;
        while (j < b.size() && b[j] == x) ++j;
        fa = static_cast<double>(i) / na;
        fb = static_cast<double>(j) / nb;
        prev = x;
    }
    return total;
}

namespace {

double sliced_w1(const Samples& a, const Samples& b, const DivergenceOptions& opts) {
    const auto d = a.cols();
    Rng rng(opts.seed);
    std::vector<double> per_slice(opts.slices);
    for (std::size_t s = 0; s < opts.slices; ++s) {
        Eigen::VectorXd dir(d);
        do {
            for (Eigen::Index i = 0; i < d; ++i) dir(i) = rng.normal();
        } while (dir.norm() == 0.0);
        dir.normalize();
        const Eigen::VectorXd pa = a * dir;
        const Eigen::VectorXd pb = b * dir;
        per_slice[s] = wasserstein1_1d({pa.data(), pa.data() + pa.size()}, {pb.data(), pb.data() + pb.size()});
    }
    double sum = 0.0;
    for (double v : per_slice) sum += v;
    return sum / static_cast<double>(opts.slices);
}

// k-th smallest distance from `point` to rows of `set`, skipping row `skip`.
double kth_distance(const Samples& set, const Eigen::RowVectorXd& point, std::size_t k, Eigen::Index skip,
                    std::vector<double>& scratch) {
    scratch.clear();
    for (Eigen::Index r = 0; r < set.rows(); ++r)
        if (r != skip) scratch.push_back((set.row(r) - point).squaredNorm());
    std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k - 1), scratch.end());
    return std::sqrt(scratch[k - 1]);
}

// Wang-Kulkarni-Verdu k-NN estimator of KL(a || b), in nats.
Divergence knn_kl(const Samples& a, const Samples& b, const DivergenceOptions& opts) {
    const auto n = static_cast<std::size_t>(a.rows());
    const auto m = static_cast<std::size_t>(b.rows());
    const std::size_t k = opts.neighbors;
    if (n < k + 1 || m < k)
        throw InsufficientDataError("samples", "kl_knn with k=" + std::to_string(k) + " needs > k points in a and >= k in b");
    // Zero distances (repeated points) are floored relative to the data spread.
    const double spread = std::sqrt(std::max(stats::covariance(a).trace(), 0.0));
    const double floor = 1e-12 * (spread > 0.0 ? spread : 1.0);
    Divergence out;
    std::vector<double> scratch;
    double sum = 0.0;
    std::size_t floored = 0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        const Eigen::RowVectorXd p = a.row(i);
        double rho = kth_distance(a, p, k, i, scratch);
        double nu = kth_distance(b, p, k, -1, scratch);
        if (rho < floor || nu < floor) ++floored;
        rho = std::max(rho, floor);
        nu = std::max(nu, floor);
        sum += std::log(nu / rho);
    }
    const double d = static_cast<double>(a.cols());
    out.value = d * sum / static_cast<double>(n) + std::log(static_cast<double>(m) / static_cast<double>(n - 1));
    if (floored > 0)
        out.warnings.push_back(std::to_string(floored) + " point(s) had zero neighbor distance; floored");
    if (out.value < -0.5) {
        out.warnings.push_back("kl_knn estimate " + std::to_string(out.value) + " clamped at -0.5");
        out.value = -0.5;
    }
    return out;
}

} // namespace

Divergence divergence_detailed(const Samples& a, const Samples& b, Metric metric, const DivergenceOptions& opts) {
    require_samples(a, "a");
    require_samples(b, "b");
    if (a.cols() != b.cols()) throw ValidationError("b", "sample sets differ in dimension");
    if (metric == Metric::kl_knn) return knn_kl(a, b, opts);
    if (opts.slices < 1) throw ValidationError("slices", "must be >= 1");
    return Divergence{sliced_w1(a, b, opts), {}};
}

double divergence(const Samples& a, const Samples& b, Metric metric, const DivergenceOptions& opts) {
    return divergence_detailed(a, b, metric, opts).value;
}

Eigen::VectorXd skewness(const Samples& samples) {
    require_samples(samples, "samples");
    const Eigen::RowVectorXd mu = samples.colwise().mean();
    const Eigen::ArrayXXd c = (samples.rowwise() - mu).array();
    const double n = static_cast<double>(samples.rows());
    Eigen::VectorXd out(samples.cols());
    for (Eigen::Index j = 0; j < samples.cols(); ++j) {
        const double m2 = c.col(j).square().sum() / n;
        const double m3 = c.col(j).cube().sum() / n;
        out(j) = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
    }
    return out;
}

double tail_mass(const Samples& samples) {
    require_samples(samples, "samples");
    if (samples.rows() < 2) return 0.0;
    const Eigen::RowVectorXd mu = samples.colwise().mean();
    const Eigen::ArrayXXd c = (samples.rowwise() - mu).array();
    const Eigen::ArrayXd sd = (c.square().colwise().sum() / static_cast<double>(samples.rows() - 1)).sqrt().transpose();
    std::size_t outside = 0;
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
        bool tail = false;
        for (Eigen::Index j = 0; j < samples.cols() && !tail; ++j)
            tail = sd(j) > 0.0 && std::abs(c(i, j)) > 3.0 * sd(j);
        outside += tail ? 1 : 0;
    }
    return static_cast<double>(outside) / static_cast<double>(samples.rows());
}

GeometryDescriptor shape_summary(const Samples& samples, const ShapeOptions& opts, const diffusion::ScoreModel* model) {
    require_samples(samples, "samples");
    GeometryDescriptor g;
    g.covariance = stats::covariance(samples);
    g.effective_dim = effective_dimensionality(samples);
    g.skewness = skewness(samples);
    g.tail_mass = tail_mass(samples);
    auto modes = count_modes_detailed(samples, opts.modes);
    g.n_modes = modes.n_modes;
    g.warnings = std::move(modes.warnings);
    if (model) g.mean_score_norm = mean_score_norm(*model, samples, opts.score_step);
    return g;
}

} // namespace abmscope::descriptors
