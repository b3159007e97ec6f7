#include "abmscope/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "abmscope/error.hpp"
#include "abmscope/rng.hpp"

namespace abmscope::stats {

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x) {
    const auto d = x.cols();
    if (x.rows() < 2) return Eigen::MatrixXd::Zero(d, d);
    const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
    Eigen::MatrixXd c = (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
    return 0.5 * (c + c.transpose());
}

std::size_t gmm_parameter_count(std::size_t k, std::size_t d, CovarianceType type) {
    const std::size_t cov = type == CovarianceType::full ? d * (d + 1) / 2 : d;
    return (k - 1) + k * d + k * cov;
}

namespace {

// log N(x_i | mu, sigma) for every row; nullopt if sigma is not positive definite.
std::optional<Eigen::VectorXd> log_density(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& mu,
                                           const Eigen::MatrixXd& sigma) {
    const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) return std::nullopt;
    const Eigen::MatrixXd centered = (x.rowwise() - mu).transpose();
    const Eigen::MatrixXd solved = llt.matrixL().solve(centered);
    const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const double d = static_cast<double>(x.cols());
    const double c = -0.5 * (d * std::log(2.0 * std::numbers::pi) + log_det);
    return (c - 0.5 * solved.colwise().squaredNorm().array()).matrix().transpose();
}

struct EStep {
    Eigen::MatrixXd resp; // n x k
    double log_likelihood = 0.0;
};

std::optional<EStep> e_step(const Eigen::MatrixXd& x, const GmmFit& g) {
    const auto n = x.rows();
    const auto k = static_cast<Eigen::Index>(g.k);
    Eigen::MatrixXd lp(n, k);
    for (Eigen::Index c = 0; c < k; ++c) {
        auto ld = log_density(x, g.means.row(c), g.covariances[static_cast<std::size_t>(c)]);
        if (!ld) return std::nullopt;
        lp.col(c) = ld->array() + std::log(g.weights(c));
    }
    EStep out;
    out.resp.resize(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mx = lp.row(i).maxCoeff();
        const double lse = mx + std::log((lp.row(i).array() - mx).exp().sum());
        out.log_likelihood += lse;
        out.resp.row(i) = (lp.row(i).array() - lse).exp();
    }
    if (!std::isfinite(out.log_likelihood)) return std::nullopt;
    return out;
}

bool m_step(const Eigen::MatrixXd& x, const Eigen::MatrixXd& resp, double reg, CovarianceType type, GmmFit& g) {
    const auto n = x.rows();
    const auto d = x.cols();
    const Eigen::VectorXd nk = resp.colwise().sum().transpose();
    for (Eigen::Index c = 0; c < nk.size(); ++c) {
        if (!(nk(c) > 1e-10 * static_cast<double>(n))) return false;
        g.weights(c) = nk(c) / static_cast<double>(n);
        g.means.row(c) = (resp.col(c).transpose() * x) / nk(c);
        const Eigen::MatrixXd centered = x.rowwise() - g.means.row(c);
        Eigen::MatrixXd cov = (centered.array().colwise() * resp.col(c).array()).matrix().transpose() * centered / nk(c);
        if (type == CovarianceType::diagonal) cov = Eigen::MatrixXd(cov.diagonal().asDiagonal());
        cov = 0.5 * (cov + cov.transpose());
        cov.diagonal().array() += reg;
        g.covariances[static_cast<std::size_t>(c)] = std::move(cov);
    }
    (void)d;
    return true;
}

} // namespace

std::vector<int> GmmFit::assign(const Eigen::MatrixXd& x) const {
    std::vector<int> labels(static_cast<std::size_t>(x.rows()), 0);
    auto e = e_step(x, *this);
    if (!e) return labels;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        Eigen::Index best = 0;
        e->resp.row(i).maxCoeff(&best);
        labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return labels;
}

std::optional<GmmFit> fit_gmm(const Eigen::MatrixXd& x, std::size_t k, const GmmOptions& opts) {
    const auto n = static_cast<std::size_t>(x.rows());
    const auto d = static_cast<std::size_t>(x.cols());
    if (k < 1) throw ValidationError("k", "must be >= 1");
    if (k > n) throw ValidationError("k", "more components than points");
    if (!x.allFinite()) throw ValidationError("samples", "non-finite values");

    const Eigen::MatrixXd data_cov = covariance(x);
    double reg = opts.reg_fraction * data_cov.trace();
    if (!(reg > 0.0)) reg = opts.reg_fraction;
    Eigen::MatrixXd init_cov = data_cov;
    if (opts.covariance == CovarianceType::diagonal) init_cov = Eigen::MatrixXd(data_cov.diagonal().asDiagonal());
    init_cov.diagonal().array() += reg;

    std::optional<GmmFit> best;
    std::size_t failures = 0;
    for (std::size_t r = 0; r < opts.restarts; ++r) {
        Rng rng(derive_seed(opts.seed, r));
        GmmFit g;
        g.k = k;
        g.weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(k), 1.0 / static_cast<double>(k));
        g.means.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
        std::vector<std::size_t> picked;
        while (picked.size() < k) {
            const auto i = static_cast<std::size_t>(rng.below(n));
            if (std::find(picked.begin(), picked.end(), i) == picked.end()) picked.push_back(i);
        }
        for (std::size_t c = 0; c < k; ++c)
            g.means.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(picked[c]));
        g.covariances.assign(k, init_cov);

        bool ok = false;
        double prev = -std::numeric_limits<double>::infinity();
        for (std::size_t it = 0; it < opts.max_iter; ++it) {
            auto e = e_step(x, g);
            if (!e) break;
            g.log_likelihood = e->log_likelihood;
            g.iterations = it + 1;
            if (std::abs(e->log_likelihood - prev) <= opts.tol * static_cast<double>(n)) {
                ok = true;
                break;
            }
            prev = e->log_likelihood;
            if (!m_step(x, e->resp, reg, opts.covariance, g)) break;
        }
        if (!ok) {
            ++failures;
            continue;
        }
        if (!best || g.log_likelihood > best->log_likelihood) best = std::move(g);
    }
    if (!best) return std::nullopt;
    best->failed_restarts = failures;
    best->bic = -2.0 * best->log_likelihood +
                static_cast<double>(gmm_parameter_count(k, d, opts.covariance)) * std::log(static_cast<double>(n));
    return best;
}

} // namespace abmscope::stats
