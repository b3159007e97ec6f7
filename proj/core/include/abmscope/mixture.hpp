#pragma once

// Gaussian mixture fitting by expectation-maximisation with seeded restarts.
// Shared by mode counting (descriptors) and behavioral clustering (regimes).

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace abmscope::stats {

// Unbiased sample covariance of the rows of x (zero matrix for one row).
Eigen::MatrixXd covariance(const Eigen::MatrixXd& x);

enum class CovarianceType { full, diagonal };

struct GmmOptions {
    std::size_t restarts = 50;
    std::size_t max_iter = 200;
    double tol = 1e-6;            // converged when |delta logL| <= tol * n
    double reg_fraction = 1e-6;   // component covariances floored by reg_fraction * trace(cov(x)) * I
    CovarianceType covariance = CovarianceType::full;
    std::uint64_t seed = 0;
};

struct GmmFit {
    std::size_t k = 0;
    Eigen::VectorXd weights;
    Eigen::MatrixXd means; // k x d
    std::vector<Eigen::MatrixXd> covariances;
    double log_likelihood = 0.0;
    double bic = 0.0;
    std::size_t iterations = 0;
    std::size_t failed_restarts = 0;

    // Hard assignment: most responsible component per row.
    std::vector<int> assign(const Eigen::MatrixXd& x) const;
};

std::size_t gmm_parameter_count(std::size_t k, std::size_t d, CovarianceType type);

// Best converged restart by log-likelihood; nullopt when every restart failed
// (collapsed component or no convergence within max_iter).
std::optional<GmmFit> fit_gmm(const Eigen::MatrixXd& x, std::size_t k, const GmmOptions& opts = {});

} // namespace abmscope::stats
