#pragma once

// Discrete-time variance-preserving diffusion over R^d with a small fully
// connected noise predictor eps_theta(y_t, t). The score is recovered as
// -eps_theta / sqrt(1 - alpha_bar_t). Everything runs in standardized
// coordinates; the per-coordinate transform is stored in the model.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace abmscope::diffusion {

struct NoiseSchedule {
    double beta_start = 1e-4;
    double beta_end = 0.02;
    std::vector<double> betas;      // betas[t-1] for t = 1..T
    std::vector<double> alpha_bars; // cumulative prod of (1 - beta)

    static NoiseSchedule linear(std::size_t n_steps = 200, double beta_start = 1e-4, double beta_end = 0.02);

    std::size_t n_steps() const { return betas.size(); }
    // t is 1-based; alpha_bar(0) == 1 by convention.
    double beta(std::size_t t) const { return betas.at(t - 1); }
    double alpha_bar(std::size_t t) const { return t == 0 ? 1.0 : alpha_bars.at(t - 1); }

    void validate() const;
    bool operator==(const NoiseSchedule&) const = default;
};

// sqrt(alpha_bar) * y0 + sqrt(1 - alpha_bar) * noise.
Eigen::VectorXd forward_noise(const Eigen::VectorXd& y0, double alpha_bar, const Eigen::VectorXd& noise);
// Same at step t in [1, T]; throws ValidationError("t") outside.
Eigen::VectorXd forward_noise(const Eigen::VectorXd& y0, std::size_t t, const NoiseSchedule& schedule,
                              const Eigen::VectorXd& noise);

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 64;
    double learning_rate = 2e-3;
    double lr_final_fraction = 0.05; // cosine decay floor, as a fraction of learning_rate
    std::uint64_t seed = 0;
    std::size_t hidden_width = 64;
    std::size_t n_hidden = 2;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

struct DenseLayer {
    Eigen::MatrixXd weight; // out x in
    Eigen::VectorXd bias;

    bool operator==(const DenseLayer& o) const {
        return weight.rows() == o.weight.rows() && weight.cols() == o.weight.cols() &&
               (weight.array() == o.weight.array()).all() && bias.size() == o.bias.size() &&
               (bias.array() == o.bias.array()).all();
    }
};

inline constexpr std::size_t kTimeFeatures = 8;

// Sinusoidal embedding of tau = t / T: sin and cos of 2^i * pi * tau, i = 0..3.
Eigen::VectorXd time_embedding(std::size_t t, std::size_t n_steps);

struct ScoreModel {
    std::size_t input_dim = 0;
    std::vector<std::size_t> layer_sizes; // d, hidden..., d (time features are appended to the input)
    std::vector<DenseLayer> layers;
    NoiseSchedule schedule;
    Eigen::VectorXd data_mean;
    Eigen::VectorXd data_scale;
    double final_loss = 0.0;
    std::vector<double> loss_curve; // mean loss per epoch

    // Randomly initialised network in data space with identity standardization.
    static ScoreModel initialise(std::size_t input_dim, std::span<const std::size_t> hidden, NoiseSchedule schedule,
                                 std::uint64_t seed);

    std::size_t parameter_count() const;
    void zero_output_layer();
    void validate() const;

    // Columns of `y` are standardized points; returns eps_theta per column.
    Eigen::MatrixXd predict_noise(const Eigen::MatrixXd& y, std::span<const std::size_t> steps) const;
    Eigen::MatrixXd predict_noise(const Eigen::MatrixXd& y, std::size_t step) const;

    Eigen::VectorXd standardize(const Eigen::VectorXd& x) const;
    Eigen::VectorXd unstandardize(const Eigen::VectorXd& z) const;

    bool operator==(const ScoreModel&) const = default;
};

// Rows of `data` are observations. Minimises E||eps - eps_theta(y_t, t)||^2
// (mean over coordinates) with Adam; deterministic given cfg.seed.
ScoreModel train(const Eigen::MatrixXd& data, const TrainConfig& cfg, const NoiseSchedule& schedule);

// s_theta(y, t) for a standardized point y.
Eigen::VectorXd score(const ScoreModel& model, const Eigen::VectorXd& y, std::size_t t);

// Ancestral reverse chain from N(0, I) at T down to step 0; rows are samples in data space.
Eigen::MatrixXd sample(const ScoreModel& model, std::size_t n, std::uint64_t seed);

// A fixed draw of (y0, t, eps) so that the training loss is a deterministic function of the weights.
struct TrainingBatch {
    Eigen::MatrixXd y0;    // d x B, standardized
    Eigen::MatrixXd noise; // d x B
    std::vector<std::size_t> steps;
};

TrainingBatch draw_batch(const Eigen::MatrixXd& standardized_rows, std::size_t batch_size,
                         const NoiseSchedule& schedule, std::uint64_t seed);

double batch_loss(const ScoreModel& model, const TrainingBatch& batch);
// d(loss)/d(parameters), same shapes as model.layers.
std::vector<DenseLayer> batch_gradient(const ScoreModel& model, const TrainingBatch& batch);

// Max relative error |g - g_fd| / max(|g| + |g_fd|, 1e-6) between analytic and
// central finite-difference gradients over every parameter.
double gradient_check(const ScoreModel& model, const TrainingBatch& batch, double step = 1e-5);

// One Adam update with the given learning rate (exposed for tests).
struct AdamState {
    std::vector<DenseLayer> m;
    std::vector<DenseLayer> v;
    std::size_t step = 0;
    static AdamState zeros_like(const ScoreModel& model);
};
void adam_step(ScoreModel& model, AdamState& state, const std::vector<DenseLayer>& grad, double learning_rate);

} // namespace abmscope::diffusion
