#include "abmscope/diffusion.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "abmscope/error.hpp"
#include "abmscope/rng.hpp"

namespace abmscope::diffusion {

NoiseSchedule NoiseSchedule::linear(std::size_t n_steps, double beta_start, double beta_end) {
    if (n_steps < 1) throw ValidationError("n_steps", "must be >= 1");
    NoiseSchedule s;
    s.beta_start = beta_start;
    s.beta_end = beta_end;
    s.betas.resize(n_steps);
    s.alpha_bars.resize(n_steps);
    double prod = 1.0;
    for (std::size_t i = 0; i < n_steps; ++i) {
        const double frac = n_steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n_steps - 1);
        s.betas[i] = beta_start + frac * (beta_end - beta_start);
        prod *= 1.0 - s.betas[i];
        s.alpha_bars[i] = prod;
    }
    s.validate();
    return s;
}

void NoiseSchedule::validate() const {
    if (betas.empty() || betas.size() != alpha_bars.size())
        throw ValidationError("schedule", "betas and alpha_bars must be non-empty and equally long");
    double prev = 1.0;
    for (std::size_t i = 0; i < betas.size(); ++i) {
        if (!(betas[i] > 0.0 && betas[i] < 1.0)) throw ValidationError("schedule", "betas must lie in (0, 1)");
        if (!(alpha_bars[i] < prev && alpha_bars[i] > 0.0))
            throw ValidationError("schedule", "alpha_bars must be strictly decreasing and positive");
        prev = alpha_bars[i];
    }
}

Eigen::VectorXd forward_noise(const Eigen::VectorXd& y0, double alpha_bar, const Eigen::VectorXd& noise) {
    if (y0.size() != noise.size()) throw ValidationError("noise", "dimension must match y0");
    if (!(alpha_bar >= 0.0 && alpha_bar <= 1.0)) throw ValidationError("alpha_bar", "must lie in [0, 1]");
    return std::sqrt(alpha_bar) * y0 + std::sqrt(1.0 - alpha_bar) * noise;
}

Eigen::VectorXd forward_noise(const Eigen::VectorXd& y0, std::size_t t, const NoiseSchedule& schedule,
                              const Eigen::VectorXd& noise) {
    if (t < 1 || t > schedule.n_steps())
        throw ValidationError("t", "step " + std::to_string(t) + " outside [1, " +
                                       std::to_string(schedule.n_steps()) + "]");
    return forward_noise(y0, schedule.alpha_bar(t), noise);
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ValidationError("epochs", "must be >= 1");
    if (batch_size < 1) throw ValidationError("batch_size", "must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw ValidationError("learning_rate", "must be finite and > 0");
    if (!(lr_final_fraction > 0.0 && lr_final_fraction <= 1.0))
        throw ValidationError("lr_final_fraction", "must lie in (0, 1]");
    if (hidden_width < 1) throw ValidationError("hidden_width", "must be >= 1");
    if (n_hidden < 1) throw ValidationError("n_hidden", "must be >= 1");
}

Eigen::VectorXd time_embedding(std::size_t t, std::size_t n_steps) {
    const double tau = static_cast<double>(t) / static_cast<double>(n_steps);
    Eigen::VectorXd e(static_cast<Eigen::Index>(kTimeFeatures));
    for (std::size_t i = 0; i < kTimeFeatures / 2; ++i) {
        const double w = std::numbers::pi * static_cast<double>(std::size_t{1} << i);
        e(static_cast<Eigen::Index>(2 * i)) = std::sin(w * tau);
        e(static_cast<Eigen::Index>(2 * i + 1)) = std::cos(w * tau);
    }
    return e;
}

namespace {

Eigen::MatrixXd silu(const Eigen::MatrixXd& z) {
    return z.unaryExpr([](double x) { return x / (1.0 + std::exp(-x)); });
}

Eigen::MatrixXd silu_grad(const Eigen::MatrixXd& z) {
    return z.unaryExpr([](double x) {
        const double s = 1.0 / (1.0 + std::exp(-x));
        return s * (1.0 + x * (1.0 - s));
    });
}

// Network input: standardized point stacked over its time features.
Eigen::MatrixXd network_input(const Eigen::MatrixXd& y, std::span<const std::size_t> steps, std::size_t n_steps) {
    const Eigen::Index d = y.rows();
    Eigen::MatrixXd x(d + static_cast<Eigen::Index>(kTimeFeatures), y.cols());
    x.topRows(d) = y;
    for (Eigen::Index j = 0; j < y.cols(); ++j)
        x.col(j).tail(static_cast<Eigen::Index>(kTimeFeatures)) = time_embedding(steps[static_cast<std::size_t>(j)], n_steps);
    return x;
}

struct ForwardTrace {
    std::vector<Eigen::MatrixXd> pre;  // pre-activations of hidden layers
    std::vector<Eigen::MatrixXd> post; // layer inputs: post[0] = x, post[l] = silu(pre[l-1])
    Eigen::MatrixXd output;
};

ForwardTrace forward(const ScoreModel& m, const Eigen::MatrixXd& x) {
    ForwardTrace tr;
    tr.post.push_back(x);
    for (std::size_t l = 0; l + 1 < m.layers.size(); ++l) {
        Eigen::MatrixXd z = m.layers[l].weight * tr.post.back();
        z.colwise() += m.layers[l].bias;
        tr.post.push_back(silu(z));
        tr.pre.push_back(std::move(z));
    }
    tr.output = m.layers.back().weight * tr.post.back();
    tr.output.colwise() += m.layers.back().bias;
    return tr;
}

Eigen::MatrixXd noised_inputs(const TrainingBatch& b, const NoiseSchedule& s) {
    Eigen::MatrixXd yt(b.y0.rows(), b.y0.cols());
    for (Eigen::Index j = 0; j < b.y0.cols(); ++j) {
        const double ab = s.alpha_bar(b.steps[static_cast<std::size_t>(j)]);
        yt.col(j) = std::sqrt(ab) * b.y0.col(j) + std::sqrt(1.0 - ab) * b.noise.col(j);
    }
    return yt;
}

// Loss and (optionally) gradient for one batch.
double loss_and_grad(const ScoreModel& m, const TrainingBatch& b, std::vector<DenseLayer>* grad) {
    if (b.y0.rows() != static_cast<Eigen::Index>(m.input_dim) || b.noise.rows() != b.y0.rows() ||
        b.noise.cols() != b.y0.cols() || b.steps.size() != static_cast<std::size_t>(b.y0.cols()))
        throw ValidationError("batch", "batch shape does not match the model");
    const Eigen::MatrixXd x = network_input(noised_inputs(b, m.schedule), b.steps, m.schedule.n_steps());
    const ForwardTrace tr = forward(m, x);
    const Eigen::MatrixXd diff = tr.output - b.noise;
    const double denom = static_cast<double>(diff.size());
    const double loss = diff.squaredNorm() / denom;
    if (!grad) return loss;

    grad->resize(m.layers.size());
    Eigen::MatrixXd g = (2.0 / denom) * diff;
    for (std::size_t l = m.layers.size(); l-- > 0;) {
        (*grad)[l].weight = g * tr.post[l].transpose();
        (*grad)[l].bias = g.rowwise().sum();
        if (l == 0) break;
        g = (m.layers[l].weight.transpose() * g).cwiseProduct(silu_grad(tr.pre[l - 1]));
    }
    return loss;
}

double cosine_lr(const TrainConfig& cfg, std::size_t step, std::size_t total) {
    if (total <= 1) return cfg.learning_rate;
    const double progress = static_cast<double>(step) / static_cast<double>(total - 1);
    const double floor = cfg.learning_rate * cfg.lr_final_fraction;
    return floor + 0.5 * (cfg.learning_rate - floor) * (1.0 + std::cos(std::numbers::pi * progress));
}

} // namespace

ScoreModel ScoreModel::initialise(std::size_t input_dim, std::span<const std::size_t> hidden, NoiseSchedule schedule,
                                  std::uint64_t seed) {
    if (input_dim < 1) throw ValidationError("input_dim", "must be >= 1");
    if (hidden.empty()) throw ValidationError("n_hidden", "need at least one hidden layer");
    schedule.validate();
    ScoreModel m;
    m.input_dim = input_dim;
    m.schedule = std::move(schedule);
    m.layer_sizes.push_back(input_dim);
    m.layer_sizes.insert(m.layer_sizes.end(), hidden.begin(), hidden.end());
    m.layer_sizes.push_back(input_dim);
    m.data_mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(input_dim));
    m.data_scale = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(input_dim));

    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
        const std::size_t fan_in = m.layer_sizes[l] + (l == 0 ? kTimeFeatures : 0);
        const std::size_t fan_out = m.layer_sizes[l + 1];
        const double sd = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
        DenseLayer layer;
        layer.weight.resize(static_cast<Eigen::Index>(fan_out), static_cast<Eigen::Index>(fan_in));
        for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = sd * rng.normal();
        layer.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fan_out));
        m.layers.push_back(std::move(layer));
    }
    return m;
}

std::size_t ScoreModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

void ScoreModel::zero_output_layer() {
    layers.back().weight.setZero();
    layers.back().bias.setZero();
}

void ScoreModel::validate() const {
    if (layer_sizes.size() < 3 || layers.size() + 1 != layer_sizes.size())
        throw ValidationError("model", "layer_sizes inconsistent with layers");
    if (layer_sizes.front() != input_dim || layer_sizes.back() != input_dim)
        throw ValidationError("model", "first and last layer sizes must equal input_dim");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto in = static_cast<Eigen::Index>(layer_sizes[l] + (l == 0 ? kTimeFeatures : 0));
        const auto out = static_cast<Eigen::Index>(layer_sizes[l + 1]);
        if (layers[l].weight.rows() != out || layers[l].weight.cols() != in || layers[l].bias.size() != out)
            throw ValidationError("model", "weight shape mismatch in layer " + std::to_string(l));
        if (!layers[l].weight.allFinite() || !layers[l].bias.allFinite())
            throw ValidationError("model", "non-finite parameter in layer " + std::to_string(l));
    }
    if (data_mean.size() != static_cast<Eigen::Index>(input_dim) ||
        data_scale.size() != static_cast<Eigen::Index>(input_dim) || (data_scale.array() <= 0.0).any())
        throw ValidationError("model", "invalid standardization constants");
    schedule.validate();
}

Eigen::MatrixXd ScoreModel::predict_noise(const Eigen::MatrixXd& y, std::span<const std::size_t> steps) const {
    return forward(*this, network_input(y, steps, schedule.n_steps())).output;
}

Eigen::MatrixXd ScoreModel::predict_noise(const Eigen::MatrixXd& y, std::size_t step) const {
    const std::vector<std::size_t> steps(static_cast<std::size_t>(y.cols()), step);
    return predict_noise(y, steps);
}

Eigen::VectorXd ScoreModel::standardize(const Eigen::VectorXd& x) const {
    return (x - data_mean).cwiseQuotient(data_scale);
}

Eigen::VectorXd ScoreModel::unstandardize(const Eigen::VectorXd& z) const {
    return z.cwiseProduct(data_scale) + data_mean;
}

TrainingBatch draw_batch(const Eigen::MatrixXd& rows, std::size_t batch_size, const NoiseSchedule& schedule,
                         std::uint64_t seed) {
    Rng rng(seed);
    TrainingBatch b;
    const auto d = rows.cols();
    b.y0.resize(d, static_cast<Eigen::Index>(batch_size));
    b.noise.resize(d, static_cast<Eigen::Index>(batch_size));
    for (std::size_t j = 0; j < batch_size; ++j) {
        const auto c = static_cast<Eigen::Index>(j);
        b.y0.col(c) = rows.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(rows.rows())))).transpose();
        b.steps.push_back(1 + static_cast<std::size_t>(rng.below(schedule.n_steps())));
        for (Eigen::Index i = 0; i < d; ++i) b.noise(i, c) = rng.normal();
    }
    return b;
}

double batch_loss(const ScoreModel& model, const TrainingBatch& batch) { return loss_and_grad(model, batch, nullptr); }

std::vector<DenseLayer> batch_gradient(const ScoreModel& model, const TrainingBatch& batch) {
    std::vector<DenseLayer> g;
    loss_and_grad(model, batch, &g);
    return g;
}

double gradient_check(const ScoreModel& model, const TrainingBatch& batch, double step) {
    const auto analytic = batch_gradient(model, batch);
    ScoreModel probe = model;
    double worst = 0.0;
    auto check = [&](double& param, double g) {
        const double saved = param;
        param = saved + step;
        const double up = batch_loss(probe, batch);
        param = saved - step;
        const double down = batch_loss(probe, batch);
        param = saved;
        const double fd = (up - down) / (2.0 * step);
        worst = std::max(worst, std::abs(g - fd) / std::max(std::abs(g) + std::abs(fd), 1e-6));
    };
    for (std::size_t l = 0; l < probe.layers.size(); ++l) {
        auto& layer = probe.layers[l];
        for (Eigen::Index i = 0; i < layer.weight.size(); ++i) check(layer.weight.data()[i], analytic[l].weight.data()[i]);
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) check(layer.bias.data()[i], analytic[l].bias.data()[i]);
    }
    return worst;
}

AdamState AdamState::zeros_like(const ScoreModel& model) {
    AdamState s;
    for (const auto& l : model.layers) {
        DenseLayer z{Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())};
        s.m.push_back(z);
        s.v.push_back(z);
    }
    return s;
}

void adam_step(ScoreModel& model, AdamState& st, const std::vector<DenseLayer>& grad, double lr) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++st.step;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(st.step));
    auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
        param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        update(model.layers[l].weight, st.m[l].weight, st.v[l].weight, grad[l].weight);
        update(model.layers[l].bias, st.m[l].bias, st.v[l].bias, grad[l].bias);
    }
}

ScoreModel train(const Eigen::MatrixXd& data, const TrainConfig& cfg, const NoiseSchedule& schedule) {
    cfg.validate();
    schedule.validate();
    if (data.rows() < 1 || data.cols() < 1) throw ValidationError("data", "training data must be non-empty");
    if (!data.allFinite()) throw ValidationError("data", "training data contains non-finite values");

    const auto d = static_cast<std::size_t>(data.cols());
    const std::vector<std::size_t> hidden(cfg.n_hidden, cfg.hidden_width);
    ScoreModel model = ScoreModel::initialise(d, hidden, schedule, derive_seed(cfg.seed, 0));

    const Eigen::VectorXd mean = data.colwise().mean().transpose();
    Eigen::VectorXd scale = ((data.rowwise() - mean.transpose()).colwise().squaredNorm() /
                             static_cast<double>(data.rows())).cwiseSqrt().transpose();
    for (Eigen::Index i = 0; i < scale.size(); ++i)
        if (!(scale(i) > 1e-12 * std::max(1.0, std::abs(mean(i))))) scale(i) = 1.0;
    model.data_mean = mean;
    model.data_scale = scale;
    // column-major standardized copy, one point per column
    const Eigen::MatrixXd z = ((data.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array())
                                  .matrix()
                                  .transpose();

    Rng rng(derive_seed(cfg.seed, 1));
    AdamState adam = AdamState::zeros_like(model);
    const std::size_t n = static_cast<std::size_t>(data.rows());
    const std::size_t batches_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    const std::size_t total_steps = batches_per_epoch * cfg.epochs;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::size_t global_step = 0;
    std::vector<DenseLayer> grad;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t len = std::min(cfg.batch_size, n - start);
            TrainingBatch b;
            b.y0.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(len));
            b.noise.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(len));
            b.steps.resize(len);
            for (std::size_t j = 0; j < len; ++j) {
                const auto c = static_cast<Eigen::Index>(j);
                b.y0.col(c) = z.col(static_cast<Eigen::Index>(order[start + j]));
                b.steps[j] = 1 + static_cast<std::size_t>(rng.below(schedule.n_steps()));
                for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(d); ++i) b.noise(i, c) = rng.normal();
            }
            const double loss = loss_and_grad(model, b, &grad);
            epoch_loss += loss * static_cast<double>(len);
            adam_step(model, adam, grad, cosine_lr(cfg, global_step++, total_steps));
        }
        model.loss_curve.push_back(epoch_loss / static_cast<double>(n));
    }
    model.final_loss = model.loss_curve.back();
    return model;
}

Eigen::VectorXd score(const ScoreModel& model, const Eigen::VectorXd& y, std::size_t t) {
    if (t < 1 || t > model.schedule.n_steps())
        throw ValidationError("t", "step " + std::to_string(t) + " outside [1, " +
                                       std::to_string(model.schedule.n_steps()) + "]");
    if (y.size() != static_cast<Eigen::Index>(model.input_dim))
        throw ValidationError("y", "dimension must equal model input_dim");
    const Eigen::MatrixXd eps = model.predict_noise(Eigen::MatrixXd(y), t);
    return -eps.col(0) / std::sqrt(1.0 - model.schedule.alpha_bar(t));
}

Eigen::MatrixXd sample(const ScoreModel& model, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw ValidationError("n", "must be >= 1");
    model.validate();
    const auto d = static_cast<Eigen::Index>(model.input_dim);
    const auto cols = static_cast<Eigen::Index>(n);
    Rng rng(seed);
    auto gaussian = [&] {
        Eigen::MatrixXd g(d, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < d; ++i) g(i, j) = rng.normal();
        return g;
    };
    Eigen::MatrixXd y = gaussian();
    const auto& s = model.schedule;
    for (std::size_t t = s.n_steps(); t >= 1; --t) {
        const double beta = s.beta(t);
        const double ab = s.alpha_bar(t);
        const Eigen::MatrixXd eps = model.predict_noise(y, t);
        y = (y - (beta / std::sqrt(1.0 - ab)) * eps) / std::sqrt(1.0 - beta);
        if (t > 1) y += std::sqrt(beta) * gaussian();
    }
    Eigen::MatrixXd out(cols, d);
    for (Eigen::Index j = 0; j < cols; ++j) out.row(j) = model.unstandardize(y.col(j)).transpose();
    return out;
}

} // namespace abmscope::diffusion
