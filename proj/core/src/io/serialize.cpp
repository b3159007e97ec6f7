#include "abmscope/io/serialize.hpp"

#include <fstream>
#include <sstream>

#include "abmscope/error.hpp"

namespace abmscope::io {

namespace {

json matrix_json(const Eigen::MatrixXd& m) {
    json data = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd matrix_from(const json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw ValidationError("input", "matrix data length does not match its shape");
    Eigen::MatrixXd m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++].get<double>();
    return m;
}

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from(const json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

// Applies `key: value` pairs through `set`, converting type mismatches into
// ValidationError on that key.
template <typename Set>
void apply_keys(const json& j, Set&& set) {
    if (!j.is_object()) throw ValidationError("config", "expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        try {
            if (!set(key, value)) throw ValidationError(key, "unknown configuration key");
        } catch (const json::exception& e) {
            throw ValidationError(key, std::string("bad value: ") + e.what());
        }
    }
}

template <typename T>
T checked_count(const json& v, const std::string& key) {
    if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
        throw ValidationError(key, "must be non-negative");
    if (v.is_number_float()) throw ValidationError(key, "must be an integer");
    return v.get<T>();
}

} // namespace

json to_json(const sim::SimConfig& c) {
    json j = {{"n_elders", c.n_elders},        {"n_caregivers", c.n_caregivers}, {"grid_side", c.grid_side},
              {"horizon", c.horizon},          {"seed", c.seed}};
    for (auto name : sim::real_parameter_names()) j[std::string(name)] = sim::get_parameter(c, name);
    return j;
}

sim::SimConfig sim_config_from_json(const json& j, sim::SimConfig base) {
    apply_keys(j, [&](const std::string& key, const json& v) {
        if (key == "n_elders") base.n_elders = checked_count<std::size_t>(v, key);
        else if (key == "n_caregivers") base.n_caregivers = checked_count<std::size_t>(v, key);
        else if (key == "grid_side") base.grid_side = checked_count<std::size_t>(v, key);
        else if (key == "horizon") base.horizon = checked_count<std::size_t>(v, key);
        else if (key == "seed") base.seed = checked_count<std::uint64_t>(v, key);
        else {
            const auto names = sim::real_parameter_names();
            if (std::find(names.begin(), names.end(), key) == names.end()) return false;
            sim::set_parameter(base, key, v.get<double>());
        }
        return true;
    });
    return base;
}

json to_json(const symbolic::BinScheme& s) {
    return {{"method", symbolic::method_name(s.method)}, {"n_bins", s.n_bins}, {"edges", s.edges},
            {"lo", s.lo}, {"hi", s.hi}};
}

symbolic::BinScheme bin_scheme_from_json(const json& j) {
    symbolic::BinScheme s;
    s.method = symbolic::parse_bin_method(j.at("method").get<std::string>());
    s.n_bins = j.at("n_bins").get<std::size_t>();
    s.edges = j.at("edges").get<std::vector<double>>();
    s.lo = j.at("lo").get<double>();
    s.hi = j.at("hi").get<double>();
    return s;
}

json to_json(const emachine::EpsilonMachine& m) {
    json transitions = json::array();
    for (const auto& t : m.transitions)
        transitions.push_back({{"from", t.from}, {"symbol", t.symbol}, {"to", t.to}, {"prob", t.prob}});
    std::vector<std::size_t> states(m.n_states);
    for (std::size_t i = 0; i < m.n_states; ++i) states[i] = i;
    return {{"n_states", m.n_states},
            {"states", std::move(states)},
            {"alphabet_size", m.alphabet_size},
            {"history_length", m.history_length},
            {"transitions", std::move(transitions)},
            {"stationary", m.stationary},
            {"pruned_transient", m.pruned_transient},
            {"warnings", m.warnings}};
}

emachine::EpsilonMachine machine_from_json(const json& j) {
    emachine::EpsilonMachine m;
    m.n_states = j.at("n_states").get<std::size_t>();
    m.alphabet_size = j.at("alphabet_size").get<std::size_t>();
    m.history_length = j.at("history_length").get<std::size_t>();
    for (const auto& t : j.at("transitions"))
        m.transitions.push_back({t.at("from").get<std::size_t>(), t.at("symbol").get<std::size_t>(),
                                 t.at("to").get<std::size_t>(), t.at("prob").get<double>()});
    m.stationary = j.at("stationary").get<std::vector<double>>();
    m.pruned_transient = j.value("pruned_transient", std::size_t{0});
    m.warnings = j.value("warnings", std::vector<std::string>{});
    return m;
}

json to_json(const emachine::Invariants& inv) {
    return {{"entropy_rate", inv.entropy_rate},
            {"statistical_complexity", inv.statistical_complexity},
            {"excess_entropy", inv.excess_entropy}};
}

emachine::Invariants invariants_from_json(const json& j) {
    return {j.at("entropy_rate").get<double>(), j.at("statistical_complexity").get<double>(),
            j.at("excess_entropy").get<double>()};
}

json to_json(const diffusion::TrainConfig& c) {
    return {{"epochs", c.epochs},         {"batch_size", c.batch_size},   {"learning_rate", c.learning_rate},
            {"lr_final_fraction", c.lr_final_fraction}, {"seed", c.seed}, {"hidden_width", c.hidden_width},
            {"n_hidden", c.n_hidden}};
}

diffusion::TrainConfig train_config_from_json(const json& j, diffusion::TrainConfig base) {
    apply_keys(j, [&](const std::string& key, const json& v) {
        if (key == "epochs") base.epochs = checked_count<std::size_t>(v, key);
        else if (key == "batch_size") base.batch_size = checked_count<std::size_t>(v, key);
        else if (key == "learning_rate") base.learning_rate = v.get<double>();
        else if (key == "lr_final_fraction") base.lr_final_fraction = v.get<double>();
        else if (key == "seed") base.seed = checked_count<std::uint64_t>(v, key);
        else if (key == "hidden_width") base.hidden_width = checked_count<std::size_t>(v, key);
        else if (key == "n_hidden") base.n_hidden = checked_count<std::size_t>(v, key);
        else return false;
        return true;
    });
    return base;
}

json to_json(const diffusion::ScoreModel& m) {
    json layers = json::array();
    for (const auto& l : m.layers) layers.push_back({{"weight", matrix_json(l.weight)}, {"bias", vector_json(l.bias)}});
    return {{"input_dim", m.input_dim},
            {"layer_sizes", m.layer_sizes},
            {"layers", std::move(layers)},
            {"schedule",
             {{"beta_start", m.schedule.beta_start},
              {"beta_end", m.schedule.beta_end},
              {"betas", m.schedule.betas},
              {"alpha_bars", m.schedule.alpha_bars}}},
            {"data_mean", vector_json(m.data_mean)},
            {"data_scale", vector_json(m.data_scale)},
            {"final_loss", m.final_loss},
            {"loss_curve", m.loss_curve}};
}

diffusion::ScoreModel model_from_json(const json& j) {
    diffusion::ScoreModel m;
    try {
        m.input_dim = j.at("input_dim").get<std::size_t>();
        m.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
        for (const auto& l : j.at("layers"))
            m.layers.push_back({matrix_from(l.at("weight")), vector_from(l.at("bias"))});
        const auto& s = j.at("schedule");
        m.schedule.beta_start = s.at("beta_start").get<double>();
        m.schedule.beta_end = s.at("beta_end").get<double>();
        m.schedule.betas = s.at("betas").get<std::vector<double>>();
        m.schedule.alpha_bars = s.at("alpha_bars").get<std::vector<double>>();
        m.data_mean = vector_from(j.at("data_mean"));
        m.data_scale = vector_from(j.at("data_scale"));
        m.final_loss = j.at("final_loss").get<double>();
        m.loss_curve = j.at("loss_curve").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw ValidationError("model", std::string("malformed model file: ") + e.what());
    }
    m.validate();
    return m;
}

json to_json(const descriptors::GeometryDescriptor& g) {
    return {{"effective_dim", g.effective_dim},
            {"mean_score_norm", g.mean_score_norm},
            {"n_modes", g.n_modes},
            {"skewness", vector_json(g.skewness)},
            {"covariance", matrix_json(g.covariance)},
            {"tail_mass", g.tail_mass},
            {"warnings", g.warnings}};
}

descriptors::GeometryDescriptor geometry_from_json(const json& j) {
    descriptors::GeometryDescriptor g;
    g.effective_dim = j.at("effective_dim").get<double>();
    g.mean_score_norm = j.at("mean_score_norm").get<double>();
    g.n_modes = j.at("n_modes").get<std::size_t>();
    g.skewness = vector_from(j.at("skewness"));
    g.covariance = matrix_from(j.at("covariance"));
    g.tail_mass = j.at("tail_mass").get<double>();
    g.warnings = j.value("warnings", std::vector<std::string>{});
    return g;
}

json to_json(const regimes::DescriptorVector& v) {
    json stats = json::array();
    for (const auto& s : v.stats) stats.push_back({{"name", s.name}, {"mean", s.mean}, {"sd", s.sd}});
    return {{"theta", v.theta},
            {"scale_k", v.scale_k},
            {"temporal", to_json(v.temporal)},
            {"geometric", to_json(v.geometric)},
            {"stats", std::move(stats)},
            {"n_replicates", v.n_replicates},
            {"failures", v.failures}};
}

regimes::DescriptorVector descriptor_vector_from_json(const json& j) {
    regimes::DescriptorVector v;
    v.theta = j.at("theta").get<std::vector<double>>();
    v.scale_k = j.at("scale_k").get<std::size_t>();
    v.temporal = invariants_from_json(j.at("temporal"));
    v.geometric = geometry_from_json(j.at("geometric"));
    for (const auto& s : j.at("stats"))
        v.stats.push_back({s.at("name").get<std::string>(), s.at("mean").get<double>(), s.at("sd").get<double>()});
    v.n_replicates = j.at("n_replicates").get<std::size_t>();
    v.failures = j.value("failures", std::vector<std::string>{});
    return v;
}

json surface_to_json(std::span<const regimes::DescriptorVector> surface) {
    json cells = json::array();
    for (const auto& v : surface) cells.push_back(to_json(v));
    return {{"cells", std::move(cells)}};
}

std::vector<regimes::DescriptorVector> surface_from_json(const json& j) {
    std::vector<regimes::DescriptorVector> out;
    try {
        for (const auto& c : j.at("cells")) out.push_back(descriptor_vector_from_json(c));
    } catch (const json::exception& e) {
        throw ValidationError("input", std::string("malformed surface: ") + e.what());
    }
    return out;
}

json to_json(const regimes::ScaleParamTensor& t) {
    return {{"param", t.param}, {"scales", t.scales}, {"thetas", t.thetas},
            {"cells", surface_to_json(t.cells).at("cells")}};
}

regimes::ScaleParamTensor tensor_from_json(const json& j) {
    regimes::ScaleParamTensor t;
    try {
        t.param = j.at("param").get<std::string>();
        t.scales = j.at("scales").get<std::vector<std::size_t>>();
        t.thetas = j.at("thetas").get<std::vector<double>>();
        t.cells = surface_from_json(j);
    } catch (const json::exception& e) {
        throw ValidationError("input", std::string("malformed tensor: ") + e.what());
    }
    if (t.cells.size() != t.scales.size() * t.thetas.size())
        throw ValidationError("input", "tensor cell count does not match scales x thetas");
    return t;
}

json to_json(const regimes::ClusterResult& r) {
    json j = {{"labels", r.labels},     {"n_clusters", r.n_clusters}, {"n_noise", r.n_noise},
              {"all_noise", r.all_noise}, {"warnings", r.warnings}};
    j["silhouette"] = r.silhouette ? json(*r.silhouette) : json(nullptr);
    if (r.inertia > 0.0) j["inertia"] = r.inertia;
    return j;
}

json to_json(const regimes::EffectsResult& r) {
    json params = json::array();
    for (const auto& p : r.params)
        params.push_back({{"param", p.param}, {"mean_abs", p.mean_abs}, {"mean", p.mean}, {"sd", p.sd}});
    return {{"fields", r.fields}, {"params", std::move(params)}, {"warnings", r.warnings}};
}

void write_json(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("input", "cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return json::parse(buf.str());
    } catch (const json::parse_error& e) {
        throw ValidationError("input", path.string() + " is not valid JSON: " + e.what());
    }
}

} // namespace abmscope::io
