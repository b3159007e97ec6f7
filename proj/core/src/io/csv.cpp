#include "abmscope/io/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "abmscope/error.hpp"
#include "abmscope/io/serialize.hpp"

namespace abmscope::io {

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        std::string cell = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        const auto b = cell.find_first_not_of(" \t");
        const auto e = cell.find_last_not_of(" \t");
        out.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

bool is_number(const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return out;
}

} // namespace

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& text, const std::string& field) {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || !std::isfinite(v))
        throw ValidationError(field, "not a finite number: '" + text + "'");
    return v;
}

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw ValidationError("input", "missing CSV column '" + name + "'");
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("input", "cannot open " + path.string());
    CsvTable t;
    std::string line;
    bool first = true;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto cells = split(line);
        if (first) {
            t.header = std::move(cells);
            first = false;
            continue;
        }
        if (cells.size() != t.header.size())
            throw ValidationError("input", path.string() + ":" + std::to_string(line_no) + " has " +
                                               std::to_string(cells.size()) + " fields, header has " +
                                               std::to_string(t.header.size()));
        t.rows.push_back(std::move(cells));
    }
    if (first) throw ValidationError("input", path.string() + " is empty");
    return t;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
    auto out = open_out(path);
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
        out << '\n';
    };
    line(table.header);
    for (const auto& r : table.rows) line(r);
}

void write_series_csv(const std::filesystem::path& path, const std::string& name, std::span<const double> values) {
    auto out = open_out(path);
    out << name << '\n';
    for (double v : values) out << format_double(v) << '\n';
}

std::vector<double> read_series_csv(const std::filesystem::path& path, const std::string& name) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("input", "cannot open " + path.string());
    std::vector<double> out;
    std::string line;
    std::size_t col = 0;
    bool first = true;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto cells = split(line);
        if (first) {
            first = false;
            if (!is_number(cells.front())) {
                if (!name.empty()) {
                    const auto it = std::find(cells.begin(), cells.end(), name);
                    if (it == cells.end()) throw ValidationError("field", "no column named '" + name + "'");
                    col = static_cast<std::size_t>(it - cells.begin());
                }
                continue;
            }
        }
        if (col >= cells.size()) throw ValidationError("input", "short row at line " + std::to_string(line_no));
        out.push_back(parse_double(cells[col], "input"));
    }
    if (out.empty()) throw ValidationError("input", path.string() + " holds no values");
    return out;
}

void write_symbols(const std::filesystem::path& path, const symbolic::SymbolSequence& seq) {
    {
        auto out = open_out(path);
        out << "symbol\n";
        for (auto s : seq.symbols) out << static_cast<int>(s) << '\n';
    }
    write_json(path.string() + ".json", {{"alphabet_size", seq.alphabet_size}, {"scheme", to_json(seq.scheme)}});
}

symbolic::SymbolSequence read_symbols(const std::filesystem::path& path) {
    const auto values = read_series_csv(path);
    std::vector<std::uint8_t> symbols;
    symbols.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = values[i];
        if (v < 0 || v >= static_cast<double>(symbolic::kMaxAlphabet) || v != std::floor(v))
            throw ValidationError("input", "row " + std::to_string(i) + " is not a symbol in [0, " +
                                               std::to_string(symbolic::kMaxAlphabet) + ")");
        symbols.push_back(static_cast<std::uint8_t>(v));
    }
    const std::filesystem::path sidecar = path.string() + ".json";
    if (!std::filesystem::exists(sidecar)) return symbolic::from_symbols(std::move(symbols));
    const auto meta = read_json(sidecar);
    const auto alphabet = meta.at("alphabet_size").get<std::size_t>();
    auto seq = symbolic::from_symbols(std::move(symbols), alphabet);
    if (meta.contains("scheme")) seq.scheme = bin_scheme_from_json(meta.at("scheme"));
    return seq;
}

void write_simulation_csv(const std::filesystem::path& path, const sim::SimulationOutput& out) {
    auto f = open_out(path);
    f << "t,agent_id";
    for (auto name : sim::kVariableNames) f << ',' << name;
    f << '\n';
    for (std::size_t t = 0; t < out.snapshots.size(); ++t) {
        const auto& s = out.snapshots[t];
        for (Eigen::Index i = 0; i < s.rows(); ++i) {
            f << t << ',' << i;
            for (Eigen::Index c = 0; c < s.cols(); ++c) f << ',' << format_double(s(i, c));
            f << '\n';
        }
    }
}

sim::SimulationOutput read_simulation_csv(const std::filesystem::path& path, const sim::SimConfig& config) {
    const auto table = read_csv(path);
    const std::size_t tick_col = table.column("t");
    const std::size_t agent_col = table.column("agent_id");
    std::array<std::size_t, sim::kNumVariables> var_cols{};
    for (std::size_t v = 0; v < sim::kNumVariables; ++v) var_cols[v] = table.column(std::string(sim::kVariableNames[v]));
    std::size_t n_ticks = 0, n_agents = 0;
    for (const auto& r : table.rows) {
        n_ticks = std::max(n_ticks, static_cast<std::size_t>(parse_double(r[tick_col], "t")) + 1);
        n_agents = std::max(n_agents, static_cast<std::size_t>(parse_double(r[agent_col], "agent_id")) + 1);
    }
    if (table.rows.size() != n_ticks * n_agents)
        throw ValidationError("input", "simulation CSV is not a complete tick x agent grid");
    sim::SimulationOutput out;
    out.config = config;
    out.snapshots.assign(n_ticks, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_agents), sim::kNumVariables));
    for (const auto& r : table.rows) {
        const auto t = static_cast<std::size_t>(parse_double(r[tick_col], "t"));
        const auto i = static_cast<Eigen::Index>(parse_double(r[agent_col], "agent_id"));
        for (std::size_t v = 0; v < sim::kNumVariables; ++v)
            out.snapshots[t](i, static_cast<Eigen::Index>(v)) = parse_double(r[var_cols[v]], std::string(sim::kVariableNames[v]));
    }
    return out;
}

void write_sequences_csv(const std::filesystem::path& path, const sim::SimulationOutput& out, sim::Variable v) {
    auto f = open_out(path);
    f << "agent_id,t,value\n";
    const auto col = static_cast<Eigen::Index>(v);
    for (std::size_t i = 0; i < out.n_agents(); ++i)
        for (std::size_t t = 0; t < out.snapshots.size(); ++t)
            f << i << ',' << t << ',' << format_double(out.snapshots[t](static_cast<Eigen::Index>(i), col)) << '\n';
}

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m, const std::string& prefix) {
    auto f = open_out(path);
    for (Eigen::Index c = 0; c < m.cols(); ++c) f << (c ? "," : "") << prefix << c;
    f << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) f << (c ? "," : "") << format_double(m(r, c));
        f << '\n';
    }
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("input", "cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto cells = split(line);
        if (first) {
            first = false;
            if (!is_number(cells.front())) continue;
        }
        std::vector<double> row;
        for (const auto& c : cells) row.push_back(parse_double(c, "input"));
        if (!rows.empty() && row.size() != rows.front().size())
            throw ValidationError("input", "ragged sample matrix at row " + std::to_string(rows.size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ValidationError("input", path.string() + " holds no samples");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return m;
}

void write_surface_csv(const std::filesystem::path& path, std::span<const regimes::DescriptorVector> cells,
                       std::size_t thetas_per_scale) {
    const std::size_t per = thetas_per_scale == 0 ? cells.size() : thetas_per_scale;
    auto f = open_out(path);
    f << "scale_k,theta_index,theta,field,mean,sd,n_replicates,n_failures\n";
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto& c = cells[i];
        std::string theta;
        for (std::size_t t = 0; t < c.theta.size(); ++t) theta += (t ? ";" : "") + format_double(c.theta[t]);
        for (const auto& s : c.stats)
            f << c.scale_k << ',' << (per ? i % per : i) << ',' << theta << ',' << s.name << ',' << format_double(s.mean)
              << ',' << format_double(s.sd) << ',' << c.n_replicates << ',' << c.failures.size() << '\n';
    }
}

} // namespace abmscope::io
