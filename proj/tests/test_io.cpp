#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

#include "abmscope/error.hpp"
#include "abmscope/io/correlate.hpp"
#include "abmscope/io/csv.hpp"
#include "abmscope/io/dot.hpp"
#include "abmscope/io/manifest.hpp"
#include "abmscope/io/output_dir.hpp"
#include "abmscope/io/serialize.hpp"
#include "abmscope/io/svg.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace abmscope;
using namespace testing_support;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

sim::SimConfig small_sim() {
    sim::SimConfig c;
    c.n_elders = 20;
    c.n_caregivers = 2;
    c.grid_side = 3;
    c.horizon = 300;
    return c;
}

regimes::PipelineOptions quick_pipeline() {
    regimes::PipelineOptions o;
    o.fit_diffusion = false;
    o.modes.restarts = 3;
    o.emachine.max_order = 3;
    return o;
}

regimes::DescriptorVector cell_with(std::vector<double> values) {
    regimes::DescriptorVector v;
    v.theta = {0.0};
    v.n_replicates = 1;
    const std::vector<std::string> names = {"entropy_rate", "statistical_complexity", "excess_entropy", "a", "b"};
    for (std::size_t i = 0; i < values.size(); ++i) v.stats.push_back({names[i], values[i], 0.0});
    return v;
}

template <typename T, typename Write, typename Read>
T file_round_trip(const T& value, const std::string& name, Write write, Read read) {
    const auto dir = scratch_dir("roundtrip");
    const auto path = dir / name;
    io::write_json(path, write(value));
    return read(io::read_json(path));
}

} // namespace

TEST(Csv, FormatAndParse) {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 1e300, 0.0, 123456789.123456789}) {
        EXPECT_EQ(io::parse_double(io::format_double(v), "x"), v);
    }
    EXPECT_THROW(io::parse_double("1.5abc", "col"), ValidationError);
    EXPECT_THROW(io::parse_double("", "col"), ValidationError);
    EXPECT_THROW(io::parse_double("nan", "col"), ValidationError);
    try {
        io::parse_double("oops", "rate");
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.field(), "rate");
    }
}

TEST(Csv, SeriesAndMatrixRoundTrip) {
    const auto dir = scratch_dir("csv");
    const std::vector<double> series = {0.1, 0.2, 1.0 / 7.0, -3.0};
    io::write_series_csv(dir / "s.csv", "value", series);
    EXPECT_EQ(io::read_series_csv(dir / "s.csv"), series);
    EXPECT_EQ(io::read_series_csv(dir / "s.csv", "value"), series);
    EXPECT_THROW(io::read_series_csv(dir / "s.csv", "missing"), ValidationError);

    const auto m = gaussian(7, 3, 2);
    io::write_matrix_csv(dir / "m.csv", m);
    EXPECT_EQ(io::read_matrix_csv(dir / "m.csv"), m);

    std::ofstream(dir / "raw.csv") << "# note\n1.5\n2\n";
    EXPECT_EQ(io::read_series_csv(dir / "raw.csv"), (std::vector<double>{1.5, 2.0}));
}

TEST(Csv, SymbolsRoundTrip) {
    const auto dir = scratch_dir("symbols");
    const std::vector<double> xs = {0.1, 0.9, 0.5, 0.3, 0.7, 0.2};
    const auto seq = symbolic::discretize(xs, 3, symbolic::BinMethod::quantile);
    io::write_symbols(dir / "sym.csv", seq);
    EXPECT_EQ(io::read_symbols(dir / "sym.csv"), seq);
    fs::remove(dir / "sym.csv.json");
    const auto bare = io::read_symbols(dir / "sym.csv");
    EXPECT_EQ(bare.symbols, seq.symbols);
    EXPECT_EQ(bare.alphabet_size, 3u);
}

TEST(Csv, SimulationRoundTrip) {
    const auto dir = scratch_dir("simcsv");
    auto c = small_sim();
    c.horizon = 12;
    const auto out = sim::simulate(c);
    io::write_simulation_csv(dir / "snap.csv", out);
    EXPECT_EQ(io::read_simulation_csv(dir / "snap.csv", c), out);
    const auto table = io::read_csv(dir / "snap.csv");
    EXPECT_EQ(table.header, (std::vector<std::string>{"t", "agent_id", "walkability", "effort", "mobility"}));
    EXPECT_EQ(table.rows.size(), 12u * 20u);
}

TEST(Json, SimConfigRoundTripAndUnknownKey) {
    auto c = small_sim();
    c.caregiver_capacity = 1.0 / 3.0;
    c.seed = 0xfeedfacecafebeefULL;
    EXPECT_EQ(file_round_trip(c, "c.json", [](auto& v) { return io::to_json(v); },
                              [](const io::json& j) { return io::sim_config_from_json(j); }),
              c);
    try {
        io::sim_config_from_json(io::json{{"capacity", 3.0}});
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.field(), "capacity");
    }
    try {
        io::sim_config_from_json(io::json{{"n_elders", -3}});
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.field(), "n_elders");
    }
}

TEST(Json, MachineRoundTrip) {
    const auto m = emachine::reconstruct(golden_mean(20000, 3), 2, 0.01);
    const auto back = file_round_trip(m, "m.json", [](auto& v) { return io::to_json(v); },
                                      [](const io::json& j) { return io::machine_from_json(j); });
    EXPECT_EQ(back, m);
}

TEST(Json, ModelRoundTrip) {
    diffusion::TrainConfig cfg;
    cfg.epochs = 2;
    cfg.hidden_width = 8;
    const auto m = diffusion::train(gaussian(100, 2, 3, 5.0, 2.0), cfg, diffusion::NoiseSchedule::linear());
    const auto back = file_round_trip(m, "model.json", [](auto& v) { return io::to_json(v); },
                                      [](const io::json& j) { return io::model_from_json(j); });
    EXPECT_EQ(back, m);
    EXPECT_EQ(diffusion::sample(back, 3, 1), diffusion::sample(m, 3, 1));
}

TEST(Json, SurfaceAndTensorRoundTrip) {
    const std::vector<double> thetas = {0.0, 6.0};
    const std::size_t scales[] = {1, 2};
    const auto t = regimes::scale_param_tensor(small_sim(), "caregiver_capacity", thetas, 2, scales,
                                               symbolic::Reducer::mean, quick_pipeline());
    const auto back = file_round_trip(t, "t.json", [](auto& v) { return io::to_json(v); },
                                      [](const io::json& j) { return io::tensor_from_json(j); });
    EXPECT_EQ(back, t);
    const std::vector<regimes::DescriptorVector> row(t.cells.begin(), t.cells.begin() + 2);
    const auto surface = file_round_trip(row, "s.json", [](auto& v) { return io::surface_to_json(v); },
                                         [](const io::json& j) { return io::surface_from_json(j); });
    EXPECT_EQ(surface, row);
}

TEST(Json, ReadErrors) {
    const auto dir = scratch_dir("badjson");
    std::ofstream(dir / "bad.json") << "{ not json";
    EXPECT_THROW(io::read_json(dir / "bad.json"), ValidationError);
    EXPECT_THROW(io::read_json(dir / "absent.json"), ValidationError);
}

TEST(SurfaceCsv, LongForm) {
    const auto dir = scratch_dir("surfcsv");
    std::vector<regimes::DescriptorVector> cells = {cell_with({0.1, 0.2, 0.3, 0.4, 0.5}),
                                                    cell_with({1.1, 1.2, 1.3, 1.4, 1.5})};
    cells[1].theta = {2.0};
    io::write_surface_csv(dir / "s.csv", cells);
    const auto table = io::read_csv(dir / "s.csv");
    ASSERT_EQ(table.rows.size(), 10u);
    const auto f = table.column("field");
    const auto mean = table.column("mean");
    EXPECT_EQ(table.rows[7][f], "excess_entropy");
    EXPECT_EQ(io::parse_double(table.rows[7][mean], "mean"), 1.3);
}

TEST(Dot, OneStateMachine) {
    const auto m = emachine::reconstruct(fair_coin(10000, 1), 2, 0.01);
    ASSERT_EQ(m.n_states, 1u);
    const auto dot = io::machine_to_dot(m);
    EXPECT_NE(dot.find("digraph"), std::string::npos);
    EXPECT_NE(dot.find("S0 [label=\"S0\\npi=1.000\"]"), std::string::npos);
    EXPECT_NE(dot.find("S0 -> S0 [label=\"0 : "), std::string::npos);
    EXPECT_NE(dot.find("S0 -> S0 [label=\"1 : "), std::string::npos);
}

TEST(Dot, PeriodTwo) {
    const auto m = emachine::reconstruct(period2(1000), 1, 0.01);
    const auto dot = io::machine_to_dot(m);
    const std::regex edge(R"re((S\d) -> (S\d) \[label="(\d) : ([0-9.]+)"\])re");
    std::vector<std::smatch> edges;
    for (auto it = std::sregex_iterator(dot.begin(), dot.end(), edge); it != std::sregex_iterator(); ++it)
        edges.push_back(*it);
    ASSERT_EQ(edges.size(), 2u);
    for (const auto& e : edges) {
        EXPECT_NE(e[1], e[2]);
        EXPECT_EQ(e[4], "1.000");
    }
}

TEST(Dot, GoldenMeanEdgeLabels) {
    const auto m = emachine::reconstruct(golden_mean(20000, 5), 2, 0.01);
    const auto dot = io::machine_to_dot(m);
    const std::regex edge(R"re(-> S\d \[label="\d : ([0-9.]+)"\])re");
    std::vector<double> probs;
    for (auto it = std::sregex_iterator(dot.begin(), dot.end(), edge); it != std::sregex_iterator(); ++it)
        probs.push_back(std::stod((*it)[1]));
    std::sort(probs.begin(), probs.end());
    ASSERT_EQ(probs.size(), 3u);
    EXPECT_NEAR(probs[0], 0.5, 0.03);
    EXPECT_NEAR(probs[1], 0.5, 0.03);
    EXPECT_NEAR(probs[2], 1.0, 1e-12);
    const auto dir = scratch_dir("dot");
    io::export_machine_diagram(m, dir / "m.dot");
    EXPECT_EQ(slurp(dir / "m.dot"), dot);
}

TEST(Svg, ContainsPolyline) {
    io::LinePlot p{"h vs cap", "cap", "h", {0, 1, 2, 3}, {0.0, 0.5, 0.4, 0.9}};
    const auto svg = io::render_svg(p);
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_NE(svg.find("<polyline"), std::string::npos);
    EXPECT_NE(svg.find("h vs cap"), std::string::npos);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
    EXPECT_EQ(std::count(svg.begin(), svg.end(), '\n') > 3, true);
}

TEST(Spearman, Examples) {
    const std::vector<double> x = {1, 2, 3, 4, 5, 6};
    std::vector<double> y;
    for (double v : x) y.push_back(std::exp(v));
    EXPECT_DOUBLE_EQ(*io::spearman(x, y), 1.0);
    std::vector<double> rev(y.rbegin(), y.rend());
    EXPECT_DOUBLE_EQ(*io::spearman(x, rev), -1.0);
    EXPECT_FALSE(io::spearman(x, std::vector<double>(6, 2.0)).has_value());
    // Ties share average ranks: ranks (1, 2.5, 2.5, 4) against (1, 2, 3, 4).
    const double r = *io::spearman(std::vector<double>{1, 2, 2, 3}, std::vector<double>{1, 2, 3, 4});
    EXPECT_NEAR(r, 4.5 / std::sqrt(4.5 * 5.0), 1e-12);
}

TEST(Spearman, IndependentNoise) {
    const auto a = gaussian(50, 1, 101);
    const auto b = gaussian(50, 1, 202);
    const std::vector<double> va(a.data(), a.data() + 50), vb(b.data(), b.data() + 50);
    const double rho = *io::spearman(va, vb);
    EXPECT_LT(std::abs(rho), 0.4);
    // Permutation null: the observed |rho| is not extreme among relabelings.
    Rng rng(7);
    std::size_t more_extreme = 0;
    for (int k = 0; k < 200; ++k) {
        auto perm = vb;
        shuffle(perm.begin(), perm.end(), rng);
        if (std::abs(*io::spearman(va, perm)) >= std::abs(rho)) ++more_extreme;
    }
    EXPECT_GT(more_extreme, 10u);
}

TEST(Correlate, AxesTable) {
    std::vector<regimes::DescriptorVector> surface;
    for (int i = 0; i < 5; ++i) surface.push_back(cell_with({double(i), 1.0, double(i * i), std::sqrt(double(i)), 3.0}));
    const auto table = io::correlate_axes(surface);
    ASSERT_EQ(table.size(), 6u);
    EXPECT_EQ(table[0].temporal, "entropy_rate");
    EXPECT_EQ(table[0].geometric, "a");
    EXPECT_DOUBLE_EQ(*table[0].rho, 1.0);
    EXPECT_TRUE(table[1].degenerate); // constant geometric column
    EXPECT_TRUE(table[2].degenerate); // constant temporal column
    for (const auto& row : table)
        if (row.rho) {
            EXPECT_LE(*row.rho, 1.0);
            EXPECT_GE(*row.rho, -1.0);
        }
    surface.pop_back();
    surface.pop_back();
    EXPECT_THROW(io::correlate_axes(surface), InsufficientDataError);
}

TEST(Manifest, RoundTrip) {
    io::RunManifest m;
    m.command = "simulate";
    m.params = {{"seed", 4}, {"out", "/tmp/x"}};
    m.argv = {"abmscope", "simulate"};
    m.outputs = {"config.json"};
    m.tool_version = "0.1.0";
    m.seeds = {{"seed", 4}};
    m.started_at = io::utc_timestamp();
    m.finished_at = m.started_at;
    EXPECT_TRUE(std::regex_match(m.started_at, std::regex(R"(\d{4}-\d\d-\d\dT\d\d:\d\d:\d\dZ)")));
    const auto back = io::manifest_from_json(io::to_json(m));
    EXPECT_EQ(io::to_json(back), io::to_json(m));
}

class OutputDirTest : public ::testing::Test {
protected:
    void TearDown() override { io::set_fault_point(""); }
};

TEST_F(OutputDirTest, CommitMovesArtifacts) {
    const auto root = scratch_dir("outdir");
    const auto target = root / "run";
    {
        io::OutputDir dir(target);
        std::ofstream(dir.file("a.txt")) << "a";
        std::ofstream(dir.file("sub/b.txt")) << "b";
        EXPECT_FALSE(fs::exists(target));
        dir.commit();
    }
    EXPECT_EQ(slurp(target / "a.txt"), "a");
    EXPECT_EQ(slurp(target / "sub/b.txt"), "b");
    // Only the target remains next to it: no staging or backup leftovers.
    EXPECT_EQ(std::distance(fs::directory_iterator(root), fs::directory_iterator()), 1);
}

TEST_F(OutputDirTest, UncommittedLeavesNothing) {
    const auto root = scratch_dir("outdir_abort");
    {
        io::OutputDir dir(root / "run");
        std::ofstream(dir.file("a.txt")) << "a";
    }
    EXPECT_TRUE(fs::is_empty(root));
}

TEST_F(OutputDirTest, InjectedWriteFaultLeavesNoPartialTarget) {
    const auto root = scratch_dir("outdir_fault");
    io::set_fault_point("write");
    try {
        io::OutputDir dir(root / "run");
        std::ofstream(dir.file("a.txt")) << "a";
        std::ofstream(dir.file("b.txt")) << "b";
        dir.commit();
        FAIL() << "fault not raised";
    } catch (const std::exception&) {
    }
    EXPECT_TRUE(fs::is_empty(root));
}

TEST_F(OutputDirTest, InjectedCommitFaultKeepsPreviousTarget) {
    const auto root = scratch_dir("outdir_commit");
    {
        io::OutputDir dir(root / "run");
        std::ofstream(dir.file("a.txt")) << "old";
        dir.commit();
    }
    io::set_fault_point("commit");
    try {
        io::OutputDir dir(root / "run");
        std::ofstream(dir.file("a.txt")) << "new";
        dir.commit();
        FAIL() << "fault not raised";
    } catch (const std::exception&) {
    }
    EXPECT_EQ(slurp(root / "run" / "a.txt"), "old");
    EXPECT_EQ(std::distance(fs::directory_iterator(root), fs::directory_iterator()), 1);
    io::set_fault_point("");
    {
        io::OutputDir dir(root / "run");
        std::ofstream(dir.file("a.txt")) << "new";
        dir.commit();
    }
    EXPECT_EQ(slurp(root / "run" / "a.txt"), "new");
}
