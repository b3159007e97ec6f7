#include "abmscope/io/dot.hpp"

#include <cstdio>
#include <fstream>

#include "abmscope/error.hpp"

namespace abmscope::io {

namespace {

std::string fixed3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

} // namespace

std::string machine_to_dot(const emachine::EpsilonMachine& m) {
    if (m.stationary.size() != m.n_states) throw ValidationError("machine", "stationary vector does not match n_states");
    std::string out = "digraph epsilon_machine {\n  rankdir=LR;\n  node [shape=circle];\n";
    for (std::size_t s = 0; s < m.n_states; ++s)
        out += "  S" + std::to_string(s) + " [label=\"S" + std::to_string(s) + "\\npi=" + fixed3(m.stationary[s]) +
               "\"];\n";
    for (const auto& t : m.transitions)
        out += "  S" + std::to_string(t.from) + " -> S" + std::to_string(t.to) + " [label=\"" +
               std::to_string(t.symbol) + " : " + fixed3(t.prob) + "\"];\n";
    out += "}\n";
    return out;
}

void export_machine_diagram(const emachine::EpsilonMachine& m, const std::filesystem::path& path) {
    const std::string text = machine_to_dot(m);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << text;
}

} // namespace abmscope::io
