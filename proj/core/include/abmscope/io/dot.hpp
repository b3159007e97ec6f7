#pragma once

#include <filesystem>
#include <string>

#include "abmscope/emachine.hpp"

namespace abmscope::io {

// Graphviz digraph: one node per causal state labelled with its stationary
// probability, one edge per transition labelled "symbol : prob" (3 decimals).
std::string machine_to_dot(const emachine::EpsilonMachine& m);
void export_machine_diagram(const emachine::EpsilonMachine& m, const std::filesystem::path& path);

} // namespace abmscope::io
