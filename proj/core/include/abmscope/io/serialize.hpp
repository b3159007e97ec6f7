#pragma once

// JSON forms of the in-memory artifacts. Every *_from_json inverts the
// matching *_to_json exactly: doubles are written in shortest round-trip form,
// so a reload compares equal field by field.

#include <filesystem>

#include <nlohmann/json.hpp>

#include "abmscope/abm.hpp"
#include "abmscope/descriptors.hpp"
#include "abmscope/diffusion.hpp"
#include "abmscope/emachine.hpp"
#include "abmscope/regimes.hpp"
#include "abmscope/symbolize.hpp"

namespace abmscope::io {

using nlohmann::json;

json to_json(const sim::SimConfig& c);
// Missing keys keep their defaults; unknown keys throw ValidationError naming the key.
sim::SimConfig sim_config_from_json(const json& j, sim::SimConfig base = {});

json to_json(const symbolic::BinScheme& s);
symbolic::BinScheme bin_scheme_from_json(const json& j);

json to_json(const emachine::EpsilonMachine& m);
emachine::EpsilonMachine machine_from_json(const json& j);

json to_json(const emachine::Invariants& inv);
emachine::Invariants invariants_from_json(const json& j);

json to_json(const diffusion::TrainConfig& c);
diffusion::TrainConfig train_config_from_json(const json& j, diffusion::TrainConfig base = {});

json to_json(const diffusion::ScoreModel& m);
diffusion::ScoreModel model_from_json(const json& j);

json to_json(const descriptors::GeometryDescriptor& g);
descriptors::GeometryDescriptor geometry_from_json(const json& j);

json to_json(const regimes::DescriptorVector& v);
regimes::DescriptorVector descriptor_vector_from_json(const json& j);

json surface_to_json(std::span<const regimes::DescriptorVector> surface);
std::vector<regimes::DescriptorVector> surface_from_json(const json& j);

json to_json(const regimes::ScaleParamTensor& t);
regimes::ScaleParamTensor tensor_from_json(const json& j);

json to_json(const regimes::ClusterResult& r);
json to_json(const regimes::EffectsResult& r);

// Pretty-printed with a trailing newline.
void write_json(const std::filesystem::path& path, const json& j);
// Throws ValidationError("input") if the file is missing or malformed.
json read_json(const std::filesystem::path& path);

} // namespace abmscope::io
