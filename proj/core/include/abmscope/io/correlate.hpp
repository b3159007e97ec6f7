#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "abmscope/regimes.hpp"

namespace abmscope::io {

// Spearman rank correlation with average ranks for ties; unset when either
// column is constant.
std::optional<double> spearman(std::span<const double> a, std::span<const double> b);

struct AxisCorrelation {
    std::string temporal;
    std::string geometric;
    std::optional<double> rho;
    bool degenerate = false;
};

// Every temporal invariant against every geometric field across the surface.
std::vector<AxisCorrelation> correlate_axes(std::span<const regimes::DescriptorVector> surface);

} // namespace abmscope::io
