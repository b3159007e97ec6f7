#include "abmscope/io/correlate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "abmscope/error.hpp"

namespace abmscope::io {

namespace {

std::vector<double> ranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
        i = j + 1;
    }
    return r;
}

} // namespace

std::optional<double> spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ValidationError("columns", "columns differ in length");
    if (a.size() < 2) return std::nullopt;
    const auto ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return std::nullopt;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::vector<AxisCorrelation> correlate_axes(std::span<const regimes::DescriptorVector> surface) {
    if (surface.size() < 4) throw InsufficientDataError("surface", "axis correlation needs >= 4 surface points");
    for (const auto& c : surface)
        if (!c.ok()) throw ValidationError("surface", "surface contains failed cells");
    const auto& names = surface.front().stats;
    constexpr std::size_t n_temporal = 3;
    auto column = [&](std::size_t f) {
        std::vector<double> v;
        for (const auto& c : surface) v.push_back(c.stats.at(f).mean);
        return v;
    };
    std::vector<AxisCorrelation> out;
    for (std::size_t t = 0; t < n_temporal; ++t) {
        const auto ct = column(t);
        for (std::size_t g = n_temporal; g < names.size(); ++g) {
            AxisCorrelation a;
            a.temporal = names[t].name;
            a.geometric = names[g].name;
            a.rho = spearman(ct, column(g));
            a.degenerate = !a.rho.has_value();
            out.push_back(std::move(a));
        }
    }
    return out;
}

} // namespace abmscope::io
