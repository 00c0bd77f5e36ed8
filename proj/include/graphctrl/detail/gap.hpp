#pragma once

#include <algorithm>
#include <limits>
#include <span>

namespace graphctrl {

struct GapReport {
    int M = 0;           // 0 when no M <= max_M separates the sequence
    double delta = 0.0;
};

namespace detail {

// min_k (v[k+M] - v[k]) / M for an ascending sequence.
inline double windowed_gap(std::span<const double> v, int M)
{
    double g = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k + static_cast<std::size_t>(M) < v.size(); ++k)
        g = std::min(g, (v[k + static_cast<std::size_t>(M)] - v[k]) / static_cast<double>(M));
    return g;
}

// Smallest M <= max_M whose windowed gap exceeds min_delta, with that gap as delta.
inline GapReport estimate_gap(std::span<const double> ascending, double min_delta, int max_M = 10)
{
    for (int M = 1; M <= max_M; ++M) {
        if (static_cast<std::size_t>(M) >= ascending.size()) break;
        double d = windowed_gap(ascending, M);
        if (d > min_delta) return {M, d};
    }
    return {};
}

}  // namespace detail
}  // namespace graphctrl
