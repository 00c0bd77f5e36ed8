#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace graphctrl {

struct PowerLawFit {
    double exponent = 0.0;   // slope of log y against log x
    double constant = 0.0;   // y ≈ constant * x^exponent
    double residual = 0.0;   // RMS residual in log space
    std::size_t samples = 0;
};

namespace detail {

inline PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size()) throw std::invalid_argument("fit_power_law: size mismatch");
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > 0.0 && y[i] > 0.0 && std::isfinite(y[i])) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    }
    if (lx.size() < 2) throw std::invalid_argument("fit_power_law: fewer than two positive samples");
    const double n = static_cast<double>(lx.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    PowerLawFit fit;
    fit.exponent = sxx > 0 ? sxy / sxx : 0.0;
    const double intercept = my - fit.exponent * mx;
    fit.constant = std::exp(intercept);
    double ss = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        double r = ly[i] - (intercept + fit.exponent * lx[i]);
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / n);
    fit.samples = lx.size();
    return fit;
}

// Vertices of the lower convex hull of (log x, log y), in increasing x.
inline std::vector<std::size_t> lower_hull_indices(std::span<const double> x, std::span<const double> y)
{
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] > 0 && y[i] > 0) idx.push_back(i);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
    std::vector<std::size_t> hull;
    auto cross = [&](std::size_t o, std::size_t a, std::size_t b) {
        double ox = std::log(x[o]), oy = std::log(y[o]);
        return (std::log(x[a]) - ox) * (std::log(y[b]) - oy) - (std::log(y[a]) - oy) * (std::log(x[b]) - ox);
    };
    for (auto i : idx) {
        while (hull.size() >= 2 && cross(hull[hull.size() - 2], hull.back(), i) <= 0) hull.pop_back();
        hull.push_back(i);
    }
    return hull;
}

// Power law through the lower envelope: least squares on the lower hull vertices.
inline PowerLawFit fit_lower_envelope(std::span<const double> x, std::span<const double> y)
{
    auto hull = lower_hull_indices(x, y);
    if (hull.size() < 2) {
        PowerLawFit f;
        if (!hull.empty()) f.constant = y[hull[0]];
        f.samples = hull.size();
        return f;
    }
    std::vector<double> hx, hy;
    for (auto i : hull) {
        hx.push_back(x[i]);
        hy.push_back(y[i]);
    }
    return fit_power_law(hx, hy);
}

}  // namespace detail
}  // namespace graphctrl
