#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "graphctrl/detail/fit.hpp"
#include "graphctrl/detail/parallel.hpp"
#include "graphctrl/detail/roots.hpp"
#include "graphctrl/graph.hpp"
#include "graphctrl/spectrum.hpp"

namespace graphctrl {

class LowerBoundError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::array<double, 4> epsilon_grid{0.05, 0.1, 0.25, 0.5};

// Nearest integer, distance to the integers and signed fractional offset.
inline double nearest_integer(double x) { return std::nearbyint(x); }
inline double dist_to_int(double x) { return std::abs(x - std::nearbyint(x)); }
inline double frac_offset(double x) { return x - std::nearbyint(x); }

// Entire function whose positive zeros are the square roots of the eigenvalues.
struct SecularG {
    std::vector<double> lengths;
    std::vector<std::size_t> neumann_edges;    // external Neumann vertex
    std::vector<std::size_t> dirichlet_edges;  // external Dirichlet vertex
    SecularFunction f;

    double operator()(double x) const { return f.value(x); }
    double derivative(double x) const { return f.derivative(x); }

    // min_l L_l * sum_l prod_{j != l} |t_j(x L_j)|, with t = sin on Dirichlet and cos on Neumann edges.
    double product_bound(double x) const
    {
        const double Lmin = *std::min_element(lengths.begin(), lengths.end());
        std::vector<double> t(lengths.size());
        for (std::size_t j = 0; j < lengths.size(); ++j) t[j] = std::abs(std::sin(x * lengths[j]));
        for (auto j : neumann_edges) t[j] = std::abs(std::cos(x * lengths[j]));
        double s = 0.0;
        for (std::size_t l = 0; l < lengths.size(); ++l) {
            double p = 1.0;
            for (std::size_t j = 0; j < lengths.size(); ++j)
                if (j != l) p *= t[j];
            s += p;
        }
        return Lmin * s;
    }
};

inline SecularG build_G(const MetricGraph& graph)
{
    if (graph.topology() != Topology::Star && graph.topology() != Topology::Interval)
        throw LowerBoundError("build_G: unsupported topology " + to_string(graph.topology()));
    SecularG G;
    G.lengths = graph.lengths();
    for (std::size_t l = 0; l < graph.num_edges(); ++l)
        (graph.external_bc(l) == BoundaryCondition::Neumann ? G.neumann_edges : G.dirichlet_edges).push_back(l);
    G.f = secular_function(graph);
    return G;
}

struct GPrimeEntry {
    int k = 0;
    double sqrt_lambda = 0.0;
    double abs_Gprime = 0.0;
    double product_bound = 0.0;
    double bound_model = 0.0;
    bool below_threshold = false;  // sqrt(lambda) <= max_j pi/(2 L_j)
};

struct GPrimeFit {
    double dtilde_fit = 0.0;  // smallest d >= 0 consistent with the fitted envelope
    double exponent = 0.0;    // envelope slope of |G'| against k
    double C_fit = 0.0;
    int worst_k = 0;          // argmin of |G'| k^{1+dtilde}
    std::vector<GPrimeEntry> entries;
    std::array<double, epsilon_grid.size()> inf_scaled{};  // inf_k |G'| k^{1+eps}, all k
};

inline GPrimeFit fit_Gprime_bound(const SecularG& G, const SpectralBasis& basis, std::size_t K)
{
    if (K > basis.size()) throw LowerBoundError("fit_Gprime_bound: K exceeds basis size");
    if (K < 3) throw LowerBoundError("fit_Gprime_bound: need at least 3 modes");
    for (std::size_t k = 0; k < K; ++k)
        if (basis[k].multiplicity_group)
            throw LowerBoundError("fit_Gprime_bound: spectrum not simple at k = " + std::to_string(k + 1) +
                                  "; the eigenvalues (lambda_k) must be simple");
    const double thresh = std::numbers::pi / (2.0 * *std::min_element(G.lengths.begin(), G.lengths.end()));
    GPrimeFit fit;
    std::vector<double> ks, gs;
    for (std::size_t k = 0; k < K; ++k) {
        GPrimeEntry e;
        e.k = static_cast<int>(k + 1);
        e.sqrt_lambda = basis[k].omega;
        const double gp = std::max(std::abs(G.derivative(e.sqrt_lambda)), std::abs(G.derivative(-e.sqrt_lambda)));
        e.abs_Gprime = std::min(std::abs(G.derivative(e.sqrt_lambda)), std::abs(G.derivative(-e.sqrt_lambda)));
        const double scale = std::accumulate(G.lengths.begin(), G.lengths.end(), 0.0);
        if (!(e.abs_Gprime > 1e-13 * std::max(scale, gp)))
            throw LowerBoundError("fit_Gprime_bound: G' vanishes at k = " + std::to_string(e.k) + " (degenerate spectrum)");
        e.product_bound = G.product_bound(e.sqrt_lambda);
        e.below_threshold = e.sqrt_lambda <= thresh;
        if (!e.below_threshold) {
            ks.push_back(e.k);
            gs.push_back(e.abs_Gprime);
        }
        fit.entries.push_back(e);
    }
    if (ks.size() < 2) throw LowerBoundError("fit_Gprime_bound: fewer than two modes above the threshold");
    auto env = detail::fit_lower_envelope(ks, gs);
    fit.exponent = env.exponent;
    fit.C_fit = env.constant;
    fit.dtilde_fit = std::max(0.0, -1.0 - env.exponent);
    double worst = std::numeric_limits<double>::infinity();
    for (auto& e : fit.entries) {
        e.bound_model = fit.C_fit * std::pow(e.k, -(1.0 + fit.dtilde_fit));
        double s = e.abs_Gprime * std::pow(e.k, 1.0 + fit.dtilde_fit);
        if (!e.below_threshold && s < worst) {
            worst = s;
            fit.worst_k = e.k;
        }
    }
    for (std::size_t i = 0; i < epsilon_grid.size(); ++i) {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& e : fit.entries) m = std::min(m, e.abs_Gprime * std::pow(e.k, 1.0 + epsilon_grid[i]));
        fit.inf_scaled[i] = m;
    }
    return fit;
}

struct DiophantinePoint {
    double x = 0.0;
    double a = 0.0;           // mixed sin/cos product sum
    double half_product = 0.0;   // min_i prod_{j != i} ||(m~^i + 1/2) L~_j / L_i||
    double integer_product = 0.0;  // min_i prod_{j != i} ||m^i L~_j / L_i||
    double z = 0.0;           // min of the two products
};

struct DiophantineReport {
    std::vector<DiophantinePoint> points;
    double sandwich_max_violation = 0.0;  // max over the grid of (2d - |cos pi x|)_+ and (|cos pi x| - pi d)_+
    double fractional_max_violation = 0.0;  // | |F| - ||.|| | and |F| > 1/2
    double lemma_ratio_inf = 0.0;           // inf a/z over points with z > 0
    bool products_positive = true;          // z > 0 at every grid point
    PowerLawFit product_envelope;           // lower envelope of z against x
    std::array<double, epsilon_grid.size()> inf_scaled_a{};  // inf a(x) x^{1+eps}
};

namespace detail {

inline double sandwich_violation(double x)
{
    const double d = dist_to_int(x - 0.5);
    const double c = std::abs(std::cos(std::numbers::pi * frac_offset(x)));
    return std::max({0.0, 2.0 * d - c, c - std::numbers::pi * d});
}

}  // namespace detail

inline DiophantineReport diophantine_products(std::span<const double> lengths, std::span<const std::size_t> neumann,
                                              std::span<const double> x_grid, unsigned threads = 1)
{
    const std::size_t N = lengths.size();
    if (N == 0) throw std::invalid_argument("diophantine_products: no lengths");
    std::vector<bool> is_n(N, false);
    for (auto i : neumann) {
        if (i >= N) throw std::invalid_argument("diophantine_products: Neumann index out of range");
        is_n[i] = true;
    }
    std::vector<double> Lt(N);
    for (std::size_t j = 0; j < N; ++j) Lt[j] = is_n[j] ? 2.0 * lengths[j] : lengths[j];
    const double pi = std::numbers::pi;

    DiophantineReport rep;
    rep.points.resize(x_grid.size());
    std::vector<double> sand(x_grid.size()), frac(x_grid.size());
    detail::parallel_for(x_grid.size(), threads, [&](std::size_t g) {
        const double x = x_grid[g];
        DiophantinePoint p;
        p.x = x;
        double prod_s2 = 1.0, prod_c1 = 1.0, sum1 = 0.0, sum2 = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            if (is_n[i])
                prod_c1 *= std::abs(std::cos(x * lengths[i]));
            else
                prod_s2 *= std::abs(std::sin(x * lengths[i]));
        }
        for (std::size_t i = 0; i < N; ++i) {
            double p1 = 1.0, p2 = 1.0;
            for (std::size_t j = 0; j < N; ++j) {
                if (j == i) continue;
                if (is_n[j]) p1 *= std::abs(std::cos(x * lengths[j]));
                else p2 *= std::abs(std::sin(x * lengths[j]));
            }
            if (is_n[i]) sum1 += p1;
            else sum2 += p2;
        }
        p.a = prod_s2 * sum1 + prod_c1 * sum2;
        p.half_product = p.integer_product = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < N; ++i) {
            const double s = lengths[i] / pi * x;
            const double mt = nearest_integer(s - 0.5);
            const double m = nearest_integer(s);
            double ph = 1.0, pi_ = 1.0;
            for (std::size_t j = 0; j < N; ++j) {
                if (j == i) continue;
                ph *= dist_to_int((mt + 0.5) * Lt[j] / lengths[i]);
                pi_ *= dist_to_int(m * Lt[j] / lengths[i]);
            }
            p.half_product = std::min(p.half_product, ph);
            p.integer_product = std::min(p.integer_product, pi_);
        }
        p.z = std::min(p.half_product, p.integer_product);
        rep.points[g] = p;
        sand[g] = detail::sandwich_violation(x);
        const double F = frac_offset(x);
        frac[g] = std::max(std::abs(std::abs(F) - dist_to_int(x)), std::max(0.0, std::abs(F) - 0.5));
    });
    rep.sandwich_max_violation = *std::max_element(sand.begin(), sand.end());
    rep.fractional_max_violation = *std::max_element(frac.begin(), frac.end());
    rep.lemma_ratio_inf = std::numeric_limits<double>::infinity();
    std::vector<double> xs, zs;
    for (const auto& p : rep.points) {
        if (p.z > 0.0) {
            rep.lemma_ratio_inf = std::min(rep.lemma_ratio_inf, p.a / p.z);
            xs.push_back(p.x);
            zs.push_back(p.z);
        } else {
            rep.products_positive = false;
        }
    }
    if (xs.size() >= 2) rep.product_envelope = detail::fit_lower_envelope(xs, zs);
    for (std::size_t e = 0; e < epsilon_grid.size(); ++e) {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& p : rep.points) m = std::min(m, p.a * std::pow(p.x, 1.0 + epsilon_grid[e]));
        rep.inf_scaled_a[e] = m;
    }
    return rep;
}

struct CosBoundReport {
    std::vector<double> roots;
    double worst = 0.0;      // min_{n,l} |cos(w_n L_l)| w_n^{1+eps}
    int worst_n = 0;
    int worst_l = 0;
    double raw_min_cos = 0.0;  // min_{n,l} |cos(w_n L_l)|
    bool lengths_admissible = true;
    bool holds = false;
};

inline CosBoundReport check_cos_lower_bound(std::span<const double> lengths, std::size_t K, double eps)
{
    if (lengths.empty() || K == 0) throw std::invalid_argument("check_cos_lower_bound: empty input");
    const std::vector<double> L(lengths.begin(), lengths.end());
    auto f = [L](double x) {
        double s = 0.0;
        for (std::size_t l = 0; l < L.size(); ++l) {
            double p = std::sin(x * L[l]);
            for (std::size_t m = 0; m < L.size(); ++m)
                if (m != l) p *= std::cos(x * L[m]);
            s += p;
        }
        return s;
    };
    CosBoundReport rep;
    rep.lengths_admissible = check_length_set(lengths).independence_flag;
    const double total = std::accumulate(L.begin(), L.end(), 0.0);
    const double step = std::numbers::pi / (16.0 * total);
    try {
        rep.roots = detail::first_roots(f, step * 1e-3, step, K, 0.0, 1e7);
    } catch (const std::exception& e) {
        throw LowerBoundError(std::string("check_cos_lower_bound: root scan failed: ") + e.what());
    }
    rep.worst = rep.raw_min_cos = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < rep.roots.size(); ++n) {
        for (std::size_t l = 0; l < L.size(); ++l) {
            const double c = std::abs(std::cos(rep.roots[n] * L[l]));
            rep.raw_min_cos = std::min(rep.raw_min_cos, c);
            const double s = c * std::pow(rep.roots[n], 1.0 + eps);
            if (s < rep.worst) {
                rep.worst = s;
                rep.worst_n = static_cast<int>(n + 1);
                rep.worst_l = static_cast<int>(l + 1);
            }
        }
    }
    rep.holds = rep.worst > 1e-8;
    return rep;
}

}  // namespace graphctrl
