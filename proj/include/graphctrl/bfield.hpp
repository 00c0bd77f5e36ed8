#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "graphctrl/detail/fit.hpp"
#include "graphctrl/detail/parallel.hpp"
#include "graphctrl/graph.hpp"
#include "graphctrl/polynomial.hpp"
#include "graphctrl/spectrum.hpp"
#include "graphctrl/trig_integral.hpp"

namespace graphctrl {

// Multiplication by a polynomial on each edge, in the edge's own coordinate.
struct ControlOperator {
    std::vector<Polynomial> per_edge_potential;
    std::string description;

    static ControlOperator on_first_edge(Polynomial p, std::size_t num_edges, std::string description)
    {
        ControlOperator B;
        B.per_edge_potential.assign(num_edges, Polynomial{});
        B.per_edge_potential.at(0) = std::move(p);
        B.description = std::move(description);
        return B;
    }

    // (x - L)^4 on e1.
    static ControlOperator quartic_at_center(double L, std::size_t num_edges)
    {
        return on_first_edge(Polynomial::shifted_power(L, 4), num_edges, "(x-L1)^4 on e1");
    }

    // 5x^6 - 24x^5 L + 45x^4 L^2 - 40x^3 L^3 + 15x^2 L^4 - L^6 on e1.
    static ControlOperator sextic_neumann(double L, std::size_t num_edges)
    {
        const double L2 = L * L, L3 = L2 * L, L4 = L3 * L, L6 = L3 * L3;
        return on_first_edge(Polynomial{-L6, 0.0, 15.0 * L4, -40.0 * L3, 45.0 * L2, -24.0 * L, 5.0}, num_edges,
                             "5x^6-24x^5L1+45x^4L1^2-40x^3L1^3+15x^2L1^4-L1^6 on e1");
    }

    // (x - L)^2 on e1.
    static ControlOperator quadratic_at_center(double L, std::size_t num_edges)
    {
        return on_first_edge(Polynomial::shifted_power(L, 2), num_edges, "(x-L)^2 on e1");
    }
};

inline double matrix_element(const ControlOperator& B, const SpectralBasis& basis, std::size_t j, std::size_t k)
{
    if (j >= basis.size() || k >= basis.size()) throw std::out_of_range("matrix_element: index outside basis");
    if (B.per_edge_potential.size() != basis.edge_lengths.size())
        throw std::invalid_argument("matrix_element: operator and basis disagree on edge count");
    if (j > k) std::swap(j, k);
    const auto& a = basis.modes[j];
    const auto& b = basis.modes[k];
    double acc = 0.0;
    for (std::size_t l = 0; l < basis.edge_lengths.size(); ++l) {
        const auto& P = B.per_edge_potential[l];
        const auto& ca = a.per_edge[l];
        const auto& cb = b.per_edge[l];
        if (P.is_zero() || ca.amplitude == 0.0 || cb.amplitude == 0.0) continue;
        acc += ca.amplitude * cb.amplitude * poly_trig_integral(P, ca.mode, a.omega, cb.mode, b.omega, basis.edge_lengths[l]);
    }
    return acc;
}

inline Eigen::MatrixXd coupling_matrix(const ControlOperator& B, const SpectralBasis& basis, unsigned threads = 1)
{
    const std::size_t K = basis.size();
    Eigen::MatrixXd M(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
    detail::parallel_for(K, threads, [&](std::size_t j) {
        for (std::size_t k = j; k < K; ++k) {
            double v = matrix_element(B, basis, j, k);
            M(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = v;
            M(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = v;
        }
    });
    return M;
}

struct ResonantQuadruple {
    std::pair<int, int> first;   // (j, k), j < k, 1-based
    std::pair<int, int> second;  // (l, m), l < m
    double spectral_defect = 0.0;  // |μ_j - μ_k - μ_l + μ_m|
    double diagonal_combination = 0.0;  // |B_jj - B_kk - B_ll + B_mm|
    bool operator==(const ResonantQuadruple&) const = default;
};

struct AssumptionIReport {
    PowerLawFit eta_fit;
    PowerLawFit envelope_fit;
    std::vector<double> elements;  // |<φ_k, Bφ_1>|, k = 1..K
    std::vector<int> zero_elements;
    std::vector<ResonantQuadruple> resonant_quadruples;
    int fit_lo = 0;
    int fit_hi = 0;
};

namespace detail {

struct PairGap {
    double gap;
    int j;
    int k;
};

inline bool pair_less(const std::pair<int, int>& a, const std::pair<int, int>& b) { return a < b; }

}  // namespace detail

// Pairs of transitions (j,k) != (l,m) with |(μ_k - μ_j) - (μ_m - μ_l)| < tol_abs.
// Sorting all K² gaps and sweeping a window keeps this O(K² log K) plus output.
inline std::vector<ResonantQuadruple> find_resonances(std::span<const double> mu, std::span<const double> diag,
                                                      double tol_abs)
{
    const int K = static_cast<int>(mu.size());
    std::vector<detail::PairGap> gaps;
    gaps.reserve(static_cast<std::size_t>(K) * static_cast<std::size_t>(K) / 2);
    for (int j = 0; j < K; ++j)
        for (int k = j + 1; k < K; ++k) gaps.push_back({mu[k] - mu[j], j, k});
    std::sort(gaps.begin(), gaps.end(), [](const auto& a, const auto& b) {
        return a.gap < b.gap || (a.gap == b.gap && std::pair(a.j, a.k) < std::pair(b.j, b.k));
    });
    std::vector<ResonantQuadruple> out;
    for (std::size_t a = 0; a < gaps.size(); ++a) {
        for (std::size_t b = a + 1; b < gaps.size() && gaps[b].gap - gaps[a].gap < tol_abs; ++b) {
            auto p = std::pair(gaps[a].j + 1, gaps[a].k + 1);
            auto q = std::pair(gaps[b].j + 1, gaps[b].k + 1);
            if (q < p) std::swap(p, q);
            ResonantQuadruple r;
            r.first = p;
            r.second = q;
            r.spectral_defect = std::abs(mu[p.first - 1] - mu[p.second - 1] - mu[q.first - 1] + mu[q.second - 1]);
            if (!diag.empty())
                r.diagonal_combination =
                    std::abs(diag[p.first - 1] - diag[p.second - 1] - diag[q.first - 1] + diag[q.second - 1]);
            out.push_back(r);
        }
    }
    std::sort(out.begin(), out.end(),
              [](const auto& x, const auto& y) { return std::pair(x.first, x.second) < std::pair(y.first, y.second); });
    return out;
}

// Exact variant for spectra proportional to integers.
inline std::vector<ResonantQuadruple> find_resonances_exact(std::span<const long long> levels, std::span<const double> diag)
{
    const int K = static_cast<int>(levels.size());
    std::vector<std::tuple<long long, int, int>> gaps;
    for (int j = 0; j < K; ++j)
        for (int k = j + 1; k < K; ++k) gaps.emplace_back(levels[k] - levels[j], j, k);
    std::sort(gaps.begin(), gaps.end());
    std::vector<ResonantQuadruple> out;
    for (std::size_t a = 0; a < gaps.size(); ++a) {
        for (std::size_t b = a + 1; b < gaps.size() && std::get<0>(gaps[b]) == std::get<0>(gaps[a]); ++b) {
            auto p = std::pair(std::get<1>(gaps[a]) + 1, std::get<2>(gaps[a]) + 1);
            auto q = std::pair(std::get<1>(gaps[b]) + 1, std::get<2>(gaps[b]) + 1);
            if (q < p) std::swap(p, q);
            ResonantQuadruple r{p, q, 0.0, 0.0};
            if (!diag.empty())
                r.diagonal_combination =
                    std::abs(diag[p.first - 1] - diag[p.second - 1] - diag[q.first - 1] + diag[q.second - 1]);
            out.push_back(r);
        }
    }
    std::sort(out.begin(), out.end(),
              [](const auto& x, const auto& y) { return std::pair(x.first, x.second) < std::pair(y.first, y.second); });
    return out;
}

struct AssumptionIOptions {
    double tol_res = 1e-10;      // relative to μ_K
    double floor = 1e-14;        // relative to the largest element
    int fit_lo = 0;              // 0 selects K/3
    int fit_hi = 0;              // 0 selects K
    std::vector<long long> integer_levels;  // optional exact spectrum (μ_k ∝ levels[k])
    unsigned threads = 1;
};

inline AssumptionIReport check_assumption_I(const Eigen::MatrixXd& Bmat, std::span<const double> mu,
                                            const AssumptionIOptions& opt = {})
{
    const auto K = static_cast<int>(mu.size());
    if (K < 30) throw std::invalid_argument("check_assumption_I: need K >= 30");
    if (Bmat.rows() < K || Bmat.cols() < K) throw std::invalid_argument("check_assumption_I: coupling matrix too small");
    AssumptionIReport rep;
    double max_el = 0.0;
    for (int k = 0; k < K; ++k) {
        rep.elements.push_back(std::abs(Bmat(k, 0)));
        max_el = std::max(max_el, rep.elements.back());
    }
    for (int k = 0; k < K; ++k)
        if (rep.elements[static_cast<std::size_t>(k)] < opt.floor * max_el) rep.zero_elements.push_back(k + 1);
    rep.fit_lo = opt.fit_lo > 0 ? opt.fit_lo : std::max(2, K / 3);
    rep.fit_hi = opt.fit_hi > 0 ? opt.fit_hi : K;
    std::vector<double> ks, vs;
    for (int k = rep.fit_lo; k <= rep.fit_hi && k <= K; ++k) {
        double v = rep.elements[static_cast<std::size_t>(k - 1)];
        if (v >= opt.floor * max_el) {
            ks.push_back(k);
            vs.push_back(v);
        }
    }
    rep.eta_fit = detail::fit_power_law(ks, vs);
    rep.envelope_fit = detail::fit_lower_envelope(ks, vs);
    std::vector<double> diag(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) diag[static_cast<std::size_t>(k)] = Bmat(k, k);
    if (!opt.integer_levels.empty()) {
        if (static_cast<int>(opt.integer_levels.size()) < K)
            throw std::invalid_argument("check_assumption_I: integer_levels shorter than K");
        rep.resonant_quadruples =
            find_resonances_exact(std::span(opt.integer_levels).subspan(0, static_cast<std::size_t>(K)), diag);
    } else {
        rep.resonant_quadruples = find_resonances(mu, diag, opt.tol_res * mu[static_cast<std::size_t>(K - 1)]);
    }
    return rep;
}

inline AssumptionIReport check_assumption_I(const ControlOperator& B, const SpectralBasis& basis, std::size_t K,
                                            AssumptionIOptions opt = {})
{
    if (K > basis.size()) throw std::invalid_argument("check_assumption_I: K exceeds basis size");
    SpectralBasis sub = basis;
    sub.modes.resize(K);
    auto M = coupling_matrix(B, sub, opt.threads);
    auto mu = sub.lambdas();
    return check_assumption_I(M, mu, opt);
}

struct VertexCondition {
    std::string condition;
    double residual = 0.0;
    bool satisfied = false;
};

struct AssumptionIIReport {
    bool preserves_H2G = false;
    std::vector<VertexCondition> vertex_conditions;
    int center_vanishing_order = 0;      // common order of vanishing of the potentials at the center
    std::optional<double> certified_d;   // supremum (exclusive) of the certified regularity shift
    std::string regime;                  // "D", "N" or "D/N"
    double max_mode_residual = 0.0;      // vertex-condition defect of Bφ_k over the supplied modes
};

namespace detail {

inline double poly_scale(const Polynomial& p, double L)
{
    double s = 0.0;
    const auto& c = p.coefficients();
    for (std::size_t i = 0; i < c.size(); ++i) s += std::abs(c[i]) * std::pow(L, static_cast<double>(i));
    return s > 0.0 ? s : 1.0;
}

}  // namespace detail

inline AssumptionIIReport check_assumption_II(const ControlOperator& B, const MetricGraph& graph,
                                              const SpectralBasis* basis = nullptr, std::size_t K = 0)
{
    if (graph.topology() != Topology::Star)
        throw std::invalid_argument("check_assumption_II: star graph required");
    const std::size_t n = graph.num_edges();
    if (B.per_edge_potential.size() != n) throw std::invalid_argument("check_assumption_II: edge count mismatch");
    constexpr double zero_tol = 1e-12;
    AssumptionIIReport rep;
    bool any_d = false, any_n = false;
    for (std::size_t l = 0; l < n; ++l) (graph.external_bc(l) == BoundaryCondition::Dirichlet ? any_d : any_n) = true;
    rep.regime = any_d && any_n ? "D/N" : (any_d ? "D" : "N");

    bool ok = true;
    auto record = [&](std::string name, double residual) {
        bool sat = residual <= zero_tol;
        ok = ok && sat;
        rep.vertex_conditions.push_back({std::move(name), residual, sat});
    };

    for (std::size_t l = 0; l < n; ++l) {
        const auto& P = B.per_edge_potential[l];
        if (P.is_zero()) continue;
        const auto& e = graph.edges()[l];
        const double scale = detail::poly_scale(P, e.length);
        if (graph.external_bc(l) == BoundaryCondition::Neumann)
            record("P'(0)=0 on " + e.id + " (N at " + e.from + ")", std::abs(P.derivative()(0.0)) * e.length / scale);
    }
    // Continuity and Kirchhoff of Bψ at the center.
    double ref_val = 0.0, spread = 0.0, kirchhoff = 0.0, scale_c = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
        const auto& P = B.per_edge_potential[l];
        const double L = graph.edges()[l].length;
        double v = P(L);
        if (l == 0) ref_val = v;
        spread = std::max(spread, std::abs(v - ref_val));
        kirchhoff += P.derivative()(L) * L;
        scale_c = std::max(scale_c, P.is_zero() ? 0.0 : detail::poly_scale(P, L));
    }
    if (scale_c == 0.0) scale_c = 1.0;
    record("P_l(L_l) equal across edges (continuity at center)", spread / scale_c);
    record("sum_l P_l'(L_l) = 0 (Kirchhoff at center)", std::abs(kirchhoff) / scale_c);
    rep.preserves_H2G = ok;

    // Order of vanishing at the center shared by all nonzero potentials.
    int order = 64;
    bool any_potential = false;
    for (std::size_t l = 0; l < n; ++l) {
        const auto& P = B.per_edge_potential[l];
        if (P.is_zero()) continue;
        any_potential = true;
        const double L = graph.edges()[l].length;
        const double scale = detail::poly_scale(P, L);
        int r = 0;
        for (Polynomial d = P; r <= P.degree() && std::abs(d(L)) * std::pow(L, r) <= zero_tol * scale; ++r)
            d = d.derivative();
        for (int j = 2; j <= 3; ++j) {
            double res = std::abs(P.derivative(j)(L)) * std::pow(L, j) / scale;
            rep.vertex_conditions.push_back({"P^(" + std::to_string(j) + ")(L) = 0 on " + graph.edges()[l].id +
                                                 " (higher regularity)",
                                             res, res <= zero_tol});
        }
        order = std::min(order, r);
    }
    rep.center_vanishing_order = any_potential ? order : 64;
    if (ok) {
        const double cap = rep.regime == "N" ? 3.5 : (rep.regime == "D" ? 2.5 : 1.5);
        rep.certified_d = std::min(cap, static_cast<double>(rep.center_vanishing_order) + 0.5);
    }

    if (basis != nullptr) {
        const std::size_t kmax = std::min(K == 0 ? basis->size() : K, basis->size());
        for (std::size_t k = 0; k < kmax; ++k) {
            const auto& m = (*basis)[k];
            double cont_ref = 0.0, cont = 0.0, kir = 0.0, ext = 0.0, amp = 0.0;
            for (std::size_t l = 0; l < n; ++l) {
                const auto& P = B.per_edge_potential[l];
                const double L = graph.edges()[l].length;
                const auto dP = P.derivative();
                double val = P(L) * m.value(l, L);
                double der = dP(L) * m.value(l, L) + P(L) * m.derivative(l, L);
                if (l == 0) cont_ref = val;
                cont = std::max(cont, std::abs(val - cont_ref));
                kir += der;
                if (graph.external_bc(l) == BoundaryCondition::Dirichlet)
                    ext = std::max(ext, std::abs(P(0.0) * m.value(l, 0.0)));
                else
                    ext = std::max(ext, std::abs(dP(0.0) * m.value(l, 0.0) + P(0.0) * m.derivative(l, 0.0)));
                amp = std::max(amp, std::abs(m.per_edge[l].amplitude) * detail::poly_scale(P, L) *
                                        std::max(1.0, m.omega));
            }
            if (amp > 0.0)
                rep.max_mode_residual = std::max(rep.max_mode_residual, std::max({cont, std::abs(kir), ext}) / amp);
        }
    }
    return rep;
}

}  // namespace graphctrl
