#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "graphctrl/detail/fit.hpp"
#include "graphctrl/detail/gap.hpp"
#include "graphctrl/detail/roots.hpp"
#include "graphctrl/graph.hpp"
#include "graphctrl/trig_integral.hpp"

namespace graphctrl {

struct EdgeComponent {
    double amplitude = 0.0;
    TrigMode mode = TrigMode::Sin;
};

struct EigenMode {
    int index = 0;  // 1-based
    double lambda = 0.0;
    double omega = 0.0;
    std::vector<EdgeComponent> per_edge;
    std::optional<int> multiplicity_group;

    double value(std::size_t edge, double x) const
    {
        const auto& c = per_edge.at(edge);
        return c.amplitude * (c.mode == TrigMode::Sin ? std::sin(omega * x) : std::cos(omega * x));
    }

    double derivative(std::size_t edge, double x) const
    {
        const auto& c = per_edge.at(edge);
        return c.amplitude * omega * (c.mode == TrigMode::Sin ? std::cos(omega * x) : -std::sin(omega * x));
    }
};

struct WeylReport {
    double c1 = 0.0;
    double c2 = 0.0;
};

struct SpectralBasis {
    std::vector<double> edge_lengths;
    std::vector<EigenMode> modes;
    GapReport gap_report;
    WeylReport weyl_report;

    std::size_t size() const { return modes.size(); }
    const EigenMode& operator[](std::size_t i) const { return modes.at(i); }

    std::vector<double> lambdas() const
    {
        std::vector<double> out;
        for (const auto& m : modes) out.push_back(m.lambda);
        return out;
    }

    std::vector<double> omegas() const
    {
        std::vector<double> out;
        for (const auto& m : modes) out.push_back(m.omega);
        return out;
    }
};

class SpectrumError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SecularFunction {
    std::function<double(double)> value;
    std::function<double(double)> derivative;
    std::string description;

    double operator()(double x) const { return value(x); }
};

namespace detail {

inline double trig(TrigMode m, double arg) { return m == TrigMode::Sin ? std::sin(arg) : std::cos(arg); }

// Mode used on a star edge: sin for a Dirichlet external vertex, cos for Neumann.
inline TrigMode edge_mode(BoundaryCondition bc)
{
    return bc == BoundaryCondition::Dirichlet ? TrigMode::Sin : TrigMode::Cos;
}

// Derivative of the edge trig function: cos for sin, -sin for cos.
inline double trig_prime(TrigMode m, double arg) { return m == TrigMode::Sin ? std::cos(arg) : -std::sin(arg); }

struct StarData {
    std::vector<double> lengths;
    std::vector<TrigMode> modes;
};

inline StarData star_data(const MetricGraph& g)
{
    StarData d;
    for (std::size_t l = 0; l < g.num_edges(); ++l) {
        d.lengths.push_back(g.edges()[l].length);
        d.modes.push_back(edge_mode(g.external_bc(l)));
    }
    return d;
}

inline double star_secular(const StarData& s, double x)
{
    const std::size_t n = s.lengths.size();
    double total = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
        double term = trig_prime(s.modes[l], x * s.lengths[l]);
        for (std::size_t j = 0; j < n; ++j)
            if (j != l) term *= trig(s.modes[j], x * s.lengths[j]);
        total += term;
    }
    return total;
}

inline double star_secular_derivative(const StarData& s, double x)
{
    const std::size_t n = s.lengths.size();
    double total_length = 0.0;
    double prod = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
        total_length += s.lengths[j];
        prod *= trig(s.modes[j], x * s.lengths[j]);
    }
    double acc = -total_length * prod;
    for (std::size_t l = 0; l < n; ++l) {
        for (std::size_t m = 0; m < n; ++m) {
            if (m == l) continue;
            double term = s.lengths[m] * trig_prime(s.modes[l], x * s.lengths[l]) *
                          trig_prime(s.modes[m], x * s.lengths[m]);
            for (std::size_t j = 0; j < n; ++j)
                if (j != l && j != m) term *= trig(s.modes[j], x * s.lengths[j]);
            acc += term;
        }
    }
    return acc;
}

inline void require_supported(const MetricGraph& g)
{
    if (g.topology() != Topology::Star && g.topology() != Topology::Interval)
        throw SpectrumError("unsupported topology: " + to_string(g.topology()));
}

}  // namespace detail

inline SecularFunction secular_function(const MetricGraph& graph)
{
    detail::require_supported(graph);
    if (graph.topology() == Topology::Interval) {
        const double L = graph.edges()[0].length;
        const bool same = graph.external_bc(0) == graph.far_bc(0);
        if (same) {
            return {[L](double x) { return std::sin(x * L); }, [L](double x) { return L * std::cos(x * L); },
                    "sin(x*L)"};
        }
        return {[L](double x) { return std::cos(x * L); }, [L](double x) { return -L * std::sin(x * L); },
                "cos(x*L)"};
    }
    auto data = detail::star_data(graph);
    std::string desc = "sum_l t'_l(x L_l) prod_{j!=l} t_j(x L_j) with t = ";
    for (std::size_t l = 0; l < data.modes.size(); ++l)
        desc += (l ? "," : "") + std::string(data.modes[l] == TrigMode::Sin ? "sin" : "cos");
    return {[data](double x) { return detail::star_secular(data, x); },
            [data](double x) { return detail::star_secular_derivative(data, x); }, desc};
}

namespace detail {

inline double edge_norm_sq(TrigMode mode, double omega, double L)
{
    if (omega == 0.0) return mode == TrigMode::Cos ? L : 0.0;
    double s = std::sin(2.0 * omega * L) / (4.0 * omega);
    return mode == TrigMode::Sin ? L / 2.0 - s : L / 2.0 + s;
}

// Highest-index nonzero amplitude made positive.
inline void fix_sign(std::vector<EdgeComponent>& comps)
{
    for (auto it = comps.rbegin(); it != comps.rend(); ++it) {
        if (it->amplitude != 0.0) {
            if (it->amplitude < 0.0)
                for (auto& c : comps) c.amplitude = -c.amplitude;
            return;
        }
    }
}

inline void normalize(std::vector<EdgeComponent>& comps, double omega, std::span<const double> lengths)
{
    double norm_sq = 0.0;
    for (std::size_t l = 0; l < comps.size(); ++l)
        norm_sq += comps[l].amplitude * comps[l].amplitude * edge_norm_sq(comps[l].mode, omega, lengths[l]);
    if (!(norm_sq > 1e-300) || !std::isfinite(norm_sq))
        throw SpectrumError("normalization failure at omega = " + std::to_string(omega));
    const double s = 1.0 / std::sqrt(norm_sq);
    for (auto& c : comps) c.amplitude *= s;
    fix_sign(comps);
}

// Eigenfunction with nonzero center value: continuity gives a_l t_l(ω L_l) = const.
inline std::vector<EdgeComponent> generic_amplitudes(const StarData& s, double omega)
{
    const std::size_t n = s.lengths.size();
    std::vector<double> vals(n);
    std::size_t anchor = 0;
    for (std::size_t l = 0; l < n; ++l) {
        vals[l] = trig(s.modes[l], omega * s.lengths[l]);
        if (std::abs(vals[l]) > std::abs(vals[anchor])) anchor = l;
    }
    std::vector<EdgeComponent> comps(n);
    for (std::size_t l = 0; l < n; ++l) comps[l] = {vals[anchor] / vals[l], s.modes[l]};
    normalize(comps, omega, s.lengths);
    return comps;
}

// Orthonormal basis of center-vanishing eigenfunctions supported on `support`
// (edges whose trig factor vanishes at the center). Built by projecting unit
// vectors onto the Kirchhoff constraint, peeling one edge per vector.
inline std::vector<std::vector<EdgeComponent>> vanishing_basis(const StarData& s, double omega,
                                                               const std::vector<std::size_t>& support)
{
    const std::size_t n = s.lengths.size();
    std::vector<std::vector<EdgeComponent>> out;
    for (std::size_t start = 0; start + 1 < support.size(); ++start) {
        std::vector<std::size_t> active(support.begin() + static_cast<long>(start), support.end());
        std::vector<double> sigma(n, 0.0), weight(n, 0.0);
        for (auto l : active) {
            weight[l] = s.lengths[l] / 2.0;
            double d = trig_prime(s.modes[l], omega * s.lengths[l]);
            sigma[l] = d > 0 ? 1.0 : -1.0;
        }
        // Constraint normal in the weighted product: n_l = sigma_l / w_l.
        double nn = 0.0;
        for (auto l : active) nn += sigma[l] * sigma[l] / weight[l];
        const std::size_t lead = active.front();
        double coef = sigma[lead] / nn;  // <e_lead, n>_w / <n, n>_w
        std::vector<EdgeComponent> comps(n);
        for (std::size_t l = 0; l < n; ++l) comps[l] = {0.0, s.modes[l]};
        for (auto l : active) comps[l].amplitude = (l == lead ? 1.0 : 0.0) - coef * sigma[l] / weight[l];
        normalize(comps, omega, s.lengths);
        out.push_back(std::move(comps));
    }
    return out;
}

struct VanishingLevel {
    double omega;
    std::vector<std::size_t> support;
};

// Frequencies below x_max where at least two star edges vanish at the center.
inline std::vector<VanishingLevel> vanishing_levels(const StarData& s, double x_max, double rel_tol = 1e-9)
{
    struct Cand {
        double omega;
        std::size_t edge;
    };
    std::vector<Cand> cands;
    for (std::size_t l = 0; l < s.lengths.size(); ++l) {
        const double shift = s.modes[l] == TrigMode::Sin ? 0.0 : 0.5;
        for (long k = 1;; ++k) {
            double w = (static_cast<double>(k) - shift) * std::numbers::pi / s.lengths[l];
            if (w > x_max) break;
            cands.push_back({w, l});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        return a.omega < b.omega || (a.omega == b.omega && a.edge < b.edge);
    });
    std::vector<VanishingLevel> out;
    for (std::size_t i = 0; i < cands.size();) {
        std::size_t j = i + 1;
        while (j < cands.size() && cands[j].omega - cands[i].omega <= rel_tol * cands[i].omega) ++j;
        if (j - i >= 2) {
            VanishingLevel lvl{0.0, {}};
            for (std::size_t t = i; t < j; ++t) {
                lvl.omega += cands[t].omega / static_cast<double>(j - i);
                lvl.support.push_back(cands[t].edge);
            }
            std::sort(lvl.support.begin(), lvl.support.end());
            out.push_back(std::move(lvl));
        }
        i = j;
    }
    return out;
}

inline void assign_groups(std::vector<EigenMode>& modes, double rel_tol = 1e-9)
{
    int group = 0;
    for (std::size_t i = 0; i < modes.size();) {
        std::size_t j = i + 1;
        while (j < modes.size() && modes[j].lambda - modes[i].lambda <= rel_tol * std::max(1.0, modes[i].lambda)) ++j;
        if (j - i >= 2) {
            ++group;
            for (std::size_t t = i; t < j; ++t) modes[t].multiplicity_group = group;
        }
        i = j;
    }
}

inline void fill_reports(SpectralBasis& basis)
{
    double c1 = std::numeric_limits<double>::infinity(), c2 = 0.0;
    for (const auto& m : basis.modes) {
        if (m.index < 2) continue;
        double r = m.lambda / (static_cast<double>(m.index) * static_cast<double>(m.index));
        c1 = std::min(c1, r);
        c2 = std::max(c2, r);
    }
    if (c2 > 0.0) basis.weyl_report = {c1, c2};
    auto om = basis.omegas();
    if (om.size() >= 2) basis.gap_report = estimate_gap(om, 1e-9 * om.back());
}

inline SpectralBasis interval_spectrum(const MetricGraph& g, std::size_t K)
{
    const double L = g.edges()[0].length;
    const auto left = g.external_bc(0);
    const auto right = g.far_bc(0);
    SpectralBasis basis;
    basis.edge_lengths = {L};
    const double pi = std::numbers::pi;
    for (std::size_t k = 1; k <= K; ++k) {
        EigenMode m;
        m.index = static_cast<int>(k);
        const double kk = static_cast<double>(k);
        TrigMode mode = left == BoundaryCondition::Dirichlet ? TrigMode::Sin : TrigMode::Cos;
        if (left == right)
            m.omega = left == BoundaryCondition::Dirichlet ? kk * pi / L : (kk - 1.0) * pi / L;
        else
            m.omega = (kk - 0.5) * pi / L;
        m.lambda = m.omega * m.omega;
        double amp = m.omega == 0.0 ? 1.0 / std::sqrt(L) : std::sqrt(2.0 / L);
        m.per_edge = {{amp, mode}};
        basis.modes.push_back(std::move(m));
    }
    fill_reports(basis);
    return basis;
}

}  // namespace detail

inline SpectralBasis solve_spectrum(const MetricGraph& graph, std::size_t num_modes, double scan_resolution)
{
    detail::require_supported(graph);
    if (num_modes < 1) throw std::invalid_argument("solve_spectrum: num_modes must be >= 1");
    const double limit = std::numbers::pi / (2.0 * graph.total_length());
    if (!(scan_resolution > 0.0) || scan_resolution >= limit)
        throw std::invalid_argument("solve_spectrum: scan_resolution must lie in (0, " + std::to_string(limit) + ")");
    if (graph.topology() == Topology::Interval) return detail::interval_spectrum(graph, num_modes);

    const auto data = detail::star_data(graph);
    auto f = [&data](double x) { return detail::star_secular(data, x); };
    const bool all_neumann =
        std::all_of(data.modes.begin(), data.modes.end(), [](TrigMode m) { return m == TrigMode::Cos; });

    struct Level {
        double omega;
        std::vector<std::vector<EdgeComponent>> comps;
    };
    std::vector<double> roots;
    double x_lo = 1e-9 * scan_resolution;
    double x_hi = x_lo;
    const double block = 512.0 * scan_resolution;
    std::vector<Level> levels;
    while (true) {
        x_hi = x_lo + block;
        for (const auto& br : detail::scan_sign_changes(f, x_lo, x_hi, scan_resolution))
            roots.push_back(detail::bisect(f, br.lo, br.hi, 0.0));
        x_lo = x_hi;
        auto vanish = detail::vanishing_levels(data, x_hi);
        std::size_t count = all_neumann ? 1 : 0;
        for (const auto& v : vanish) count += v.support.size() - 1;
        for (double r : roots) {
            bool shadow = std::any_of(vanish.begin(), vanish.end(),
                                      [&](const auto& v) { return std::abs(r - v.omega) <= 1e-9 * v.omega; });
            if (!shadow) ++count;
        }
        if (count >= num_modes) {
            levels.clear();
            if (all_neumann) {
                std::vector<EdgeComponent> c(data.lengths.size());
                double amp = 1.0 / std::sqrt(graph.total_length());
                for (auto& e : c) e = {amp, TrigMode::Cos};
                levels.push_back({0.0, {c}});
            }
            for (const auto& v : vanish) levels.push_back({v.omega, detail::vanishing_basis(data, v.omega, v.support)});
            for (double r : roots) {
                bool shadow = std::any_of(vanish.begin(), vanish.end(),
                                          [&](const auto& v) { return std::abs(r - v.omega) <= 1e-9 * v.omega; });
                if (!shadow) levels.push_back({r, {detail::generic_amplitudes(data, r)}});
            }
            break;
        }
        if (x_hi > 1e8) throw RootBracketError("solve_spectrum: scan exceeded x = 1e8 without enough roots");
    }
    std::stable_sort(levels.begin(), levels.end(), [](const Level& a, const Level& b) { return a.omega < b.omega; });

    SpectralBasis basis;
    basis.edge_lengths = data.lengths;
    for (const auto& lvl : levels) {
        for (const auto& c : lvl.comps) {
            if (basis.modes.size() == num_modes) break;
            EigenMode m;
            m.index = static_cast<int>(basis.modes.size()) + 1;
            m.omega = lvl.omega;
            m.lambda = lvl.omega * lvl.omega;
            m.per_edge = c;
            basis.modes.push_back(std::move(m));
        }
    }
    detail::assign_groups(basis.modes);
    detail::fill_reports(basis);
    return basis;
}

// Entrywise L² inner products of the first K modes, closed form.
inline Eigen::MatrixXd gram_matrix(const SpectralBasis& basis)
{
    const auto K = static_cast<Eigen::Index>(basis.size());
    Eigen::MatrixXd G(K, K);
    const Polynomial one{1.0};
    for (Eigen::Index j = 0; j < K; ++j) {
        for (Eigen::Index k = j; k < K; ++k) {
            const auto& a = basis.modes[static_cast<std::size_t>(j)];
            const auto& b = basis.modes[static_cast<std::size_t>(k)];
            double s = 0.0;
            for (std::size_t l = 0; l < basis.edge_lengths.size(); ++l) {
                const auto& ca = a.per_edge[l];
                const auto& cb = b.per_edge[l];
                if (ca.amplitude == 0.0 || cb.amplitude == 0.0) continue;
                s += ca.amplitude * cb.amplitude *
                     poly_trig_integral(one, ca.mode, a.omega, cb.mode, b.omega, basis.edge_lengths[l]);
            }
            G(j, k) = G(k, j) = s;
        }
    }
    return G;
}

struct CenterValueReport {
    bool available = false;
    double min_value = 0.0;
    int argmin = 0;
    PowerLawFit fit;
};

struct SpectralValidation {
    WeylReport weyl;
    GapReport gap;
    bool simplicity = true;
    CenterValueReport center_values;
};

inline SpectralValidation validate_spectral_hypotheses(const SpectralBasis& basis, bool has_center = true)
{
    if (basis.size() < 20) throw std::invalid_argument("validate_spectral_hypotheses: need at least 20 modes");
    SpectralValidation v;
    auto b = basis;
    detail::fill_reports(b);
    v.weyl = b.weyl_report;
    v.gap = b.gap_report;
    for (std::size_t i = 1; i < basis.size(); ++i) {
        double a = basis.modes[i - 1].lambda, c = basis.modes[i].lambda;
        if (c - a <= 1e-9 * std::max(std::abs(a), std::abs(c))) v.simplicity = false;
    }
    if (has_center && basis.edge_lengths.size() > 1) {
        v.center_values.available = true;
        std::vector<double> ks, vals;
        v.center_values.min_value = std::numeric_limits<double>::infinity();
        for (const auto& m : basis.modes) {
            double cv = 0.0;
            for (std::size_t l = 0; l < basis.edge_lengths.size(); ++l)
                cv = std::max(cv, std::abs(m.value(l, basis.edge_lengths[l])));
            if (cv < v.center_values.min_value) {
                v.center_values.min_value = cv;
                v.center_values.argmin = m.index;
            }
            ks.push_back(m.index);
            vals.push_back(cv);
        }
        try {
            v.center_values.fit = detail::fit_lower_envelope(ks, vals);
        } catch (const std::invalid_argument&) {
        }
    }
    return v;
}

}  // namespace graphctrl
