#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "graphctrl/spectrum.hpp"
#include "graphctrl/trig_integral.hpp"

namespace graphctrl {

enum class Family { EquilateralStar, TwoEqualEdges, PairedStar, Loops };

inline std::string to_string(Family f)
{
    switch (f) {
    case Family::EquilateralStar: return "EquilateralStar";
    case Family::TwoEqualEdges: return "TwoEqualEdges";
    case Family::PairedStar: return "PairedStar";
    case Family::Loops: return "Loops";
    }
    return "?";
}

class FamilyError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// EquilateralStar: `lengths` holds the N equal edge lengths.
// TwoEqualEdges: `lengths` holds every edge; the first two must agree.
// PairedStar: `lengths` holds one length per pair of edges.
// Loops: `lengths` holds the loop lengths.
struct FamilyParams {
    std::vector<double> lengths;
    std::size_t num_modes = 12;
};

struct SubsystemLabel {
    std::size_t group = 0;  // pair or loop carrying the mode (0-based)
    int m = 0;              // harmonic number within the group
};

struct ExplicitSubsystem {
    Family family = Family::EquilateralStar;
    SpectralBasis basis;                  // the distinguished system (φ_k), (μ_k)
    std::vector<SubsystemLabel> labels;   // one per basis mode
    std::vector<EigenMode> complement;    // equilateral star: degenerate partners vanishing on e1
};

namespace detail {

inline double family_tol(double x) { return 1e-12 * std::max(1.0, std::abs(x)); }

inline ExplicitSubsystem equilateral(const FamilyParams& p)
{
    const std::size_t N = p.lengths.size();
    if (N < 2) throw FamilyError("EquilateralStar needs at least two edges");
    const double L = p.lengths[0];
    for (double l : p.lengths)
        if (std::abs(l - L) > family_tol(L)) throw FamilyError("EquilateralStar requires equal edge lengths");
    const double pi = std::numbers::pi;
    ExplicitSubsystem out;
    out.family = Family::EquilateralStar;
    out.basis.edge_lengths = p.lengths;
    StarData data{p.lengths, std::vector<TrigMode>(N, TrigMode::Sin)};
    std::vector<std::size_t> all(N);
    for (std::size_t l = 0; l < N; ++l) all[l] = l;
    for (std::size_t k = 1; k <= p.num_modes; ++k) {
        EigenMode m;
        m.index = static_cast<int>(k);
        m.omega = static_cast<double>(k) * pi / (2.0 * L);
        m.lambda = m.omega * m.omega;
        if (k % 2 == 1) {
            const double a = std::sqrt(2.0 / (static_cast<double>(N) * L));
            m.per_edge.assign(N, {a, TrigMode::Sin});
        } else {
            auto family = vanishing_basis(data, m.omega, all);
            m.per_edge = family.front();
            for (std::size_t i = 1; i < family.size(); ++i) {
                EigenMode c;
                c.index = static_cast<int>(k);
                c.omega = m.omega;
                c.lambda = m.lambda;
                c.per_edge = family[i];
                out.complement.push_back(std::move(c));
            }
        }
        out.labels.push_back({0, static_cast<int>(k)});
        out.basis.modes.push_back(std::move(m));
    }
    return out;
}

inline ExplicitSubsystem two_equal(const FamilyParams& p)
{
    const std::size_t N = p.lengths.size();
    if (N < 2) throw FamilyError("TwoEqualEdges needs at least two edges");
    const double L = p.lengths[0];
    if (std::abs(p.lengths[1] - L) > family_tol(L)) throw FamilyError("TwoEqualEdges requires L_1 = L_2");
    const double pi = std::numbers::pi;
    ExplicitSubsystem out;
    out.family = Family::TwoEqualEdges;
    out.basis.edge_lengths = p.lengths;
    const double a = 1.0 / std::sqrt(L);
    for (std::size_t k = 1; k <= p.num_modes; ++k) {
        EigenMode m;
        m.index = static_cast<int>(k);
        m.omega = static_cast<double>(k) * pi / L;
        m.lambda = m.omega * m.omega;
        m.per_edge.assign(N, {0.0, TrigMode::Sin});
        m.per_edge[0].amplitude = a;
        m.per_edge[1].amplitude = -a;
        out.labels.push_back({0, static_cast<int>(k)});
        out.basis.modes.push_back(std::move(m));
    }
    return out;
}

// Shared by PairedStar and Loops: merge per-group harmonic ladders by energy.
inline ExplicitSubsystem merged_ladders(const FamilyParams& p, Family fam)
{
    if (p.lengths.empty()) throw FamilyError(to_string(fam) + " needs at least one group");
    for (double l : p.lengths)
        if (!(l > 0.0)) throw FamilyError(to_string(fam) + " requires positive lengths");
    const double pi = std::numbers::pi;
    const bool loops = fam == Family::Loops;
    const std::size_t G = p.lengths.size();
    const std::size_t edges = loops ? G : 2 * G;
    struct Cand {
        double omega;
        std::size_t group;
        int m;
    };
    std::vector<Cand> cands;
    for (std::size_t g = 0; g < G; ++g)
        for (std::size_t m = 1; m <= p.num_modes; ++m)
            cands.push_back({(loops ? 2.0 : 1.0) * static_cast<double>(m) * pi / p.lengths[g], g, static_cast<int>(m)});
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        return a.omega < b.omega || (a.omega == b.omega && a.group < b.group);
    });
    cands.resize(p.num_modes);
    for (std::size_t i = 1; i < cands.size(); ++i)
        if (cands[i].omega - cands[i - 1].omega <= 1e-9 * cands[i].omega)
            throw FamilyError(to_string(fam) + ": coincident levels; lengths violate the family hypothesis");
    ExplicitSubsystem out;
    out.family = fam;
    for (std::size_t g = 0; g < G; ++g) {
        out.basis.edge_lengths.push_back(p.lengths[g]);
        if (!loops) out.basis.edge_lengths.push_back(p.lengths[g]);
    }
    for (std::size_t i = 0; i < cands.size(); ++i) {
        const auto& c = cands[i];
        EigenMode m;
        m.index = static_cast<int>(i + 1);
        m.omega = c.omega;
        m.lambda = c.omega * c.omega;
        m.per_edge.assign(edges, {0.0, TrigMode::Sin});
        const double Lg = p.lengths[c.group];
        if (loops) {
            m.per_edge[c.group].amplitude = std::sqrt(2.0 / Lg);
        } else {
            m.per_edge[2 * c.group].amplitude = 1.0 / std::sqrt(Lg);
            m.per_edge[2 * c.group + 1].amplitude = -1.0 / std::sqrt(Lg);
        }
        out.labels.push_back({c.group, c.m});
        out.basis.modes.push_back(std::move(m));
    }
    return out;
}

}  // namespace detail

inline ExplicitSubsystem explicit_subsystem(Family family, const FamilyParams& params)
{
    if (params.num_modes < 1) throw FamilyError("num_modes must be >= 1");
    ExplicitSubsystem out;
    switch (family) {
    case Family::EquilateralStar: out = detail::equilateral(params); break;
    case Family::TwoEqualEdges: out = detail::two_equal(params); break;
    case Family::PairedStar: out = detail::merged_ladders(params, Family::PairedStar); break;
    case Family::Loops: out = detail::merged_ladders(params, Family::Loops); break;
    }
    detail::fill_reports(out.basis);
    return out;
}

// Matrix elements of the exchange operators that accompany the TwoEqualEdges,
// PairedStar and Loops families, in closed form on the subsystem basis.
inline double exchange_matrix_element(const ExplicitSubsystem& sub, std::size_t j, std::size_t k)
{
    const double pi = std::numbers::pi;
    if (j > k) std::swap(j, k);
    const auto& lj = sub.labels.at(j);
    const auto& lk = sub.labels.at(k);
    switch (sub.family) {
    case Family::TwoEqualEdges: {
        const double L = sub.basis.edge_lengths[0];
        const auto& a = sub.basis.modes[j];
        const auto& b = sub.basis.modes[k];
        return 4.0 / L * poly_trig_integral(Polynomial{0.0, 0.0, 1.0}, TrigMode::Sin, a.omega, TrigMode::Sin, b.omega, L);
    }
    case Family::PairedStar: {
        const auto& L = sub.basis.edge_lengths;
        double scale = 4.0 * L[2 * lj.group] * L[2 * lk.group];
        return scale * poly_trig_integral(Polynomial{0.0, 0.0, 1.0}, TrigMode::Sin, lj.m * pi, TrigMode::Sin, lk.m * pi, 1.0);
    }
    case Family::Loops: {
        const auto& L = sub.basis.edge_lengths;
        double scale = 2.0 * L[lj.group] * L[lk.group];
        return scale * poly_trig_integral(Polynomial{0.0, 0.0, -1.0, 1.0}, TrigMode::Sin, 2.0 * lj.m * pi, TrigMode::Sin,
                                          2.0 * lk.m * pi, 1.0);
    }
    case Family::EquilateralStar: break;
    }
    throw FamilyError("EquilateralStar couples through a local potential; use a ControlOperator");
}

}  // namespace graphctrl
