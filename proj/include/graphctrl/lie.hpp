#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "graphctrl/dynamics.hpp"

namespace graphctrl {

// Skew-Hermitian generator with entry e^{iθ} at (j, k) and -e^{-iθ} at (k, j).
struct RotationGenerator {
    std::size_t j = 0;
    std::size_t k = 0;
    double theta = 0.0;

    Eigen::MatrixXcd matrix(std::size_t n) const
    {
        Eigen::MatrixXcd E = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        E(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = std::polar(1.0, theta);
        E(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = -std::polar(1.0, -theta);
        return E;
    }
};

struct LieClosureReport {
    std::size_t N1 = 0;
    std::vector<std::pair<std::size_t, std::size_t>> admissible_pairs;  // 0-based, j < k
    std::vector<RotationGenerator> generators;
    std::size_t reached_dimension = 0;
    std::size_t target_dimension = 0;
    bool generated = false;
    bool coupling_graph_connected = false;
    std::vector<std::size_t> dimension_history;  // real dimension after each bracket sweep
};

// Pairs with nonzero coupling whose transition frequency is not shared by any other coupled pair.
inline std::vector<std::pair<std::size_t, std::size_t>> admissible_pairs(const GalerkinSystem& sys, double resonance_tol = 1e-8)
{
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto& p : coupled_transitions(sys)) {
        if (p.j == p.k) continue;
        if (colliding_transitions(sys, p.j, p.k, resonance_tol).empty()) out.emplace_back(p.j, p.k);
    }
    return out;
}

namespace detail {

// Orthonormal basis of a real subspace of skew-Hermitian matrices, stored as real vectors.
class RealSpan {
public:
    explicit RealSpan(std::size_t n) : n_(n) {}

    // Adds X if it is independent of the span; returns true on growth.
    bool add(const Eigen::MatrixXcd& X)
    {
        Eigen::VectorXd v(2 * X.size());
        v << X.real().reshaped(), X.imag().reshaped();
        const double norm0 = v.norm();
        if (norm0 == 0.0) return false;
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& q : basis_) v -= q.dot(v) * q;
        if (v.norm() <= 1e-9 * norm0) return false;
        v.normalize();
        basis_.push_back(v);
        const auto m = static_cast<Eigen::Index>(n_ * n_);
        Eigen::MatrixXcd M(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
        M.real() = v.head(m).reshaped(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
        M.imag() = v.tail(m).reshaped(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
        matrices_.push_back(std::move(M));
        return true;
    }

    std::size_t dimension() const { return basis_.size(); }
    const Eigen::MatrixXcd& element(std::size_t i) const { return matrices_[i]; }

private:
    std::size_t n_;
    std::vector<Eigen::VectorXd> basis_;
    std::vector<Eigen::MatrixXcd> matrices_;
};

inline bool connected(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges)
{
    std::vector<std::size_t> parent(n);
    for (std::size_t i = 0; i < n; ++i) parent[i] = i;
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& [a, b] : edges) parent[find(a)] = find(b);
    for (std::size_t i = 1; i < n; ++i)
        if (find(i) != find(0)) return false;
    return true;
}

}  // namespace detail

// Real dimension of the Lie algebra generated by E^0 and E^{π/2} over the admissible pairs.
inline LieClosureReport lie_closure(const GalerkinSystem& sys, double resonance_tol = 1e-8)
{
    const std::size_t n = sys.dimension();
    if (n > 12) throw std::invalid_argument("lie_closure: dimension above 12");
    LieClosureReport rep;
    rep.N1 = n;
    rep.target_dimension = n * n - 1;
    rep.admissible_pairs = admissible_pairs(sys, resonance_tol);
    rep.coupling_graph_connected = n == 1 || detail::connected(n, rep.admissible_pairs);
    std::vector<Eigen::MatrixXcd> seeds;
    for (const auto& [j, k] : rep.admissible_pairs)
        for (double theta : {0.0, 0.5 * std::numbers::pi}) {
            rep.generators.push_back({j, k, theta});
            seeds.push_back(rep.generators.back().matrix(n));
        }
    detail::RealSpan span(n);
    for (const auto& E : seeds) span.add(E);
    rep.dimension_history.push_back(span.dimension());
    std::size_t fresh_begin = 0;
    while (span.dimension() < rep.target_dimension) {
        const std::size_t fresh_end = span.dimension();
        for (const auto& E : seeds)
            for (std::size_t i = fresh_begin; i < fresh_end; ++i) {
                const auto& X = span.element(i);
                span.add(E * X - X * E);
            }
        fresh_begin = fresh_end;
        rep.dimension_history.push_back(span.dimension());
        if (span.dimension() == fresh_end) break;
    }
    rep.reached_dimension = span.dimension();
    rep.generated = n > 1 && rep.reached_dimension == rep.target_dimension;
    return rep;
}

}  // namespace graphctrl
