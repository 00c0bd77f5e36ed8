#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "graphctrl/bfield.hpp"
#include "graphctrl/families.hpp"

using namespace graphctrl;
using boost::math::quadrature::gauss_kronrod;

namespace {

const double pi = std::numbers::pi;

std::vector<double> thm14_lengths() { return {1.0, std::sqrt(2.0), std::sqrt(3.0), std::sqrt(5.0), std::sqrt(7.0)}; }

const SpectralBasis& thm14_basis()
{
    static const SpectralBasis b = solve_spectrum(MetricGraph::star(thm14_lengths(), BoundaryCondition::Neumann), 220, 0.005);
    return b;
}

double oracle_element(const ControlOperator& B, const SpectralBasis& basis, std::size_t j, std::size_t k)
{
    double acc = 0.0;
    for (std::size_t l = 0; l < basis.edge_lengths.size(); ++l) {
        const auto& P = B.per_edge_potential[l];
        if (P.is_zero()) continue;
        auto f = [&](double x) { return P(x) * basis[j].value(l, x) * basis[k].value(l, x); };
        acc += gauss_kronrod<double, 61>::integrate(f, 0.0, basis.edge_lengths[l], 15, 1e-14);
    }
    return acc;
}

std::vector<ResonantQuadruple> brute_force_resonances(const std::vector<double>& mu, double tol)
{
    std::vector<ResonantQuadruple> out;
    const int K = static_cast<int>(mu.size());
    for (int j = 0; j < K; ++j)
        for (int k = j + 1; k < K; ++k)
            for (int l = 0; l < K; ++l)
                for (int m = l + 1; m < K; ++m) {
                    auto p = std::pair(j + 1, k + 1), q = std::pair(l + 1, m + 1);
                    if (!(p < q)) continue;
                    if (std::abs(mu[j] - mu[k] - mu[l] + mu[m]) < tol) out.push_back({p, q, 0.0, 0.0});
                }
    return out;
}

}  // namespace

TEST(BField, EquilateralDiagonalElementMatchesQuadrature)
{
    auto sub = explicit_subsystem(Family::EquilateralStar, {{1.0, 1.0, 1.0}, 4});
    auto B = ControlOperator::quadratic_at_center(1.0, 3);
    double want = (2.0 / 3.0) * gauss_kronrod<double, 61>::integrate(
                                    [](double x) { return (x - 1) * (x - 1) * std::pow(std::sin(pi * x / 2), 2); }, 0.0, 1.0);
    EXPECT_NEAR(matrix_element(B, sub.basis, 0, 0), want, 1e-14);
}

TEST(BField, ConstantPotentialIsDiagonal)
{
    auto basis = solve_spectrum(MetricGraph::interval(1.0, BoundaryCondition::Dirichlet, BoundaryCondition::Dirichlet), 5, 0.01);
    ControlOperator B{{Polynomial{1.0}}, "1"};
    EXPECT_NEAR(matrix_element(B, basis, 0, 1), 0.0, 1e-15);
    EXPECT_NEAR(matrix_element(B, basis, 2, 2), 1.0, 1e-13);
}

TEST(BField, ElementsMatchQuadratureOnGenericStar)
{
    const auto& basis = thm14_basis();
    auto B = ControlOperator::sextic_neumann(1.0, 5);
    for (std::size_t j : {0u, 1u, 4u, 17u})
        for (std::size_t k : {0u, 3u, 9u, 40u}) EXPECT_NEAR(matrix_element(B, basis, j, k), oracle_element(B, basis, j, k), 1e-12);
    auto B3 = ControlOperator::quartic_at_center(1.0, 5);
    EXPECT_NEAR(matrix_element(B3, basis, 2, 7), oracle_element(B3, basis, 2, 7), 1e-12);
}

TEST(BField, CouplingMatrixIsExactlySymmetricAndThreadInvariant)
{
    auto basis = thm14_basis();
    basis.modes.resize(60);
    auto B = ControlOperator::sextic_neumann(1.0, 5);
    auto M1 = coupling_matrix(B, basis, 1);
    auto M4 = coupling_matrix(B, basis, 4);
    EXPECT_TRUE(M1 == M1.transpose());
    EXPECT_TRUE(M1 == M4);
}

TEST(BField, SexticElementsFollowFourthPowerAsymptotic)
{
    const auto& basis = thm14_basis();
    auto B = ControlOperator::sextic_neumann(1.0, 5);
    const double a1 = basis[1].per_edge[0].amplitude;
    const double w1 = basis[1].omega;
    for (std::size_t k : {150u, 180u, 210u}) {
        const auto& m = basis[k];
        if (std::abs(m.per_edge[0].amplitude) < 0.2) continue;
        double lead = -120.0 * a1 * m.per_edge[0].amplitude *
                      (std::pow(m.omega + w1, -4.0) + std::pow(m.omega - w1, -4.0));
        EXPECT_NEAR(matrix_element(B, basis, 1, k) / lead, 1.0, 0.02) << k;
    }
}

TEST(BField, QuadraticDecayExponentNearMinusThree)
{
    // (x-L)^2 on e1 with Dirichlet ends: the two P'(0) boundary terms cancel to order 1/k^3.
    auto basis = solve_spectrum(MetricGraph::star({1.0, std::sqrt(2.0), std::sqrt(3.0)}, BoundaryCondition::Dirichlet), 150, 0.005);
    auto rep = check_assumption_I(ControlOperator::quadratic_at_center(1.0, 3), basis, 150);
    EXPECT_NEAR(rep.eta_fit.exponent, -3.0, 0.35);
    EXPECT_TRUE(rep.zero_elements.empty());
}

TEST(BField, DecayFitStableUnderDoubling)
{
    auto L = thm14_lengths();
    auto basis = solve_spectrum(MetricGraph::star(L, BoundaryCondition::Dirichlet), 200, 0.005);
    auto B = ControlOperator::quartic_at_center(1.0, 5);
    auto r100 = check_assumption_I(B, basis, 100);
    auto r200 = check_assumption_I(B, basis, 200);
    EXPECT_LT(std::abs(r100.eta_fit.exponent - r200.eta_fit.exponent), 0.15);
    EXPECT_EQ(r200.fit_lo, 66);
    EXPECT_EQ(r200.fit_hi, 200);

    auto eq = explicit_subsystem(Family::EquilateralStar, {{1.0, 1.0, 1.0}, 200}).basis;
    auto Bq = ControlOperator::quadratic_at_center(1.0, 3);
    auto e100 = check_assumption_I(Bq, eq, 100);
    auto e200 = check_assumption_I(Bq, eq, 200);
    EXPECT_LT(std::abs(e100.eta_fit.exponent - e200.eta_fit.exponent), 0.15);
    EXPECT_NEAR(e200.eta_fit.exponent, -3.0, 0.1);
}

TEST(BField, SexticDecayFasterThanQuartic)
{
    AssumptionIOptions opt;
    opt.fit_lo = 30;
    opt.fit_hi = 120;
    auto rep = check_assumption_I(ControlOperator::sextic_neumann(1.0, 5), thm14_basis(), 120, opt);
    EXPECT_LT(rep.eta_fit.exponent, -3.5);
    EXPECT_GT(rep.eta_fit.exponent, -5.6);
    EXPECT_TRUE(rep.zero_elements.empty());
}

TEST(BField, EquilateralExactResonancesMatchBruteForce)
{
    // μ_k ∝ k² on the equilateral subsystem.
    std::vector<long long> levels;
    std::vector<double> mu;
    for (long long k = 1; k <= 12; ++k) {
        levels.push_back(k * k);
        mu.push_back(static_cast<double>(k * k) * pi * pi / 4.0);
    }
    auto exact = find_resonances_exact(levels, {});
    auto brute = brute_force_resonances(mu, 1e-9);
    ASSERT_EQ(exact.size(), brute.size());
    for (std::size_t i = 0; i < exact.size(); ++i) {
        EXPECT_EQ(exact[i].first, brute[i].first);
        EXPECT_EQ(exact[i].second, brute[i].second);
    }
    EXPECT_FALSE(exact.empty());
    auto fast = find_resonances(mu, {}, 1e-10 * mu.back());
    EXPECT_EQ(fast.size(), exact.size());
}

TEST(BField, GenericStarResonanceSearchMatchesBruteForce)
{
    const auto& basis = thm14_basis();
    std::vector<double> mu;
    for (std::size_t k = 0; k < 12; ++k) mu.push_back(basis[k].lambda);
    for (double tol : {1e-10, 1e-2, 0.3}) {
        auto fast = find_resonances(mu, {}, tol);
        auto brute = brute_force_resonances(mu, tol);
        ASSERT_EQ(fast.size(), brute.size()) << tol;
        for (std::size_t i = 0; i < fast.size(); ++i) {
            EXPECT_EQ(fast[i].first, brute[i].first);
            EXPECT_EQ(fast[i].second, brute[i].second);
        }
    }
}

TEST(BField, IntervalHasNoResonanceAmongFirstFourModes)
{
    auto basis = solve_spectrum(MetricGraph::interval(1.0, BoundaryCondition::Dirichlet, BoundaryCondition::Dirichlet), 40, 0.01);
    ControlOperator B{{Polynomial{0.0, 1.0}}, "x"};
    auto rep = check_assumption_I(B, basis, 40);
    for (const auto& q : rep.resonant_quadruples) EXPECT_GT(q.second.second, 4) << q.first.first << q.first.second;
    // Integer spectrum: exact mode agrees with the floating search.
    AssumptionIOptions opt;
    for (long long k = 1; k <= 40; ++k) opt.integer_levels.push_back(k * k);
    auto rep_exact = check_assumption_I(B, basis, 40, opt);
    EXPECT_EQ(rep_exact.resonant_quadruples.size(), rep.resonant_quadruples.size());
    // x couples only opposite-parity modes on the symmetric interval.
    EXPECT_FALSE(rep.zero_elements.empty());
    EXPECT_EQ(rep.zero_elements.front(), 3);
}

TEST(BField, DiagonalCombinationReported)
{
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(30, 30);
    std::vector<double> mu;
    for (int k = 1; k <= 30; ++k) {
        mu.push_back(k * k);
        M(k - 1, k - 1) = 1.0 / k;
        M(k - 1, 0) = M(0, k - 1) = std::pow(k, -3.0);
    }
    auto rep = check_assumption_I(M, mu);
    ASSERT_FALSE(rep.resonant_quadruples.empty());
    const auto& q = rep.resonant_quadruples.front();
    double want = std::abs(1.0 / q.first.first - 1.0 / q.first.second - 1.0 / q.second.first + 1.0 / q.second.second);
    EXPECT_DOUBLE_EQ(q.diagonal_combination, want);
    EXPECT_NEAR(rep.eta_fit.exponent, -3.0, 1e-12);
}

TEST(AssumptionII, SexticCertifiedOnNeumannStar)
{
    auto g = MetricGraph::star(thm14_lengths(), BoundaryCondition::Neumann);
    auto rep = check_assumption_II(ControlOperator::sextic_neumann(1.0, 5), g, &thm14_basis(), 100);
    EXPECT_TRUE(rep.preserves_H2G);
    EXPECT_EQ(rep.regime, "N");
    EXPECT_EQ(rep.center_vanishing_order, 5);
    ASSERT_TRUE(rep.certified_d.has_value());
    EXPECT_EQ(*rep.certified_d, 3.5);
    for (const auto& c : rep.vertex_conditions) EXPECT_TRUE(c.satisfied) << c.condition;
    EXPECT_LT(rep.max_mode_residual, 1e-10);
}

TEST(AssumptionII, QuarticCertifiedOnDirichletStar)
{
    auto g = MetricGraph::star(thm14_lengths(), BoundaryCondition::Dirichlet);
    auto B = ControlOperator::quartic_at_center(1.0, 5);
    auto rep = check_assumption_II(B, g);
    EXPECT_TRUE(rep.preserves_H2G);
    EXPECT_EQ(rep.center_vanishing_order, 4);
    EXPECT_EQ(*rep.certified_d, 2.5);
    // The same potential breaks the Neumann condition at the external vertex.
    auto gn = MetricGraph::star(thm14_lengths(), BoundaryCondition::Neumann);
    EXPECT_FALSE(check_assumption_II(B, gn).preserves_H2G);
}

TEST(AssumptionII, ConstantPotentialFails)
{
    auto g = MetricGraph::star({1.0, 2.0, 3.0}, BoundaryCondition::Dirichlet);
    auto rep = check_assumption_II(ControlOperator::on_first_edge(Polynomial{1.0}, 3, "1"), g);
    EXPECT_FALSE(rep.preserves_H2G);
    EXPECT_FALSE(rep.certified_d.has_value());
    bool continuity_failed = false;
    for (const auto& c : rep.vertex_conditions)
        if (c.condition.find("continuity") != std::string::npos) continuity_failed = !c.satisfied;
    EXPECT_TRUE(continuity_failed);
}

TEST(AssumptionII, MixedRegimeCapsCertifiedShift)
{
    auto g = MetricGraph::star({1.0, 2.0}, {BoundaryCondition::Dirichlet, BoundaryCondition::Neumann});
    auto rep = check_assumption_II(ControlOperator::quartic_at_center(1.0, 2), g);
    EXPECT_EQ(rep.regime, "D/N");
    EXPECT_EQ(*rep.certified_d, 1.5);
}

TEST(AssumptionII, EqualValuesAcrossEdgesPreserveDomain)
{
    // P_l(L_l) = 1 on every edge with vanishing derivative sum.
    auto g = MetricGraph::star({1.0, 1.0}, BoundaryCondition::Dirichlet);
    ControlOperator B{{Polynomial{1.0}, Polynomial{1.0}}, "1 everywhere"};
    auto rep = check_assumption_II(B, g);
    EXPECT_TRUE(rep.preserves_H2G);
    EXPECT_EQ(rep.center_vanishing_order, 0);
    EXPECT_EQ(*rep.certified_d, 0.5);
}
