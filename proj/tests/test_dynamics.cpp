#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "graphctrl/dynamics.hpp"

using namespace graphctrl;
using boost::math::quadrature::gauss_kronrod;

namespace {

const double pi = std::numbers::pi;

GalerkinSystem two_level()
{
    Eigen::VectorXd l(2);
    l << 0.0, 1.0;
    Eigen::MatrixXd B(2, 2);
    B << 0.0, 1.0, 1.0, 0.0;
    return {l, B};
}

GalerkinSystem equilateral_system(std::size_t K)
{
    auto sub = explicit_subsystem(Family::EquilateralStar, {{1.0, 1.0, 1.0}, K});
    return GalerkinSystem::from_basis(ControlOperator::quadratic_at_center(1.0, 3), sub.basis);
}

Eigen::VectorXcd unit(std::size_t K, std::size_t i)
{
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(K));
    v(static_cast<Eigen::Index>(i)) = 1.0;
    return v;
}

Eigen::VectorXcd random_state(std::size_t K, std::mt19937_64& rng)
{
    std::normal_distribution<double> g;
    Eigen::VectorXcd v(static_cast<Eigen::Index>(K));
    for (auto& c : v) c = {g(rng), g(rng)};
    return v.normalized();
}

// Scaled-and-squared Taylor exponential of -i dt H.
Eigen::MatrixXcd expm_taylor(const Eigen::MatrixXd& H, double dt)
{
    const Eigen::MatrixXcd A = cplx(0.0, -dt) * H.cast<cplx>();
    int s = std::max(0, static_cast<int>(std::ceil(std::log2(std::max(1.0, A.cwiseAbs().rowwise().sum().maxCoeff())))) + 4);
    const Eigen::MatrixXcd X = A / std::pow(2.0, s);
    Eigen::MatrixXcd term = Eigen::MatrixXcd::Identity(H.rows(), H.cols()), acc = term;
    for (int n = 1; n < 30; ++n) {
        term = term * X / static_cast<double>(n);
        acc += term;
    }
    for (int i = 0; i < s; ++i) acc = acc * acc;
    return acc;
}

// Classical RK4 on i c' = (Lambda + u(t) B) c with a fixed step.
Eigen::VectorXcd rk4(const GalerkinSystem& sys, Eigen::VectorXcd c, const ControlSignal& u, std::size_t n)
{
    const double T = u.horizon(), h = T / static_cast<double>(n);
    auto f = [&](double t, const Eigen::VectorXcd& y) -> Eigen::VectorXcd {
        Eigen::VectorXcd Hy = (sys.B * u(t)).cast<cplx>() * y;
        Hy += (sys.lambda.cast<cplx>().array() * y.array()).matrix();
        return cplx(0.0, -1.0) * Hy;
    };
    for (std::size_t i = 0; i < n; ++i) {
        const double t = h * static_cast<double>(i);
        auto k1 = f(t, c);
        auto k2 = f(t + h / 2, c + h / 2 * k1);
        auto k3 = f(t + h / 2, c + h / 2 * k2);
        auto k4 = f(t + h, c + h * k3);
        c += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    return c;
}

ControlSignal random_trig(std::mt19937_64& rng, double T, double amp)
{
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<DictionaryAtom> atoms;
    std::vector<double> coeffs;
    for (double w : {0.0, 1.3, 2.9, 7.1}) {
        atoms.push_back({w, false});
        coeffs.push_back(amp * U(rng));
        if (w > 0.0) {
            atoms.push_back({w, true});
            coeffs.push_back(amp * U(rng));
        }
    }
    return ControlSignal::trig(atoms, coeffs, T);
}

}  // namespace

TEST(Propagate, FreeEvolutionIsDiagonal)
{
    std::mt19937_64 rng(3);
    auto sys = equilateral_system(8);
    auto psi0 = random_state(8, rng);
    const double T = 2.7;
    auto tr = propagate(sys, psi0, ControlSignal::zero(T));
    for (Eigen::Index k = 0; k < 8; ++k)
        EXPECT_LT(std::abs(tr.final_state()(k) - std::polar(1.0, -sys.lambda(k) * T) * psi0(k)), 1e-14);
}

TEST(Propagate, UnitaryForRandomControls)
{
    std::mt19937_64 rng(11);
    auto sys = equilateral_system(10);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    for (int trial = 0; trial < 5; ++trial) {
        auto psi0 = random_state(10, rng);
        std::vector<double> s(400);
        for (auto& v : s) v = U(rng);
        auto a = propagate(sys, psi0, ControlSignal::piecewise_constant(s, 0.01));
        auto b = propagate(sys, psi0, random_trig(rng, 5.0, 1.0));
        EXPECT_LT(a.norm_drift, 1e-10);
        EXPECT_LT(b.norm_drift, 1e-10);
        EXPECT_LT(std::abs(b.final_state().norm() - 1.0), 1e-10);
    }
}

TEST(Propagate, PiecewiseConstantStepsAreExact)
{
    std::mt19937_64 rng(5);
    auto sys = equilateral_system(5);
    std::vector<double> s{0.7, -1.3, 2.1};
    const double dt = 0.4;
    auto psi0 = random_state(5, rng);
    auto tr = propagate(sys, psi0, ControlSignal::piecewise_constant(s, dt));
    ASSERT_EQ(tr.steps(), 3u);
    Eigen::VectorXcd want = psi0;
    for (double v : s) {
        Eigen::MatrixXd H = v * sys.B;
        H.diagonal() += sys.lambda;
        want = expm_taylor(H, dt) * want;
    }
    EXPECT_LT((tr.final_state() - want).norm(), 1e-12);
}

TEST(Propagate, RabiProfileAndDenseReference)
{
    auto sys = two_level();
    const double eps = 0.01;
    auto u = ControlSignal::resonant(eps, 1.0, pi / eps);
    PropagateOptions opt;
    opt.record_stride = 50;
    auto tr = propagate(sys, unit(2, 0), u, opt);
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        const double want = std::pow(std::sin(eps * tr.times[i] / 2), 2);
        EXPECT_NEAR(std::norm(tr.states[i](1)), want, 2 * eps);
    }
    auto ref = rk4(sys, unit(2, 0), u, 10 * tr.steps());
    EXPECT_NEAR(std::norm(tr.final_state()(1)), std::norm(ref(1)), 1e-4);
    EXPECT_LT((tr.final_state() - ref).norm(), 5e-3);
    opt.commutator_tol = 1e-6;
    opt.max_step = 2 * pi / 320;
    auto fine = propagate(sys, unit(2, 0), u, opt);
    EXPECT_LT((fine.final_state() - ref).norm(), 1e-4);
    EXPECT_GT(std::norm(tr.final_state()(1)), 1 - 2 * eps);
}

TEST(Propagate, MidpointRuleIsSecondOrder)
{
    std::mt19937_64 rng(8);
    auto sys = equilateral_system(4);
    auto u = random_trig(rng, 2.0, 2.0);
    auto psi0 = unit(4, 0);
    auto ref = rk4(sys, psi0, u, 200000);
    std::vector<double> err;
    for (double h : {0.02, 0.01, 0.005}) {
        PropagateOptions opt;
        opt.max_step = h;
        opt.commutator_tol = 1e300;
        err.push_back((propagate(sys, psi0, u, opt).final_state() - ref).norm());
    }
    EXPECT_NEAR(err[0] / err[1], 4.0, 0.3);
    EXPECT_NEAR(err[1] / err[2], 4.0, 0.3);
}

TEST(Propagate, AdaptiveStepShrinksWithAmplitude)
{
    auto sys = equilateral_system(6);
    auto small = propagate(sys, unit(6, 0), ControlSignal::resonant(0.01, 3.0, 4.0));
    auto large = propagate(sys, unit(6, 0), ControlSignal::resonant(10.0, 3.0, 4.0));
    EXPECT_GT(large.steps(), small.steps());
    PropagateOptions opt;
    opt.min_step = 1e-3;
    opt.commutator_tol = 1e-8;
    EXPECT_THROW(propagate(sys, unit(6, 0), ControlSignal::resonant(1e4, 3.0, 1.0), opt), DynamicsError);
}

TEST(Propagate, TimeReversalReturnsInitialState)
{
    std::mt19937_64 rng(21);
    auto sys = equilateral_system(8);
    for (int trial = 0; trial < 3; ++trial) {
        auto psi0 = random_state(8, rng);
        auto u = random_trig(rng, 6.0, 1.5);
        auto tr = propagate(sys, psi0, u);
        auto back = propagate_reversed(sys, tr.final_state(), u, tr.step_times);
        EXPECT_LT((back - psi0).norm(), 1e-9);
    }
}

TEST(Propagate, RejectsBadInput)
{
    auto sys = two_level();
    Eigen::VectorXcd bad(2);
    bad << 1.0, 0.1;
    EXPECT_THROW(propagate(sys, bad, ControlSignal::zero(1.0)), std::invalid_argument);
    EXPECT_THROW(propagate(sys, unit(3, 0), ControlSignal::zero(1.0)), std::invalid_argument);
    Eigen::VectorXd l(2);
    l << 1.0, 0.0;
    EXPECT_THROW(GalerkinSystem(l, Eigen::MatrixXd::Zero(2, 2)), std::invalid_argument);
    Eigen::MatrixXd B(2, 2);
    B << 0.0, 1.0, 0.5, 0.0;
    EXPECT_THROW(GalerkinSystem(Eigen::VectorXd::Zero(2), B), std::invalid_argument);
    EXPECT_THROW(ControlSignal::piecewise_constant({}, 0.1), std::invalid_argument);
}

TEST(Linearized, ZeroControlAndLinearity)
{
    std::mt19937_64 rng(4);
    auto sys = equilateral_system(6);
    EXPECT_EQ(linearized_response(sys, ControlSignal::zero(3.0)).norm(), 0.0);
    auto u = random_trig(rng, 3.0, 1.0);
    auto g = linearized_response(sys, u);
    auto g2 = linearized_response(sys, u.scaled(2.0));
    auto gh = linearized_response(sys, u.scaled(0.5));
    for (Eigen::Index k = 0; k < 6; ++k) {
        EXPECT_EQ(g2(k), 2.0 * g(k));
        EXPECT_EQ(gh(k), 0.5 * g(k));
    }
}

TEST(Linearized, MomentsMatchQuadrature)
{
    std::mt19937_64 rng(9);
    auto u = random_trig(rng, 4.0, 1.0);
    std::vector<double> s{0.3, -0.2, 1.1, 0.0, 0.7};
    auto pc = ControlSignal::piecewise_constant(s, 0.8);
    for (double nu : {0.0, 1.3, 5.5, 40.0}) {
        for (const auto* sig : {&u, &pc}) {
            auto re = [&](double t) { return (*sig)(t) * std::cos(nu * t); };
            auto im = [&](double t) { return (*sig)(t) * std::sin(nu * t); };
            double want_re = 0.0, want_im = 0.0;
            if (sig == &pc) {
                for (std::size_t i = 0; i < s.size(); ++i) {
                    want_re += gauss_kronrod<double, 61>::integrate(re, 0.8 * i, 0.8 * (i + 1), 10, 1e-14);
                    want_im += gauss_kronrod<double, 61>::integrate(im, 0.8 * i, 0.8 * (i + 1), 10, 1e-14);
                }
            } else {
                want_re = gauss_kronrod<double, 61>::integrate(re, 0.0, 4.0, 15, 1e-14);
                want_im = gauss_kronrod<double, 61>::integrate(im, 0.0, 4.0, 15, 1e-14);
            }
            auto got = sig->moment(nu);
            EXPECT_NEAR(got.real(), want_re, 1e-12);
            EXPECT_NEAR(got.imag(), want_im, 1e-12);
        }
    }
    auto r = ControlSignal::resonant(0.3, 2.0, 5.0);
    double want = gauss_kronrod<double, 61>::integrate([](double t) { return 0.3 * std::cos(2.0 * t) * std::cos(2.0 * t); }, 0.0, 5.0, 10, 1e-14);
    EXPECT_NEAR(r.moment(2.0).real(), want, 1e-13);
}

TEST(Linearized, ComposesWithMomentSolver)
{
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    auto sys = equilateral_system(6);
    std::vector<double> lambda(sys.lambda.data(), sys.lambda.data() + 6);
    std::vector<cplx> x(6);
    x[0] = U(rng);
    for (std::size_t k = 1; k < 6; ++k) x[k] = {U(rng), U(rng)};
    auto sol = solve_moment(lambda, x, 3.0);
    auto g = linearized_response(sys, ControlSignal::from_moment(sol));
    for (Eigen::Index k = 0; k < 6; ++k)
        EXPECT_LT(std::abs(g(k) - cplx(0.0, -1.0) * x[static_cast<std::size_t>(k)] * sys.B(k, 0)), 1e-8);
}

TEST(Linearized, RemainderIsQuadratic)
{
    std::mt19937_64 rng(2);
    auto sys = equilateral_system(6);
    auto base = random_trig(rng, 2.0, 1.0).sampled(4000);
    const auto T = base.horizon();
    std::vector<double> err;
    for (double c : {0.1, 0.05, 0.025}) {
        auto u = base.scaled(c);
        auto psi = propagate(sys, unit(6, 0), u).final_state();
        Eigen::VectorXcd lin = unit(6, 0) + linearized_response(sys, u);
        err.push_back((psi - free_evolution(sys, lin, T)).norm());
    }
    EXPECT_GT(err[0] / err[1], 3.5);
    EXPECT_LT(err[0] / err[1], 4.5);
    EXPECT_GT(err[1] / err[2], 3.5);
    EXPECT_LT(err[1] / err[2], 4.5);
}

TEST(Resonant, TwoLevelTransfer)
{
    auto sys = two_level();
    auto r = resonant_transfer(sys, 0, 1, 0.005);
    EXPECT_GT(r.fidelity, 0.99);
    EXPECT_NEAR(r.control.horizon(), pi / 0.005, 1e-9);
    EXPECT_LT(r.norm_drift, 1e-10);
    auto strong = resonant_transfer(sys, 0, 1, 0.2);
    EXPECT_LE(strong.fidelity, 1.0 + 1e-12);
    auto same = resonant_transfer(sys, 1, 1, 0.01);
    EXPECT_EQ(same.fidelity, 1.0);
    EXPECT_EQ(same.control.horizon(), 0.0);
}

TEST(Resonant, DegenerateTransitionListsCollisions)
{
    Eigen::VectorXd l(3);
    l << 0.0, 1.0, 2.0;
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(3, 3);
    B(0, 1) = B(1, 0) = 1.0;
    B(1, 2) = B(2, 1) = 0.5;
    GalerkinSystem sys(l, B);
    try {
        resonant_pulse(sys, 0, 1, 0.01);
        FAIL() << "expected a degenerate-transition error";
    } catch (const DynamicsError& e) {
        EXPECT_NE(std::string(e.what()).find("(2,3)"), std::string::npos);
    }
    EXPECT_THROW(resonant_pulse(sys, 0, 2, 0.01), DynamicsError);
}

TEST(Energetic, EquilateralStarTransfer)
{
    auto sub = explicit_subsystem(Family::EquilateralStar, {{1.0, 1.0, 1.0}, 12});
    std::vector<std::pair<std::size_t, std::size_t>> path{{0, 1}};
    EXPECT_EQ(default_truncation(path), 6u);
    auto rep = energetic_demo(sub, ControlOperator::quadratic_at_center(1.0, 3), path, 0.01);
    EXPECT_GT(rep.fidelity, 0.98);
    EXPECT_LT(rep.subsystem_leakage, 1e-12);
    EXPECT_LT(rep.invariance_defect, 1e-12);
    EXPECT_LT(rep.boundary_population, 1e-6);
    EXPECT_LT(rep.norm_drift, 1e-10);
    EXPECT_EQ(rep.truncation, 12u);
}

TEST(Energetic, TwoEqualEdgesSequentialPulses)
{
    auto sub = explicit_subsystem(Family::TwoEqualEdges, {{1.0, 1.0, std::sqrt(2.0)}, 9});
    std::vector<std::pair<std::size_t, std::size_t>> path{{0, 1}, {1, 2}};
    auto rep = energetic_demo(sub, path, 0.01);
    EXPECT_GT(rep.fidelity, 0.95);
    ASSERT_EQ(rep.steps.size(), 2u);
    EXPECT_NEAR(rep.steps[0].frequency, 3 * pi * pi, 1e-9);
    EXPECT_NEAR(rep.steps[1].frequency, 5 * pi * pi, 1e-9);
}

TEST(Energetic, RejectsOperatorThatMixesSubsystem)
{
    auto sub = explicit_subsystem(Family::EquilateralStar, {{1.0, 1.0, 1.0}, 6});
    ControlOperator op;
    op.per_edge_potential = {Polynomial{}, Polynomial{0.0, 1.0}, Polynomial{}};
    std::vector<std::pair<std::size_t, std::size_t>> path{{0, 1}};
    EXPECT_THROW(energetic_demo(sub, op, path, 0.01), DynamicsError);
    std::vector<std::pair<std::size_t, std::size_t>> broken{{0, 1}, {2, 3}};
    EXPECT_THROW(energetic_demo(sub, ControlOperator::quadratic_at_center(1.0, 3), broken, 0.01), std::invalid_argument);
}
