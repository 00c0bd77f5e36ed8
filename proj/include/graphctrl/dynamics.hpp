#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "graphctrl/bfield.hpp"
#include "graphctrl/families.hpp"
#include "graphctrl/moment.hpp"

namespace graphctrl {

class DynamicsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Truncated system i c' = (diag(lambda) + u(t) B) c in an orthonormal eigenbasis.
struct GalerkinSystem {
    Eigen::VectorXd lambda;
    Eigen::MatrixXd B;

    GalerkinSystem(Eigen::VectorXd eigenvalues, Eigen::MatrixXd coupling)
        : lambda(std::move(eigenvalues)), B(std::move(coupling))
    {
        const auto K = lambda.size();
        if (K == 0) throw std::invalid_argument("GalerkinSystem: empty system");
        if (B.rows() != K || B.cols() != K) throw std::invalid_argument("GalerkinSystem: coupling matrix has the wrong shape");
        for (Eigen::Index k = 1; k < K; ++k)
            if (lambda(k) < lambda(k - 1)) throw std::invalid_argument("GalerkinSystem: eigenvalues must be sorted ascending");
        const double scale = std::max(1.0, B.cwiseAbs().maxCoeff());
        if ((B - B.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
            throw std::invalid_argument("GalerkinSystem: coupling matrix is not symmetric");
        B = 0.5 * (B + B.transpose()).eval();
    }

    static GalerkinSystem from_basis(const ControlOperator& op, const SpectralBasis& basis, unsigned threads = 1)
    {
        Eigen::VectorXd l(static_cast<Eigen::Index>(basis.size()));
        for (std::size_t k = 0; k < basis.size(); ++k) l(static_cast<Eigen::Index>(k)) = basis[k].lambda;
        return {std::move(l), coupling_matrix(op, basis, threads)};
    }

    std::size_t dimension() const { return static_cast<std::size_t>(lambda.size()); }

    // Frobenius norm of [diag(lambda), B].
    double commutator_norm() const
    {
        double s = 0.0;
        for (Eigen::Index j = 0; j < lambda.size(); ++j)
            for (Eigen::Index k = 0; k < lambda.size(); ++k) {
                const double c = (lambda(j) - lambda(k)) * B(j, k);
                s += c * c;
            }
        return std::sqrt(s);
    }
};

struct PiecewiseConstant {
    std::vector<double> samples;
    double dt = 0.0;
};

struct TrigDictionary {
    std::vector<DictionaryAtom> atoms;
    std::vector<double> coefficients;
    double T = 0.0;
};

struct ResonantPulse {
    double amplitude = 0.0;
    double frequency = 0.0;
    double duration = 0.0;
};

namespace detail {

inline double sinc(double x) { return std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x; }

// ∫_{t0}^{t1} e^{i a τ} dτ
inline cplx exp_integral(double a, double t0, double t1)
{
    const double h = t1 - t0;
    return h * std::polar(1.0, 0.5 * a * (t0 + t1)) * sinc(0.5 * a * h);
}

// ∫_0^T trig(ω τ) e^{i ν τ} dτ for a cos or sin atom
inline cplx atom_moment(const DictionaryAtom& atom, double nu, double T)
{
    const cplx plus = exp_integral(nu + atom.frequency, 0.0, T);
    const cplx minus = exp_integral(nu - atom.frequency, 0.0, T);
    if (atom.is_sin) return (plus - minus) / cplx(0.0, 2.0);
    return 0.5 * (plus + minus);
}

}  // namespace detail

// Real-valued control on [0, T].
class ControlSignal {
public:
    using Kind = std::variant<PiecewiseConstant, TrigDictionary, ResonantPulse>;

    explicit ControlSignal(Kind kind) : kind_(std::move(kind)) { validate(); }

    static ControlSignal piecewise_constant(std::vector<double> samples, double dt)
    {
        return ControlSignal(PiecewiseConstant{std::move(samples), dt});
    }

    static ControlSignal zero(double T) { return piecewise_constant({0.0}, T); }

    static ControlSignal trig(std::vector<DictionaryAtom> atoms, std::vector<double> coefficients, double T)
    {
        return ControlSignal(TrigDictionary{std::move(atoms), std::move(coefficients), T});
    }

    static ControlSignal from_moment(const MomentSolution& sol)
    {
        return trig(sol.dictionary, {sol.coefficients.data(), sol.coefficients.data() + sol.coefficients.size()}, sol.T);
    }

    static ControlSignal resonant(double amplitude, double frequency, double duration)
    {
        return ControlSignal(ResonantPulse{amplitude, frequency, duration});
    }

    const Kind& kind() const { return kind_; }
    bool is_piecewise_constant() const { return std::holds_alternative<PiecewiseConstant>(kind_); }

    double horizon() const
    {
        return std::visit(
            [](const auto& k) -> double {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, PiecewiseConstant>) return k.dt * static_cast<double>(k.samples.size());
                else if constexpr (std::is_same_v<K, TrigDictionary>) return k.T;
                else return k.duration;
            },
            kind_);
    }

    double operator()(double t) const
    {
        return std::visit(
            [t](const auto& k) -> double {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, PiecewiseConstant>) {
                    const auto n = k.samples.size();
                    auto i = static_cast<std::size_t>(std::max(0.0, std::floor(t / k.dt)));
                    return k.samples[std::min(i, n - 1)];
                } else if constexpr (std::is_same_v<K, TrigDictionary>) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < k.atoms.size(); ++i) {
                        const double a = k.atoms[i].frequency * t;
                        s += k.coefficients[i] * (k.atoms[i].is_sin ? std::sin(a) : std::cos(a));
                    }
                    return s;
                } else {
                    return k.amplitude * std::cos(k.frequency * t);
                }
            },
            kind_);
    }

    // Highest angular frequency present; zero for piecewise-constant signals.
    double max_frequency() const
    {
        if (const auto* d = std::get_if<TrigDictionary>(&kind_)) {
            double w = 0.0;
            for (const auto& a : d->atoms) w = std::max(w, std::abs(a.frequency));
            return w;
        }
        if (const auto* r = std::get_if<ResonantPulse>(&kind_)) return std::abs(r->frequency);
        return 0.0;
    }

    ControlSignal scaled(double c) const
    {
        Kind k = kind_;
        std::visit(
            [c](auto& v) {
                using K = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<K, PiecewiseConstant>) {
                    for (auto& s : v.samples) s *= c;
                } else if constexpr (std::is_same_v<K, TrigDictionary>) {
                    for (auto& s : v.coefficients) s *= c;
                } else {
                    v.amplitude *= c;
                }
            },
            k);
        return ControlSignal(std::move(k));
    }

    // Exact piecewise-constant resampling at step T / n.
    ControlSignal sampled(std::size_t n) const
    {
        if (n == 0) throw std::invalid_argument("ControlSignal::sampled: need at least one sample");
        const double T = horizon();
        const double dt = T / static_cast<double>(n);
        std::vector<double> s(n);
        for (std::size_t i = 0; i < n; ++i) s[i] = (*this)((static_cast<double>(i) + 0.5) * dt);
        return piecewise_constant(std::move(s), dt);
    }

    // ∫_0^T u(τ) e^{i ν τ} dτ in closed form.
    cplx moment(double nu) const
    {
        return std::visit(
            [nu](const auto& k) -> cplx {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, PiecewiseConstant>) {
                    cplx acc = 0.0;
                    for (std::size_t i = 0; i < k.samples.size(); ++i)
                        if (k.samples[i] != 0.0)
                            acc += k.samples[i] * detail::exp_integral(nu, static_cast<double>(i) * k.dt,
                                                                       static_cast<double>(i + 1) * k.dt);
                    return acc;
                } else if constexpr (std::is_same_v<K, TrigDictionary>) {
                    cplx acc = 0.0;
                    for (std::size_t i = 0; i < k.atoms.size(); ++i) acc += k.coefficients[i] * detail::atom_moment(k.atoms[i], nu, k.T);
                    return acc;
                } else {
                    return k.amplitude * detail::atom_moment({k.frequency, false}, nu, k.duration);
                }
            },
            kind_);
    }

    double total_variation() const
    {
        if (const auto* p = std::get_if<PiecewiseConstant>(&kind_)) {
            double tv = 0.0;
            for (std::size_t i = 1; i < p->samples.size(); ++i) tv += std::abs(p->samples[i] - p->samples[i - 1]);
            return tv;
        }
        if (const auto* r = std::get_if<ResonantPulse>(&kind_)) {
            const double theta = std::abs(r->frequency) * r->duration;
            const double n = std::floor(theta / std::numbers::pi);
            return std::abs(r->amplitude) * (2.0 * n + 1.0 - std::cos(theta - n * std::numbers::pi));
        }
        const double T = horizon();
        const double w = max_frequency();
        const auto n = static_cast<std::size_t>(std::clamp(64.0 * w * T / (2.0 * std::numbers::pi), 1024.0, 1e7));
        double tv = 0.0, prev = (*this)(0.0);
        for (std::size_t i = 1; i <= n; ++i) {
            const double cur = (*this)(T * static_cast<double>(i) / static_cast<double>(n));
            tv += std::abs(cur - prev);
            prev = cur;
        }
        return tv;
    }

private:
    void validate() const
    {
        std::visit(
            [](const auto& k) {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, PiecewiseConstant>) {
                    if (k.samples.empty()) throw std::invalid_argument("ControlSignal: no samples");
                    if (!(k.dt > 0.0)) throw std::invalid_argument("ControlSignal: sample step must be positive");
                } else if constexpr (std::is_same_v<K, TrigDictionary>) {
                    if (k.atoms.size() != k.coefficients.size())
                        throw std::invalid_argument("ControlSignal: atoms and coefficients differ in size");
                    if (!(k.T > 0.0)) throw std::invalid_argument("ControlSignal: horizon must be positive");
                } else {
                    if (!(k.duration >= 0.0)) throw std::invalid_argument("ControlSignal: pulse duration must be non-negative");
                }
            },
            kind_);
    }

    Kind kind_;
};

struct PropagateOptions {
    double commutator_tol = 1e-4;  // bound on dt^2 |u| ||[Lambda, B]||
    double max_step = 0.0;         // 0: 1/32 of the shortest control period, or T/64
    double min_step = 1e-12;
    std::size_t record_stride = 0;  // 0: record only the endpoints
    std::function<void(double, const Eigen::VectorXcd&)> observer;  // called after every step
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Eigen::VectorXcd> states;
    std::vector<double> step_times;  // full step grid, starting at 0
    double norm_drift = 0.0;         // max_t | ||psi(t)|| - 1 |

    const Eigen::VectorXcd& final_state() const { return states.back(); }
    std::size_t steps() const { return step_times.empty() ? 0 : step_times.size() - 1; }
};

namespace detail {

// psi <- exp(-i sign dt (Lambda + u B)) psi
class StepKernel {
public:
    explicit StepKernel(const GalerkinSystem& sys) : sys_(sys), H_(sys.dimension(), sys.dimension()) {}

    void apply(double u, double dt, double sign, Eigen::VectorXcd& psi)
    {
        const auto K = sys_.lambda.size();
        if (u == 0.0) {
            for (Eigen::Index k = 0; k < K; ++k) psi(k) *= std::polar(1.0, -sign * dt * sys_.lambda(k));
            return;
        }
        H_.noalias() = u * sys_.B;
        H_.diagonal() += sys_.lambda;
        es_.compute(H_);
        // One Newton-Schulz sweep restores orthogonality of the eigenvectors to rounding level.
        G_.noalias() = es_.eigenvectors().transpose() * es_.eigenvectors();
        V_.noalias() = es_.eigenvectors() * (1.5 * Eigen::MatrixXd::Identity(K, K) - 0.5 * G_);
        const auto& V = V_;
        Eigen::VectorXd re = V.transpose() * psi.real();
        Eigen::VectorXd im = V.transpose() * psi.imag();
        Eigen::VectorXcd c(K);
        for (Eigen::Index k = 0; k < K; ++k) c(k) = std::polar(1.0, -sign * dt * es_.eigenvalues()(k)) * cplx(re(k), im(k));
        re = V * c.real();
        im = V * c.imag();
        for (Eigen::Index k = 0; k < K; ++k) psi(k) = cplx(re(k), im(k));
    }

private:
    const GalerkinSystem& sys_;
    Eigen::MatrixXd H_, G_, V_;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_;
};

inline void check_state(const GalerkinSystem& sys, const Eigen::VectorXcd& psi)
{
    if (static_cast<std::size_t>(psi.size()) != sys.dimension())
        throw std::invalid_argument("propagate: state dimension differs from the system");
    if (std::abs(psi.norm() - 1.0) > 1e-12) throw std::invalid_argument("propagate: initial state must have unit norm");
}

inline std::vector<double> step_grid(const GalerkinSystem& sys, const ControlSignal& u, const PropagateOptions& opt)
{
    const double T = u.horizon();
    std::vector<double> grid{0.0};
    if (T == 0.0) return grid;
    if (const auto* p = std::get_if<PiecewiseConstant>(&u.kind())) {
        for (std::size_t i = 1; i <= p->samples.size(); ++i) grid.push_back(static_cast<double>(i) * p->dt);
        return grid;
    }
    const double w = u.max_frequency();
    const double hmax = opt.max_step > 0.0 ? opt.max_step : (w > 0.0 ? 2.0 * std::numbers::pi / (32.0 * w) : T / 64.0);
    const double comm = sys.commutator_norm();
    double t = 0.0;
    while (T - t > 1e-14 * T) {
        double h = std::min(hmax, T - t);
        if (comm > 0.0) {
            for (int it = 0; it < 4; ++it) {
                const double a = std::abs(u(t + 0.5 * h)) * comm;
                if (a * h * h <= opt.commutator_tol) break;
                h = std::sqrt(opt.commutator_tol / a);
            }
        }
        if (h < opt.min_step) throw DynamicsError("propagate: step-size underflow at t = " + std::to_string(t));
        if (T - (t + h) < 1e-12 * T) h = T - t;
        t += h;
        grid.push_back(t);
    }
    grid.back() = T;
    return grid;
}

}  // namespace detail

// Midpoint-exponential propagation; piecewise-constant controls are stepped exactly, one exponential per sample.
inline Trajectory propagate(const GalerkinSystem& sys, const Eigen::VectorXcd& psi0, const ControlSignal& u,
                            const PropagateOptions& opt = {})
{
    detail::check_state(sys, psi0);
    Trajectory tr;
    tr.step_times = detail::step_grid(sys, u, opt);
    detail::StepKernel kernel(sys);
    Eigen::VectorXcd psi = psi0;
    tr.times.push_back(0.0);
    tr.states.push_back(psi);
    const std::size_t n = tr.step_times.size() - 1;
    for (std::size_t i = 0; i < n; ++i) {
        const double t0 = tr.step_times[i], t1 = tr.step_times[i + 1];
        kernel.apply(u(0.5 * (t0 + t1)), t1 - t0, 1.0, psi);
        tr.norm_drift = std::max(tr.norm_drift, std::abs(psi.norm() - 1.0));
        if (opt.observer) opt.observer(t1, psi);
        if (i + 1 == n || (opt.record_stride > 0 && (i + 1) % opt.record_stride == 0)) {
            tr.times.push_back(t1);
            tr.states.push_back(psi);
        }
    }
    return tr;
}

// Runs the reversed generator -(Lambda + u(T - s) B) over the mirrored step grid of a forward run.
inline Eigen::VectorXcd propagate_reversed(const GalerkinSystem& sys, const Eigen::VectorXcd& psiT, const ControlSignal& u,
                                           std::span<const double> step_times)
{
    detail::check_state(sys, psiT);
    detail::StepKernel kernel(sys);
    Eigen::VectorXcd psi = psiT;
    for (std::size_t i = step_times.size(); i-- > 1;) {
        const double t0 = step_times[i - 1], t1 = step_times[i];
        kernel.apply(u(0.5 * (t0 + t1)), t1 - t0, -1.0, psi);
    }
    return psi;
}

// First-order response γ_k = -i B_{k,s} ∫_0^T u(τ) e^{i(λ_k - λ_s)τ} dτ from the source state s.
inline Eigen::VectorXcd linearized_response(const GalerkinSystem& sys, const ControlSignal& u, std::size_t source = 0)
{
    const auto K = static_cast<Eigen::Index>(sys.dimension());
    if (static_cast<Eigen::Index>(source) >= K) throw std::invalid_argument("linearized_response: source out of range");
    const auto s = static_cast<Eigen::Index>(source);
    Eigen::VectorXcd g(K);
    for (Eigen::Index k = 0; k < K; ++k) g(k) = cplx(0.0, -1.0) * sys.B(k, s) * u.moment(sys.lambda(k) - sys.lambda(s));
    return g;
}

// e^{-iΛT} applied to a coefficient vector.
inline Eigen::VectorXcd free_evolution(const GalerkinSystem& sys, const Eigen::VectorXcd& c, double T)
{
    Eigen::VectorXcd out = c;
    for (Eigen::Index k = 0; k < out.size(); ++k) out(k) *= std::polar(1.0, -sys.lambda(k) * T);
    return out;
}

struct TransitionPair {
    std::size_t j = 0;
    std::size_t k = 0;
    double frequency = 0.0;
};

// Coupled pairs j < k (|B_jk| above coupling_floor * max|B|) and diagonal entries, with their transition frequencies.
inline std::vector<TransitionPair> coupled_transitions(const GalerkinSystem& sys, double coupling_floor = 1e-12)
{
    const auto K = static_cast<std::size_t>(sys.lambda.size());
    const double floor = coupling_floor * sys.B.cwiseAbs().maxCoeff();
    std::vector<TransitionPair> out;
    for (std::size_t j = 0; j < K; ++j)
        for (std::size_t k = j; k < K; ++k) {
            const auto a = static_cast<Eigen::Index>(j), b = static_cast<Eigen::Index>(k);
            if (std::abs(sys.B(a, b)) > floor && sys.B(a, b) != 0.0)
                out.push_back({j, k, std::abs(sys.lambda(a) - sys.lambda(b))});
        }
    return out;
}

// Coupled pairs sharing the transition frequency of (m, n); resonance_tol is relative, 0 means exact equality.
inline std::vector<TransitionPair> colliding_transitions(const GalerkinSystem& sys, std::size_t m, std::size_t n,
                                                         double resonance_tol = 1e-8)
{
    if (m > n) std::swap(m, n);
    const double f = std::abs(sys.lambda(static_cast<Eigen::Index>(m)) - sys.lambda(static_cast<Eigen::Index>(n)));
    std::vector<TransitionPair> out;
    for (const auto& p : coupled_transitions(sys)) {
        if (p.j == m && p.k == n) continue;
        if (std::abs(p.frequency - f) <= resonance_tol * std::max(f, p.frequency)) out.push_back(p);
    }
    return out;
}

struct TransferOptions {
    double resonance_tol = 1e-8;
    PropagateOptions propagation;
};

struct TransferResult {
    ControlSignal control = ControlSignal::zero(1.0);
    double fidelity = 0.0;  // |<φ_n, ψ(T)>|
    double norm_drift = 0.0;
    double total_variation = 0.0;
    Eigen::VectorXcd final_state;
};

// u(t) = eps cos(|λ_m - λ_n| t) on [0, π/(eps |B_mn|)].
inline ControlSignal resonant_pulse(const GalerkinSystem& sys, std::size_t m, std::size_t n, double eps,
                                    double resonance_tol = 1e-8)
{
    const auto K = sys.dimension();
    if (m >= K || n >= K) throw std::invalid_argument("resonant_pulse: level index out of range");
    if (!(eps > 0.0)) throw std::invalid_argument("resonant_pulse: amplitude must be positive");
    if (m == n) return ControlSignal::resonant(0.0, 0.0, 0.0);
    const double b = sys.B(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    if (b == 0.0 || std::abs(b) <= 1e-12 * sys.B.cwiseAbs().maxCoeff())
        throw DynamicsError("resonant_pulse: levels " + std::to_string(m + 1) + " and " + std::to_string(n + 1) + " are not coupled");
    auto clash = colliding_transitions(sys, m, n, resonance_tol);
    if (!clash.empty()) {
        std::string msg = "resonant_pulse: degenerate transition " + std::to_string(m + 1) + "<->" + std::to_string(n + 1) +
                          " collides with";
        for (const auto& p : clash) msg += " (" + std::to_string(p.j + 1) + "," + std::to_string(p.k + 1) + ")";
        throw DynamicsError(msg);
    }
    const double w = std::abs(sys.lambda(static_cast<Eigen::Index>(m)) - sys.lambda(static_cast<Eigen::Index>(n)));
    return ControlSignal::resonant(eps, w, std::numbers::pi / (eps * std::abs(b)));
}

inline TransferResult resonant_transfer(const GalerkinSystem& sys, std::size_t m, std::size_t n, double eps,
                                        const TransferOptions& opt = {})
{
    TransferResult r;
    r.control = resonant_pulse(sys, m, n, eps, opt.resonance_tol);
    Eigen::VectorXcd psi0 = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(sys.dimension()));
    psi0(static_cast<Eigen::Index>(m)) = 1.0;
    auto tr = propagate(sys, psi0, r.control, opt.propagation);
    r.final_state = tr.final_state();
    r.fidelity = std::abs(r.final_state(static_cast<Eigen::Index>(n)));
    r.norm_drift = tr.norm_drift;
    r.total_variation = r.control.total_variation();
    return r;
}

struct TransferStep {
    std::size_t from = 0;
    std::size_t to = 0;
    double frequency = 0.0;
    double duration = 0.0;
    double population = 0.0;  // |<φ_to, ψ>|^2 after the pulse
};

struct EnergeticReport {
    std::vector<TransferStep> steps;
    double fidelity = 0.0;             // |<φ_target, ψ(T)>|
    double subsystem_leakage = 0.0;    // max_t population outside the distinguished subsystem
    double boundary_population = 0.0;  // max_t population of the highest retained subsystem mode
    double invariance_defect = 0.0;    // max |<c, B φ_k>| over complement modes c
    double norm_drift = 0.0;
    double total_time = 0.0;
    double total_variation = 0.0;
    std::size_t truncation = 0;
};

// Truncation used by demos: three times the highest 1-based level in the path.
inline std::size_t default_truncation(std::span<const std::pair<std::size_t, std::size_t>> path)
{
    std::size_t hi = 0;
    for (const auto& [a, b] : path) hi = std::max({hi, a + 1, b + 1});
    return 3 * hi;
}

namespace detail {

// Galerkin system on subsystem modes followed by complement modes, sorted by energy.
struct MergedSystem {
    GalerkinSystem sys;
    std::vector<std::size_t> sub_position;  // subsystem index -> row
    std::vector<bool> is_sub;               // row -> belongs to the subsystem
};

inline MergedSystem merge_modes(const std::vector<double>& lambdas, const Eigen::MatrixXd& coupling, std::size_t n_sub)
{
    const std::size_t n = lambdas.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lambdas[a] < lambdas[b]; });
    Eigen::VectorXd l(static_cast<Eigen::Index>(n));
    Eigen::MatrixXd B(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    std::vector<std::size_t> pos(n_sub);
    std::vector<bool> is_sub(n);
    for (std::size_t r = 0; r < n; ++r) {
        l(static_cast<Eigen::Index>(r)) = lambdas[order[r]];
        is_sub[r] = order[r] < n_sub;
        if (is_sub[r]) pos[order[r]] = r;
        for (std::size_t c = 0; c < n; ++c)
            B(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                coupling(static_cast<Eigen::Index>(order[r]), static_cast<Eigen::Index>(order[c]));
    }
    return {GalerkinSystem(std::move(l), std::move(B)), std::move(pos), std::move(is_sub)};
}

inline EnergeticReport run_path(const MergedSystem& ms, std::span<const std::pair<std::size_t, std::size_t>> path, double eps,
                                const TransferOptions& opt)
{
    if (path.empty()) throw std::invalid_argument("energetic_demo: empty transfer path");
    const std::size_t n_sub = ms.sub_position.size();
    for (std::size_t i = 0; i < path.size(); ++i) {
        if (path[i].first >= n_sub || path[i].second >= n_sub)
            throw std::invalid_argument("energetic_demo: path level outside the truncation");
        if (i > 0 && path[i].first != path[i - 1].second) throw std::invalid_argument("energetic_demo: path is not contiguous");
    }
    EnergeticReport rep;
    rep.truncation = n_sub;
    std::size_t top = 0;
    for (std::size_t r = 0; r < ms.is_sub.size(); ++r)
        if (ms.is_sub[r]) top = r;
    const auto& sys = ms.sys;
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(sys.dimension()));
    psi(static_cast<Eigen::Index>(ms.sub_position[path.front().first])) = 1.0;
    auto monitor = [&](double, const Eigen::VectorXcd& s) {
        double out = 0.0;
        for (std::size_t r = 0; r < ms.is_sub.size(); ++r)
            if (!ms.is_sub[r]) out += std::norm(s(static_cast<Eigen::Index>(r)));
        rep.subsystem_leakage = std::max(rep.subsystem_leakage, out);
        rep.boundary_population = std::max(rep.boundary_population, std::norm(s(static_cast<Eigen::Index>(top))));
    };
    PropagateOptions popt = opt.propagation;
    popt.observer = monitor;
    popt.record_stride = 0;
    for (const auto& [a, b] : path) {
        const auto ra = ms.sub_position[a], rb = ms.sub_position[b];
        auto u = resonant_pulse(sys, ra, rb, eps, opt.resonance_tol);
        auto tr = propagate(sys, psi.normalized(), u, popt);
        psi = tr.final_state();
        rep.norm_drift = std::max(rep.norm_drift, tr.norm_drift);
        rep.total_time += u.horizon();
        rep.total_variation += u.total_variation();
        rep.steps.push_back({a, b, u.max_frequency(), u.horizon(), std::norm(psi(static_cast<Eigen::Index>(rb)))});
    }
    rep.fidelity = std::abs(psi(static_cast<Eigen::Index>(ms.sub_position[path.back().second])));
    return rep;
}

}  // namespace detail

// Resonant transfers inside the distinguished subsystem of an explicit family, with a local control potential.
// Complement modes (degenerate partners dropped from the subsystem) are propagated alongside to measure leakage.
inline EnergeticReport energetic_demo(const ExplicitSubsystem& sub, const ControlOperator& op,
                                      std::span<const std::pair<std::size_t, std::size_t>> path, double eps,
                                      const TransferOptions& opt = {}, double invariance_tol = 1e-10)
{
    SpectralBasis all;
    all.edge_lengths = sub.basis.edge_lengths;
    all.modes = sub.basis.modes;
    all.modes.insert(all.modes.end(), sub.complement.begin(), sub.complement.end());
    const Eigen::MatrixXd C = coupling_matrix(op, all);
    const auto n_sub = static_cast<Eigen::Index>(sub.basis.size());
    const auto n_all = static_cast<Eigen::Index>(all.size());
    double defect = 0.0;
    if (n_all > n_sub) defect = C.block(n_sub, 0, n_all - n_sub, n_sub).cwiseAbs().maxCoeff();
    if (defect > invariance_tol * std::max(1.0, C.cwiseAbs().maxCoeff()))
        throw DynamicsError("energetic_demo: the control operator does not preserve the subsystem (coupling " +
                            std::to_string(defect) + ")");
    auto ms = detail::merge_modes(all.lambdas(), C, sub.basis.size());
    auto rep = detail::run_path(ms, path, eps, opt);
    rep.invariance_defect = defect;
    return rep;
}

// Same, for the exchange operators of the TwoEqualEdges, PairedStar and Loops families.
inline EnergeticReport energetic_demo(const ExplicitSubsystem& sub, std::span<const std::pair<std::size_t, std::size_t>> path,
                                      double eps, const TransferOptions& opt = {})
{
    const auto K = static_cast<Eigen::Index>(sub.basis.size());
    Eigen::MatrixXd C(K, K);
    for (Eigen::Index j = 0; j < K; ++j)
        for (Eigen::Index k = j; k < K; ++k)
            C(j, k) = C(k, j) = exchange_matrix_element(sub, static_cast<std::size_t>(j), static_cast<std::size_t>(k));
    auto ms = detail::merge_modes(sub.basis.lambdas(), C, sub.basis.size());
    return detail::run_path(ms, path, eps, opt);
}

}  // namespace graphctrl
