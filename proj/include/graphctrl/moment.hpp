#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "graphctrl/detail/fit.hpp"
#include "graphctrl/detail/gap.hpp"
#include "graphctrl/detail/parallel.hpp"
#include "graphctrl/trig_integral.hpp"

namespace graphctrl {

using cplx = std::complex<double>;

class PartitionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class MomentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Cluster {
    std::size_t begin = 0;  // first position in the frequency list
    std::size_t end = 0;    // one past the last
    std::size_t size() const { return end - begin; }
};

struct ClusterPartition {
    std::vector<double> nu;
    std::vector<int> labels;  // signed index of each frequency; 1..n when not supplied
    double delta = 0.0;
    int M = 1;
    std::vector<Cluster> clusters;

    std::size_t max_cluster_size() const
    {
        std::size_t s = 0;
        for (const auto& c : clusters) s = std::max(s, c.size());
        return s;
    }
};

inline ClusterPartition build_partition(std::span<const double> nu, double delta, int M, std::span<const int> labels = {})
{
    if (nu.empty()) throw PartitionError("build_partition: empty frequency list");
    if (!(delta > 0.0)) throw PartitionError("build_partition: delta must be positive");
    if (M < 1) throw PartitionError("build_partition: M must be >= 1");
    if (!labels.empty() && labels.size() != nu.size()) throw PartitionError("build_partition: labels and frequencies differ in size");
    for (std::size_t k = 1; k < nu.size(); ++k)
        if (!(nu[k] > nu[k - 1]))
            throw PartitionError("build_partition: frequencies must be strictly increasing (position " + std::to_string(k) + ")");
    const auto Ms = static_cast<std::size_t>(M);
    for (std::size_t k = 0; k + Ms < nu.size(); ++k) {
        if (nu[k + Ms] - nu[k] < delta * M * (1.0 - 1e-12))
            throw PartitionError("build_partition: separation violated on window [" + std::to_string(k) + ", " +
                                 std::to_string(k + Ms) + "]: nu[k+M]-nu[k] = " + std::to_string(nu[k + Ms] - nu[k]) +
                                 " < delta*M = " + std::to_string(delta * M));
    }
    ClusterPartition p;
    p.nu.assign(nu.begin(), nu.end());
    if (labels.empty()) {
        for (std::size_t k = 0; k < nu.size(); ++k) p.labels.push_back(static_cast<int>(k + 1));
    } else {
        p.labels.assign(labels.begin(), labels.end());
    }
    p.delta = delta;
    p.M = M;
    std::size_t start = 0;
    for (std::size_t k = 1; k <= nu.size(); ++k) {
        if (k == nu.size() || nu[k] - nu[k - 1] >= delta * (1.0 - 1e-12)) {
            p.clusters.push_back({start, k});
            start = k;
        }
    }
    return p;
}

// Smallest M <= 10 satisfying the separation condition with delta above min_delta.
inline ClusterPartition auto_partition(std::span<const double> nu, double min_delta, std::span<const int> labels = {})
{
    auto gap = detail::estimate_gap(nu, min_delta, 10);
    if (gap.M == 0) throw PartitionError("auto_partition: no M <= 10 separates the frequencies above the requested delta");
    return build_partition(nu, gap.delta, gap.M, labels);
}

namespace detail {

// Upper-triangular divided-difference matrix of one cluster.
inline Eigen::MatrixXd dd_matrix(std::span<const double> v)
{
    const auto n = static_cast<Eigen::Index>(v.size());
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k)
        for (Eigen::Index j = 0; j <= k; ++j) {
            double prod = 1.0;
            for (Eigen::Index l = 0; l <= k; ++l)
                if (l != j) prod /= v[static_cast<std::size_t>(j)] - v[static_cast<std::size_t>(l)];
            F(j, k) = prod;
        }
    return F;
}

// Block-diagonal assembly over the clusters of `values`.
inline Eigen::MatrixXd block_dd(std::span<const double> values, const std::vector<Cluster>& clusters,
                                std::vector<Eigen::MatrixXd>* blocks = nullptr)
{
    const auto n = static_cast<Eigen::Index>(values.size());
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(n, n);
    for (const auto& c : clusters) {
        auto Fm = dd_matrix(values.subspan(c.begin, c.size()));
        F.block(static_cast<Eigen::Index>(c.begin), static_cast<Eigen::Index>(c.begin), Fm.rows(), Fm.cols()) = Fm;
        if (blocks) blocks->push_back(std::move(Fm));
    }
    return F;
}

// G_{jk} = ∫_0^T conj(e^{i nu_j t}) e^{i nu_k t} dt.
inline Eigen::MatrixXcd exponential_gram(std::span<const double> nu, double T, unsigned threads = 1)
{
    const auto n = static_cast<Eigen::Index>(nu.size());
    Eigen::MatrixXcd G(n, n);
    parallel_for(nu.size(), threads, [&](std::size_t j) {
        for (std::size_t k = 0; k < nu.size(); ++k)
            G(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) =
                j == k ? cplx(T, 0.0) : power_exp_integral(0, nu[k] - nu[j], T);
    });
    return G;
}

inline std::pair<double, double> hermitian_extremes(const Eigen::MatrixXcd& G)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(G, Eigen::EigenvaluesOnly);
    return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

}  // namespace detail

struct DividedDifferenceSystem {
    ClusterPartition partition;
    double T = 0.0;
    std::vector<Eigen::MatrixXd> F_blocks;
    Eigen::MatrixXd F;              // block-diagonal assembly of F_blocks
    std::vector<double> trace_diag;  // Tr(F_m^T F_m) per cluster
    Eigen::MatrixXcd raw_gram;      // exponentials
    Eigen::MatrixXcd gram;          // Ξ = F^T e
    std::pair<double, double> frame_bounds;
    double max_condition = 0.0;     // largest per-cluster condition number of F_m

    // ξ_k(t) = Σ_j F_{jk} e^{i ν_j t}, with j running over the cluster of k.
    cplx xi(std::size_t k, double t) const
    {
        cplx s = 0.0;
        for (std::size_t j = 0; j <= k; ++j) {
            double f = F(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
            if (f != 0.0) s += f * std::exp(cplx(0.0, partition.nu[j] * t));
        }
        return s;
    }
};

inline DividedDifferenceSystem build_dd_system(const ClusterPartition& partition, double T, unsigned threads = 1)
{
    const double pi = std::numbers::pi;
    if (!(T >= 2.0 * pi / partition.delta * (1.0 - 1e-12)))
        throw PartitionError("build_dd_system: horizon T = " + std::to_string(T) + " below 2*pi/delta = " +
                             std::to_string(2.0 * pi / partition.delta));
    DividedDifferenceSystem s;
    s.partition = partition;
    s.T = T;
    s.F = detail::block_dd(partition.nu, partition.clusters, &s.F_blocks);
    for (const auto& Fm : s.F_blocks) {
        s.trace_diag.push_back(Fm.squaredNorm());
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(Fm);
        const auto& sv = svd.singularValues();
        s.max_condition = std::max(s.max_condition, sv(0) / sv(sv.size() - 1));
    }
    s.raw_gram = detail::exponential_gram(partition.nu, T, threads);
    Eigen::MatrixXcd Fc = s.F.cast<cplx>();
    s.gram = Fc.transpose() * s.raw_gram * Fc;
    s.gram = 0.5 * (s.gram + s.gram.adjoint()).eval();
    s.frame_bounds = detail::hermitian_extremes(s.gram);
    return s;
}

struct TraceEntry {
    std::size_t cluster = 0;
    int min_abs_label = 0;
    double trace = 0.0;
    double ratio = 0.0;
};

struct TraceBoundReport {
    std::vector<TraceEntry> sqrt_scale;    // Tr/(min|l|)^{2(1+d)}
    std::vector<TraceEntry> lambda_scale;  // Θ = sgn(ν)ν², Tr/(min|l|)^{2d}
    double sup_sqrt_ratio = 0.0;
    double sup_lambda_ratio = 0.0;
    double sqrt_ratio_slope = 0.0;    // fitted log-log slope of the ratio against min|l|
    double lambda_ratio_slope = 0.0;
};

inline TraceBoundReport check_trace_bounds(const DividedDifferenceSystem& sys, double dtilde)
{
    if (dtilde < 0.0) throw std::invalid_argument("check_trace_bounds: dtilde must be >= 0");
    const auto& p = sys.partition;
    std::vector<double> theta;
    for (double v : p.nu) theta.push_back(v < 0.0 ? -v * v : v * v);
    std::vector<Eigen::MatrixXd> theta_blocks;
    detail::block_dd(theta, p.clusters, &theta_blocks);
    TraceBoundReport rep;
    std::vector<double> xs, ys, yl;
    for (std::size_t m = 0; m < p.clusters.size(); ++m) {
        const auto& c = p.clusters[m];
        int min_l = std::abs(p.labels[c.begin]);
        for (std::size_t k = c.begin; k < c.end; ++k) min_l = std::min(min_l, std::abs(p.labels[k]));
        if (min_l == 0) throw std::invalid_argument("check_trace_bounds: labels must be nonzero");
        const double l = static_cast<double>(min_l);
        TraceEntry a{m, min_l, sys.trace_diag[m], sys.trace_diag[m] / std::pow(l, 2.0 * (1.0 + dtilde))};
        double tr_theta = theta_blocks[m].squaredNorm();
        TraceEntry b{m, min_l, tr_theta, tr_theta / std::pow(l, 2.0 * dtilde)};
        rep.sup_sqrt_ratio = std::max(rep.sup_sqrt_ratio, a.ratio);
        rep.sup_lambda_ratio = std::max(rep.sup_lambda_ratio, b.ratio);
        xs.push_back(l);
        ys.push_back(a.ratio);
        yl.push_back(b.ratio);
        rep.sqrt_scale.push_back(a);
        rep.lambda_scale.push_back(b);
    }
    if (xs.size() >= 2) {
        rep.sqrt_ratio_slope = detail::fit_power_law(xs, ys).exponent;
        rep.lambda_ratio_slope = detail::fit_power_law(xs, yl).exponent;
    }
    return rep;
}

struct BiorthogonalityReport {
    double deviation = 0.0;      // max |(G G^{-1} - I)_{jk}| in Ξ coordinates
    double raw_deviation = 0.0;  // same for F·(biorthogonal family) against raw exponentials
};

inline BiorthogonalityReport verify_biorthogonality(const DividedDifferenceSystem& sys)
{
    const auto n = sys.gram.rows();
    if (n > 256) throw std::invalid_argument("verify_biorthogonality: truncation above 256");
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(sys.gram);
    if (!lu.isInvertible()) throw MomentError("verify_biorthogonality: Gram matrix numerically singular");
    Eigen::MatrixXcd Ginv = lu.inverse();
    const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(n, n);
    BiorthogonalityReport r;
    r.deviation = (sys.gram * Ginv - I).cwiseAbs().maxCoeff();
    Eigen::MatrixXcd Fc = sys.F.cast<cplx>();
    r.raw_deviation = (sys.raw_gram * Fc * Ginv * Fc.transpose() - I).cwiseAbs().maxCoeff();
    return r;
}

enum class MomentMode { Direct, DDPreconditioned };

struct DictionaryAtom {
    double frequency = 0.0;
    bool is_sin = false;
};

struct MomentSolution {
    double T = 0.0;
    MomentMode mode = MomentMode::Direct;
    std::vector<DictionaryAtom> dictionary;
    Eigen::VectorXd coefficients;
    std::vector<cplx> residuals;  // ∫u e^{iα_k t} - x_k
    double max_residual = 0.0;
    double gram_condition = 0.0;
    double imaginary_defect = 0.0;  // max_k |∫ Im(u) e^{iα_k t}| before the real part is taken
    std::optional<ClusterPartition> partition;

    double operator()(double t) const
    {
        double s = 0.0;
        for (std::size_t i = 0; i < dictionary.size(); ++i) {
            const auto& a = dictionary[i];
            s += coefficients(static_cast<Eigen::Index>(i)) * (a.is_sin ? std::sin(a.frequency * t) : std::cos(a.frequency * t));
        }
        return s;
    }
};

struct MomentOptions {
    double condition_threshold = 1e10;
    double residual_threshold = 1e-6;
    unsigned threads = 1;
};

namespace detail {

inline double atom_integral(const DictionaryAtom& a, const DictionaryAtom& b, double T)
{
    if (a.is_sin && b.is_sin) return trig_poly_integral(0, a.frequency, T, TrigPairKind::SinSin, b.frequency);
    if (!a.is_sin && !b.is_sin) return trig_poly_integral(0, a.frequency, T, TrigPairKind::CosCos, b.frequency);
    if (a.is_sin) return trig_poly_integral(0, a.frequency, T, TrigPairKind::SinCos, b.frequency);
    return trig_poly_integral(0, b.frequency, T, TrigPairKind::SinCos, a.frequency);
}

inline Eigen::MatrixXd dictionary_gram(const std::vector<DictionaryAtom>& d, double T, unsigned threads)
{
    const auto n = static_cast<Eigen::Index>(d.size());
    Eigen::MatrixXd A(n, n);
    parallel_for(d.size(), threads, [&](std::size_t i) {
        for (std::size_t j = i; j < d.size(); ++j) {
            double v = atom_integral(d[i], d[j], T);
            A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
            A(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
        }
    });
    return A;
}

// Moments (∫u, ∫u cos α_k, ∫u sin α_k) as complex x_k.
inline std::vector<cplx> moments_from(const Eigen::VectorXd& gram_times_coeffs, std::size_t K)
{
    std::vector<cplx> out(K);
    out[0] = gram_times_coeffs(0);
    for (std::size_t k = 1; k < K; ++k)
        out[k] = {gram_times_coeffs(static_cast<Eigen::Index>(2 * k - 1)), gram_times_coeffs(static_cast<Eigen::Index>(2 * k))};
    return out;
}

inline double condition_of(const Eigen::MatrixXd& A)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
    double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
    return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
}

inline double condition_of(const Eigen::MatrixXcd& A)
{
    auto [lo, hi] = hermitian_extremes(A);
    return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
}

inline std::string advise(double cond, double threshold, double T, std::optional<double> delta)
{
    std::string msg = "moment system condition number " + std::to_string(cond) + " exceeds " + std::to_string(threshold) +
                      "; increase the horizon T (currently " + std::to_string(T) + ")";
    if (delta) msg += ", frame bounds need T > 2*pi/delta = " + std::to_string(2.0 * std::numbers::pi / *delta);
    return msg;
}

}  // namespace detail

// Find a real u on (0,T) with ∫_0^T u(t) e^{i(λ_k-λ_1)t} dt = x_k for k = 1..K.
inline MomentSolution solve_moment(std::span<const double> lambda, std::span<const cplx> x, double T,
                                   MomentMode mode = MomentMode::Direct, const MomentOptions& opt = {})
{
    const std::size_t K = lambda.size();
    if (K == 0) throw MomentError("solve_moment: no frequencies");
    if (x.size() != K) throw MomentError("solve_moment: target size differs from frequency count");
    if (K > 512) throw MomentError("solve_moment: at most 512 frequencies");
    if (!(T > 0.0)) throw MomentError("solve_moment: T must be positive");
    if (std::abs(x[0].imag()) > 1e-14 * std::max(1.0, std::abs(x[0])))
        throw MomentError("solve_moment: x_1 must be real");
    std::vector<double> alpha(K);
    for (std::size_t k = 0; k < K; ++k) alpha[k] = lambda[k] - lambda[0];
    {
        auto sorted = alpha;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t k = 1; k < K; ++k)
            if (sorted[k] == sorted[k - 1]) throw MomentError("solve_moment: duplicate frequencies make the problem infeasible");
    }
    for (std::size_t k = 1; k < K; ++k)
        for (std::size_t j = 1; j < k; ++j)
            if (alpha[k] == -alpha[j]) throw MomentError("solve_moment: opposite transition frequencies are not independent");

    MomentSolution sol;
    sol.T = T;
    sol.mode = mode;
    sol.dictionary.push_back({0.0, false});
    for (std::size_t k = 1; k < K; ++k) {
        sol.dictionary.push_back({alpha[k], false});
        sol.dictionary.push_back({alpha[k], true});
    }
    const Eigen::MatrixXd A = detail::dictionary_gram(sol.dictionary, T, opt.threads);
    const auto n = static_cast<Eigen::Index>(sol.dictionary.size());
    Eigen::VectorXd b(n);
    b(0) = x[0].real();
    for (std::size_t k = 1; k < K; ++k) {
        b(static_cast<Eigen::Index>(2 * k - 1)) = x[k].real();
        b(static_cast<Eigen::Index>(2 * k)) = x[k].imag();
    }

    if (mode == MomentMode::Direct) {
        sol.gram_condition = detail::condition_of(A);
        if (sol.gram_condition > opt.condition_threshold)
            throw MomentError(detail::advise(sol.gram_condition, opt.condition_threshold, T, std::nullopt));
        sol.coefficients = A.ldlt().solve(b);
    } else {
        // Signed frequencies ±α_k (k >= 2) plus the DC frequency once, with conjugate data.
        struct Signed {
            double nu;
            int label;
            cplx data;
        };
        std::vector<Signed> sf;
        sf.push_back({0.0, 1, x[0]});
        for (std::size_t k = 1; k < K; ++k) {
            int lab = static_cast<int>(k + 1);
            sf.push_back({alpha[k], lab, x[k]});
            sf.push_back({-alpha[k], -lab, std::conj(x[k])});
        }
        std::sort(sf.begin(), sf.end(), [](const Signed& a, const Signed& c) { return a.nu < c.nu; });
        std::vector<double> nu;
        std::vector<int> labels;
        Eigen::VectorXcd data(n);
        for (std::size_t i = 0; i < sf.size(); ++i) {
            nu.push_back(sf[i].nu);
            labels.push_back(sf[i].label);
            data(static_cast<Eigen::Index>(i)) = sf[i].data;
        }
        const double scale = std::max(std::abs(nu.front()), std::abs(nu.back()));
        // Prefer a separation compatible with the horizon (T > 2π/δ); fall back to any separation.
        const double floor_delta = 1e-9 * std::max(scale, 1.0);
        try {
            sol.partition = auto_partition(nu, std::max(floor_delta, 2.0 * std::numbers::pi / T), labels);
        } catch (const PartitionError&) {
            sol.partition = auto_partition(nu, floor_delta, labels);
        }
        const Eigen::MatrixXd F = detail::block_dd(nu, sol.partition->clusters);
        const Eigen::MatrixXcd Ge = detail::exponential_gram(nu, T, opt.threads);
        const Eigen::MatrixXcd Fc = F.cast<cplx>();
        Eigen::MatrixXcd Gxi = Fc.transpose() * Ge * Fc;
        Gxi = 0.5 * (Gxi + Gxi.adjoint()).eval();
        sol.gram_condition = detail::condition_of(Gxi);
        if (sol.gram_condition > opt.condition_threshold)
            throw MomentError(detail::advise(sol.gram_condition, opt.condition_threshold, T, sol.partition->delta));
        // u = Σ_j c_j e^{-i ν_j t}; moments give Ge y = conj(data) with y = conj(c). Solve in Ξ coordinates y = F z.
        Eigen::VectorXcd z = Gxi.ldlt().solve(Fc.transpose() * data.conjugate());
        Eigen::VectorXcd c = (Fc * z).conjugate();
        std::vector<cplx> by_label_pos(K), by_label_neg(K);
        for (std::size_t i = 0; i < sf.size(); ++i) {
            int lab = sf[i].label;
            if (lab > 0)
                by_label_pos[static_cast<std::size_t>(lab - 1)] = c(static_cast<Eigen::Index>(i));
            else
                by_label_neg[static_cast<std::size_t>(-lab - 1)] = c(static_cast<Eigen::Index>(i));
        }
        Eigen::VectorXd re(n), im(n);
        re(0) = by_label_pos[0].real();
        im(0) = by_label_pos[0].imag();
        for (std::size_t k = 1; k < K; ++k) {
            const cplx cp = by_label_pos[k], cn = by_label_neg[k];
            re(static_cast<Eigen::Index>(2 * k - 1)) = cp.real() + cn.real();
            re(static_cast<Eigen::Index>(2 * k)) = cp.imag() - cn.imag();
            im(static_cast<Eigen::Index>(2 * k - 1)) = cp.imag() + cn.imag();
            im(static_cast<Eigen::Index>(2 * k)) = cn.real() - cp.real();
        }
        sol.coefficients = re;
        Eigen::VectorXd im_moments = A * im;
        sol.imaginary_defect = 0.0;
        for (const auto& m : detail::moments_from(im_moments, K)) sol.imaginary_defect = std::max(sol.imaginary_defect, std::abs(m));
    }

    auto moments = detail::moments_from(A * sol.coefficients, K);
    for (std::size_t k = 0; k < K; ++k) {
        sol.residuals.push_back(moments[k] - x[k]);
        sol.max_residual = std::max(sol.max_residual, std::abs(sol.residuals.back()));
    }
    const double xnorm = std::max(1.0, std::abs(*std::max_element(x.begin(), x.end(), [](cplx a, cplx c) { return std::abs(a) < std::abs(c); })));
    if (sol.max_residual > opt.residual_threshold * xnorm)
        throw MomentError("solve_moment: residual " + std::to_string(sol.max_residual) + " above acceptance threshold");
    return sol;
}

}  // namespace graphctrl
