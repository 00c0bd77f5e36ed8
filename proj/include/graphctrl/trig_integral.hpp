#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include "graphctrl/polynomial.hpp"

namespace graphctrl {

enum class TrigMode { Sin, Cos };
enum class TrigPairKind { SinSin, SinCos, CosCos };

inline constexpr int max_poly_degree = 12;

class DegreeOverflow : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

namespace detail {

// ∫_0^L x^p cos(ax) dx and ∫_0^L x^p sin(ax) dx as (re, im) of ∫ x^p e^{iax}.
inline std::complex<double> power_exp_integral(int p, double a, double L)
{
    const double aL = std::abs(a) * L;
    if (aL < static_cast<double>(p + 2)) {
        // Alternating Taylor series; below this threshold the terms stay moderate.
        double cos_sum = 0.0;
        double sin_sum = 0.0;
        double pow_term = std::pow(L, p + 1);  // a^m L^{p+m+1} / m!
        for (int m = 0; m < 200; ++m) {
            double c = pow_term / static_cast<double>(p + m + 1);
            switch (m % 4) {
            case 0: cos_sum += c; break;
            case 1: sin_sum += c; break;
            case 2: cos_sum -= c; break;
            case 3: sin_sum -= c; break;
            }
            pow_term *= a * L / static_cast<double>(m + 1);
            if (m > aL + 4 && std::abs(pow_term) < 1e-19 * (std::abs(cos_sum) + std::abs(sin_sum))) break;
            if (pow_term == 0.0) break;
        }
        return {cos_sum, sin_sum};
    }
    using namespace std::complex_literals;
    const std::complex<double> ia = 1i * a;
    const std::complex<double> e = std::exp(ia * L);
    std::complex<double> sum = 0.0;
    double falling = 1.0;  // p!/(p-j)!
    std::complex<double> ia_pow = ia;  // (ia)^{j+1}
    for (int j = 0; j <= p; ++j) {
        double sign = (j % 2 == 0) ? 1.0 : -1.0;
        sum += sign * falling * std::pow(L, p - j) * e / ia_pow;
        if (j == p) sum -= sign * falling / ia_pow;
        falling *= static_cast<double>(p - j);
        ia_pow *= ia;
    }
    return sum;
}

}  // namespace detail

// ∫_0^L x^p t1(ω1 x) t2(ω2 x) dx for the trig pair selected by kind.
inline double trig_poly_integral(int p, double omega1, double L, TrigPairKind kind, double omega2)
{
    if (p < 0) throw std::invalid_argument("trig_poly_integral: negative degree");
    if (p > max_poly_degree) throw DegreeOverflow("trig_poly_integral: degree " + std::to_string(p) + " exceeds 12");
    if (!(L > 0.0)) throw std::invalid_argument("trig_poly_integral: L must be positive");
    const auto diff = detail::power_exp_integral(p, omega1 - omega2, L);
    const auto sum = detail::power_exp_integral(p, omega1 + omega2, L);
    switch (kind) {
    case TrigPairKind::SinSin: return 0.5 * (diff.real() - sum.real());
    case TrigPairKind::SinCos: return 0.5 * (sum.imag() + diff.imag());
    case TrigPairKind::CosCos: return 0.5 * (diff.real() + sum.real());
    }
    return 0.0;
}

// ∫_0^L P(x) t1(ω1 x) t2(ω2 x) dx for arbitrary mode pairs.
inline double poly_trig_integral(const Polynomial& poly, TrigMode m1, double omega1, TrigMode m2, double omega2,
                                 double L)
{
    if (poly.degree() > max_poly_degree)
        throw DegreeOverflow("poly_trig_integral: degree " + std::to_string(poly.degree()) + " exceeds 12");
    if (m1 == TrigMode::Cos && m2 == TrigMode::Sin) {
        std::swap(m1, m2);
        std::swap(omega1, omega2);
    }
    const TrigPairKind kind = m1 == TrigMode::Sin ? (m2 == TrigMode::Sin ? TrigPairKind::SinSin : TrigPairKind::SinCos)
                                                  : TrigPairKind::CosCos;
    double acc = 0.0;
    const auto& c = poly.coefficients();
    for (std::size_t p = 0; p < c.size(); ++p)
        if (c[p] != 0.0) acc += c[p] * trig_poly_integral(static_cast<int>(p), omega1, L, kind, omega2);
    return acc;
}

}  // namespace graphctrl
