#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace graphctrl {

class RootBracketError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

struct Bracket {
    double lo;
    double hi;
};

// Bisection on a sign change until the interval width drops below rel_tol * |x|.
inline double bisect(const std::function<double(double)>& f, double lo, double hi, double rel_tol = 1e-13)
{
    double flo = f(lo);
    double fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0) == (fhi > 0))
        throw RootBracketError("no sign change on [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (hi - lo <= rel_tol * std::abs(mid) || mid == lo || mid == hi) break;
        double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm > 0) == (flo > 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// Sign-change brackets of f on [a, b] sampled with the given step. Grid zeros
// are widened to a bracket around the sample.
inline std::vector<Bracket> scan_sign_changes(const std::function<double(double)>& f, double a, double b, double step)
{
    if (!(step > 0.0)) throw std::invalid_argument("scan step must be positive");
    std::vector<Bracket> out;
    double x0 = a;
    double f0 = f(x0);
    const auto n = static_cast<long>(std::ceil((b - a) / step));
    for (long i = 1; i <= n; ++i) {
        double x1 = std::min(b, a + static_cast<double>(i) * step);
        double f1 = f(x1);
        if (f1 == 0.0) {
            double x2 = std::min(b, x1 + 0.5 * step);
            out.push_back({x0, x2});
            // Skip past the exact zero.
            x0 = x2;
            f0 = f(x2);
            continue;
        }
        if (f0 != 0.0 && (f0 > 0) != (f1 > 0)) out.push_back({x0, x1});
        x0 = x1;
        f0 = f1;
    }
    return out;
}

// First `count` sign-change roots of f above `start`, scanning in blocks.
inline std::vector<double> first_roots(const std::function<double(double)>& f, double start, double step,
                                       std::size_t count, double rel_tol = 1e-13, double max_x = 1e9)
{
    std::vector<double> roots;
    double a = start;
    const double block = 256.0 * step;
    while (roots.size() < count) {
        if (a > max_x) throw RootBracketError("root scan exceeded x = " + std::to_string(max_x));
        for (const auto& br : scan_sign_changes(f, a, a + block, step)) {
            roots.push_back(bisect(f, br.lo, br.hi, rel_tol));
            if (roots.size() == count) break;
        }
        a += block;
    }
    return roots;
}

}  // namespace detail
}  // namespace graphctrl
