#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace graphctrl {

// Real polynomial with ascending-degree coefficients.
class Polynomial {
public:
    Polynomial() = default;
    Polynomial(std::initializer_list<double> c) : coeffs_(c) { trim(); }
    explicit Polynomial(std::vector<double> c) : coeffs_(std::move(c)) { trim(); }

    const std::vector<double>& coefficients() const { return coeffs_; }
    bool is_zero() const { return coeffs_.empty(); }
    int degree() const { return static_cast<int>(coeffs_.size()) - 1; }

    double operator()(double x) const
    {
        double acc = 0.0;
        for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * x + *it;
        return acc;
    }

    Polynomial derivative() const
    {
        std::vector<double> d;
        for (std::size_t i = 1; i < coeffs_.size(); ++i) d.push_back(coeffs_[i] * static_cast<double>(i));
        return Polynomial(std::move(d));
    }

    Polynomial derivative(int order) const
    {
        Polynomial p = *this;
        for (int i = 0; i < order; ++i) p = p.derivative();
        return p;
    }

    friend Polynomial operator*(const Polynomial& a, const Polynomial& b)
    {
        if (a.is_zero() || b.is_zero()) return {};
        std::vector<double> c(a.coeffs_.size() + b.coeffs_.size() - 1, 0.0);
        for (std::size_t i = 0; i < a.coeffs_.size(); ++i)
            for (std::size_t j = 0; j < b.coeffs_.size(); ++j) c[i + j] += a.coeffs_[i] * b.coeffs_[j];
        return Polynomial(std::move(c));
    }

    bool operator==(const Polynomial&) const = default;

    // (x - root)^n
    static Polynomial shifted_power(double root, int n)
    {
        Polynomial p{1.0};
        for (int i = 0; i < n; ++i) p = p * Polynomial{-root, 1.0};
        return p;
    }

private:
    void trim()
    {
        while (!coeffs_.empty() && coeffs_.back() == 0.0) coeffs_.pop_back();
    }

    std::vector<double> coeffs_;
};

}  // namespace graphctrl
