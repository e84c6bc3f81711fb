#include "cqed/faddeeva.hpp"

#include <array>
#include <cmath>

namespace cqed {

namespace {

constexpr int kN = 64;            // degree of the rational approximation
constexpr double kSqrtPiInv = 0.5641895835477562869;

struct WeidemanTable {
    double L;
    std::array<double, kN> a; // a[0] = a_1, ..., a[kN-1] = a_N

    WeidemanTable() {
        const int M = 2 * kN;
        L = std::sqrt(kN / std::sqrt(2.0));
        // a_n = (1/2M) sum_k f(theta_k) cos(n theta_k), f even in theta,
        // f(theta) = exp(-t^2) (L^2 + t^2), t = L tan(theta/2).
        for (int n = 1; n <= kN; ++n) {
            double s = 0.0;
            for (int k = 1; k < M; ++k) {
                double theta = M_PI * k / M;
                double t = L * std::tan(0.5 * theta);
                double f = std::exp(-t * t) * (L * L + t * t);
                s += f * std::cos(n * theta);
            }
            // k = 0 term: f(0) = L^2; k = M term (theta = pi) vanishes.
            a[n - 1] = (L * L + 2.0 * s) / (2.0 * M);
        }
    }
};

const WeidemanTable table;

// Upper half-plane evaluation (Im z >= 0).
cplx w_upper(cplx z) {
    const double L = table.L;
    cplx iz(-z.imag(), z.real());
    cplx Z = (L + iz) / (L - iz);
    // Horner over a_N ... a_1
    cplx p = 0.0;
    for (int n = kN - 1; n >= 0; --n) p = p * Z + table.a[n];
    cplx d = L - iz;
    return 2.0 * p / (d * d) + kSqrtPiInv / d;
}

} // namespace

cplx faddeeva_w(cplx z) {
    if (z.imag() >= 0.0) return w_upper(z);
    // w(z) = 2 exp(-z^2) - w(-z); exp may overflow, which is genuine growth.
    return 2.0 * std::exp(-z * z) - w_upper(-z);
}

cplx erfcx(cplx z) {
    if (z.real() >= 0.0) return w_upper(cplx(-z.imag(), z.real())); // w(iz)
    // erfcx(z) = 2 exp(z^2) - erfcx(-z)
    return 2.0 * std::exp(z * z) - erfcx(-z);
}

cplx erfc(cplx z) { return std::exp(-z * z) * erfcx(z); }

} // namespace cqed
