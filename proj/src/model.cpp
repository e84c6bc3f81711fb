#include "cqed/model.hpp"

#include <algorithm>
#include <cmath>

namespace cqed {

namespace {

bool root_less(const cplx& a, const cplx& b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
}

// Roots of z^2 + b z + c with a cancellation-safe quadratic formula.
std::pair<cplx, cplx> quadratic_roots(cplx b, cplx c) {
    cplx disc = std::sqrt(b * b - 4.0 * c);
    // pick the sign that avoids cancellation in -b -+ disc
    cplx q = (std::real(std::conj(b) * disc) >= 0.0) ? -0.5 * (b + disc)
                                                     : -0.5 * (b - disc);
    cplx r1 = q;
    cplx r2 = (q != 0.0) ? c / q : -b - q;
    if (root_less(r2, r1)) std::swap(r1, r2);
    return {r1, r2};
}

} // namespace

void SystemParams::validate() const {
    if (!(g > 0.0) && g != 0.0)
        throw std::invalid_argument("SystemParams: g must be >= 0 and finite");
    if (!(kappa > 0.0))
        throw std::invalid_argument("SystemParams: kappa must be > 0");
    if (gamma < 0.0)
        throw std::invalid_argument("SystemParams: gamma must be >= 0");
    for (double v : {g, omega_a, omega_c, gamma, kappa})
        if (!std::isfinite(v))
            throw std::invalid_argument("SystemParams: non-finite value");
}

void PulseParams::validate() const {
    if (!(d > 0.0)) throw std::invalid_argument("PulseParams: d must be > 0");
    if (!(a + margin * d < 0.0))
        throw std::invalid_argument(
            "PulseParams: pulse support must lie in r < 0 (a + margin*d < 0)");
    for (double v : {q, d, a})
        if (!std::isfinite(v))
            throw std::invalid_argument("PulseParams: non-finite value");
}

std::pair<cplx, cplx> complex_frequencies(const SystemParams& p) {
    return {cplx(p.omega_a, -0.5 * p.gamma), cplx(p.omega_c, -0.5 * p.kappa)};
}

double degeneracy_eps(const EigenSystem& es, const SystemParams& p) {
    return 1e-9 *
           std::max({std::abs(es.omega_1), std::abs(es.omega_2), p.kappa});
}

EigenSystem eigenfrequencies(const SystemParams& p) {
    p.validate();
    EigenSystem es;
    std::tie(es.omega_a_t, es.omega_c_t) = complex_frequencies(p);

    // (w - w1)(w - w2) = (w - wa)(w - wc) - g^2
    cplx b = -(es.omega_a_t + es.omega_c_t);
    cplx c = es.omega_a_t * es.omega_c_t - p.g * p.g;
    std::tie(es.omega_1, es.omega_2) = quadratic_roots(b, c);

    // (w - nu0)(w - nu1)(w - nu2)
    //   = (w - wa - wc) [(w - 2 wc)(w - wa - wc) - 2 g^2]
    cplx s = es.omega_a_t + es.omega_c_t;
    auto [n1, n2] =
        quadratic_roots(-(2.0 * es.omega_c_t + s), 2.0 * es.omega_c_t * s -
                                                       2.0 * p.g * p.g);
    es.nu = {s, n1, n2};
    std::sort(es.nu.begin(), es.nu.end(), root_less);

    es.degenerate =
        std::abs(es.omega_1 - es.omega_2) < degeneracy_eps(es, p);
    return es;
}

double gamma_1d(const SystemParams& p) { return 4.0 * p.g * p.g / p.kappa; }

std::pair<SystemParams, PulseParams>
scale_params(const SystemParams& p, const PulseParams& pulse, double alpha) {
    if (!(alpha > 0.0))
        throw std::invalid_argument("scale_params: alpha must be > 0");
    SystemParams sp{alpha * p.g, alpha * p.omega_a, alpha * p.omega_c,
                    alpha * p.gamma, alpha * p.kappa};
    PulseParams sq{alpha * pulse.q, pulse.d / alpha, pulse.a / alpha,
                   pulse.margin};
    return {sp, sq};
}

cplx gaussian_amplitude(const PulseParams& pulse, double r) {
    double x = r - pulse.a;
    double norm = std::pow(2.0 / (M_PI * pulse.d * pulse.d), 0.25);
    return norm * std::exp(cplx(-x * x / (pulse.d * pulse.d), pulse.q * x));
}

cplx two_photon_amplitude(const PulseParams& pulse, double r1, double r2) {
    return gaussian_amplitude(pulse, r1) * gaussian_amplitude(pulse, r2);
}

cplx OptimumPulse::operator()(double r) const {
    if (r <= -t || r >= 0.0) return 0.0;
    cplx i(0.0, 1.0);
    return coeff * (std::exp(i * w1c * (r + t)) - std::exp(i * w2c * (r + t)));
}

namespace {
// integral of e^{i mu u} over (0, t)
cplx phase_integral(cplx mu, double t) {
    cplx i(0.0, 1.0);
    if (std::abs(mu) * t < 1e-8) return t * (1.0 + 0.5 * i * mu * t);
    return (std::exp(i * mu * t) - 1.0) / (i * mu);
}
} // namespace

double OptimumPulse::norm2() const {
    cplx w1 = std::conj(w1c), w2 = std::conj(w2c);
    cplx v = phase_integral(w1c - w1, t) + phase_integral(w2c - w2, t) -
             phase_integral(w1c - w2, t) - phase_integral(w2c - w1, t);
    return std::norm(coeff) * v.real();
}

OptimumPulse optimum_pulse(const SystemParams& p, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("optimum_pulse: t must be > 0");
    EigenSystem es = eigenfrequencies(p);
    if (es.degenerate)
        throw DegeneracyError("optimum_pulse: degenerate eigenfrequencies");
    OptimumPulse phi;
    phi.w1c = std::conj(es.omega_1);
    phi.w2c = std::conj(es.omega_2);
    phi.coeff = cplx(0.0, 1.0) * p.g * std::sqrt(p.kappa) / (phi.w1c - phi.w2c);
    phi.t = t;
    return phi;
}

} // namespace cqed
