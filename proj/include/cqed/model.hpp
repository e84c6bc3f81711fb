#ifndef CQED_MODEL_HPP
#define CQED_MODEL_HPP

#include <array>
#include <complex>
#include <functional>
#include <stdexcept>

namespace cqed {

using cplx = std::complex<double>;

// Raised when the atom-cavity eigenfrequencies (or the two-excitation
// roots) coincide within tolerance; the pole-sum formulas assume simple
// poles. Callers should perturb kappa by a relative 1e-6 and retry.
class DegeneracyError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Physical rates and frequencies of the atom-cavity system, all in one
// common angular-frequency unit (hbar = c = 1).
struct SystemParams {
    double g;       // atom-cavity coupling
    double omega_a; // atomic transition frequency
    double omega_c; // cavity-mode frequency
    double gamma;   // atomic decay rate into lateral modes
    double kappa;   // cavity decay rate

    void validate() const;
};

// Complex frequencies, eigenfrequencies and two-excitation roots.
struct EigenSystem {
    cplx omega_a_t; // omega_a - i gamma/2
    cplx omega_c_t; // omega_c - i kappa/2
    cplx omega_1, omega_2;               // roots of the coupled quadratic
    std::array<cplx, 3> nu;              // two-excitation cubic roots
    bool degenerate = false;             // |omega_1 - omega_2| below eps_deg
};

// Gaussian input pulse: central frequency q, coherence length d, initial
// center position a < 0 (margin * d inside r < 0).
struct PulseParams {
    double q;
    double d;
    double a;
    double margin = 5.0;

    void validate() const;
};

std::pair<cplx, cplx> complex_frequencies(const SystemParams& p);

// Degeneracy threshold: eps_deg = 1e-9 * max(|w1|, |w2|, kappa).
double degeneracy_eps(const EigenSystem& es, const SystemParams& p);

EigenSystem eigenfrequencies(const SystemParams& p);

// One-dimensional-atom coupling constant, Gamma = 4 g^2 / kappa.
double gamma_1d(const SystemParams& p);

// Scaling law: (alpha*g, alpha*omega, alpha*gamma, alpha*kappa) with
// (alpha*q, d/alpha, a/alpha) describes the same physics.
std::pair<SystemParams, PulseParams>
scale_params(const SystemParams& p, const PulseParams& pulse, double alpha);

// Unit-norm Gaussian amplitude psi_in(r - a),
// psi_in(x) = (2/(pi d^2))^{1/4} exp(-x^2/d^2 + i q x).
cplx gaussian_amplitude(const PulseParams& pulse, double r);

// Product two-photon input psi_in(r1 - a) psi_in(r2 - a).
cplx two_photon_amplitude(const PulseParams& pulse, double r1, double r2);

// Optimum absorption pulse phi(r) on -t < r < 0 (zero elsewhere):
// phi(r) = i g sqrt(kappa)/(w1* - w2*) (e^{i w1* (r+t)} - e^{i w2* (r+t)}).
struct OptimumPulse {
    cplx coeff;
    cplx w1c, w2c; // conjugated eigenfrequencies
    double t;

    cplx operator()(double r) const;
    double norm2() const; // integral of |phi|^2 over (-t, 0), closed form
};

OptimumPulse optimum_pulse(const SystemParams& p, double t);

} // namespace cqed

#endif
