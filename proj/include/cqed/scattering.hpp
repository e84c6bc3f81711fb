#ifndef CQED_SCATTERING_HPP
#define CQED_SCATTERING_HPP

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cqed/model.hpp"
#include "cqed/propagators.hpp"

namespace cqed {

struct Grid1D {
    double r_min = 0.0;
    double h = 1.0;
    int n = 0;

    double r(int i) const { return r_min + h * i; }
    double r_max() const { return r_min + h * (n - 1); }
};

// Default output window: input support plus a ringdown tail of length
// tail_c / lambda_min below the pulse; h = min(d, 1/lambda_min) / ppf.
Grid1D default_grid(const SystemParams& p, const PulseParams& pulse,
                    double ppf = 24.0, double tail_c = 20.0);

struct Wavefunction1D {
    Grid1D grid;
    std::vector<cplx> amp;

    double norm2() const; // trapezoid
};

struct Wavefunction2D {
    Grid1D grid;
    std::vector<cplx> amp; // n*n, row-major in (r1, r2)

    cplx& at(int i, int j) { return amp[(size_t)i * grid.n + j]; }
    cplx at(int i, int j) const { return amp[(size_t)i * grid.n + j]; }
    double norm2() const;
    double symmetry_defect() const; // max |psi_ij - psi_ji| / max |psi|
};

double rel_l2_diff(const Wavefunction1D& a, const Wavefunction1D& b);
double rel_l2_diff(const Wavefunction2D& a, const Wavefunction2D& b);

// Scaled complex value m * exp(lg) guarding against exponent overflow in
// intermediate Gaussian-tail integrals.
struct Scaled {
    cplx m = 0.0;
    double lg = 0.0;

    cplx value() const;
};

Scaled scaled_exp(cplx coef, cplx exponent); // coef * e^{exponent}
Scaled smul(const Scaled& a, const Scaled& b);
Scaled smul(cplx c, const Scaled& a);
Scaled sadd(const Scaled& a, const Scaled& b);

// Moments of the Gaussian input against complex exponentials:
// out[m] = integral_L^inf t^m e^{i p t} psi_in(t) dt, m = 0..2,
// in closed form via the Faddeeva function.
class PulseIntegrals {
  public:
    explicit PulseIntegrals(const PulseParams& pulse);

    void upper(cplx p, double L, Scaled out[3]) const;
    void full(cplx p, Scaled out[3]) const;
    // interval [L, U]; L = -inf and U = +inf allowed
    void interval(cplx p, double L, double U, Scaled out[3]) const;

    const PulseParams& pulse() const { return pulse_; }

  private:
    PulseParams pulse_;
    double npre_;
};

struct BetaResult {
    cplx beta = 1.0;
    double err = 0.0;       // |beta| change across the last refinement
    double norm_out2 = 0.0; // two-photon output norm^2
    double norm_lin2 = 0.0; // linear-output norm^2
    double norm_one2 = 0.0; // one-photon output norm^2
    int levels = 1;
};

// Semi-analytic scattering of the Gaussian input: one-photon output,
// linear two-photon output and the nonlinear correction, plus the
// nonlinearity measure beta with a refinement-based error estimate.
// Position-space values come from the pole-sum kernel; overlaps and
// norms are evaluated in the frequency domain (Parseval), where the
// two-photon amplitude reduces to a single quadrature per point.
class TwoPhotonScattering {
  public:
    TwoPhotonScattering(const SystemParams& p, const PulseParams& pulse);
    ~TwoPhotonScattering();

    cplx one_out(double r) const;
    double one_out_norm2() const;

    cplx linear_out(double r1, double r2) const;
    cplx nonlinear_out(double r1, double r2) const;
    cplx full_out(double r1, double r2) const;

    BetaResult beta_norms(double rel_tol = 1e-4, int max_levels = 3) const;

    Wavefunction1D one_out_on(const Grid1D& g) const;
    Wavefunction2D linear_out_on(const Grid1D& g) const;
    Wavefunction2D full_out_on(const Grid1D& g) const;

    // frequency-domain pieces (exposed for tests and cross-checks)
    cplx phi_hat(double k) const;
    cplx reflection_diff(double k) const; // coupled minus empty cavity
    cplx psi_hat_lin(double k1, double k2) const;
    cplx psi_hat_nl(double k1, double k2, double refine = 1.0) const;

    const SystemParams& params() const { return p_; }
    const PulseParams& pulse() const { return pulse_; }
    const OnePhotonPropagator& one_photon() const { return op_; }
    const TwoPhotonKernel& kernel() const { return tk_; }
    double lambda_min() const { return lambda_min_; }

  private:
    struct NLTerm;
    cplx nl_eval(double r1, double r2, double refine) const;
    cplx q_integral(double k1, double k2, double refine) const;

    SystemParams p_;
    PulseParams pulse_;
    OnePhotonPropagator op_;
    TwoPhotonKernel tk_;
    PulseIntegrals pint_;
    std::vector<NLTerm> terms_;
    double lambda_min_;
};

// Grid-based propagation of an arbitrary 1D input (trapezoid plus the
// identity part of the propagator); the input is interpolated linearly
// onto output points for the identity term.
Wavefunction1D propagate_one_grid(const Wavefunction1D& in,
                                  const OnePhotonPropagator& op,
                                  const Grid1D& out);

// Direct nested-quadrature evaluation of the nonlinear output on a coarse
// grid (O(n^2 m^2); validation only).
Wavefunction2D nonlinear_out_brute(const TwoPhotonKernel& tk,
                                   const PulseParams& pulse,
                                   const Grid1D& out, const Grid1D& in);

// normalized overlap <a|b> / (|a| |b|)
cplx overlap(const Wavefunction2D& a, const Wavefunction2D& b);

using CsvMeta = std::vector<std::pair<std::string, std::string>>;

void write_wavefunction_csv(const std::string& path, const Wavefunction1D& wf,
                            const CsvMeta& meta);
void write_wavefunction_csv(const std::string& path, const Wavefunction2D& wf,
                            const CsvMeta& meta);

} // namespace cqed

#endif
