#ifndef CQED_PROPAGATORS_HPP
#define CQED_PROPAGATORS_HPP

#include "cqed/kernel_sum.hpp"
#include "cqed/model.hpp"

namespace cqed {

// One-photon propagator in the moving frame. The full propagator is
// delta(dr) plus a smooth part supported on dr < 0:
//   smooth(dr) = -kappa theta(-dr) [c1 e^{i w1 dr} + c2 e^{i w2 dr}]
// with c1 + c2 = 1.
struct OnePhotonPropagator {
    EigenSystem es;
    double kappa;
    cplx c1, c2;

    cplx smooth(double dr) const;           // without the delta part
    cplx empty_cavity_smooth(double dr) const; // g = 0 reference
    cplx reflection(double omega) const;    // single-frequency amplitude
};

OnePhotonPropagator one_photon_propagator(const SystemParams& p);

// Connected two-photon pieces over (x, y, z) = (r1-r2, r1'-r2', r2-r1')
// (or the swapped assignment); exposed for quadrature cross-checks.
KernelSum eval_i4(const EigenSystem& es, double eps_deg);
KernelSum eval_i6(const EigenSystem& es, double eps_deg);
KernelSum eval_i8(const EigenSystem& es, double eps_deg);

// Same integrals with the variable order (q, k, w) instead of (k, q, w);
// the results must agree (consistency check).
KernelSum eval_i4_alt(const EigenSystem& es, double eps_deg);
KernelSum eval_i6_alt(const EigenSystem& es, double eps_deg);
KernelSum eval_i8_alt(const EigenSystem& es, double eps_deg);

// Nonlinear part of the two-photon propagator over (r1, r2, r1', r2'):
// everything beyond the symmetrized product of one-photon propagators.
// Supported on max(r1, r2) < min(r1', r2').
struct TwoPhotonKernel {
    SystemParams p;
    EigenSystem es;
    KernelSum nl; // arity 4

    cplx evaluate(double r1, double r2, double r1p, double r2p) const;
};

TwoPhotonKernel two_photon_kernel(const SystemParams& p);

} // namespace cqed

#endif
