#ifndef CQED_FADDEEVA_HPP
#define CQED_FADDEEVA_HPP

#include <complex>

namespace cqed {

using cplx = std::complex<double>;

// Faddeeva function w(z) = exp(-z^2) erfc(-iz), valid in the whole plane.
// Rational approximation after Weideman (SIAM J. Numer. Anal. 31, 1497),
// degree high enough for ~1e-14 relative accuracy in the upper half-plane;
// the lower half-plane uses w(z) = 2 exp(-z^2) - w(-z).
cplx faddeeva_w(cplx z);

// Scaled complementary error function erfcx(z) = exp(z^2) erfc(z).
cplx erfcx(cplx z);

// Complementary error function of complex argument.
cplx erfc(cplx z);

} // namespace cqed

#endif
