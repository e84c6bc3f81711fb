#ifndef CQED_RESIDUE_HPP
#define CQED_RESIDUE_HPP

#include <span>
#include <vector>

#include "cqed/kernel_sum.hpp"

namespace cqed {

constexpr int kMaxVars = 3;

// One affine factor sum_v coef[v] * var_v - b, where the constant carries
// an optional +i*delta regularization (delta -> 0+) used only to pick the
// half-plane of poles sitting on the real axis.
struct AffineFactor {
    std::array<int, kMaxVars> coef{};
    cplx b;
    double delta = 0.0; // Im(b) includes delta * (+0)
};

// Integral over all real var_v of
//   prefactor * exp(i sum_v var_v (combo[v] . coords))
//             * prod(num) / prod(den)
// where combo[v] is an integer combination of the output coordinates.
struct RationalExpIntegrand {
    int nvars = 0;
    int ncoords = 0;
    std::array<std::array<int, kMaxCoords>, kMaxVars> combo{};
    std::vector<AffineFactor> den;
    std::vector<AffineFactor> num;
    cplx prefactor = 1.0;
};

// Evaluate by iterated contour integration in the given variable order.
// Repeated poles are supported only at the last variable (they produce
// polynomial prefactors); a repeated pole earlier, or a pole pinching the
// contour within eps_deg, throws std::runtime_error.
KernelSum integrate_rational_exp(const RationalExpIntegrand& f,
                                 std::span<const int> order, double eps_deg);

} // namespace cqed

#endif
