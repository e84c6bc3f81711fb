#ifndef CQED_KERNEL_SUM_HPP
#define CQED_KERNEL_SUM_HPP

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cqed {

using cplx = std::complex<double>;

constexpr int kMaxCoords = 4;

// Half-space condition sum_i w[i] * coord[i] < 0 (step-function support).
struct Wedge {
    std::array<int, kMaxCoords> w{};

    bool operator==(const Wedge&) const = default;
    bool operator<(const Wedge& o) const { return w < o.w; }
};

// One monomial of the polynomial prefactor: c * prod_i coord[i]^e[i].
struct Monomial {
    cplx c;
    std::array<uint8_t, kMaxCoords> e{};
};

// poly(coords) * exp(i * sum_i rate[i]*coord[i]) * prod_wedges theta(.)
struct ExpTerm {
    std::vector<Monomial> poly;
    std::array<cplx, kMaxCoords> rate{};
    std::vector<Wedge> wedges;

    void canonicalize();
    double coeff_magnitude() const; // sum |c| over monomials
};

// Finite sum of exponential terms with wedge supports: the pole-sum
// normal form produced by iterated residue integration.
struct KernelSum {
    int arity = 0;
    std::vector<ExpTerm> terms;
    bool has_delta = false; // delta part tracked symbolically by callers

    cplx evaluate(std::span<const double> coords) const;

    // Combine terms with identical rates/wedges/monomial structure and
    // drop terms whose merged coefficients cancel.
    void merge_terms(double rate_tol = 1e-10);

    // Plain-text dump: one line per term with coefficients, rates and
    // support inequalities (golden-file test interface).
    std::string dump() const;
};

// Step function with theta(0) = 1/2; |u| below tol counts as the boundary.
double wedge_theta(double u, double tol);

// True if the term decays (or is bounded) along `dir` whenever `dir` points
// into the term's unbounded support cone; used by property tests.
bool term_decays_along(const ExpTerm& t, std::span<const double> dir,
                       double tol = 1e-9);

// Map a kernel sum over coordinates x_i onto new coordinates via the
// integer matrix rows[i][j]: x_i = sum_j rows[i][j] * y_j; the result has
// `new_arity` coordinates and every term is multiplied by `scale`.
KernelSum map_coordinates(const KernelSum& ks,
                          const std::vector<std::array<int, kMaxCoords>>& rows,
                          int new_arity, cplx scale);

} // namespace cqed

#endif
