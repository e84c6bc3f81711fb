#include "cqed/propagators.hpp"

#include <cmath>

#include "cqed/residue.hpp"

namespace cqed {

namespace {

constexpr cplx kI(0.0, 1.0);

cplx expi(cplx rate, double x) { return std::exp(kI * rate * x); }

} // namespace

cplx OnePhotonPropagator::smooth(double dr) const {
    if (dr >= 0.0) return dr == 0.0 ? -0.5 * kappa : 0.0;
    return -kappa * (c1 * expi(es.omega_1, dr) + c2 * expi(es.omega_2, dr));
}

cplx OnePhotonPropagator::empty_cavity_smooth(double dr) const {
    if (dr >= 0.0) return dr == 0.0 ? -0.5 * kappa : 0.0;
    return -kappa * expi(es.omega_c_t, dr);
}

cplx OnePhotonPropagator::reflection(double omega) const {
    return 1.0 - kI * kappa * (omega - es.omega_a_t) /
                     ((omega - es.omega_1) * (omega - es.omega_2));
}

OnePhotonPropagator one_photon_propagator(const SystemParams& p) {
    OnePhotonPropagator op;
    op.es = eigenfrequencies(p);
    if (op.es.degenerate)
        throw DegeneracyError("one_photon_propagator: degenerate poles");
    op.kappa = p.kappa;
    op.c1 = (op.es.omega_2 - op.es.omega_c_t) / (op.es.omega_2 - op.es.omega_1);
    op.c2 = (op.es.omega_1 - op.es.omega_c_t) / (op.es.omega_1 - op.es.omega_2);
    return op;
}

namespace {

// shared one-photon resolvent factors of the three-fold integrals,
// coefficient order (k, q, w)
void add_j_factors(RationalExpIntegrand& f, const EigenSystem& es) {
    f.den.push_back({{1, 0, 0}, es.omega_c_t, 0.0});
    f.den.push_back({{-1, 0, 1}, es.omega_1, 0.0});
    f.den.push_back({{-1, 0, 1}, es.omega_2, 0.0});
    f.den.push_back({{0, 1, 0}, es.omega_c_t, 0.0});
    f.den.push_back({{0, -1, 1}, es.omega_1, 0.0});
    f.den.push_back({{0, -1, 1}, es.omega_2, 0.0});
}

void add_two_excitation_factors(RationalExpIntegrand& f,
                                const EigenSystem& es) {
    f.den.push_back({{-1, 0, 1}, es.omega_c_t, 0.0});
    f.den.push_back({{0, -1, 1}, es.omega_c_t, 0.0});
    for (const cplx& nu : es.nu) f.den.push_back({{0, 0, 1}, nu, 0.0});
}

RationalExpIntegrand base_integrand() {
    RationalExpIntegrand f;
    f.nvars = 3;
    f.ncoords = 3;
    f.combo[0] = {1, 0, 0};
    f.combo[1] = {0, 1, 0};
    f.combo[2] = {0, 0, 1};
    return f;
}

RationalExpIntegrand i4_integrand(const EigenSystem& es) {
    RationalExpIntegrand f = base_integrand();
    add_j_factors(f, es);
    f.den.push_back({{-1, -1, 1}, 0.0, -1.0}); // w - k - q + i*0+
    return f;
}

RationalExpIntegrand i6_integrand(const EigenSystem& es) {
    RationalExpIntegrand f = base_integrand();
    add_j_factors(f, es);
    add_two_excitation_factors(f, es);
    f.num.push_back({{0, 0, 1}, es.omega_c_t + es.omega_1, 0.0});
    f.num.push_back({{0, 0, 1}, es.omega_c_t + es.omega_2, 0.0});
    return f;
}

RationalExpIntegrand i8_integrand(const EigenSystem& es) {
    RationalExpIntegrand f = base_integrand();
    add_j_factors(f, es);
    add_two_excitation_factors(f, es);
    return f;
}

const int kOrderKQW[] = {0, 1, 2};
const int kOrderQKW[] = {1, 0, 2};

} // namespace

KernelSum eval_i4(const EigenSystem& es, double eps_deg) {
    return integrate_rational_exp(i4_integrand(es), kOrderKQW, eps_deg);
}
KernelSum eval_i6(const EigenSystem& es, double eps_deg) {
    return integrate_rational_exp(i6_integrand(es), kOrderKQW, eps_deg);
}
KernelSum eval_i8(const EigenSystem& es, double eps_deg) {
    return integrate_rational_exp(i8_integrand(es), kOrderKQW, eps_deg);
}
KernelSum eval_i4_alt(const EigenSystem& es, double eps_deg) {
    return integrate_rational_exp(i4_integrand(es), kOrderQKW, eps_deg);
}
KernelSum eval_i6_alt(const EigenSystem& es, double eps_deg) {
    return integrate_rational_exp(i6_integrand(es), kOrderQKW, eps_deg);
}
KernelSum eval_i8_alt(const EigenSystem& es, double eps_deg) {
    return integrate_rational_exp(i8_integrand(es), kOrderQKW, eps_deg);
}

cplx TwoPhotonKernel::evaluate(double r1, double r2, double r1p,
                               double r2p) const {
    const double c[4] = {r1, r2, r1p, r2p};
    return nl.evaluate(c);
}

TwoPhotonKernel two_photon_kernel(const SystemParams& p) {
    TwoPhotonKernel tk;
    tk.p = p;
    tk.es = eigenfrequencies(p);
    if (tk.es.degenerate)
        throw DegeneracyError("two_photon_kernel: degenerate one-photon poles");
    double eps = degeneracy_eps(tk.es, p);
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j)
            if (std::abs(tk.es.nu[i] - tk.es.nu[j]) < eps)
                throw DegeneracyError(
                    "two_photon_kernel: degenerate two-excitation roots");

    OnePhotonPropagator op = one_photon_propagator(p);

    KernelSum nl;
    nl.arity = 4;

    // -(smooth x smooth) cross part of the product propagator: the
    // exchange-symmetrized subtraction, supported on r1 < r1', r2 < r2'.
    {
        const std::pair<cplx, cplx> amps[3] = {
            {p.kappa, tk.es.omega_c_t},
            {-p.kappa * op.c1, tk.es.omega_1},
            {-p.kappa * op.c2, tk.es.omega_2},
        };
        for (const auto& [A1, r1rate] : amps)
            for (const auto& [A2, r2rate] : amps) {
                ExpTerm t;
                t.poly = {Monomial{-A1 * A2, {}}};
                t.rate[0] = r1rate;
                t.rate[2] = -r1rate;
                t.rate[1] = r2rate;
                t.rate[3] = -r2rate;
                t.wedges.push_back(Wedge{{1, 0, -1, 0}});
                t.wedges.push_back(Wedge{{0, 1, 0, -1}});
                nl.terms.push_back(std::move(t));
            }
    }

    // connected pieces, mapped from (x, y, z) onto (r1, r2, r1', r2')
    const std::vector<std::array<int, kMaxCoords>> mapA = {
        {1, -1, 0, 0},  // x = r1 - r2
        {0, 0, 1, -1},  // y = r1' - r2'
        {0, 1, -1, 0},  // z = r2 - r1'
    };
    const std::vector<std::array<int, kMaxCoords>> mapB = {
        {-1, 1, 0, 0},  // x = r2 - r1
        {0, 0, -1, 1},  // y = r2' - r1'
        {1, 0, 0, -1},  // z = r1 - r2'
    };
    const std::vector<std::array<int, kMaxCoords>> mapC = {
        {-1, 1, 0, 0},  // x = r2 - r1
        {0, 0, 1, -1},  // y = r1' - r2'
        {1, 0, -1, 0},  // z = r1 - r1'
    };
    const std::vector<std::array<int, kMaxCoords>> mapD = {
        {1, -1, 0, 0},  // x = r1 - r2
        {0, 0, -1, 1},  // y = r2' - r1'
        {0, 1, 0, -1},  // z = r2 - r2'
    };

    const double pi3 = M_PI * M_PI * M_PI;
    auto pref = [&](int n) {
        return -kI * std::pow(p.g, n) * p.kappa * p.kappa / (8.0 * pi3);
    };

    auto append = [&nl](const KernelSum& ks) {
        for (const auto& t : ks.terms) nl.terms.push_back(t);
    };

    KernelSum i4 = eval_i4(tk.es, eps);
    KernelSum i6 = eval_i6(tk.es, eps);
    KernelSum i8 = eval_i8(tk.es, eps);

    append(map_coordinates(i4, mapA, 4, pref(4)));
    append(map_coordinates(i4, mapB, 4, pref(4)));
    append(map_coordinates(i6, mapC, 4, pref(6)));
    append(map_coordinates(i6, mapD, 4, pref(6)));
    append(map_coordinates(i8, mapA, 4, pref(8)));
    append(map_coordinates(i8, mapB, 4, pref(8)));

    nl.merge_terms();
    tk.nl = std::move(nl);
    return tk;
}

} // namespace cqed
