#include "cqed/scattering.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "cqed/faddeeva.hpp"

namespace cqed {

namespace {

constexpr cplx kI(0.0, 1.0);
constexpr double kInf = std::numeric_limits<double>::infinity();
const double kSqrtPi = std::sqrt(M_PI);

// 8-point Gauss-Legendre rule on [-1, 1]
constexpr double kGLx[8] = {-0.96028985649753623, -0.79666647741362674,
                            -0.52553240991632899, -0.18343464249564980,
                            0.18343464249564980,  0.52553240991632899,
                            0.79666647741362674,  0.96028985649753623};
constexpr double kGLw[8] = {0.10122853629037626, 0.22238103445337447,
                            0.31370664587788729, 0.36268378337836198,
                            0.36268378337836198, 0.31370664587788729,
                            0.22238103445337447, 0.10122853629037626};

double ipow(double x, int e) {
    double r = 1.0;
    for (int i = 0; i < e; ++i) r *= x;
    return r;
}

// a - b with infinities resolved toward the correct limit
double sub_inf(double a, double b) {
    if (a == -kInf || b == kInf) return -kInf;
    if (a == kInf || b == -kInf) return kInf;
    return a - b;
}

struct Mesh {
    std::vector<double> x, w;

    void clear() {
        x.clear();
        w.clear();
    }
    void add_panel(double a, double b) {
        double c = 0.5 * (a + b), h = 0.5 * (b - a);
        for (int i = 0; i < 8; ++i) {
            x.push_back(c + h * kGLx[i]);
            w.push_back(h * kGLw[i]);
        }
    }
};

// Panels over [lo, hi] graded toward the features (center, fine width):
// panel size ~ fine near a feature, growing with distance.
void feature_mesh(double lo, double hi,
                  const std::vector<std::pair<double, double>>& feats,
                  double refine, Mesh& m) {
    m.clear();
    if (!(hi > lo)) return;
    thread_local std::vector<double> ed;
    ed.clear();
    ed.push_back(lo);
    ed.push_back(hi);
    for (const auto& [c, f0] : feats) {
        double f = f0 / refine;
        if (!(f > 0.0)) throw std::invalid_argument("feature_mesh: fine <= 0");
        for (int dir = -1; dir <= 1; dir += 2) {
            double pos = c, step = f;
            while (dir > 0 ? pos < hi : pos > lo) {
                if (pos > lo && pos < hi) ed.push_back(pos);
                pos += dir * step;
                step *= 1.7;
            }
        }
    }
    std::sort(ed.begin(), ed.end());
    auto target = [&](double x) {
        double t = kInf;
        for (const auto& [c, f0] : feats)
            t = std::min(t, std::max(f0 / refine, 0.45 * std::abs(x - c)));
        return t;
    };
    thread_local std::vector<double> keep;
    keep.clear();
    keep.push_back(lo);
    for (double e : ed) {
        if (e <= keep.back() || e >= hi) continue;
        if (e - keep.back() >= 0.32 * target(0.5 * (e + keep.back())))
            keep.push_back(e);
    }
    keep.push_back(hi);
    if (keep.size() > 40000) throw std::runtime_error("feature_mesh: too fine");
    for (size_t i = 0; i + 1 < keep.size(); ++i)
        m.add_panel(keep[i], keep[i + 1]);
}

} // namespace

// ---------------------------------------------------------------- scaled

cplx Scaled::value() const {
    if (m == cplx(0.0)) return 0.0;
    if (lg > 700.0) throw std::overflow_error("Scaled::value overflow");
    if (lg < -745.0) return 0.0;
    return m * std::exp(lg);
}

Scaled scaled_exp(cplx coef, cplx exponent) {
    Scaled s;
    s.m = coef * std::exp(kI * exponent.imag());
    s.lg = exponent.real();
    if (s.m == cplx(0.0)) s.lg = 0.0;
    return s;
}

Scaled smul(const Scaled& a, const Scaled& b) {
    Scaled s;
    s.m = a.m * b.m;
    s.lg = (s.m == cplx(0.0)) ? 0.0 : a.lg + b.lg;
    return s;
}

Scaled smul(cplx c, const Scaled& a) {
    Scaled s;
    s.m = c * a.m;
    s.lg = (s.m == cplx(0.0)) ? 0.0 : a.lg;
    return s;
}

Scaled sadd(const Scaled& a, const Scaled& b) {
    if (a.m == cplx(0.0)) return b;
    if (b.m == cplx(0.0)) return a;
    Scaled s;
    s.lg = std::max(a.lg, b.lg);
    s.m = a.m * std::exp(a.lg - s.lg) + b.m * std::exp(b.lg - s.lg);
    if (s.m == cplx(0.0)) s.lg = 0.0;
    return s;
}

// ------------------------------------------------------ pulse integrals

PulseIntegrals::PulseIntegrals(const PulseParams& pulse) : pulse_(pulse) {
    pulse_.validate();
    npre_ = std::pow(2.0 / (M_PI * pulse_.d * pulse_.d), 0.25);
}

void PulseIntegrals::upper(cplx p, double L, Scaled out[3]) const {
    const double d = pulse_.d, a = pulse_.a, q = pulse_.q;
    const cplx P = q + p;
    const double x0 = L - a;
    const cplx E = cplx(-x0 * x0 / (d * d), 0.0) + kI * P * x0;
    const cplx zeta = x0 / d - kI * P * d * 0.5;
    const Scaled gl = scaled_exp(1.0, E);

    Scaled B0;
    if (zeta.real() >= 0.0) {
        B0 = scaled_exp(0.5 * d * kSqrtPi * faddeeva_w(kI * zeta), E);
    } else {
        B0 = sadd(scaled_exp(d * kSqrtPi, -P * P * d * d * 0.25),
                  scaled_exp(-0.5 * d * kSqrtPi * faddeeva_w(-kI * zeta), E));
    }
    Scaled B1 = sadd(smul(kI * P * d * d * 0.5, B0), smul(d * d * 0.5, gl));
    Scaled B2 = smul(d * d * 0.5,
                     sadd(sadd(smul(kI * P, B1), smul(cplx(x0), gl)), B0));

    const Scaled C = scaled_exp(npre_, kI * p * a);
    out[0] = smul(C, B0);
    out[1] = smul(C, sadd(smul(cplx(a), B0), B1));
    out[2] = smul(C, sadd(sadd(smul(cplx(a * a), B0), smul(cplx(2.0 * a), B1)),
                          B2));
}

void PulseIntegrals::full(cplx p, Scaled out[3]) const {
    const double d = pulse_.d, a = pulse_.a, q = pulse_.q;
    const cplx P = q + p;
    Scaled B0 = scaled_exp(d * kSqrtPi, -P * P * d * d * 0.25);
    Scaled B1 = smul(kI * P * d * d * 0.5, B0);
    Scaled B2 = smul(d * d * 0.5, sadd(smul(kI * P, B1), B0));
    const Scaled C = scaled_exp(npre_, kI * p * a);
    out[0] = smul(C, B0);
    out[1] = smul(C, sadd(smul(cplx(a), B0), B1));
    out[2] = smul(C, sadd(sadd(smul(cplx(a * a), B0), smul(cplx(2.0 * a), B1)),
                          B2));
}

void PulseIntegrals::interval(cplx p, double L, double U, Scaled out[3]) const {
    if (U == kInf) {
        if (L == -kInf)
            full(p, out);
        else
            upper(p, L, out);
        return;
    }
    Scaled lo[3], hi[3];
    if (L == -kInf)
        full(p, lo);
    else
        upper(p, L, lo);
    upper(p, U, hi);
    for (int m = 0; m < 3; ++m) out[m] = sadd(lo[m], smul(-1.0, hi[m]));
}

// ------------------------------------------------------ grid utilities

Grid1D default_grid(const SystemParams& p, const PulseParams& pulse,
                    double ppf, double tail_c) {
    EigenSystem es = eigenfrequencies(p);
    double lmin = std::min({0.5 * p.kappa, -es.omega_1.imag(),
                            -es.omega_2.imag()});
    double r_max = std::min(0.0, pulse.a + 8.5 * pulse.d);
    double r_min = pulse.a - 8.5 * pulse.d - tail_c / lmin;
    double h = std::min(pulse.d, 1.0 / lmin) / ppf;
    Grid1D g;
    g.n = (int)std::ceil((r_max - r_min) / h) + 1;
    g.h = h;
    g.r_min = r_max - h * (g.n - 1);
    return g;
}

double Wavefunction1D::norm2() const {
    double s = 0.0;
    for (int i = 0; i < grid.n; ++i) {
        double w = (i == 0 || i == grid.n - 1) ? 0.5 : 1.0;
        s += w * std::norm(amp[i]);
    }
    return s * grid.h;
}

double Wavefunction2D::norm2() const {
    double s = 0.0;
    for (int i = 0; i < grid.n; ++i) {
        double wi = (i == 0 || i == grid.n - 1) ? 0.5 : 1.0;
        for (int j = 0; j < grid.n; ++j) {
            double wj = (j == 0 || j == grid.n - 1) ? 0.5 : 1.0;
            s += wi * wj * std::norm(at(i, j));
        }
    }
    return s * grid.h * grid.h;
}

double Wavefunction2D::symmetry_defect() const {
    double mx = 0.0, df = 0.0;
    for (int i = 0; i < grid.n; ++i)
        for (int j = 0; j <= i; ++j) {
            mx = std::max(mx, std::abs(at(i, j)));
            df = std::max(df, std::abs(at(i, j) - at(j, i)));
        }
    return mx > 0.0 ? df / mx : 0.0;
}

namespace {

void check_same_grid(const Grid1D& a, const Grid1D& b) {
    if (a.n != b.n || std::abs(a.h - b.h) > 1e-12 * a.h ||
        std::abs(a.r_min - b.r_min) > 1e-9)
        throw std::invalid_argument("wavefunctions on different grids");
}

} // namespace

double rel_l2_diff(const Wavefunction1D& a, const Wavefunction1D& b) {
    check_same_grid(a.grid, b.grid);
    double dd = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.amp.size(); ++i) {
        dd += std::norm(a.amp[i] - b.amp[i]);
        na += std::norm(a.amp[i]);
        nb += std::norm(b.amp[i]);
    }
    double den = std::max(na, nb);
    return den > 0.0 ? std::sqrt(dd / den) : 0.0;
}

double rel_l2_diff(const Wavefunction2D& a, const Wavefunction2D& b) {
    check_same_grid(a.grid, b.grid);
    double dd = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.amp.size(); ++i) {
        dd += std::norm(a.amp[i] - b.amp[i]);
        na += std::norm(a.amp[i]);
        nb += std::norm(b.amp[i]);
    }
    double den = std::max(na, nb);
    return den > 0.0 ? std::sqrt(dd / den) : 0.0;
}

cplx overlap(const Wavefunction2D& a, const Wavefunction2D& b) {
    check_same_grid(a.grid, b.grid);
    cplx s = 0.0;
    double na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.amp.size(); ++i) {
        s += std::conj(a.amp[i]) * b.amp[i];
        na += std::norm(a.amp[i]);
        nb += std::norm(b.amp[i]);
    }
    double den = std::sqrt(na * nb);
    return den > 0.0 ? s / den : cplx(0.0);
}

// -------------------------------------------------------- scattering

// One compiled term of the nonlinear kernel integrated against the
// product input over (r1', r2'). Support wedges are classified by how
// they involve the primed coordinates: pure steps in (r1, r2), bounds
// on one primed coordinate, or oblique conditions on r1' - r2'.
struct TwoPhotonScattering::NLTerm {
    struct Mono {
        cplx c;
        int e0, e1, e2, e3;
    };
    std::vector<Mono> monos;
    cplx rate0, rate1, p1, p2;
    std::vector<std::array<int, 2>> steps;          // w0 r1 + w1 r2 < 0
    std::vector<std::array<int, 2>> lo1, hi1;       // r1' >/< c0 r1 + c1 r2
    std::vector<std::array<int, 2>> lo2, hi2;       // r2' >/< c0 r1 + c1 r2
    std::vector<std::array<int, 2>> vlo, vhi;       // r1'-r2' >/< c0 r1+c1 r2
    bool oblique = false;
    bool need[3][3] = {};
    double wpanel = 0.0, trunc = 0.0;
};

TwoPhotonScattering::~TwoPhotonScattering() = default;

TwoPhotonScattering::TwoPhotonScattering(const SystemParams& p,
                                         const PulseParams& pulse)
    : p_(p), pulse_(pulse), op_(one_photon_propagator(p)),
      tk_(two_photon_kernel(p)), pint_(pulse) {
    pulse_.validate();
    lambda_min_ = std::min({0.5 * p_.kappa, -op_.es.omega_1.imag(),
                            -op_.es.omega_2.imag()});

    const double d = pulse_.d, q0 = pulse_.q;
    for (const auto& t : tk_.nl.terms) {
        NLTerm nt;
        nt.rate0 = t.rate[0];
        nt.rate1 = t.rate[1];
        nt.p1 = t.rate[2];
        nt.p2 = t.rate[3];
        for (const auto& w : t.wedges) {
            int pp1 = w.w[2], pp2 = w.w[3];
            std::array<int, 2> c{w.w[0], w.w[1]};
            std::array<int, 2> nc{-w.w[0], -w.w[1]};
            if (pp1 == 0 && pp2 == 0) {
                if (c[0] == 0 && c[1] == 0)
                    throw std::runtime_error("nl term: empty wedge");
                nt.steps.push_back(c);
            } else if (pp1 == -1 && pp2 == 0) {
                nt.lo1.push_back(c);
            } else if (pp1 == 1 && pp2 == 0) {
                nt.hi1.push_back(nc);
            } else if (pp1 == 0 && pp2 == -1) {
                nt.lo2.push_back(c);
            } else if (pp1 == 0 && pp2 == 1) {
                nt.hi2.push_back(nc);
            } else if (pp1 == -1 && pp2 == 1) {
                nt.vlo.push_back(c);
            } else if (pp1 == 1 && pp2 == -1) {
                nt.vhi.push_back(nc);
            } else {
                throw std::runtime_error("nl term: unsupported wedge shape");
            }
        }
        nt.oblique = !nt.vlo.empty() || !nt.vhi.empty();
        for (const auto& mo : t.poly) {
            NLTerm::Mono m{mo.c, mo.e[0], mo.e[1], mo.e[2], mo.e[3]};
            if (m.e2 > 2 || m.e3 > 2)
                throw std::runtime_error("nl term: monomial degree > 2");
            nt.need[m.e2][m.e3] = true;
            nt.monos.push_back(m);
        }
        double svar = std::abs(nt.p1) + std::abs(nt.p2) + 2.0 * std::abs(q0) +
                      4.0 / d;
        nt.wpanel = std::min(0.6 * d, 3.0 / svar);
        double lam = std::max(nt.p1.imag(), 0.0) + std::max(nt.p2.imag(), 0.0);
        nt.trunc = 50.0 / std::max(lam, 1e-300);
        terms_.push_back(std::move(nt));
    }
}

cplx TwoPhotonScattering::one_out(double r) const {
    cplx out = gaussian_amplitude(pulse_, r);
    const cplx cj[2] = {op_.c1, op_.c2};
    const cplx wj[2] = {op_.es.omega_1, op_.es.omega_2};
    for (int j = 0; j < 2; ++j) {
        Scaled M[3];
        pint_.upper(-wj[j], r, M);
        out += smul(-p_.kappa * cj[j], smul(scaled_exp(1.0, kI * wj[j] * r),
                                            M[0]))
                   .value();
    }
    return out;
}

cplx TwoPhotonScattering::linear_out(double r1, double r2) const {
    return one_out(r1) * one_out(r2);
}

cplx TwoPhotonScattering::full_out(double r1, double r2) const {
    return linear_out(r1, r2) + nonlinear_out(r1, r2);
}

cplx TwoPhotonScattering::nonlinear_out(double r1, double r2) const {
    return nl_eval(r1, r2, 1.0);
}

cplx TwoPhotonScattering::nl_eval(double r1, double r2, double refine) const {
    const double d = pulse_.d, a = pulse_.a, q0 = pulse_.q;
    const double npre = std::pow(2.0 / (M_PI * d * d), 0.25);
    const double supp_lo = a - 8.5 * d, supp_hi = a + 8.5 * d;
    const double btol = 1e-12 * (1.0 + std::abs(r1) + std::abs(r2));

    cplx total = 0.0;
    for (const auto& t : terms_) {
        double th = 1.0;
        for (const auto& s : t.steps)
            th *= wedge_theta(s[0] * r1 + s[1] * r2, btol);
        if (th == 0.0) continue;

        auto lin = [&](const std::array<int, 2>& c) {
            return c[0] * r1 + c[1] * r2;
        };
        double L1 = -kInf, U1 = kInf, L2 = -kInf, U2 = kInf;
        for (const auto& c : t.lo1) L1 = std::max(L1, lin(c));
        for (const auto& c : t.hi1) U1 = std::min(U1, lin(c));
        for (const auto& c : t.lo2) L2 = std::max(L2, lin(c));
        for (const auto& c : t.hi2) U2 = std::min(U2, lin(c));

        Scaled val;
        if (!t.oblique) {
            if (L1 >= U1 || L2 >= U2) continue;
            Scaled Ta[3], Tb[3];
            pint_.interval(t.p1, L1, U1, Ta);
            pint_.interval(t.p2, L2, U2, Tb);
            for (const auto& m : t.monos)
                val = sadd(val, smul(m.c * ipow(r1, m.e0) * ipow(r2, m.e1),
                                     smul(Ta[m.e2], Tb[m.e3])));
        } else {
            double ol = -kInf, oh = kInf;
            for (const auto& c : t.vlo) ol = std::max(ol, lin(c));
            for (const auto& c : t.vhi) oh = std::min(oh, lin(c));
            if (ol >= oh || L1 >= U1 || L2 >= U2) continue;

            double tlo = std::max({L2, sub_inf(L1, oh), supp_lo});
            double thi = std::min({U2, sub_inf(U1, ol), supp_hi});
            thi = std::min(thi, std::max(a, tlo) + t.trunc);
            if (tlo >= thi) continue;

            // segment ends where the active inner bound switches
            double splits[6];
            int ns = 0;
            splits[ns++] = tlo;
            for (double s : {sub_inf(L1, ol), sub_inf(L1, oh), sub_inf(U1, ol),
                             sub_inf(U1, oh)})
                if (s > tlo && s < thi) splits[ns++] = s;
            splits[ns++] = thi;
            std::sort(splits, splits + ns);

            Scaled S[3][3];
            const double wp = t.wpanel / refine;
            for (int si = 0; si + 1 < ns; ++si) {
                double A = splits[si], B = splits[si + 1];
                int np = (int)std::ceil((B - A) / wp);
                for (int pi = 0; pi < np; ++pi) {
                    double pa = A + (B - A) * pi / np;
                    double pb = A + (B - A) * (pi + 1) / np;
                    double c = 0.5 * (pa + pb), hh = 0.5 * (pb - pa);
                    for (int g = 0; g < 8; ++g) {
                        double tt = c + hh * kGLx[g];
                        double lower = std::max(L1, tt + ol);
                        double upper = std::min(U1, tt + oh);
                        if (lower >= upper) continue;
                        Scaled F[3];
                        pint_.interval(t.p1, lower, upper, F);
                        double x = tt - a;
                        Scaled base = scaled_exp(
                            npre * hh * kGLw[g],
                            kI * t.p2 * tt +
                                cplx(-x * x / (d * d), q0 * x));
                        for (int e2 = 0; e2 < 3; ++e2)
                            for (int e3 = 0; e3 < 3; ++e3) {
                                if (!t.need[e2][e3]) continue;
                                S[e2][e3] = sadd(
                                    S[e2][e3],
                                    smul(ipow(tt, e3), smul(base, F[e2])));
                            }
                    }
                }
            }
            for (const auto& m : t.monos)
                val = sadd(val, smul(m.c * ipow(r1, m.e0) * ipow(r2, m.e1),
                                     S[m.e2][m.e3]));
        }
        total += smul(th, smul(scaled_exp(1.0, kI * (t.rate0 * r1 +
                                                     t.rate1 * r2)),
                               val))
                     .value();
    }
    return total;
}

// ------------------------------------------------- frequency domain

cplx TwoPhotonScattering::phi_hat(double k) const {
    const double d = pulse_.d, q0 = pulse_.q, a = pulse_.a;
    double u = d * (k - q0);
    double g = -0.25 * u * u;
    if (g < -700.0) return 0.0;
    return std::pow(d * d / (2.0 * M_PI), 0.25) * std::exp(g) *
           std::exp(-kI * k * a);
}

cplx TwoPhotonScattering::reflection_diff(double k) const {
    const auto& es = op_.es;
    return kI * p_.kappa *
           (1.0 / (k - es.omega_c_t) - op_.c1 / (k - es.omega_1) -
            op_.c2 / (k - es.omega_2));
}

cplx TwoPhotonScattering::psi_hat_lin(double k1, double k2) const {
    return op_.reflection(k1) * op_.reflection(k2) * phi_hat(k1) * phi_hat(k2);
}

// Connected part of the frequency-domain output: the threefold pole
// integrals collapse onto a single relative-momentum quadrature once
// total energy is fixed; the energy-conserving pole is handled by
// subtraction plus the explicit principal value and half-residue.
cplx TwoPhotonScattering::q_integral(double k1, double k2,
                                     double refine) const {
    const auto& es = op_.es;
    const double d = pulse_.d, q0 = pulse_.q;
    const double E = k1 + k2;

    const double s50 = 14.142135623730951 / d;
    double qlo = std::max(q0, E - q0) - s50;
    double qhi = std::min(q0, E - q0) + s50;
    if (!(qhi > qlo)) return 0.0;
    double span = qhi - qlo;
    if (std::min(std::abs(k2 - qlo), std::abs(k2 - qhi)) < 1e-9 * span) {
        qlo -= 1e-6 * span;
        qhi += 2e-6 * span;
    }

    const double l1 = -es.omega_1.imag(), l2 = -es.omega_2.imag();
    const double eps = 1e-9 * (1.0 + std::abs(E) + p_.kappa);
    thread_local std::vector<std::pair<double, double>> feats;
    feats.clear();
    feats.emplace_back(q0, 0.5 / d);
    feats.emplace_back(E - q0, 0.5 / d);
    feats.emplace_back(k2, 0.5 / d);
    feats.emplace_back(es.omega_c_t.real(), std::max(0.25 * p_.kappa, eps));
    feats.emplace_back(E - es.omega_1.real(), std::max(0.5 * l1, eps));
    feats.emplace_back(E - es.omega_2.real(), std::max(0.5 * l2, eps));

    thread_local Mesh mesh;
    feature_mesh(qlo, qhi, feats, refine, mesh);

    auto B0 = [&](double q) {
        return phi_hat(q) * phi_hat(E - q) /
               ((q - es.omega_c_t) * (E - q - es.omega_1) *
                (E - q - es.omega_2));
    };

    const bool sub = (k2 > qlo - 2.0 / d && k2 < qhi + 2.0 / d);
    const bool inr = (k2 > qlo && k2 < qhi);
    const cplx gk2 = sub ? B0(k2) : cplx(0.0);

    cplx S4 = 0.0, S68 = 0.0;
    for (size_t i = 0; i < mesh.x.size(); ++i) {
        double q = mesh.x[i], w = mesh.w[i];
        cplx b = B0(q);
        S68 += w * b / (E - q - es.omega_c_t);
        if (sub) {
            if (std::abs(k2 - q) < 1e-7 * (1.0 + std::abs(k2))) {
                // node (nearly) on the subtraction point: the integrand is
                // regular there with limit -B0'(k2)
                double h = 1e-5 * (1.0 + std::abs(k2));
                S4 += w * (B0(k2 - h) - B0(k2 + h)) / (2.0 * h);
                continue;
            }
            S4 += w * (b - gk2) / (k2 - q);
        } else {
            S4 += w * b / (k2 - q);
        }
    }
    if (sub)
        S4 += gk2 * (std::log(std::abs(k2 - qlo) / std::abs(k2 - qhi)) -
                     (inr ? kI * M_PI : cplx(0.0)));

    const cplx A0 = 1.0 / ((k1 - es.omega_c_t) * (k2 - es.omega_1) *
                           (k2 - es.omega_2));
    const cplx N6 = (E - es.omega_c_t - es.omega_1) *
                    (E - es.omega_c_t - es.omega_2);
    const cplx C5 = 1.0 / ((k2 - es.omega_c_t) * (E - es.nu[0]) *
                           (E - es.nu[1]) * (E - es.nu[2]));
    const double g2 = p_.g * p_.g, k2a = p_.kappa * p_.kappa;
    const cplx w4 = -kI * g2 * g2 * k2a / (2.0 * M_PI);
    const cplx w6 = w4 * g2;
    const cplx w8 = w6 * g2;

    return A0 * (w4 * S4 + (w6 * N6 + w8) * C5 * S68);
}

cplx TwoPhotonScattering::psi_hat_nl(double k1, double k2,
                                     double refine) const {
    cplx part1 = -reflection_diff(k1) * reflection_diff(k2) * phi_hat(k1) *
                 phi_hat(k2);
    return part1 + q_integral(k1, k2, refine) + q_integral(k2, k1, refine);
}

namespace {

struct KTemplate {
    double lo, hi;
    std::vector<std::pair<double, double>> feats;
};

KTemplate outer_features(const SystemParams& p, const EigenSystem& es,
                         const PulseParams& pulse) {
    const double d = pulse.d, q0 = pulse.q;
    double lmin = std::min({0.5 * p.kappa, -es.omega_1.imag(),
                            -es.omega_2.imag()});
    double S = std::max({p.kappa, p.g, std::abs(q0), 1.0 / d,
                         std::abs(es.omega_1), std::abs(es.omega_2)});
    const double eps = 1e-6 * S;

    KTemplate kt;
    kt.feats.emplace_back(q0, 0.5 / d);
    kt.feats.emplace_back(es.omega_1.real(),
                          std::max(0.5 * -es.omega_1.imag(), eps));
    kt.feats.emplace_back(es.omega_2.real(),
                          std::max(0.5 * -es.omega_2.imag(), eps));
    kt.feats.emplace_back(es.omega_c_t.real(), std::max(0.25 * p.kappa, eps));
    // total-energy resonances sit on the antidiagonal; grade near their
    // single-axis shadows
    for (const cplx& nu : es.nu)
        kt.feats.emplace_back(nu.real() - q0,
                              std::max(0.5 * std::max(-nu.imag(), lmin), eps));

    double cmin = kInf, cmax = -kInf;
    for (const auto& [c, f] : kt.feats) {
        cmin = std::min(cmin, c);
        cmax = std::max(cmax, c);
    }
    kt.lo = std::min(q0 - 60.0 * S, cmin - 10.0 * S);
    kt.hi = std::max(q0 + 60.0 * S, cmax + 10.0 * S);
    return kt;
}

} // namespace

double TwoPhotonScattering::one_out_norm2() const {
    KTemplate kt = outer_features(p_, op_.es, pulse_);
    Mesh K;
    feature_mesh(kt.lo, kt.hi, kt.feats, 2.0, K);
    double n1 = 0.0;
    for (size_t i = 0; i < K.x.size(); ++i)
        n1 += K.w[i] * std::norm(op_.reflection(K.x[i]) * phi_hat(K.x[i]));
    return n1;
}

BetaResult TwoPhotonScattering::beta_norms(double rel_tol,
                                           int max_levels) const {
    const double d = pulse_.d, q0 = pulse_.q;
    KTemplate kt = outer_features(p_, op_.es, pulse_);
    const double ecut = 32.0 / d;

    BetaResult res;
    cplx beta_prev = 0.0;
    for (int level = 1; level <= max_levels; ++level) {
        double refine = std::ldexp(1.0, level - 1); // 1, 2, 4, ...
        Mesh K;
        feature_mesh(kt.lo, kt.hi, kt.feats, refine, K);
        const int M = (int)K.x.size();

        std::vector<cplx> lin1(M), s2f(M);
        double n1 = 0.0;
        for (int i = 0; i < M; ++i) {
            cplx ph = phi_hat(K.x[i]);
            lin1[i] = op_.reflection(K.x[i]) * ph;
            s2f[i] = reflection_diff(K.x[i]) * ph;
            n1 += K.w[i] * std::norm(lin1[i]);
        }

        // The band integral runs in rotated coordinates (E, v) with
        // k_{1,2} = E/2 +- v, so both the total-energy resonances and the
        // single-momentum poles land on mesh axes (the v features track
        // the current E).
        const auto& es = op_.es;
        const double lmin =
            std::min({0.5 * p_.kappa, -es.omega_1.imag(),
                      -es.omega_2.imag()});
        double S = 0.0;
        for (const auto& [c, f] : kt.feats) S = std::max(S, std::abs(c) + f);
        const double epsf = 1e-6 * std::max(1.0, S);
        std::vector<std::pair<double, double>> efeats;
        efeats.emplace_back(2.0 * q0, 0.7 / d);
        for (const cplx& nu : es.nu)
            efeats.emplace_back(nu.real(),
                                std::max(0.5 * std::max(-nu.imag(), lmin),
                                         epsf));
        const cplx poles[3] = {es.omega_1, es.omega_2, es.omega_c_t};
        for (int a = 0; a < 3; ++a)
            for (int b = a; b < 3; ++b)
                efeats.emplace_back(
                    poles[a].real() + poles[b].real(),
                    std::max(0.5 * (-poles[a].imag() - poles[b].imag()),
                             epsf));
        Mesh ME;
        feature_mesh(2.0 * q0 - ecut, 2.0 * q0 + ecut, efeats, refine, ME);

        const double vmax = 60.0 * std::max(1.0, S);
        cplx SLO = 0.0;
        double nLb = 0.0, nOb = 0.0;
        thread_local std::vector<std::pair<double, double>> vfeats;
        Mesh MV, MQ;
        const double s50 = 14.142135623730951 / d;
        const cplx w4 = -kI * ipow(p_.g, 4) * p_.kappa * p_.kappa /
                        (2.0 * M_PI);
        const cplx w6 = w4 * p_.g * p_.g;
        const cplx w8 = w6 * p_.g * p_.g;
        std::vector<cplx> qb;
        for (size_t ei = 0; ei < ME.x.size(); ++ei) {
            const double E = ME.x[ei], wE = ME.w[ei];
            vfeats.clear();
            // the integrand is even in v, so fold onto v >= 0
            auto vf = [&](cplx pole, double wmin) {
                double c = 0.5 * E - pole.real();
                vfeats.emplace_back(std::abs(c),
                                    std::max(std::max(-pole.imag() * 0.5,
                                                      wmin),
                                             epsf));
            };
            vf(cplx(q0, 0.0), 0.5 / d);
            vf(es.omega_1, 0.0);
            vf(es.omega_2, 0.0);
            vf(es.omega_c_t, 0.25 * p_.kappa);
            feature_mesh(0.0, vmax, vfeats, refine, MV);

            // Row cache for the inner q integrals: within a row their
            // integrand B0 and span depend only on E, so B0 is sampled
            // once on a row mesh and each principal-value integral
            // collapses to a weighted sum over the cached values. The
            // subtracted integrand varies on B0's own scales, so the
            // mesh needs no feature at the subtraction point; refine is
            // doubled to keep the accuracy of the per-point path.
            const double qlo = std::max(q0, E - q0) - s50;
            const double qhi = std::min(q0, E - q0) + s50;
            const bool qrow = qhi > qlo;
            const double span = qrow ? qhi - qlo : 0.0;
            cplx S68 = 0.0, N6 = 0.0, C5e = 0.0;
            if (qrow) {
                const double l1 = -es.omega_1.imag();
                const double l2 = -es.omega_2.imag();
                const double eps =
                    1e-9 * (1.0 + std::abs(E) + p_.kappa);
                thread_local std::vector<std::pair<double, double>> qf;
                qf.clear();
                qf.emplace_back(q0, 0.5 / d);
                qf.emplace_back(E - q0, 0.5 / d);
                qf.emplace_back(es.omega_c_t.real(),
                                std::max(0.25 * p_.kappa, eps));
                qf.emplace_back(E - es.omega_1.real(),
                                std::max(0.5 * l1, eps));
                qf.emplace_back(E - es.omega_2.real(),
                                std::max(0.5 * l2, eps));
                feature_mesh(qlo, qhi, qf, 2.0 * refine, MQ);
                qb.resize(MQ.x.size());
                for (size_t i = 0; i < MQ.x.size(); ++i) {
                    double q = MQ.x[i];
                    qb[i] = phi_hat(q) * phi_hat(E - q) /
                            ((q - es.omega_c_t) * (E - q - es.omega_1) *
                             (E - q - es.omega_2));
                    S68 += MQ.w[i] * qb[i] / (E - q - es.omega_c_t);
                }
                N6 = (E - es.omega_c_t - es.omega_1) *
                     (E - es.omega_c_t - es.omega_2);
                C5e = 1.0 / ((E - es.nu[0]) * (E - es.nu[1]) *
                             (E - es.nu[2]));
            }
            // PV integral of B0(q)/(kp - q) from the cached row values;
            // gkp = B0(kp) is supplied by the caller (it only needs the
            // already-computed phi_hat of both momenta)
            auto B0row = [&](double q) {
                return phi_hat(q) * phi_hat(E - q) /
                       ((q - es.omega_c_t) * (E - q - es.omega_1) *
                        (E - q - es.omega_2));
            };
            auto S4_at = [&](double kp, cplx gkp) {
                cplx S4 = 0.0;
                const bool sub = kp > qlo - 2.0 / d && kp < qhi + 2.0 / d;
                const bool inr = kp > qlo && kp < qhi;
                if (sub) {
                    for (size_t i = 0; i < MQ.x.size(); ++i) {
                        if (std::abs(kp - MQ.x[i]) <
                            1e-7 * (1.0 + std::abs(kp))) {
                            // node on the subtraction point: removable
                            // limit -B0'(kp)
                            double h = 1e-5 * (1.0 + std::abs(kp));
                            S4 += MQ.w[i] * (B0row(kp - h) - B0row(kp + h)) /
                                  (2.0 * h);
                            continue;
                        }
                        S4 += MQ.w[i] * (qb[i] - gkp) / (kp - MQ.x[i]);
                    }
                    S4 += gkp * (std::log(std::abs(kp - qlo) /
                                          std::abs(kp - qhi)) -
                                 (inr ? kI * M_PI : cplx(0.0)));
                } else {
                    for (size_t i = 0; i < MQ.x.size(); ++i)
                        S4 += MQ.w[i] * qb[i] / (kp - MQ.x[i]);
                }
                return S4;
            };
            cplx rowSLO = 0.0;
            double rowL = 0.0, rowO = 0.0;
            for (size_t vi = 0; vi < MV.x.size(); ++vi) {
                const double k1 = 0.5 * E + MV.x[vi];
                const double k2 = 0.5 * E - MV.x[vi];
                cplx p1 = phi_hat(k1), p2 = phi_hat(k2);
                cplx L = op_.reflection(k1) * p1 * op_.reflection(k2) * p2;
                cplx nl = -reflection_diff(k1) * p1 * reflection_diff(k2) *
                          p2;
                if (qrow) {
                    double edge = std::min(
                        {std::abs(k1 - qlo), std::abs(k1 - qhi),
                         std::abs(k2 - qlo), std::abs(k2 - qhi)});
                    if (edge < 1e-9 * span) {
                        // subtraction point on a span edge: take the
                        // guarded per-point path
                        nl += q_integral(k1, k2, refine) +
                              q_integral(k2, k1, refine);
                    } else {
                        cplx gk2 = p1 * p2 /
                                   ((k2 - es.omega_c_t) *
                                    (k1 - es.omega_1) * (k1 - es.omega_2));
                        cplx gk1 = p1 * p2 /
                                   ((k1 - es.omega_c_t) *
                                    (k2 - es.omega_1) * (k2 - es.omega_2));
                        cplx A012 = 1.0 / ((k1 - es.omega_c_t) *
                                           (k2 - es.omega_1) *
                                           (k2 - es.omega_2));
                        cplx A021 = 1.0 / ((k2 - es.omega_c_t) *
                                           (k1 - es.omega_1) *
                                           (k1 - es.omega_2));
                        cplx C512 = C5e / (k2 - es.omega_c_t);
                        cplx C521 = C5e / (k1 - es.omega_c_t);
                        nl += A012 * (w4 * S4_at(k2, gk2) +
                                      (w6 * N6 + w8) * C512 * S68) +
                              A021 * (w4 * S4_at(k1, gk1) +
                                      (w6 * N6 + w8) * C521 * S68);
                    }
                }
                cplx O = L + nl;
                rowSLO += MV.w[vi] * std::conj(L) * O;
                rowL += MV.w[vi] * std::norm(L);
                rowO += MV.w[vi] * std::norm(O);
            }
            SLO += 2.0 * wE * rowSLO;
            nLb += 2.0 * wE * rowL;
            nOb += 2.0 * wE * rowO;
        }
        // off-band pairs: nonlinear part negligible, linear part feeds
        // every sum identically, preserving the discrete Schwarz bound
        double T = std::max(0.0, n1 * n1 - nLb);
        cplx num = SLO + T;
        double den = std::sqrt((nLb + T) * (nOb + T));
        res.beta = den > 0.0 ? num / den : cplx(1.0);
        res.norm_out2 = nOb + T;
        res.norm_lin2 = n1 * n1;
        res.norm_one2 = n1;
        res.levels = level;
        if (level > 1) {
            res.err = std::abs(res.beta - beta_prev);
            if (res.err <= rel_tol) break;
        }
        beta_prev = res.beta;
    }
    return res;
}

// ------------------------------------------------------- grid output

Wavefunction1D TwoPhotonScattering::one_out_on(const Grid1D& g) const {
    Wavefunction1D wf;
    wf.grid = g;
    wf.amp.resize(g.n);
    for (int i = 0; i < g.n; ++i) wf.amp[i] = one_out(g.r(i));
    return wf;
}

Wavefunction2D TwoPhotonScattering::linear_out_on(const Grid1D& g) const {
    Wavefunction2D wf;
    wf.grid = g;
    wf.amp.resize((size_t)g.n * g.n);
    std::vector<cplx> one(g.n);
    for (int i = 0; i < g.n; ++i) one[i] = one_out(g.r(i));
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) wf.at(i, j) = one[i] * one[j];
    return wf;
}

Wavefunction2D TwoPhotonScattering::full_out_on(const Grid1D& g) const {
    Wavefunction2D wf = linear_out_on(g);
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j <= i; ++j) {
            cplx nl = nl_eval(g.r(i), g.r(j), 1.0);
            wf.at(i, j) += nl;
            if (j < i) wf.at(j, i) += nl;
        }
    return wf;
}

Wavefunction1D propagate_one_grid(const Wavefunction1D& in,
                                  const OnePhotonPropagator& op,
                                  const Grid1D& out) {
    Wavefunction1D res;
    res.grid = out;
    res.amp.resize(out.n);
    const Grid1D& gi = in.grid;
    for (int i = 0; i < out.n; ++i) {
        double r = out.r(i);
        cplx v = 0.0;
        // identity part: linear interpolation of the input at r
        double s = (r - gi.r_min) / gi.h;
        if (s >= 0.0 && s <= gi.n - 1) {
            int j0 = std::min((int)s, gi.n - 2);
            double f = s - j0;
            v = (1.0 - f) * in.amp[j0] + f * in.amp[j0 + 1];
        }
        for (int j = 0; j < gi.n; ++j) {
            double w = (j == 0 || j == gi.n - 1) ? 0.5 : 1.0;
            v += w * gi.h * op.smooth(r - gi.r(j)) * in.amp[j];
        }
        res.amp[i] = v;
    }
    return res;
}

Wavefunction2D nonlinear_out_brute(const TwoPhotonKernel& tk,
                                   const PulseParams& pulse,
                                   const Grid1D& out, const Grid1D& in) {
    Wavefunction2D wf;
    wf.grid = out;
    wf.amp.assign((size_t)out.n * out.n, 0.0);
    std::vector<cplx> phi(in.n);
    std::vector<double> w(in.n);
    for (int k = 0; k < in.n; ++k) {
        phi[k] = gaussian_amplitude(pulse, in.r(k));
        w[k] = in.h * ((k == 0 || k == in.n - 1) ? 0.5 : 1.0);
    }
    for (int i = 0; i < out.n; ++i)
        for (int j = 0; j <= i; ++j) {
            cplx s = 0.0;
            for (int k = 0; k < in.n; ++k) {
                if (in.r(k) <= std::max(out.r(i), out.r(j))) continue;
                cplx row = 0.0;
                for (int l = 0; l < in.n; ++l) {
                    if (in.r(l) <= std::max(out.r(i), out.r(j))) continue;
                    row += w[l] * tk.evaluate(out.r(i), out.r(j), in.r(k),
                                              in.r(l)) *
                           phi[l];
                }
                s += w[k] * phi[k] * row;
            }
            wf.at(i, j) = s;
            if (j < i) wf.at(j, i) = s;
        }
    return wf;
}

// -------------------------------------------------------------- csv

namespace {

void write_csv(const std::string& path, const CsvMeta& meta,
               const char* header,
               const std::function<bool(int, char*, size_t)>& row) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    for (const auto& [k, v] : meta) f << "# " << k << "=" << v << "\n";
    f << header << "\n";
    char buf[256];
    for (int i = 0; row(i, buf, sizeof buf); ++i) f << buf << "\n";
}

} // namespace

void write_wavefunction_csv(const std::string& path, const Wavefunction1D& wf,
                            const CsvMeta& meta) {
    write_csv(path, meta, "r,re_psi,im_psi",
              [&](int i, char* buf, size_t n) {
                  if (i >= wf.grid.n) return false;
                  std::snprintf(buf, n, "%.17g,%.17g,%.17g", wf.grid.r(i),
                                wf.amp[i].real(), wf.amp[i].imag());
                  return true;
              });
}

void write_wavefunction_csv(const std::string& path, const Wavefunction2D& wf,
                            const CsvMeta& meta) {
    int n = wf.grid.n;
    write_csv(path, meta, "r1,r2,re_psi,im_psi",
              [&](int i, char* buf, size_t bn) {
                  if (i >= n * n) return false;
                  int a = i / n, b = i % n;
                  std::snprintf(buf, bn, "%.17g,%.17g,%.17g,%.17g",
                                wf.grid.r(a), wf.grid.r(b),
                                wf.at(a, b).real(), wf.at(a, b).imag());
                  return true;
              });
}

} // namespace cqed
