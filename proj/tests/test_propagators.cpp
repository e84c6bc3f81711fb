#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <vector>

#include "cqed/propagators.hpp"
#include "cqed/residue.hpp"

using namespace cqed;

namespace {

constexpr cplx I(0.0, 1.0);

// Gauss-Legendre nodes/weights on (-1, 1) by Newton iteration.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.resize(n);
    w.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.0);
            double dz = p0 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
    }
}

struct Pt {
    double x, y, z;
};

// numeric threefold integral of rational(k, q, w) e^{i(kx+qy+wz)} with the
// rational map k = S u / (1 - u^2) on each axis
template <class F>
std::vector<cplx> quad3(const F& rational, const std::vector<Pt>& pts, int n,
                        double S) {
    std::vector<double> u, gw;
    gauss_legendre(n, u, gw);
    std::vector<double> node(n), wt(n);
    for (int i = 0; i < n; ++i) {
        double d = 1.0 - u[i] * u[i];
        node[i] = S * u[i] / d;
        wt[i] = gw[i] * S * (1.0 + u[i] * u[i]) / (d * d);
    }
    size_t P = pts.size();
    std::vector<std::vector<cplx>> ex(P), ey(P), ez(P);
    for (size_t p = 0; p < P; ++p) {
        ex[p].resize(n);
        ey[p].resize(n);
        ez[p].resize(n);
        for (int i = 0; i < n; ++i) {
            ex[p][i] = std::exp(I * node[i] * pts[p].x);
            ey[p][i] = std::exp(I * node[i] * pts[p].y);
            ez[p][i] = std::exp(I * node[i] * pts[p].z);
        }
    }
    std::vector<cplx> acc(P, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            std::vector<cplx> partial(P, 0.0);
            for (int l = 0; l < n; ++l) {
                cplx R = rational(node[i], node[j], node[l]) * wt[l];
                for (size_t p = 0; p < P; ++p) partial[p] += R * ez[p][l];
            }
            double wij = wt[i] * wt[j];
            for (size_t p = 0; p < P; ++p)
                acc[p] += wij * partial[p] * ex[p][i] * ey[p][j];
        }
    return acc;
}

cplx jfun(const EigenSystem& es, double k, double q, cplx w) {
    return 1.0 / ((k - es.omega_c_t) * (w - k - es.omega_1) *
                  (w - k - es.omega_2) * (q - es.omega_c_t) *
                  (w - q - es.omega_1) * (w - q - es.omega_2));
}

cplx two_exc_den(const EigenSystem& es, double k, double q, cplx w) {
    return (w - k - es.omega_c_t) * (w - q - es.omega_c_t) * (w - es.nu[0]) *
           (w - es.nu[1]) * (w - es.nu[2]);
}

// closed frequency integral for z < 0: all poles lie below the axis, so
// int dw e^{iwz} num(w) / prod_j (w - p_j) = -2 pi i sum_j e^{i p_j z}
// num(p_j) / prod_{l != j} (p_j - p_l)
template <class Num>
cplx omega_closed(const std::vector<cplx>& poles, const Num& num, double z) {
    cplx s = 0.0;
    for (size_t j = 0; j < poles.size(); ++j) {
        cplx prod = 1.0;
        for (size_t l = 0; l < poles.size(); ++l)
            if (l != j) prod *= poles[j] - poles[l];
        s += std::exp(I * poles[j] * z) * num(poles[j]) / prod;
    }
    return -2.0 * M_PI * I * s;
}

// 2D quadrature over (k, q) of f(k, q) e^{ikx + iqy}; slightly different
// node sets per axis keep k = q off the grid (f may lose precision there)
template <class F>
cplx quad2(const F& f, double x, double y, int nk, int nq, double Sk,
           double Sq) {
    std::vector<double> uk, wk, uq, wq;
    gauss_legendre(nk, uk, wk);
    gauss_legendre(nq, uq, wq);
    std::vector<double> kn(nk), kw(nk), qn(nq), qw(nq);
    std::vector<cplx> ex(nk), ey(nq);
    for (int i = 0; i < nk; ++i) {
        double d = 1.0 - uk[i] * uk[i];
        kn[i] = Sk * uk[i] / d;
        kw[i] = wk[i] * Sk * (1.0 + uk[i] * uk[i]) / (d * d);
        ex[i] = std::exp(I * kn[i] * x);
    }
    for (int j = 0; j < nq; ++j) {
        double d = 1.0 - uq[j] * uq[j];
        qn[j] = Sq * uq[j] / d;
        qw[j] = wq[j] * Sq * (1.0 + uq[j] * uq[j]) / (d * d);
        ey[j] = std::exp(I * qn[j] * y);
    }
    cplx acc = 0.0;
    for (int i = 0; i < nk; ++i) {
        cplx row = 0.0;
        for (int j = 0; j < nq; ++j) row += qw[j] * ey[j] * f(kn[i], qn[j]);
        acc += kw[i] * ex[i] * row;
    }
    return acc;
}

double ks_scale(const KernelSum& ks) {
    double s = 0.0;
    for (const auto& t : ks.terms) s = std::max(s, t.coeff_magnitude());
    return s;
}

} // namespace

TEST_CASE("one-photon propagator pole weights and reflection") {
    SystemParams p{1.0, 0.1, -0.2, 0.3, 2.0};
    OnePhotonPropagator op = one_photon_propagator(p);

    CHECK(std::abs(op.c1 + op.c2 - 1.0) < 1e-13);
    // continuity of the smooth part at coincidence
    CHECK(std::abs(op.smooth(-1e-9) + p.kappa) < 1e-7);

    // frequency response assembled from the pole weights matches the
    // closed-form reflection coefficient
    for (double w : {-2.0, -0.3, 0.0, 0.4, 1.7}) {
        cplx viaFT = 1.0 - p.kappa * (op.c1 / (I * (op.es.omega_1 - w)) +
                                      op.c2 / (I * (op.es.omega_2 - w)));
        CHECK(std::abs(viaFT - op.reflection(w)) < 1e-12);
    }

    // without lateral loss the mirror reflects unit probability
    SystemParams pl{0.8, 0.0, 0.1, 0.0, 1.5};
    OnePhotonPropagator opl = one_photon_propagator(pl);
    for (double w : {-1.0, 0.0, 0.8, 2.5})
        CHECK(std::abs(opl.reflection(w)) == doctest::Approx(1.0).epsilon(1e-12));

    // g = 0 reduces the smooth part to the empty-cavity response
    SystemParams p0{0.0, 0.0, 0.1, 0.0, 1.5};
    OnePhotonPropagator op0 = one_photon_propagator(p0);
    for (double dr : {-3.0, -0.7, -0.1})
        CHECK(std::abs(op0.smooth(dr) - op0.empty_cavity_smooth(dr)) < 1e-12);
}

TEST_CASE("threefold integrals against direct quadrature") {
    SystemParams p{1.0, 0.1, -0.2, 0.25, 1.6};
    EigenSystem es = eigenfrequencies(p);
    double eps = degeneracy_eps(es, p);

    std::vector<Pt> pts = {{-0.7, -0.4, -1.1}, {-0.2, -1.3, -0.3},
                           {0.6, -0.8, -0.5}, {-1.0, 0.5, -0.9}};
    const int N = 256;
    const double S = 3.5;

    // poles of the two-excitation pieces in the frequency variable
    auto nine_poles = [&](double k, double q) {
        return std::vector<cplx>{k + es.omega_1,   k + es.omega_2,
                                 q + es.omega_1,   q + es.omega_2,
                                 k + es.omega_c_t, q + es.omega_c_t,
                                 es.nu[0],         es.nu[1],
                                 es.nu[2]};
    };
    auto base = [&](double k, double q) {
        return 1.0 / ((k - es.omega_c_t) * (q - es.omega_c_t));
    };

    SUBCASE("six-wave piece") {
        KernelSum ks = eval_i6(es, eps);
        for (const auto& pt : pts) {
            auto f = [&](double k, double q) {
                auto numf = [&](cplx w) {
                    return (w - es.omega_c_t - es.omega_1) *
                           (w - es.omega_c_t - es.omega_2);
                };
                return base(k, q) * omega_closed(nine_poles(k, q), numf, pt.z);
            };
            cplx ref = quad2(f, pt.x, pt.y, 320, 344, 6.0, 5.6);
            double co[] = {pt.x, pt.y, pt.z};
            CHECK(std::abs(ks.evaluate(co) - ref) <
                  0.01 * (0.01 + std::abs(ref)));
        }
    }

    SUBCASE("eight-wave piece") {
        KernelSum ks = eval_i8(es, eps);
        // fully numeric threefold integral (converges here)
        auto rat = [&](double k, double q, double w) {
            return jfun(es, k, q, w) / two_exc_den(es, k, q, w);
        };
        auto num = quad3(rat, pts, N, S);
        double scale = 0.0;
        for (cplx v : num) scale = std::max(scale, std::abs(v));
        for (size_t i = 0; i < pts.size(); ++i) {
            double co[] = {pts[i].x, pts[i].y, pts[i].z};
            CHECK(std::abs(ks.evaluate(co) - num[i]) < 0.01 * scale);
        }
        // and the semi-analytic reduction agrees too
        for (const auto& pt : pts) {
            auto f = [&](double k, double q) {
                return base(k, q) * omega_closed(
                                        nine_poles(k, q),
                                        [](cplx) { return cplx(1.0); }, pt.z);
            };
            cplx ref = quad2(f, pt.x, pt.y, 320, 344, 6.0, 5.6);
            double co[] = {pt.x, pt.y, pt.z};
            CHECK(std::abs(ks.evaluate(co) - ref) <
                  0.01 * (1e-5 + std::abs(ref)));
        }
    }

    SUBCASE("vanishing when the frequency exponent is positive") {
        const KernelSum all[] = {eval_i4(es, eps), eval_i6(es, eps),
                                 eval_i8(es, eps)};
        for (const auto& ks : all) {
            double scale = ks_scale(ks);
            for (double co0 : {-1.0, 0.4})
                for (double co1 : {-0.8, 0.7}) {
                    double co[] = {co0, co1, 0.9};
                    CHECK(std::abs(ks.evaluate(co)) < 1e-12 * scale);
                }
        }
    }

    SUBCASE("four-wave piece at finite delta, then the limit") {
        auto build = [&](cplx shift, double delta_flag) {
            RationalExpIntegrand f;
            f.nvars = 3;
            f.ncoords = 3;
            f.combo[0] = {1, 0, 0, 0};
            f.combo[1] = {0, 1, 0, 0};
            f.combo[2] = {0, 0, 1, 0};
            f.den = {{{1, 0, 0}, es.omega_c_t, 0.0},
                     {{-1, 0, 1}, es.omega_1, 0.0},
                     {{-1, 0, 1}, es.omega_2, 0.0},
                     {{0, 1, 0}, es.omega_c_t, 0.0},
                     {{0, -1, 1}, es.omega_1, 0.0},
                     {{0, -1, 1}, es.omega_2, 0.0},
                     {{-1, -1, 1}, shift, delta_flag}};
            return f;
        };
        const int ord[] = {0, 1, 2};

        double delta = 0.25;
        KernelSum kd =
            integrate_rational_exp(build(cplx(0.0, -delta), 0.0), ord, eps);
        for (const auto& pt : pts) {
            auto f = [&](double k, double q) {
                std::vector<cplx> poles{k + es.omega_1, k + es.omega_2,
                                        q + es.omega_1, q + es.omega_2,
                                        cplx(k + q, -delta)};
                return base(k, q) * omega_closed(
                                        poles, [](cplx) { return cplx(1.0); },
                                        pt.z);
            };
            cplx ref = quad2(f, pt.x, pt.y, 320, 344, 6.0, 5.6);
            double co[] = {pt.x, pt.y, pt.z};
            CHECK(std::abs(kd.evaluate(co) - ref) <
                  0.01 * (0.01 + std::abs(ref)));
        }

        // the regularized result converges to the limiting pole sum
        KernelSum k0 = eval_i4(es, eps);
        KernelSum k1 =
            integrate_rational_exp(build(cplx(0.0, -0.1), 0.0), ord, eps);
        KernelSum k2 =
            integrate_rational_exp(build(cplx(0.0, -0.05), 0.0), ord, eps);
        for (const auto& pt : pts) {
            double co[] = {pt.x, pt.y, pt.z};
            cplx extrap = 2.0 * k2.evaluate(co) - k1.evaluate(co);
            cplx lim = k0.evaluate(co);
            CHECK(std::abs(extrap - lim) < 5e-3 * (1.0 + std::abs(lim)));
        }
    }
}

TEST_CASE("threefold integrals do not depend on the integration order") {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    const SystemParams sets[] = {
        {1.0, 0.0, 0.0, 0.0, 5.0},
        {1.0, 0.1, -0.3, 0.2, 0.5},
        {0.6, -0.4, 0.4, 0.05, 2.3},
    };
    for (const auto& p : sets) {
        EigenSystem es = eigenfrequencies(p);
        double eps = degeneracy_eps(es, p);
        const std::pair<KernelSum, KernelSum> both[] = {
            {eval_i4(es, eps), eval_i4_alt(es, eps)},
            {eval_i6(es, eps), eval_i6_alt(es, eps)},
            {eval_i8(es, eps), eval_i8_alt(es, eps)},
        };
        for (const auto& [a, b] : both) {
            double scale = std::max(ks_scale(a), ks_scale(b));
            for (int it = 0; it < 50; ++it) {
                double co[] = {u(rng), u(rng), u(rng)};
                CHECK(std::abs(a.evaluate(co) - b.evaluate(co)) <
                      1e-9 * scale);
            }
        }
    }
}

TEST_CASE("nonlinear kernel support and symmetry") {
    const SystemParams sets[] = {
        {1.0, 0.0, 0.0, 0.0, 5.0},  {1.0, 0.0, 0.0, 0.0, 0.5},
        {1.0, 0.0, 0.0, 0.2, 5.0},  {0.7, 0.3, -0.1, 0.1, 1.7},
        {1.3, -0.2, 0.4, 0.0, 2.9},
    };
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> u(-4.0, 4.0);

    for (const auto& p : sets) {
        TwoPhotonKernel tk = two_photon_kernel(p);
        CHECK(tk.nl.terms.size() <= 200);

        // reference magnitude over points inside the support
        double scale = 0.0;
        for (int it = 0; it < 200; ++it) {
            double r1 = u(rng), r2 = u(rng);
            double lo = std::max(r1, r2);
            double r1p = lo + 0.2 + std::abs(u(rng));
            double r2p = lo + 0.2 + std::abs(u(rng));
            scale = std::max(scale, std::abs(tk.evaluate(r1, r2, r1p, r2p)));
        }
        CHECK(scale > 0.0);

        // vanishes whenever some output lies above some input
        int checked = 0;
        while (checked < 1000) {
            double r1 = u(rng), r2 = u(rng), r1p = u(rng), r2p = u(rng);
            if (std::max(r1, r2) < std::min(r1p, r2p) - 0.05) continue;
            if (std::abs(std::max(r1, r2) - std::min(r1p, r2p)) < 0.05)
                continue; // keep clear of the boundary half-steps
            ++checked;
            CHECK(std::abs(tk.evaluate(r1, r2, r1p, r2p)) < 1e-10 * scale);
        }

        // symmetric under swapping both photons
        for (int it = 0; it < 200; ++it) {
            double r1 = u(rng), r2 = u(rng);
            double lo = std::max(r1, r2);
            double r1p = lo + 0.1 + std::abs(u(rng));
            double r2p = lo + 0.1 + std::abs(u(rng));
            cplx a = tk.evaluate(r1, r2, r1p, r2p);
            cplx b = tk.evaluate(r2, r1, r2p, r1p);
            CHECK(std::abs(a - b) < 1e-10 * scale);
        }
    }
}

TEST_CASE("nonlinear kernel scales as g^4 for weak coupling") {
    const double pts[][4] = {
        {-1.0, -0.5, 0.3, 0.8}, {-2.0, -1.5, -0.9, -0.2}, {0.1, 0.4, 1.2, 2.0}};
    SystemParams pa{1e-3, 0.1, -0.2, 0.15, 1.4};
    SystemParams pb = pa;
    pb.g = 2e-3;
    TwoPhotonKernel ka = two_photon_kernel(pa);
    TwoPhotonKernel kb = two_photon_kernel(pb);
    for (const auto& r : pts) {
        cplx va = ka.evaluate(r[0], r[1], r[2], r[3]);
        cplx vb = kb.evaluate(r[0], r[1], r[2], r[3]);
        CHECK(std::abs(vb / va - 16.0) < 0.01);
    }
}

TEST_CASE("nonlinear kernel text form is frozen") {
    SystemParams p{1.0, 0.0, 0.0, 0.0, 5.0};
    TwoPhotonKernel tk = two_photon_kernel(p);
    std::string dump = tk.nl.dump();

    std::string path = std::string(CQED_SOURCE_DIR) + "/tests/golden/nl_kernel.txt";
    if (std::getenv("QED1D_UPDATE_GOLDEN")) {
        std::ofstream out(path);
        out << dump;
    }
    std::ifstream in(path);
    REQUIRE_MESSAGE(in.good(), "golden file missing: " << path);
    std::string ref((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
    CHECK(dump == ref);
}
