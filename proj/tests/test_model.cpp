#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "cqed/model.hpp"

using namespace cqed;

TEST_CASE("complex frequencies") {
    SystemParams p{1.0, 0.25, -0.5, 0.3, 2.0};
    auto [wa, wc] = complex_frequencies(p);
    CHECK(wa == cplx(0.25, -0.15));
    CHECK(wc == cplx(-0.5, -1.0));
}

TEST_CASE("decoupled limit g = 0") {
    SystemParams p{0.0, 0.0, 0.0, 0.0, 2.0};
    EigenSystem es = eigenfrequencies(p);
    // roots are the bare atom (0) and cavity (-i)
    CHECK(std::abs(es.omega_1 - cplx(0.0, -1.0)) < 1e-14);
    CHECK(std::abs(es.omega_2 - cplx(0.0, 0.0)) < 1e-14);
}

TEST_CASE("resonant vacuum Rabi splitting") {
    SystemParams p{1.0, 0.0, 0.0, 0.0, 0.5};
    EigenSystem es = eigenfrequencies(p);
    // -i kappa/4 -+ sqrt(g^2 - kappa^2/16)
    double re = std::sqrt(1.0 - 0.5 * 0.5 / 16.0);
    CHECK(std::abs(es.omega_1 - cplx(-re, -0.125)) < 1e-14);
    CHECK(std::abs(es.omega_2 - cplx(re, -0.125)) < 1e-14);
    CHECK(!es.degenerate);
}

TEST_CASE("degenerate point kappa = 4g flagged") {
    SystemParams p{1.0, 0.0, 0.0, 0.0, 4.0};
    EigenSystem es = eigenfrequencies(p);
    CHECK(es.degenerate);
}

TEST_CASE("eigenfrequency product and sum (random parameters)") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int it = 0; it < 200; ++it) {
        SystemParams p{std::abs(u(rng)) + 0.1, u(rng), u(rng),
                       std::abs(u(rng)), std::abs(u(rng)) + 0.1};
        EigenSystem es = eigenfrequencies(p);
        cplx sum = es.omega_1 + es.omega_2;
        cplx prod = es.omega_1 * es.omega_2;
        cplx sum_ref = es.omega_a_t + es.omega_c_t;
        cplx prod_ref = es.omega_a_t * es.omega_c_t - p.g * p.g;
        CHECK(std::abs(sum - sum_ref) < 1e-12 * (1.0 + std::abs(sum_ref)));
        CHECK(std::abs(prod - prod_ref) < 1e-12 * (1.0 + std::abs(prod_ref)));

        // two-excitation roots satisfy the cubic
        for (const cplx& nu : es.nu) {
            cplx s = es.omega_a_t + es.omega_c_t;
            cplx res = (nu - s) * ((nu - 2.0 * es.omega_c_t) * (nu - s) -
                                   2.0 * p.g * p.g);
            double scale = std::pow(std::abs(nu) + std::abs(s) + p.g + 1.0, 3);
            CHECK(std::abs(res) < 1e-10 * scale);
        }
        // ordering convention: ascending real part, then imaginary
        auto le = [](cplx a, cplx b) {
            return a.real() < b.real() ||
                   (a.real() == b.real() && a.imag() <= b.imag());
        };
        CHECK(le(es.omega_1, es.omega_2));
        CHECK(le(es.nu[0], es.nu[1]));
        CHECK(le(es.nu[1], es.nu[2]));
    }
}

TEST_CASE("one root of the two-excitation cubic is wa + wc") {
    SystemParams p{0.7, 0.1, -0.2, 0.4, 1.3};
    EigenSystem es = eigenfrequencies(p);
    cplx s = es.omega_a_t + es.omega_c_t;
    double best = 1e300;
    for (const cplx& nu : es.nu) best = std::min(best, std::abs(nu - s));
    CHECK(best < 1e-12);
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(eigenfrequencies(SystemParams{1.0, 0.0, 0.0, 0.0, 0.0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(eigenfrequencies(SystemParams{1.0, 0.0, 0.0, -0.1, 1.0}),
                    std::invalid_argument);
    PulseParams bad{0.0, 2.0, -3.0, 5.0}; // support reaches r > 0
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    PulseParams ok{0.0, 2.0, -12.0, 5.0};
    CHECK_NOTHROW(ok.validate());
}

TEST_CASE("scaling transformation is a group action on eigenfrequencies") {
    SystemParams p{1.0, 0.2, -0.1, 0.15, 5.0};
    PulseParams pulse{0.5, 3.0, -20.0};
    auto [p2, pulse2] = scale_params(p, pulse, 2.5);
    EigenSystem a = eigenfrequencies(p);
    EigenSystem b = eigenfrequencies(p2);
    CHECK(std::abs(b.omega_1 - 2.5 * a.omega_1) < 1e-12);
    CHECK(std::abs(b.omega_2 - 2.5 * a.omega_2) < 1e-12);
    for (int i = 0; i < 3; ++i)
        CHECK(std::abs(b.nu[i] - 2.5 * a.nu[i]) < 1e-12);
    CHECK(pulse2.q * pulse2.d == doctest::Approx(pulse.q * pulse.d));
    CHECK(gamma_1d(p2) == doctest::Approx(2.5 * gamma_1d(p)));

    auto [p3, pulse3] = scale_params(p2, pulse2, 1.0 / 2.5);
    CHECK(p3.g == doctest::Approx(p.g));
    CHECK(pulse3.d == doctest::Approx(pulse.d));
    CHECK(pulse3.a == doctest::Approx(pulse.a));
}

TEST_CASE("gaussian amplitude normalization and width") {
    PulseParams pulse{0.8, 2.0, -15.0};
    // trapezoid norm over a wide window
    double h = 0.002, s = 0.0;
    for (double r = -35.0; r <= 5.0; r += h)
        s += std::norm(gaussian_amplitude(pulse, r)) * h;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    // peak value and 1/e point of |psi|^2 at x = d/sqrt(2)
    double peak = std::abs(gaussian_amplitude(pulse, pulse.a));
    CHECK(peak == doctest::Approx(std::pow(2.0 / (M_PI * 4.0), 0.25)));
    double xe = pulse.a + pulse.d / std::sqrt(2.0);
    CHECK(std::norm(gaussian_amplitude(pulse, xe)) ==
          doctest::Approx(peak * peak * std::exp(-1.0)));

    // spectral content: |FT| at q +- 2/d is e^{-1} of the peak
    auto ft = [&](double k) {
        cplx s2 = 0.0;
        for (double r = -35.0; r <= 5.0; r += h)
            s2 += gaussian_amplitude(pulse, r) *
                  std::exp(cplx(0.0, -k * r)) * h;
        return std::abs(s2);
    };
    double f0 = ft(pulse.q);
    CHECK(ft(pulse.q + 2.0 / pulse.d) == doctest::Approx(f0 * std::exp(-1.0))
                                             .epsilon(1e-5));
    CHECK(ft(pulse.q - 2.0 / pulse.d) == doctest::Approx(f0 * std::exp(-1.0))
                                             .epsilon(1e-5));

    // product form of the two-photon input
    CHECK(std::abs(two_photon_amplitude(pulse, -14.0, -16.5) -
                   gaussian_amplitude(pulse, -14.0) *
                       gaussian_amplitude(pulse, -16.5)) < 1e-15);
}

TEST_CASE("optimum absorption pulse") {
    SystemParams weak{1.0, 0.0, 0.0, 0.0, 10.0};
    OptimumPulse phi = optimum_pulse(weak, 60.0);

    CHECK(phi(-61.0) == cplx(0.0));
    CHECK(phi(0.5) == cplx(0.0));

    // closed-form norm matches direct quadrature
    double h = 1e-3, s = 0.0;
    for (double r = -60.0 + h / 2; r < 0.0; r += h) s += std::norm(phi(r)) * h;
    CHECK(phi.norm2() == doctest::Approx(s).epsilon(1e-6));

    // norm approaches 1 from below as the pulse is allowed more time
    double prev = 0.0;
    for (double t : {5.0, 20.0, 60.0, 200.0}) {
        double n = optimum_pulse(weak, t).norm2();
        CHECK(n > prev);
        CHECK(n < 1.0 + 1e-12);
        prev = n;
    }
    CHECK(optimum_pulse(weak, 200.0).norm2() == doctest::Approx(1.0).epsilon(1e-9));

    // weak coupling: |phi| rises toward the tail end that is absorbed last,
    // i.e. it decays in r at rate 2 g^2 / kappa
    double rate = std::log(std::abs(phi(-10.0)) / std::abs(phi(-30.0))) / 20.0;
    CHECK(rate == doctest::Approx(-2.0 / 10.0).epsilon(0.05));

    // strong coupling: envelope rate kappa/4 and beat frequency 2g
    SystemParams strong{1.0, 0.0, 0.0, 0.0, 0.5};
    OptimumPulse sp = optimum_pulse(strong, 120.0);
    // sample the envelope at beat maxima |sin(re u)| = 1, u = r + t,
    // re = sqrt(g^2 - kappa^2/16) close to g
    double re = sp.w1c.real() > 0.0 ? sp.w1c.real() : sp.w2c.real();
    CHECK(re == doctest::Approx(1.0).epsilon(0.01));
    double u1 = (M_PI / 2.0 + 3.0 * M_PI) / re;
    double u2 = (M_PI / 2.0 + 15.0 * M_PI) / re;
    double e1 = std::abs(sp(-120.0 + u1)), e2 = std::abs(sp(-120.0 + u2));
    double srate = std::log(e1 / e2) / (u2 - u1);
    CHECK(srate == doctest::Approx(0.5 / 4.0).epsilon(0.02));
    // zeros of the beat at u = n pi / re
    CHECK(std::abs(sp(-120.0 + 4.0 * M_PI / re)) < 1e-6 * e1);

    CHECK_THROWS_AS(optimum_pulse(SystemParams{1.0, 0.0, 0.0, 0.0, 4.0}, 10.0),
                    DegeneracyError);
}
