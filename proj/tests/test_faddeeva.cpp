#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "cqed/faddeeva.hpp"

using cqed::cplx;

namespace {

struct Ref {
    double x, y;
    double wr, wi;
};

// Reference values computed with 30-digit arithmetic (mpmath):
// w(z) = exp(-z^2) erfc(-iz).
const Ref refs[] = {
    {0.0, 0.0, 1.0, 0.0},
    {1.0, 0.0, 0.367879441171442322, 0.607157705841393729},
    {0.0, 1.0, 0.427583576155807004, 0.0},
    {0.5, 0.5, 0.533156707912174914, 0.230488231384458409},
    {3.0, 0.1, 0.0079426809987699907, 0.200742343098677372},
    {-2.5, 0.3, 0.0382265062606852089, -0.243042008530977581},
    {6.0, 6.0, 0.0473352711333960141, 0.0466827448697319733},
    {10.0, 0.01, 0.0000572871162249007991, 0.0567053360548096143},
    {0.01, 10.0, 0.0561409379568197276, 0.0000555930684528682717},
    {-7.0, 2.0, 0.0218533966874382913, -0.0750096359354248155},
    {25.0, 1.0, 0.00090342490508493697, 0.0225494567922601946},
    {0.001, 0.001, 0.998871622335411247, 0.00112638067159986645},
    {4.0, -0.5, -0.0192251344191633598, 0.143255857981622403},
    {-3.0, -2.0, -0.0813390799286273605, -0.121086162462998449},
    {0.0, -1.0, 5.00898008076228347, 0.0},
    {12.0, -0.2, -0.000791678928555200965, 0.0471674431815756334},
    {0.3, -4.0, -11977181.744435002, 10971269.5127070858},
    {100.0, 50.0, 0.00225695694668913178, 0.00451355276004526958},
    {-50.0, 80.0, 0.00507140220329832402, -0.0031692702943435518},
    {2.0, 0.0, 0.0183156388887341803, 0.340026217066066201},
    {-1.0, 0.0, 0.367879441171442322, -0.607157705841393729},
    {0.0, 0.25, 0.770346547730996744, 0.0},
    {8.5, 3.3, 0.022733880861867609, 0.0578442591861037877},
    {-0.7, 0.05, 0.59657976151648053, -0.535091675383014546},
};

} // namespace

TEST_CASE("faddeeva_w matches high-precision references to 1e-13") {
    for (const auto& r : refs) {
        cplx w = cqed::faddeeva_w({r.x, r.y});
        cplx ref(r.wr, r.wi);
        double rel = std::abs(w - ref) / std::abs(ref);
        INFO("z = (" << r.x << ", " << r.y << ")  rel = " << rel);
        CHECK(rel < 1e-13);
    }
}

TEST_CASE("erfcx and erfc consistency") {
    // erfcx on the real axis against std::erfc for moderate arguments
    for (double x = -3.0; x <= 5.0; x += 0.5) {
        double ref = std::erfc(x) * std::exp(x * x);
        cplx v = cqed::erfcx({x, 0.0});
        CHECK(std::abs(v.real() - ref) / std::abs(ref) < 1e-12);
        CHECK(std::abs(v.imag()) < 1e-13 * std::abs(ref));
    }
    // erfc(z) + erfc(-z) = 2
    for (double x = -2.0; x <= 2.0; x += 0.7) {
        for (double y = -2.0; y <= 2.0; y += 0.7) {
            cplx s = cqed::erfc({x, y}) + cqed::erfc({-x, -y});
            CHECK(std::abs(s - 2.0) < 1e-12);
        }
    }
}

TEST_CASE("faddeeva symmetry w(-conj(z)) = conj(w(z))") {
    const cplx zs[] = {{1.2, 3.4}, {-0.3, 0.9}, {5.0, 0.2}, {0.1, -1.5}};
    for (cplx z : zs) {
        cplx a = cqed::faddeeva_w(cplx(-z.real(), z.imag()));
        cplx b = std::conj(cqed::faddeeva_w(z));
        CHECK(std::abs(a - b) <= 1e-13 * std::abs(b));
    }
}
