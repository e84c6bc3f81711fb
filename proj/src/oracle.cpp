#include "cqed/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cqed {

namespace {

constexpr cplx kI(0.0, 1.0);
constexpr double kTwoPi = 6.283185307179586477;
const double kSqrt2 = std::sqrt(2.0);

// layout offsets into the flat amplitude vector
struct Layout {
    int nb, nd;
    int ak, ck, ad, cd, bd, dd, psi, size;

    Layout(int sector, int nb_, int nd_) : nb(nb_), nd(nd_) {
        if (sector == 1) {
            ak = 2; // b block
            ad = 2 + nb; // d block
            ck = cd = bd = dd = psi = 0;
            size = 2 + nb + nd;
        } else {
            ak = 2;
            ck = 2 + nb;
            ad = 2 + 2 * nb;
            cd = ad + nd;
            bd = cd + nd;
            dd = bd + nb * nd;
            psi = dd + nd * nd;
            size = psi + nb * nb;
        }
    }
};

cplx pulse_hat(const PulseParams& pu, double k) {
    double d = pu.d;
    double g = -0.25 * d * d * (k - pu.q) * (k - pu.q);
    if (g < -700.0) return 0.0;
    return std::pow(d * d / kTwoPi, 0.25) * std::exp(g) *
           std::exp(cplx(0.0, -k * pu.a));
}

} // namespace

ModeOracle::ModeOracle(const SystemParams& p, const PulseParams& pulse,
                       const OracleSettings& s)
    : p_(p), pulse_(pulse), set_(s) {
    p_.validate();
    pulse_.validate();

    EigenSystem es = eigenfrequencies(p_);
    double lam = std::min({0.5 * p_.kappa, -es.omega_1.imag(),
                           -es.omega_2.imag()});
    if (lam <= 0.0)
        throw std::runtime_error("oracle: system has no decay channel");

    const double c = pulse_.q;
    t_end_ = set_.t_end;
    if (t_end_ <= 0.0)
        t_end_ = std::abs(pulse_.a) + 5.5 * pulse_.d + 6.0 / lam;

    double W = set_.W;
    if (W <= 0.0) {
        // cover the pulse band, the dressed resonances and enough of the
        // power-law tails of the virtual intermediate states
        double res = 0.0;
        for (cplx w : {es.omega_1, es.omega_2})
            res = std::max(res,
                           std::abs(w.real() - c) + 12.0 * std::abs(w.imag()));
        W = std::max({12.0 / pulse_.d, res,
                      5.0 * std::max(p_.g, 0.5 * p_.kappa),
                      std::abs(p_.omega_c - c) + 3.0 * p_.kappa});
    }

    int nb = set_.nb;
    double dk;
    if (nb > 0) {
        dk = 2.0 * W / nb;
        if (kTwoPi / dk < set_.oversample * t_end_ * (1.0 - 1e-9))
            throw std::runtime_error(
                "oracle: basis too small for requested evolution time");
    } else {
        dk = kTwoPi / (set_.oversample * t_end_);
        nb = 2 * (int)std::ceil(W / dk);
        dk = 2.0 * W / nb;
    }
    if (nb < 2 || nb > 6000)
        throw std::runtime_error("oracle: mode count out of range: " +
                                 std::to_string(nb));

    basis_.center = c;
    basis_.W = W;
    basis_.dk = dk;
    basis_.k.resize(nb);
    basis_.kap.resize(nb);
    for (int j = 0; j < nb; ++j) {
        basis_.k[j] = c - W + (j + 0.5) * dk;
        basis_.kap[j] = std::sqrt(p_.kappa * dk / kTwoPi);
    }

    if (p_.gamma > 0.0) {
        int nd = set_.nd > 0 ? set_.nd : nb / 2;
        double dmu = 2.0 * W / nd;
        basis_.dmu = dmu;
        basis_.mu.resize(nd);
        basis_.gam.resize(nd);
        for (int j = 0; j < nd; ++j) {
            basis_.mu[j] = c - W + (j + 0.5) * dmu;
            basis_.gam[j] = std::sqrt(p_.gamma * dmu / kTwoPi);
        }
    }

    // interaction-frame generator bound: detunings, the exchange coupling
    // and the collective coupling to each comb (sqrt of summed squares)
    double lam_h = std::abs(p_.omega_a - c) + std::abs(p_.omega_c - c) +
                   2.0 * p_.g + 2.0 * std::sqrt(p_.kappa * W / M_PI) +
                   2.0 * std::sqrt(p_.gamma * W / M_PI);
    dt_ = set_.eig_step / (1.5 * lam_h);
    dt_ = std::min(dt_, t_end_);
}

OracleState ModeOracle::blank_one() const {
    OracleState s;
    s.sector = 1;
    s.nb = (int)basis_.k.size();
    s.nd = (int)basis_.mu.size();
    s.v.assign(Layout(1, s.nb, s.nd).size, 0.0);
    return s;
}

OracleState ModeOracle::blank_two() const {
    OracleState s;
    s.sector = 2;
    s.nb = (int)basis_.k.size();
    s.nd = (int)basis_.mu.size();
    s.v.assign(Layout(2, s.nb, s.nd).size, 0.0);
    return s;
}

OracleState ModeOracle::input_one() const {
    OracleState s = blank_one();
    double rt = std::sqrt(basis_.dk);
    for (int j = 0; j < s.nb; ++j)
        s.v[2 + j] = rt * pulse_hat(pulse_, basis_.k[j]);
    return s;
}

OracleState ModeOracle::input_two() const {
    OracleState s = blank_two();
    Layout L(2, s.nb, s.nd);
    std::vector<cplx> f(s.nb);
    for (int j = 0; j < s.nb; ++j) f[j] = pulse_hat(pulse_, basis_.k[j]);
    for (int k = 0; k < s.nb; ++k)
        for (int q = 0; q < s.nb; ++q)
            s.v[L.psi + (size_t)k * s.nb + q] = basis_.dk * f[k] * f[q];
    return s;
}

void ModeOracle::deriv(double t, const OracleState& s, OracleState& ds) const {
    const int nb = s.nb, nd = s.nd;
    ds.sector = s.sector;
    ds.nb = nb;
    ds.nd = nd;
    ds.v.resize(s.v.size());

    thread_local std::vector<cplx> wbuf, wbbuf, wdbuf, wbdbuf, abuf;
    wbuf.resize(nb);
    wbbuf.resize(nb);
    cplx* w = wbuf.data();   // kap_k e^{-i k t}
    cplx* wb = wbbuf.data(); // kap_k e^{+i k t}
    for (int j = 0; j < nb; ++j) {
        cplx ph = std::polar(basis_.kap[j], basis_.k[j] * t);
        wb[j] = ph;
        w[j] = std::conj(ph);
    }
    cplx *wd = nullptr, *wbd = nullptr;
    if (nd > 0) {
        wdbuf.resize(nd);
        wbdbuf.resize(nd);
        wd = wdbuf.data();
        wbd = wbdbuf.data();
        for (int j = 0; j < nd; ++j) {
            cplx ph = std::polar(basis_.gam[j], basis_.mu[j] * t);
            wbd[j] = ph;
            wd[j] = std::conj(ph);
        }
    }

    const double wa = p_.omega_a, wc = p_.omega_c, g = p_.g;
    const cplx* x = s.v.data();
    cplx* y = ds.v.data();

    if (s.sector == 1) {
        cplx sb = 0.0, sd = 0.0;
        for (int j = 0; j < nb; ++j) sb += w[j] * x[2 + j];
        for (int j = 0; j < nd; ++j) sd += wd[j] * x[2 + nb + j];
        y[0] = -kI * (wa * x[0] + g * x[1] + sd);
        y[1] = -kI * (wc * x[1] + g * x[0] + sb);
        for (int j = 0; j < nb; ++j) y[2 + j] = -kI * wb[j] * x[1];
        for (int j = 0; j < nd; ++j) y[2 + nb + j] = -kI * wbd[j] * x[0];
        return;
    }

    Layout L(2, nb, nd);
    const cplx *ak = x + L.ak, *ck = x + L.ck;
    cplx *dak = y + L.ak, *dck = y + L.ck;

    cplx S1 = 0.0, S2 = 0.0, T1 = 0.0;
    for (int j = 0; j < nb; ++j) {
        S1 += w[j] * ak[j];
        S2 += w[j] * ck[j];
    }
    for (int j = 0; j < nd; ++j) T1 += wd[j] * x[L.cd + j];

    y[0] = -kI * ((wa + wc) * x[0] + kSqrt2 * g * x[1] + S1 + T1);
    y[1] = -kI * (2.0 * wc * x[1] + kSqrt2 * g * x[0] + kSqrt2 * S2);

    for (int j = 0; j < nb; ++j) {
        dak[j] = -kI * (wa * ak[j] + g * ck[j] + wb[j] * x[0]);
        dck[j] = -kI * (wc * ck[j] + g * ak[j] + kSqrt2 * wb[j] * x[1]);
    }

    // two-photon block: row dots feed dck, the derivative itself is the
    // symmetrized rank-2 outer product of wb and ck
    abuf.resize(nb);
    cplx* A = abuf.data();
    const cplx mh = -kI / kSqrt2;
    for (int j = 0; j < nb; ++j) A[j] = mh * ck[j];
    {
        const cplx* P = x + L.psi;
        cplx* dP = y + L.psi;
        for (int k = 0; k < nb; ++k) {
            const cplx* row = P + (size_t)k * nb;
            cplx* drow = dP + (size_t)k * nb;
            cplx dot = 0.0;
            cplx c1 = wb[k], c2 = A[k];
            for (int q = 0; q < nb; ++q) {
                dot += w[q] * row[q];
                drow[q] = c1 * A[q] + c2 * wb[q];
            }
            dck[k] += -kI * kSqrt2 * dot;
        }
    }

    if (nd > 0) {
        const cplx *ad = x + L.ad, *cd = x + L.cd;
        cplx *dad = y + L.ad, *dcd = y + L.cd;
        for (int j = 0; j < nd; ++j) {
            dad[j] = -kI * (wa * ad[j] + g * cd[j]);
            dcd[j] = -kI * (wc * cd[j] + g * ad[j] + wbd[j] * x[0]);
        }
        // b x d block
        {
            const cplx* P = x + L.bd;
            cplx* dP = y + L.bd;
            for (int k = 0; k < nb; ++k) {
                const cplx* row = P + (size_t)k * nd;
                cplx* drow = dP + (size_t)k * nd;
                cplx t2 = 0.0;
                cplx c1 = -kI * wb[k], c2 = -kI * ak[k];
                for (int m = 0; m < nd; ++m) {
                    t2 += wd[m] * row[m];
                    drow[m] = c1 * cd[m] + c2 * wbd[m];
                    dcd[m] += -kI * w[k] * row[m];
                }
                dak[k] += -kI * t2;
            }
        }
        // d x d block (symmetric)
        {
            const cplx* P = x + L.dd;
            cplx* dP = y + L.dd;
            for (int m = 0; m < nd; ++m) {
                const cplx* row = P + (size_t)m * nd;
                cplx* drow = dP + (size_t)m * nd;
                cplx dot = 0.0;
                cplx c1 = wbd[m], c2 = mh * ad[m];
                for (int n = 0; n < nd; ++n) {
                    dot += wd[n] * row[n];
                    drow[n] = c1 * (mh * ad[n]) + c2 * wbd[n];
                }
                dad[m] += -kI * kSqrt2 * dot;
            }
        }
    }
}

double ModeOracle::norm2(const OracleState& s) const {
    double n = 0.0;
    for (const cplx& z : s.v) n += std::norm(z);
    return n;
}

double ModeOracle::residual(const OracleState& s) const {
    Layout L(s.sector, s.nb, s.nd);
    double n = std::norm(s.v[0]) + std::norm(s.v[1]);
    if (s.sector == 1) return n;
    for (int j = 0; j < s.nb; ++j)
        n += std::norm(s.v[L.ak + j]) + std::norm(s.v[L.ck + j]);
    for (int j = 0; j < s.nd; ++j)
        n += std::norm(s.v[L.ad + j]) + std::norm(s.v[L.cd + j]);
    return n;
}

OracleRunInfo ModeOracle::evolve(OracleState& s, double t_from,
                                 double t_to) const {
    OracleRunInfo info;
    double span = t_to - t_from;
    if (span <= 0.0) return info;
    int nsteps = (int)std::ceil(span / dt_);
    double h = span / nsteps;
    info.steps = nsteps;
    info.dt = h;

    double n0 = norm2(s);
    const size_t n = s.v.size();
    OracleState k = s, ytmp = s, sum = s;

    for (int step = 0; step < nsteps; ++step) {
        double t = t_from + step * h;
        deriv(t, s, sum); // k1
        for (size_t i = 0; i < n; ++i)
            ytmp.v[i] = s.v[i] + 0.5 * h * sum.v[i];
        deriv(t + 0.5 * h, ytmp, k); // k2
        for (size_t i = 0; i < n; ++i) {
            sum.v[i] += 2.0 * k.v[i];
            ytmp.v[i] = s.v[i] + 0.5 * h * k.v[i];
        }
        deriv(t + 0.5 * h, ytmp, k); // k3
        for (size_t i = 0; i < n; ++i) {
            sum.v[i] += 2.0 * k.v[i];
            ytmp.v[i] = s.v[i] + h * k.v[i];
        }
        deriv(t + h, ytmp, k); // k4
        const double w6 = h / 6.0;
        for (size_t i = 0; i < n; ++i) s.v[i] += w6 * (sum.v[i] + k.v[i]);
    }

    info.norm_drift = std::abs(norm2(s) - n0);
    info.residual = residual(s);
    if (info.norm_drift > set_.drift_tol * std::max(1.0, n0))
        throw std::runtime_error(
            "oracle: norm drift " + std::to_string(info.norm_drift) +
            " exceeds tolerance after " + std::to_string(nsteps) +
            " steps of dt=" + std::to_string(h));
    return info;
}

OracleRunInfo ModeOracle::run(OracleState& s) const {
    return evolve(s, 0.0, t_end_);
}

Wavefunction1D ModeOracle::output_one(const OracleState& s,
                                      const Grid1D& g) const {
    if (residual(s) > set_.residual_tol)
        throw std::runtime_error(
            "oracle: excitation still inside the system, evolve longer");
    Wavefunction1D out;
    out.grid = g;
    out.amp.resize(g.n);
    double pre = std::sqrt(basis_.dk / kTwoPi);
    for (int i = 0; i < g.n; ++i) {
        cplx acc = 0.0;
        double r = g.r(i);
        for (int j = 0; j < s.nb; ++j)
            acc += s.v[2 + j] * std::polar(1.0, basis_.k[j] * r);
        out.amp[i] = pre * acc;
    }
    return out;
}

Wavefunction2D ModeOracle::output_two(const OracleState& s,
                                      const Grid1D& g) const {
    if (residual(s) > set_.residual_tol)
        throw std::runtime_error(
            "oracle: excitation still inside the system, evolve longer");
    const int nb = s.nb, n = g.n;
    Layout L(2, nb, s.nd);
    // psi is contracted with the node phases one axis at a time
    std::vector<cplx> E((size_t)nb * n), C((size_t)nb * n);
    for (int j = 0; j < nb; ++j)
        for (int i = 0; i < n; ++i)
            E[(size_t)j * n + i] = std::polar(1.0, basis_.k[j] * g.r(i));
    const cplx* P = s.v.data() + L.psi;
    for (int k = 0; k < nb; ++k) {
        const cplx* row = P + (size_t)k * nb;
        cplx* crow = C.data() + (size_t)k * n;
        std::fill(crow, crow + n, cplx(0.0));
        for (int q = 0; q < nb; ++q) {
            cplx a = row[q];
            const cplx* erow = E.data() + (size_t)q * n;
            for (int i = 0; i < n; ++i) crow[i] += a * erow[i];
        }
    }
    Wavefunction2D out;
    out.grid = g;
    out.amp.assign((size_t)n * n, 0.0);
    double pre = basis_.dk / kTwoPi;
    for (int k = 0; k < nb; ++k) {
        const cplx* erow = E.data() + (size_t)k * n;
        const cplx* crow = C.data() + (size_t)k * n;
        for (int i = 0; i < n; ++i) {
            cplx a = pre * erow[i];
            cplx* orow = out.amp.data() + (size_t)i * n;
            for (int j = 0; j < n; ++j) orow[j] += a * crow[j];
        }
    }
    return out;
}

cplx ModeOracle::beta(const OracleState& one, const OracleState& two) const {
    const int nb = one.nb;
    Layout L(2, nb, two.nd);
    const cplx* b = one.v.data() + 2;
    const cplx* P = two.v.data() + L.psi;
    cplx ip = 0.0;
    double nb2 = 0.0;
    for (int k = 0; k < nb; ++k) {
        cplx dot = 0.0;
        const cplx* row = P + (size_t)k * nb;
        for (int q = 0; q < nb; ++q) dot += std::conj(b[q]) * row[q];
        ip += std::conj(b[k]) * dot;
        nb2 += std::norm(b[k]);
    }
    double npsi = 0.0;
    for (size_t i = 0; i < (size_t)nb * nb; ++i) npsi += std::norm(P[i]);
    return ip / std::sqrt(nb2 * nb2 * npsi);
}

OracleResult oracle_run_extrapolated(const SystemParams& p,
                                     const PulseParams& pulse,
                                     const Grid1D& grid_one,
                                     const Grid1D& grid_two,
                                     const OracleSettings& s) {
    OracleResult res;
    Wavefunction1D one_half;
    Wavefunction2D two_half;
    cplx beta_half = 0.0;
    for (int pass = 0; pass < 2; ++pass) {
        OracleSettings st = s;
        if (pass == 1) {
            st.W *= 0.5;
            if (st.nb > 0) st.nb /= 2;
        }
        ModeOracle mo(p, pulse, st);
        if (pass == 0 && s.W <= 0.0) {
            // remember the auto band so the second pass halves the same W
            // on the same comb spacing
            OracleSettings probe = s;
            probe.W = mo.basis().W;
            return oracle_run_extrapolated(p, pulse, grid_one, grid_two,
                                           probe);
        }
        OracleState one = mo.input_one();
        OracleRunInfo i1 = mo.run(one);
        OracleState two = mo.input_two();
        OracleRunInfo i2 = mo.run(two);
        if (pass == 0) {
            res.one = mo.output_one(one, grid_one);
            res.two = mo.output_two(two, grid_two);
            res.beta = mo.beta(one, two);
            res.info_one = i1;
            res.info_two = i2;
        } else {
            one_half = mo.output_one(one, grid_one);
            two_half = mo.output_two(two, grid_two);
            beta_half = mo.beta(one, two);
        }
    }
    for (size_t i = 0; i < res.one.amp.size(); ++i)
        res.one.amp[i] = 2.0 * res.one.amp[i] - one_half.amp[i];
    for (size_t i = 0; i < res.two.amp.size(); ++i)
        res.two.amp[i] = 2.0 * res.two.amp[i] - two_half.amp[i];
    res.beta = 2.0 * res.beta - beta_half;
    return res;
}

} // namespace cqed
