#include "cqed/residue.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cqed {

namespace {

constexpr cplx kI(0.0, 1.0);
constexpr double kTwoPi = 6.283185307179586477;

struct LiveFactor {
    std::array<double, kMaxVars> coef{};
    cplx b;
    double delta = 0.0;
};

// A partially integrated contribution: scalar prefactor, accumulated
// exponent rates, support wedges, and the still-live rational factors.
struct Partial {
    cplx pref = 1.0;
    std::array<cplx, kMaxCoords> rate{};
    std::vector<Wedge> wedges;
    std::vector<LiveFactor> den, num;
    std::array<std::array<double, kMaxCoords>, kMaxVars> combo{};
};

bool depends_on_any(const LiveFactor& f, std::span<const int> vars) {
    for (int v : vars)
        if (f.coef[v] != 0.0) return true;
    return false;
}

// Fold factors that no longer contain integration variables into pref.
// Returns false if the partial vanished (numerator hit zero).
bool fold_constants(Partial& pt, std::span<const int> remaining, double eps) {
    for (auto it = pt.den.begin(); it != pt.den.end();) {
        if (depends_on_any(*it, remaining)) {
            ++it;
            continue;
        }
        cplx val = -it->b;
        if (std::abs(val) < eps)
            throw std::runtime_error(
                "residue: denominator factor degenerates to zero");
        pt.pref /= val;
        it = pt.den.erase(it);
    }
    for (auto it = pt.num.begin(); it != pt.num.end();) {
        if (depends_on_any(*it, remaining)) {
            ++it;
            continue;
        }
        pt.pref *= -it->b;
        it = pt.num.erase(it);
    }
    return std::abs(pt.pref) != 0.0;
}

int checked_int(double x) {
    double r = std::round(x);
    if (std::abs(x - r) > 1e-9)
        throw std::runtime_error("residue: non-integer wedge normal");
    return (int)r;
}

// substitute var v by the root of f into g
void substitute(LiveFactor& g, const LiveFactor& f, int v) {
    if (g.coef[v] == 0.0) return;
    double ratio = g.coef[v] / f.coef[v];
    for (int u = 0; u < kMaxVars; ++u) g.coef[u] -= ratio * f.coef[u];
    g.coef[v] = 0.0;
    g.b -= ratio * f.b;
    g.delta -= ratio * f.delta;
}

// truncated series product c = a * b (length n)
std::vector<cplx> series_mul(const std::vector<cplx>& a,
                             const std::vector<cplx>& b, int n) {
    std::vector<cplx> c(n, 0.0);
    for (int i = 0; i < n && i < (int)a.size(); ++i)
        for (int j = 0; j + i < n && j < (int)b.size(); ++j)
            c[i + j] += a[i] * b[j];
    return c;
}

void expand_linear_power(std::vector<Monomial>& acc,
                         const std::array<double, kMaxCoords>& row, int e,
                         int ncoords) {
    for (int rep = 0; rep < e; ++rep) {
        std::vector<Monomial> next;
        for (const auto& m : acc)
            for (int j = 0; j < ncoords; ++j) {
                if (row[j] == 0.0) continue;
                Monomial n = m;
                n.c *= row[j];
                n.e[j] += 1;
                next.push_back(n);
            }
        acc = std::move(next);
    }
}

struct Engine {
    int ncoords;
    double eps;
    std::vector<ExpTerm> out;

    // magnitude scale for pole-coincidence tests
    static double fscale(const LiveFactor& f) { return 1.0 + std::abs(f.b); }

    void integrate_var(const Partial& pt, int v,
                       std::span<const int> remaining_after,
                       std::vector<Partial>& next) {
        const auto& cv = pt.combo[v];
        bool zero_combo = true;
        for (int j = 0; j < ncoords; ++j)
            if (cv[j] != 0.0) zero_combo = false;

        if (zero_combo) {
            int gap = 0;
            for (const auto& f : pt.den)
                if (f.coef[v] != 0.0) ++gap;
            for (const auto& f : pt.num)
                if (f.coef[v] != 0.0) --gap;
            if (gap < 2)
                throw std::runtime_error(
                    "residue: cannot close contour (no exponent, slow decay)");
            close(pt, v, -1, remaining_after, next, /*add_wedge=*/false);
            return;
        }
        close(pt, v, +1, remaining_after, next, true);
        close(pt, v, -1, remaining_after, next, true);
    }

    void close(const Partial& pt, int v, int branch,
               std::span<const int> remaining_after, std::vector<Partial>& next,
               bool add_wedge) {
        // group denominator poles of v into coincidence classes
        std::vector<char> used(pt.den.size(), 0);
        for (size_t i = 0; i < pt.den.size(); ++i) {
            const auto& f = pt.den[i];
            if (used[i] || f.coef[v] == 0.0) continue;

            // half-plane of the pole constant part
            double im = (f.b / f.coef[v]).imag();
            int side;
            if (std::abs(im) > eps * fscale(f)) {
                side = im > 0.0 ? +1 : -1;
            } else {
                double ds = f.delta / f.coef[v];
                if (ds == 0.0)
                    throw std::runtime_error("residue: pole on the contour");
                side = ds > 0.0 ? +1 : -1;
            }
            used[i] = 1;
            if (side != branch) continue;

            std::vector<size_t> cls{i};
            for (size_t j = i + 1; j < pt.den.size(); ++j) {
                const auto& g = pt.den[j];
                if (used[j] || g.coef[v] == 0.0) continue;
                double ratio = g.coef[v] / f.coef[v];
                bool same = true;
                for (int u = 0; u < kMaxVars; ++u)
                    if (std::abs(g.coef[u] - ratio * f.coef[u]) > 1e-12)
                        same = false;
                if (same &&
                    std::abs(g.b - ratio * f.b) > eps * (fscale(f) + fscale(g)))
                    same = false;
                if (same) {
                    cls.push_back(j);
                    used[j] = 1;
                }
            }

            if (cls.size() == 1)
                simple_residue(pt, v, branch, i, remaining_after, next,
                               add_wedge);
            else if (remaining_after.empty())
                multiple_residue(pt, v, branch, cls, add_wedge);
            else
                throw std::runtime_error(
                    "residue: repeated pole before the last variable");
        }
    }

    void apply_wedge(Partial& np, const Partial& pt, int v, int branch,
                     bool add_wedge) {
        if (!add_wedge) return;
        Wedge w;
        for (int j = 0; j < ncoords; ++j)
            w.w[j] = checked_int(-branch * pt.combo[v][j]);
        np.wedges.push_back(w);
    }

    void simple_residue(const Partial& pt, int v, int branch, size_t fi,
                        std::span<const int> remaining_after,
                        std::vector<Partial>& next, bool add_wedge) {
        const LiveFactor f = pt.den[fi];
        Partial np = pt;
        np.den.erase(np.den.begin() + fi);
        np.pref *= (double)branch * kTwoPi * kI / f.coef[v];
        apply_wedge(np, pt, v, branch, add_wedge);

        cplx vstar = f.b / f.coef[v];
        for (int j = 0; j < ncoords; ++j) {
            np.rate[j] += vstar * pt.combo[v][j];
            for (int u : remaining_after)
                np.combo[u][j] -= (f.coef[u] / f.coef[v]) * pt.combo[v][j];
        }
        for (auto& g : np.den) substitute(g, f, v);
        for (auto& g : np.num) substitute(g, f, v);

        if (!fold_constants(np, remaining_after, eps)) return;
        if (remaining_after.empty())
            emit_simple(np);
        else
            next.push_back(std::move(np));
    }

    void emit_simple(const Partial& np) {
        ExpTerm t;
        t.rate = np.rate;
        t.wedges = np.wedges;
        t.poly = {Monomial{np.pref, {}}};
        t.canonicalize();
        out.push_back(std::move(t));
    }

    // order-m pole at the last variable; all live factors are affine in v
    void multiple_residue(const Partial& pt, int v, int branch,
                          const std::vector<size_t>& cls, bool add_wedge) {
        const LiveFactor& f = pt.den[cls[0]];
        cplx vstar = f.b / f.coef[v];
        int m = (int)cls.size();

        cplx lead = 1.0;
        for (size_t i : cls) lead *= pt.den[i].coef[v];

        // Taylor series of the remaining rational function around vstar
        std::vector<cplx> g(m, 0.0);
        g[0] = pt.pref;
        std::vector<char> in_cls(pt.den.size(), 0);
        for (size_t i : cls) in_cls[i] = 1;
        for (size_t i = 0; i < pt.den.size(); ++i) {
            if (in_cls[i]) continue;
            const auto& h = pt.den[i];
            cplx a = h.coef[v], beta = a * vstar - h.b;
            if (std::abs(beta) < eps * fscale(h))
                throw std::runtime_error(
                    "residue: near-coincident pole missed by class grouping");
            std::vector<cplx> inv(m);
            cplx p = 1.0 / beta;
            for (int n = 0; n < m; ++n) {
                inv[n] = p;
                p *= -a / beta;
            }
            g = series_mul(g, inv, m);
        }
        for (const auto& h : pt.num) {
            cplx a = h.coef[v], beta = a * vstar - h.b;
            g = series_mul(g, {beta, a}, m);
        }

        ExpTerm t;
        t.rate = pt.rate;
        for (int j = 0; j < ncoords; ++j) t.rate[j] += vstar * pt.combo[v][j];
        t.wedges = pt.wedges;
        {
            Partial tmp;
            tmp.wedges = t.wedges;
            apply_wedge(tmp, pt, v, branch, add_wedge);
            t.wedges = tmp.wedges;
        }

        // res = sign*2*pi*i/lead * sum_n (i ell)^n / n! * g_{m-1-n},
        // ell = combo[v] . coords
        cplx outer = (double)branch * kTwoPi * kI / lead;
        double fact = 1.0;
        for (int n = 0; n < m; ++n) {
            if (n > 0) fact *= n;
            cplx c = outer * std::pow(kI, n) / fact * g[m - 1 - n];
            if (std::abs(c) == 0.0) continue;
            std::vector<Monomial> acc{Monomial{c, {}}};
            expand_linear_power(acc, pt.combo[v], n, ncoords);
            for (auto& mo : acc) t.poly.push_back(mo);
        }
        t.canonicalize();
        if (!t.poly.empty()) out.push_back(std::move(t));
    }
};

} // namespace

KernelSum integrate_rational_exp(const RationalExpIntegrand& f,
                                 std::span<const int> order, double eps_deg) {
    if ((int)order.size() != f.nvars)
        throw std::invalid_argument("integrate_rational_exp: order size");

    Engine eng;
    eng.ncoords = f.ncoords;
    eng.eps = eps_deg;

    Partial init;
    init.pref = f.prefactor;
    for (const auto& af : f.den) {
        LiveFactor lf;
        for (int u = 0; u < kMaxVars; ++u) lf.coef[u] = af.coef[u];
        lf.b = af.b;
        lf.delta = af.delta;
        init.den.push_back(lf);
    }
    for (const auto& af : f.num) {
        LiveFactor lf;
        for (int u = 0; u < kMaxVars; ++u) lf.coef[u] = af.coef[u];
        lf.b = af.b;
        lf.delta = af.delta;
        init.num.push_back(lf);
    }
    for (int v = 0; v < f.nvars; ++v)
        for (int j = 0; j < f.ncoords; ++j) init.combo[v][j] = f.combo[v][j];

    std::vector<int> rem(order.begin(), order.end());
    std::vector<Partial> cur;
    if (fold_constants(init, rem, eng.eps)) cur.push_back(std::move(init));

    for (size_t step = 0; step < order.size(); ++step) {
        int v = order[step];
        std::span<const int> after(order.data() + step + 1,
                                   order.size() - step - 1);
        std::vector<Partial> next;
        for (const auto& pt : cur) eng.integrate_var(pt, v, after, next);
        cur = std::move(next);
    }

    KernelSum ks;
    ks.arity = f.ncoords;
    ks.terms = std::move(eng.out);
    ks.merge_terms();
    return ks;
}

} // namespace cqed
