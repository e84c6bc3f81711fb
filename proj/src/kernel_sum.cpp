#include "cqed/kernel_sum.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace cqed {

double wedge_theta(double u, double tol) {
    if (std::abs(u) <= tol) return 0.5;
    return u < 0.0 ? 1.0 : 0.0;
}

void ExpTerm::canonicalize() {
    std::sort(wedges.begin(), wedges.end());
    wedges.erase(std::unique(wedges.begin(), wedges.end()), wedges.end());
    std::sort(poly.begin(), poly.end(),
              [](const Monomial& a, const Monomial& b) { return a.e < b.e; });
    // fold monomials with equal exponents
    std::vector<Monomial> out;
    for (const auto& m : poly) {
        if (!out.empty() && out.back().e == m.e)
            out.back().c += m.c;
        else
            out.push_back(m);
    }
    poly = std::move(out);
}

double ExpTerm::coeff_magnitude() const {
    double s = 0.0;
    for (const auto& m : poly) s += std::abs(m.c);
    return s;
}

cplx KernelSum::evaluate(std::span<const double> coords) const {
    if ((int)coords.size() != arity)
        throw std::invalid_argument("KernelSum::evaluate: arity mismatch");
    double scale = 0.0;
    for (double c : coords) scale += std::abs(c);
    double btol = 1e-12 * (scale + 1.0);

    cplx total = 0.0;
    for (const auto& t : terms) {
        double th = 1.0;
        for (const auto& w : t.wedges) {
            double u = 0.0;
            for (int i = 0; i < arity; ++i) u += w.w[i] * coords[i];
            th *= wedge_theta(u, btol);
            if (th == 0.0) break;
        }
        if (th == 0.0) continue;

        cplx phase = 0.0;
        for (int i = 0; i < arity; ++i) phase += t.rate[i] * coords[i];
        cplx p = 0.0;
        for (const auto& m : t.poly) {
            cplx v = m.c;
            for (int i = 0; i < arity; ++i)
                for (int k = 0; k < m.e[i]; ++k) v *= coords[i];
            p += v;
        }
        total += th * p * std::exp(cplx(0.0, 1.0) * phase);
    }
    return total;
}

void KernelSum::merge_terms(double rate_tol) {
    for (auto& t : terms) t.canonicalize();

    auto rates_equal = [&](const ExpTerm& a, const ExpTerm& b) {
        for (int i = 0; i < arity; ++i) {
            double s = std::abs(a.rate[i]) + std::abs(b.rate[i]);
            if (std::abs(a.rate[i] - b.rate[i]) > rate_tol * (1.0 + s))
                return false;
        }
        return true;
    };

    std::vector<ExpTerm> out;
    for (auto& t : terms) {
        bool merged = false;
        for (auto& o : out) {
            if (o.wedges != t.wedges || !rates_equal(o, t)) continue;
            for (const auto& m : t.poly) o.poly.push_back(m);
            o.canonicalize();
            merged = true;
            break;
        }
        if (!merged) out.push_back(std::move(t));
    }

    // drop cancelled monomials and empty terms
    double big = 0.0;
    for (const auto& t : out) big = std::max(big, t.coeff_magnitude());
    double drop = 1e-14 * big;
    for (auto& t : out) {
        std::erase_if(t.poly,
                      [&](const Monomial& m) { return std::abs(m.c) <= drop; });
    }
    std::erase_if(out, [](const ExpTerm& t) { return t.poly.empty(); });
    terms = std::move(out);
}

std::string KernelSum::dump() const {
    // terms sorted for a stable text form
    std::vector<const ExpTerm*> order;
    for (const auto& t : terms) order.push_back(&t);
    auto key = [&](const ExpTerm* t) {
        std::string s;
        char buf[64];
        for (const auto& w : t->wedges)
            for (int i = 0; i < arity; ++i) {
                std::snprintf(buf, sizeof buf, "%d,", w.w[i]);
                s += buf;
            }
        for (int i = 0; i < arity; ++i) {
            std::snprintf(buf, sizeof buf, "%+.6e%+.6e;", t->rate[i].real(),
                          t->rate[i].imag());
            s += buf;
        }
        return s;
    };
    std::sort(order.begin(), order.end(),
              [&](const ExpTerm* a, const ExpTerm* b) { return key(a) < key(b); });

    std::string s;
    char buf[128];
    for (const ExpTerm* t : order) {
        s += "poly";
        for (const auto& m : t->poly) {
            std::snprintf(buf, sizeof buf, " (%+.9e%+.9ei)", m.c.real(),
                          m.c.imag());
            s += buf;
            for (int i = 0; i < arity; ++i)
                if (m.e[i]) {
                    std::snprintf(buf, sizeof buf, "*u%d^%d", i, (int)m.e[i]);
                    s += buf;
                }
        }
        s += " rate";
        for (int i = 0; i < arity; ++i) {
            std::snprintf(buf, sizeof buf, " (%+.9e%+.9ei)", t->rate[i].real(),
                          t->rate[i].imag());
            s += buf;
        }
        s += " support";
        for (const auto& w : t->wedges) {
            s += " [";
            for (int i = 0; i < arity; ++i) {
                std::snprintf(buf, sizeof buf, "%s%d", i ? "," : "", w.w[i]);
                s += buf;
            }
            s += "]<0";
        }
        s += "\n";
    }
    return s;
}

bool term_decays_along(const ExpTerm& t, std::span<const double> dir,
                       double tol) {
    // direction must stay inside every half-space for large excursions
    for (const auto& w : t.wedges) {
        double u = 0.0;
        for (size_t i = 0; i < dir.size(); ++i) u += w.w[i] * dir[i];
        if (u > tol) return true; // leaves the support cone, nothing to check
    }
    double growth = 0.0;
    for (size_t i = 0; i < dir.size(); ++i) growth -= t.rate[i].imag() * dir[i];
    return growth <= tol;
}

namespace {

// expand (sum_j rows[i][j] y_j)^e into monomials over y, multiplied into acc
void multiply_linear_power(std::vector<Monomial>& acc,
                           const std::array<int, kMaxCoords>& row, int e,
                           int new_arity) {
    for (int rep = 0; rep < e; ++rep) {
        std::vector<Monomial> next;
        for (const auto& m : acc)
            for (int j = 0; j < new_arity; ++j) {
                if (row[j] == 0) continue;
                Monomial n = m;
                n.c *= (double)row[j];
                n.e[j] += 1;
                next.push_back(n);
            }
        acc = std::move(next);
    }
}

} // namespace

KernelSum map_coordinates(const KernelSum& ks,
                          const std::vector<std::array<int, kMaxCoords>>& rows,
                          int new_arity, cplx scale) {
    if ((int)rows.size() != ks.arity)
        throw std::invalid_argument("map_coordinates: row count mismatch");
    KernelSum out;
    out.arity = new_arity;
    for (const auto& t : ks.terms) {
        ExpTerm nt;
        for (int j = 0; j < new_arity; ++j) {
            cplx r = 0.0;
            for (int i = 0; i < ks.arity; ++i) r += t.rate[i] * (double)rows[i][j];
            nt.rate[j] = r;
        }
        for (const auto& w : t.wedges) {
            Wedge nw;
            bool nonzero = false;
            for (int j = 0; j < new_arity; ++j) {
                int v = 0;
                for (int i = 0; i < ks.arity; ++i) v += w.w[i] * rows[i][j];
                nw.w[j] = v;
                if (v) nonzero = true;
            }
            if (!nonzero)
                throw std::runtime_error(
                    "map_coordinates: wedge normal maps to zero");
            nt.wedges.push_back(nw);
        }
        for (const auto& m : t.poly) {
            std::vector<Monomial> acc{Monomial{m.c * scale, {}}};
            for (int i = 0; i < ks.arity; ++i)
                if (m.e[i]) multiply_linear_power(acc, rows[i], m.e[i], new_arity);
            for (auto& n : acc) nt.poly.push_back(n);
        }
        nt.canonicalize();
        out.terms.push_back(std::move(nt));
    }
    out.has_delta = ks.has_delta;
    return out;
}

} // namespace cqed
