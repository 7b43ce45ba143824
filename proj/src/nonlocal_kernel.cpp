#include "novsemi/nonlocal_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "novsemi/errors.hpp"
#include "novsemi/rng.hpp"

namespace novsemi {

namespace {

void require_positive_q(const LagrangianState& s) {
    for (std::size_t j = 0; j < s.q.size(); ++j) {
        if (!(s.q[j] > 0.0)) {
            throw StateInvalidError("q <= 0 at label index " + std::to_string(j));
        }
    }
}

/// L_i = int_{-inf}^{xi_i} e^{-(A_i - A)} d, R_i = int_{xi_i}^{inf} e^{-(A - A_i)} d.
void scan(const std::vector<double>& d, const std::vector<double>& e, const std::vector<double>& wa,
          const std::vector<double>& wb, std::vector<double>& L, std::vector<double>& R) {
    const std::size_t n = d.size();
    L.assign(n, 0.0);
    R.assign(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        L[i + 1] = e[i] * L[i] + wa[i] * d[i] + wb[i] * d[i + 1];
    }
    for (std::size_t i = n - 1; i-- > 0;) {
        R[i] = e[i] * R[i + 1] + wa[i] * d[i + 1] + wb[i] * d[i];
    }
}

/// Cell weights: the far endpoint gets wa, the near endpoint wb.
void cell_weights(const std::vector<double>& A, double dxi, bool exact, std::vector<double>& e,
                  std::vector<double>& wa, std::vector<double>& wb) {
    const std::size_t n = A.size();
    e.assign(n > 0 ? n - 1 : 0, 0.0);
    wa.assign(e.size(), 0.0);
    wb.assign(e.size(), 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double delta = A[i + 1] - A[i];
        e[i] = std::exp(-delta);
        if (!exact) {
            wa[i] = 0.5 * dxi * e[i];
            wb[i] = 0.5 * dxi;
            continue;
        }
        double i0, i1;  // int_0^1 e^{-delta r} dr and int_0^1 r e^{-delta r} dr
        if (delta < 1e-4) {
            i0 = 1.0 - delta / 2.0 + delta * delta / 6.0;
            i1 = 0.5 - delta / 3.0 + delta * delta / 8.0;
        } else {
            const double em1 = -std::expm1(-delta);
            i0 = em1 / delta;
            i1 = (em1 - delta * e[i]) / (delta * delta);
        }
        wa[i] = dxi * i1;
        wb[i] = dxi * (i0 - i1);
    }
}

}  // namespace

void NonlocalTerms::resize(std::size_t n) {
    for (auto* a : arrays()) a->assign(n, 0.0);
}

Trig compute_trig(const LagrangianState& s) {
    const std::size_t n = s.size();
    Trig t;
    for (auto* a : {&t.cW, &t.sW, &t.sinW, &t.cZ, &t.sZ, &t.sinZ}) a->resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double sw = std::sin(0.5 * s.W[j]), cw = std::cos(0.5 * s.W[j]);
        const double sz = std::sin(0.5 * s.Z[j]), cz = std::cos(0.5 * s.Z[j]);
        t.cW[j] = cw * cw;
        t.sW[j] = sw * sw;
        t.sinW[j] = 2.0 * sw * cw;
        t.cZ[j] = cz * cz;
        t.sZ[j] = sz * sz;
        t.sinZ[j] = 2.0 * sz * cz;
    }
    return t;
}

namespace {

std::vector<double> transport_density(const LagrangianState& s, const Trig& tr) {
    const std::size_t n = s.size();
    std::vector<double> A(n, 0.0);
    const double h = s.xi.dxi;
    const std::size_t z = s.xi.zero_index;
    auto a = [&](std::size_t j) { return s.q[j] * tr.cW[j] * tr.cZ[j]; };
    for (std::size_t j = z; j + 1 < n; ++j) A[j + 1] = A[j] + 0.5 * h * (a(j) + a(j + 1));
    for (std::size_t j = z; j-- > 0;) A[j] = A[j + 1] - 0.5 * h * (a(j) + a(j + 1));
    return A;
}

}  // namespace

std::vector<double> cumulative_transport_density(const LagrangianState& s) {
    return transport_density(s, compute_trig(s));
}

KernelDensities kernel_densities(const LagrangianState& s, const Trig& tr) {
    const std::size_t n = s.size();
    KernelDensities d;
    d.p1.resize(n);
    d.s1.resize(n);
    d.p2.resize(n);
    d.s2.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double q = s.q[j], U = s.U[j], V = s.V[j];
        const double cc = tr.cW[j] * tr.cZ[j];
        const double ss = 0.25 * tr.sinW[j] * tr.sinZ[j];
        d.p1[j] = q * (U * U * V * cc + U * ss + 0.5 * V * tr.sW[j] * tr.cZ[j]);
        d.s1[j] = q * (U * V * V * cc + V * ss + 0.5 * U * tr.cW[j] * tr.sZ[j]);
        d.p2[j] = q * tr.sW[j] * tr.sinZ[j];
        d.s2[j] = q * tr.sinW[j] * tr.sZ[j];
    }
    d.A = transport_density(s, tr);
    return d;
}

double kernel_value(const std::vector<double>& A, std::size_t i, std::size_t j) {
    return std::exp(-std::abs(A[i] - A[j]));
}

NonlocalTerms evaluate_nonlocal_terms(const LagrangianState& s, const KernelOptions& opt) {
    return evaluate_nonlocal_terms(s, compute_trig(s), opt);
}

NonlocalTerms evaluate_nonlocal_terms(const LagrangianState& s, const Trig& tr, const KernelOptions& opt) {
    require_positive_q(s);
    const KernelDensities d = kernel_densities(s, tr);
    std::vector<double> e, wa, wb;
    cell_weights(d.A, s.xi.dxi, opt.exact_cells, e, wa, wb);

    NonlocalTerms out;
    out.resize(s.size());
    std::vector<double> L, R;
    auto fill = [&](const std::vector<double>& dens, double c, std::vector<double>& val,
                    std::vector<double>& der) {
        scan(dens, e, wa, wb, L, R);
        for (std::size_t i = 0; i < dens.size(); ++i) {
            val[i] = c * (L[i] + R[i]);
            der[i] = c * (R[i] - L[i]);
        }
    };
    fill(d.p1, 0.5, out.P1, out.dxP1);
    fill(d.p2, 0.125, out.P2, out.dxP2);
    fill(d.s1, 0.5, out.S1, out.dxS1);
    fill(d.s2, 0.125, out.S2, out.dxS2);
    return out;
}

NonlocalTerms evaluate_nonlocal_terms_direct(const LagrangianState& s) {
    require_positive_q(s);
    const Trig tr = compute_trig(s);
    const KernelDensities d = kernel_densities(s, tr);
    const std::size_t n = s.size();
    const double h = s.xi.dxi;
    NonlocalTerms out;
    out.resize(n);
    // The split integrals are each trapezoids over a half-line, so node i
    // carries half weight in both and drops out of the derivative terms.
    for (std::size_t i = 0; i < n; ++i) {
        double v[4] = {0, 0, 0, 0}, g[4] = {0, 0, 0, 0};
        for (std::size_t j = 0; j < n; ++j) {
            const double w = (j == 0 || j == n - 1) ? 0.5 * h : h;
            double wl = w, wr = w;  // weights in the left and right half-line trapezoids
            if (j == i) {
                wl = (j == 0) ? 0.0 : 0.5 * h;
                wr = (j == n - 1) ? 0.0 : 0.5 * h;
            }
            const double k = kernel_value(d.A, i, j);
            const double dens[4] = {d.p1[j], d.p2[j], d.s1[j], d.s2[j]};
            for (int m = 0; m < 4; ++m) {
                if (j < i) {
                    v[m] += wl * k * dens[m];
                    g[m] -= wl * k * dens[m];
                } else if (j > i) {
                    v[m] += wr * k * dens[m];
                    g[m] += wr * k * dens[m];
                } else {
                    v[m] += (wl + wr) * dens[m];
                    g[m] += (wr - wl) * dens[m];
                }
            }
        }
        out.P1[i] = 0.5 * v[0];
        out.dxP1[i] = 0.5 * g[0];
        out.P2[i] = 0.125 * v[1];
        out.dxP2[i] = 0.125 * g[1];
        out.S1[i] = 0.5 * v[2];
        out.dxS1[i] = 0.5 * g[2];
        out.S2[i] = 0.125 * v[3];
        out.dxS2[i] = 0.125 * g[3];
    }
    return out;
}

NonlocalTerms eulerian_oracle_at(const SigmaPair& p, std::span<const double> xs) {
    p.validate();
    const std::size_t n = p.grid.n_points;
    const BrokenLattice bl = p.broken();
    const Lattice lat = p.grid.lattice();

    // Integrands of P1, P2, S1, S2 (value and derivative share them).
    std::array<std::vector<double>, 4> f;
    for (auto& a : f) a.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double u = p.u0[j], v = p.v0[j], ux = p.du0[j], vx = p.dv0[j];
        f[0][j] = u * u * v + u * ux * vx + 0.5 * v * ux * ux;
        f[1][j] = 0.5 * ux * ux * vx;
        f[2][j] = u * v * v + v * ux * vx + 0.5 * u * vx * vx;
        f[3][j] = 0.5 * ux * vx * vx;
    }
    // Linear pieces of every integrand in each break cell.
    const auto& bcells = bl.break_cells();
    std::vector<std::array<std::vector<Segment>, 4>> bsegs(bcells.size());
    for (std::size_t b = 0; b < bcells.size(); ++b) {
        for (int m = 0; m < 4; ++m) bl.cell_segments(f[m], bcells[b], bsegs[b][m]);
    }

    const double cst[4] = {0.5, 0.5, 0.5, 0.5};
    NonlocalTerms out;
    out.resize(xs.size());
    auto outs = out.arrays();
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const double x = std::clamp(xs[k], p.grid.x_min, p.grid.x_max);
        double val[4] = {0, 0, 0, 0}, der[4] = {0, 0, 0, 0};
        // Exact integral of exp(-|x - z|) against the linear piece; the piece
        // lies on one side of x.
        auto add = [&](int m, double a, double b, double fa, double fb) {
            const double len = b - a;
            if (len <= 0.0) return;
            const double e1 = -std::expm1(-len);
            const double e2 = (e1 - len * std::exp(-len)) / len;
            if (a >= x) {
                const double q = std::exp(x - a) * (fa * e1 + (fb - fa) * e2);
                val[m] += q;
                der[m] += q;
            } else {
                const double q = std::exp(b - x) * (fb * e1 + (fa - fb) * e2);
                val[m] += q;
                der[m] -= q;
            }
        };
        auto add_split = [&](int m, const Segment& sg) {
            if (x > sg.a && x < sg.b) {
                const double fx = sg.fa + (sg.fb - sg.fa) * (x - sg.a) / (sg.b - sg.a);
                add(m, sg.a, x, sg.fa, fx);
                add(m, x, sg.b, fx, sg.fb);
            } else {
                add(m, sg.a, sg.b, sg.fa, sg.fb);
            }
        };
        std::size_t b = 0;
        for (std::size_t c = 0; c + 1 < n; ++c) {
            if (b < bcells.size() && bcells[b] == c) {
                for (int m = 0; m < 4; ++m)
                    for (const Segment& sg : bsegs[b][m]) add_split(m, sg);
                ++b;
                continue;
            }
            const Segment sg[4] = {{lat.at(c), lat.at(c + 1), f[0][c], f[0][c + 1]},
                                   {lat.at(c), lat.at(c + 1), f[1][c], f[1][c + 1]},
                                   {lat.at(c), lat.at(c + 1), f[2][c], f[2][c + 1]},
                                   {lat.at(c), lat.at(c + 1), f[3][c], f[3][c + 1]}};
            for (int m = 0; m < 4; ++m) add_split(m, sg[m]);
        }
        for (int m = 0; m < 4; ++m) {
            (*outs[2 * m])[k] = cst[m] * val[m];
            (*outs[2 * m + 1])[k] = cst[m] * der[m];
        }
    }
    return out;
}

NonlocalTerms eulerian_oracle_terms(const SigmaPair& p) {
    std::vector<double> xs(p.grid.n_points);
    for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = p.grid.x(i);
    return eulerian_oracle_at(p, xs);
}

NonlocalTerms derivative_in_label(const LagrangianState& s, const NonlocalTerms& t) {
    const Trig tr = compute_trig(s);
    const KernelDensities d = kernel_densities(s, tr);
    const std::size_t n = s.size();
    NonlocalTerms out;
    out.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double a = s.q[j] * tr.cW[j] * tr.cZ[j];
        out.P1[j] = a * t.dxP1[j];
        out.dxP1[j] = -d.p1[j] + a * t.P1[j];
        out.P2[j] = a * t.dxP2[j];
        out.dxP2[j] = -0.25 * d.p2[j] + a * t.P2[j];
        out.S1[j] = a * t.dxS1[j];
        out.dxS1[j] = -d.s1[j] + a * t.S1[j];
        out.S2[j] = a * t.dxS2[j];
        out.dxS2[j] = -0.25 * d.s2[j] + a * t.S2[j];
    }
    return out;
}

double wz_l2_radius(const LagrangianState& s) {
    std::vector<double> w2(s.size()), z2(s.size());
    for (std::size_t j = 0; j < s.size(); ++j) {
        w2[j] = s.W[j] * s.W[j];
        z2[j] = s.Z[j] * s.Z[j];
    }
    return std::sqrt(std::max(trapezoid(w2, s.xi.dxi), trapezoid(z2, s.xi.dxi)));
}

KernelBoundReport kernel_bound_check(const LagrangianState& s, std::size_t pairs, std::uint64_t seed,
                                     const std::vector<double>* A) {
    KernelBoundReport r;
    const std::vector<double> own = A ? std::vector<double>{} : cumulative_transport_density(s);
    const std::vector<double>& a = A ? *A : own;
    r.R2 = wz_l2_radius(s);
    r.q_minus = *std::min_element(s.q.begin(), s.q.end());
    r.gamma_l1 = (8.0 / r.q_minus) * std::exp(0.25 * r.q_minus * r.R2 * r.R2);
    r.max_violation = -std::numeric_limits<double>::infinity();
    SplitMix64 rng(seed);
    const std::size_t n = s.size();
    for (std::size_t k = 0; k < pairs; ++k) {
        const std::size_t i = rng.below(n), j = rng.below(n);
        const double log_e = -std::abs(a[i] - a[j]);
        const double dist = std::abs(s.xi.xi(i) - s.xi.xi(j));
        const double log_g = 0.25 * r.q_minus * (r.R2 * r.R2 - dist);
        r.max_violation = std::max(r.max_violation, log_e - log_g);
    }
    r.pairs = pairs;
    return r;
}

TermBoundReport check_term_bounds(const NonlocalTerms& t, const ConservedSet& cs, double slack) {
    TermBoundReport r;
    const double b1 = cs.E_u * std::sqrt(cs.E_v);
    const double b2 = cs.E_v * std::sqrt(cs.E_u);
    const double bound[8] = {b1, b1, cs.K_u, cs.K_u, b2, b2, cs.K_v, cs.K_v};
    const auto arr = t.arrays();
    double worst = -1.0;
    for (std::size_t m = 0; m < 8; ++m) {
        double mx = 0.0;
        for (const double v : *arr[m]) mx = std::max(mx, std::abs(v));
        r.max_abs[m] = mx;
        r.bound[m] = bound[m];
        const double lim = bound[m] * (1.0 + slack) + 1e-12;
        if (mx > lim) r.ok = false;
        const double ratio = mx / std::max(lim, 1e-300);
        if (ratio > worst) {
            worst = ratio;
            r.worst = NonlocalTerms::names[m];
        }
    }
    return r;
}

double truncation_estimate(const LagrangianState& s, const KernelDensities& d, double R2) {
    const std::size_t n = s.size();
    double edge = 0.0;
    for (const auto* a : {&d.p1, &d.p2, &d.s1, &d.s2}) {
        edge = std::max({edge, std::abs((*a)[0]), std::abs((*a)[n - 1])});
    }
    const double qm = *std::min_element(s.q.begin(), s.q.end());
    // Half of ||Gamma||_{L1} covers one tail; the value prefactor is at most 1/2.
    return 0.5 * edge * 0.5 * (8.0 / qm) * std::exp(0.25 * qm * R2 * R2);
}

}  // namespace novsemi
