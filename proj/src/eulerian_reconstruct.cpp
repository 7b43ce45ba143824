#include "novsemi/eulerian_reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "novsemi/errors.hpp"
#include "novsemi/rng.hpp"

namespace novsemi {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double lerp_grid(const SpatialGrid& g, const std::vector<double>& f, double x) {
    const double r = (x - g.x_min) / g.h();
    if (r <= 0) return f.front();
    const auto n = static_cast<double>(g.n_points - 1);
    if (r >= n) return f.back();
    const auto i = static_cast<std::size_t>(r);
    const double w = r - static_cast<double>(i);
    return i + 1 < f.size() ? (1 - w) * f[i] + w * f[i + 1] : f[i];
}

std::vector<double> trapezoid_weights(const SpatialGrid& g) {
    std::vector<double> w(g.n_points, g.h());
    w.front() = w.back() = 0.5 * g.h();
    return w;
}

}  // namespace

bool EulerianField::masks_empty() const {
    return std::none_of(mask_u.begin(), mask_u.end(), [](unsigned char m) { return m != 0; }) &&
           std::none_of(mask_v.begin(), mask_v.end(), [](unsigned char m) { return m != 0; });
}

SigmaPair EulerianField::pair() const {
    SigmaPair p;
    p.grid = grid;
    p.u0 = u;
    p.v0 = v;
    p.du0 = ux;
    p.dv0 = vx;
    p.duv0.resize(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) p.duv0[i] = ux[i] * vx[i];
    for (const double k : kinks) {
        if (k > grid.x_min && k < grid.x_max) p.kinks.push_back(k);
    }
    return p;
}

LabelInverse::LabelInverse(const LagrangianState& s) : s_(&s), bl_(s.broken()) {
    const std::size_t n = s.size();
    const Trig tr = compute_trig(s);
    y_ = s.y;
    for (std::size_t j = 1; j < n; ++j) y_[j] = std::max(y_[j], y_[j - 1]);
    dy_.resize(n);
    dU_.resize(n);
    dV_.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        dy_[j] = s.q[j] * tr.cW[j] * tr.cZ[j];
        dU_[j] = 0.5 * s.q[j] * tr.sinW[j] * tr.cZ[j];
        dV_[j] = 0.5 * s.q[j] * tr.cW[j] * tr.sinZ[j];
    }
    // Fritsch-Carlson limiting keeps the y model monotone on clean cells.
    const double h = s.xi.dxi;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        if (bl_.is_break_cell(k)) continue;
        const double sec = (y_[k + 1] - y_[k]) / h;
        if (sec <= 0.0) {
            dy_[k] = dy_[k + 1] = 0.0;
            continue;
        }
        const double a = dy_[k] / sec, b = dy_[k + 1] / sec;
        const double r2 = a * a + b * b;
        if (r2 > 9.0) {
            const double tau = 3.0 / std::sqrt(r2);
            dy_[k] = tau * a * sec;
            dy_[k + 1] = tau * b * sec;
        }
    }
}

double LabelInverse::y_at(double xi) const { return bl_.hermite(y_, dy_, xi); }
double LabelInverse::U_at(double xi) const { return bl_.hermite(s_->U, dU_, xi); }
double LabelInverse::V_at(double xi) const { return bl_.hermite(s_->V, dV_, xi); }
double LabelInverse::W_at(double xi) const { return bl_.linear(s_->W, xi); }
double LabelInverse::Z_at(double xi) const { return bl_.linear(s_->Z, xi); }

double LabelInverse::locate(double x) const {
    const auto& y = y_;
    if (y.empty() || x < y.front() || x > y.back()) return kNaN;
    const auto it = std::lower_bound(y.begin(), y.end(), x);
    const auto j = static_cast<std::size_t>(it - y.begin());
    if (y[j] == x || j == 0) return s_->xi.xi(j);
    double lo = s_->xi.xi(j - 1), hi = s_->xi.xi(j);
    double glo = y_at(lo) - x, ghi = y_at(hi) - x;
    if (!(glo <= 0.0 && ghi >= 0.0)) {
        // The broken model may miss the nodes by rounding; fall back to the chord.
        const double w = (x - y[j - 1]) / (y[j] - y[j - 1]);
        return lo + w * (hi - lo);
    }
    for (int it2 = 0; it2 < 100 && hi - lo > 4e-16 * std::max(1.0, std::abs(hi)); ++it2) {
        const double mid = 0.5 * (lo + hi);
        if (y_at(mid) - x < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

void reconstruct_at(const LagrangianState& s, std::span<const double> xs, std::vector<double>& u,
                    std::vector<double>& v) {
    const LabelInverse inv(s);
    u.assign(xs.size(), 0.0);
    v.assign(xs.size(), 0.0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double x = xs[i];
        const auto it = std::lower_bound(inv.y().begin(), inv.y().end(), x);
        if (it != inv.y().end() && *it == x) {
            const auto j = static_cast<std::size_t>(it - inv.y().begin());
            u[i] = s.U[j];
            v[i] = s.V[j];
            continue;
        }
        const double xi = inv.locate(x);
        if (std::isnan(xi)) continue;
        u[i] = inv.U_at(xi);
        v[i] = inv.V_at(xi);
    }
}

EulerianField reconstruct_uv(const LagrangianState& s, const SpatialGrid& grid) {
    if (s.first_fold() < s.size()) throw StateInvalidError("characteristics not monotone");
    EulerianField f;
    f.grid = grid;
    f.t = s.t;
    std::vector<double> xs(grid.n_points);
    for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = grid.x(i);
    reconstruct_at(s, xs, f.u, f.v);
    const LabelInverse inv(s);
    for (const double k : s.kinks) f.kinks.push_back(inv.y_at(k));
    f.ux.assign(grid.n_points, 0.0);
    f.vx.assign(grid.n_points, 0.0);
    f.mask_u.assign(grid.n_points, 0);
    f.mask_v.assign(grid.n_points, 0);
    return f;
}

void reconstruct_derivatives(const LagrangianState& s, EulerianField& f, double mask_eps) {
    const LabelInverse inv(s);
    const std::size_t n = f.grid.n_points;
    f.ux.assign(n, 0.0);
    f.vx.assign(n, 0.0);
    f.mask_u.assign(n, 0);
    f.mask_v.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = f.grid.x(i);
        const auto it = std::lower_bound(inv.y().begin(), inv.y().end(), x);
        double W, Z;
        if (it != inv.y().end() && *it == x) {
            const auto j = static_cast<std::size_t>(it - inv.y().begin());
            W = s.W[j];
            Z = s.Z[j];
        } else {
            const double xi = inv.locate(x);
            if (std::isnan(xi)) continue;
            W = inv.W_at(xi);
            Z = inv.Z_at(xi);
        }
        const double cw = std::cos(0.5 * W), cz = std::cos(0.5 * Z);
        if (cw * cw > mask_eps) {
            f.ux[i] = std::sin(0.5 * W) / cw;
        } else {
            f.mask_u[i] = 1;
        }
        if (cz * cz > mask_eps) {
            f.vx[i] = std::sin(0.5 * Z) / cz;
        } else {
            f.mask_v[i] = 1;
        }
    }
}

EulerianField reconstruct(const LagrangianState& s, const SpatialGrid& grid, double mask_eps) {
    EulerianField f = reconstruct_uv(s, grid);
    reconstruct_derivatives(s, f, mask_eps);
    return f;
}

RadonMeasure1D MeasureTriple::sum() const {
    RadonMeasure1D m = RadonMeasure1D::zero(lam_u.grid);
    for (std::size_t i = 0; i < m.ac_density.size(); ++i) {
        m.ac_density[i] = lam_u.ac_density[i] + lam_v.ac_density[i] + lam_uv.ac_density[i];
    }
    for (const auto* l : {&lam_u, &lam_v, &lam_uv}) {
        m.atoms.insert(m.atoms.end(), l->atoms.begin(), l->atoms.end());
    }
    std::sort(m.atoms.begin(), m.atoms.end(), [](const Atom& a, const Atom& b) { return a.position < b.position; });
    std::vector<Atom> merged;
    for (const Atom& a : m.atoms) {
        if (!merged.empty() && std::abs(a.position - merged.back().position) <= 0.5 * m.grid.h()) {
            Atom& b = merged.back();
            const double mass = a.mass + b.mass;
            b.position = (a.position * a.mass + b.position * b.mass) / mass;
            b.mass = mass;
        } else {
            merged.push_back(a);
        }
    }
    m.atoms = std::move(merged);
    m.breaks = lam_u.breaks;
    return m;
}

const char* channel_name(Channel c) {
    switch (c) {
        case Channel::u: return "u";
        case Channel::v: return "v";
        case Channel::uv: return "uv";
        case Channel::mu: return "mu";
    }
    return "?";
}

namespace {

void merge_and_prune(std::vector<Atom>& atoms, double h, double total) {
    std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.position < b.position; });
    std::vector<Atom> out;
    for (const Atom& a : atoms) {
        if (!out.empty() && std::abs(a.position - out.back().position) <= 0.5 * h) {
            Atom& b = out.back();
            const double mass = a.mass + b.mass;
            if (mass > 0) b.position = (a.position * a.mass + b.position * b.mass) / mass;
            b.mass = mass;
        } else {
            out.push_back(a);
        }
    }
    const double floor = 1e-9 * std::max(1.0, total);
    std::erase_if(out, [floor](const Atom& a) { return a.mass <= floor; });
    atoms = std::move(out);
}

}  // namespace

MeasureTriple extract_measures(const LagrangianState& s, const SpatialGrid& grid, double eps_atom) {
    const Trig tr = compute_trig(s);
    const std::size_t n = s.size();
    MeasureTriple m{RadonMeasure1D::zero(grid), RadonMeasure1D::zero(grid), RadonMeasure1D::zero(grid)};
    RadonMeasure1D* lam[3] = {&m.lam_u, &m.lam_v, &m.lam_uv};
    const std::vector<double> w = trapezoid_weights(grid);
    const double h = grid.h(), dxi = s.xi.dxi;
    std::array<std::vector<double>, 3> g;
    for (auto& a : g) a.resize(n);
    std::vector<double> cc(n);
    for (std::size_t j = 0; j < n; ++j) {
        g[0][j] = s.q[j] * tr.sW[j] * tr.cZ[j];
        g[1][j] = s.q[j] * tr.cW[j] * tr.sZ[j];
        g[2][j] = s.q[j] * tr.sW[j] * tr.sZ[j];
        cc[j] = tr.cW[j] * tr.cZ[j];
    }
    double totals[3] = {0, 0, 0};
    for (std::size_t k = 0; k + 1 < n; ++k) {
        double mass[3];
        for (int c = 0; c < 3; ++c) {
            mass[c] = 0.5 * dxi * (g[c][k] + g[c][k + 1]);
            totals[c] += mass[c];
        }
        double a = s.y[k], b = s.y[k + 1];
        const bool ac = 0.5 * (cc[k] + cc[k + 1]) > eps_atom && b > a;
        if (!ac) {
            for (int c = 0; c < 3; ++c) {
                if (mass[c] > 0) lam[c]->atoms.push_back({0.5 * (a + b), mass[c]});
            }
            continue;
        }
        a = std::clamp(a, grid.x_min, grid.x_max);
        b = std::clamp(b, grid.x_min, grid.x_max);
        const double len = s.y[k + 1] - s.y[k];
        if (b <= a) {
            // Entire image outside the grid: keep the mass on the nearest end node.
            const std::size_t i = a <= grid.x_min ? 0 : grid.n_points - 1;
            for (int c = 0; c < 3; ++c) lam[c]->ac_density[i] += mass[c] / w[i];
            continue;
        }
        // Parts of the image beyond the grid go to the end nodes.
        const double out_lo = std::max(0.0, grid.x_min - s.y[k]);
        const double out_hi = std::max(0.0, s.y[k + 1] - grid.x_max);
        const auto i0 = static_cast<std::size_t>(std::max(0.0, std::floor((a - grid.x_min) / h + 0.5)));
        const auto i1 = std::min(grid.n_points - 1, static_cast<std::size_t>(std::floor((b - grid.x_min) / h + 0.5)));
        for (std::size_t i = i0; i <= i1; ++i) {
            const double lo = std::max(grid.x_min, grid.x(i) - 0.5 * h);
            const double hi = std::min(grid.x_max, grid.x(i) + 0.5 * h);
            double ov = std::max(0.0, std::min(b, hi) - std::max(a, lo));
            if (i == 0) ov += out_lo;
            if (i == grid.n_points - 1) ov += out_hi;
            if (ov <= 0) continue;
            for (int c = 0; c < 3; ++c) lam[c]->ac_density[i] += mass[c] * ov / len / w[i];
        }
    }
    for (int c = 0; c < 3; ++c) {
        merge_and_prune(lam[c]->atoms, h, totals[c]);
        lam[c]->breaks.clear();
    }
    if (!s.kinks.empty()) {
        // Densities jump at kink images: mark breaks and use one-sided point values next to them,
        // scaled so that each channel keeps the deposited total.
        const EulerianField f = reconstruct(s, grid);
        std::vector<double> breaks;
        std::vector<unsigned char> patched(grid.n_points, 0);
        for (const double k : f.kinks) {
            if (!(k > grid.x_min && k < grid.x_max)) continue;
            const double r = (k - grid.x_min) / h;
            if (std::abs(r - std::round(r)) < 1e-9) continue;
            breaks.push_back(k);
            const auto i0 = static_cast<std::size_t>(std::max(0.0, std::floor(r) - 1));
            const auto i1 = std::min(grid.n_points - 1, static_cast<std::size_t>(std::floor(r) + 2));
            for (std::size_t i = i0; i <= i1; ++i) patched[i] = !(f.mask_u[i] || f.mask_v[i]);
        }
        std::sort(breaks.begin(), breaks.end());
        breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
        const BrokenLattice bl(grid.lattice(), breaks);
        for (int c = 0; c < 3; ++c) {
            std::vector<double>& d = lam[c]->ac_density;
            double target = 0;
            for (std::size_t i = 0; i < d.size(); ++i) target += w[i] * d[i];
            std::vector<double> rest = d, point(d.size(), 0.0);
            for (std::size_t i = 0; i < d.size(); ++i) {
                if (!patched[i]) continue;
                const double a = f.ux[i] * f.ux[i], b = f.vx[i] * f.vx[i];
                point[i] = c == 0 ? a : c == 1 ? b : a * b;
                rest[i] = 0;
            }
            const double m_point = bl.integrate(point), m_rest = bl.integrate(rest);
            const double scale = m_point > 0 ? std::max(0.0, (target - m_rest) / m_point) : 1.0;
            for (std::size_t i = 0; i < d.size(); ++i)
                if (patched[i]) d[i] = scale * point[i];
            lam[c]->breaks = breaks;
        }
    }
    return m;
}

RadonMeasure1D mu_t(const LagrangianState& s, const SpatialGrid& grid, double eps_atom) {
    return extract_measures(s, grid, eps_atom).sum();
}

Balances balances(const LagrangianState& s, const MeasureTriple& m, const ConservedSet& cs,
                  const EulerianField* field) {
    const Trig tr = compute_trig(s);
    const std::size_t n = s.size();
    std::vector<double> u2(n), v2(n), g(n), hf(n), u2v(n), v2u(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double q = s.q[j], U = s.U[j], V = s.V[j];
        const double cc = q * tr.cW[j] * tr.cZ[j];
        const double ss = q * tr.sinW[j] * tr.sinZ[j];
        u2[j] = U * U * cc;
        v2[j] = V * V * cc;
        g[j] = U * V * cc + 0.25 * ss;
        hf[j] = 3.0 * U * U * V * V * cc + U * V * ss;
        u2v[j] = U * U * q * tr.cW[j] * tr.sZ[j];
        v2u[j] = V * V * q * tr.sW[j] * tr.cZ[j];
    }
    const double h = s.xi.dxi;
    Balances b;
    b.t = s.t;
    b.u2 = trapezoid(u2, h);
    b.v2 = trapezoid(v2, h);
    b.lam_u = m.lam_u.total_mass();
    b.lam_v = m.lam_v.total_mass();
    b.lam_uv = m.lam_uv.total_mass();
    b.lam_uv_ac = m.lam_uv.ac_mass();
    b.E_u = b.u2 + b.lam_u;
    b.E_v = b.v2 + b.lam_v;
    b.G = trapezoid(g, h);
    const double field_h = trapezoid(hf, h);
    const double cross = trapezoid(u2v, h) + trapezoid(v2u, h);
    b.H = field_h + cross - b.lam_uv;
    b.csho_margin = field_h - b.lam_uv_ac + cross - cs.H;
    if (field) {
        std::vector<double> a(field->u.size()), c(field->u.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = field->u[i] * field->u[i];
            c[i] = field->v[i] * field->v[i];
        }
        b.u2_grid = trapezoid(a, field->grid.h());
        b.v2_grid = trapezoid(c, field->grid.h());
    }
    return b;
}

double plateau_consistency(const LagrangianState& s, double slack) {
    double worst = 0.0;
    for (std::size_t j = 0; j + 1 < s.size(); ++j) {
        if (s.y[j + 1] - s.y[j] <= slack * s.xi.dxi) {
            worst = std::max({worst, std::abs(s.U[j + 1] - s.U[j]), std::abs(s.V[j + 1] - s.V[j])});
        }
    }
    return worst;
}

SingularSupport singular_support(const EulerianField& f, const RadonMeasure1D& lam, Channel c, double tol) {
    SingularSupport r;
    const double lim = std::sqrt(tol);
    for (const Atom& a : lam.atoms) {
        ++r.atoms;
        const double u = lerp_grid(f.grid, f.u, a.position), v = lerp_grid(f.grid, f.v, a.position);
        double other = 0;
        switch (c) {
            case Channel::u: other = v; break;
            case Channel::v: other = u; break;
            default: other = u * v; break;
        }
        if (std::abs(other) <= lim) ++r.on_zero_set;
    }
    return r;
}

// ---- weak-form checks ---------------------------------------------------------------

double Bump::operator()(double s) const {
    const double z = (s - center) / radius;
    if (std::abs(z) >= 1.0) return 0.0;
    const double c = std::cos(0.5 * M_PI * z);
    return c * c;
}

double Bump::d(double s) const {
    const double z = (s - center) / radius;
    if (std::abs(z) >= 1.0) return 0.0;
    return -0.5 * M_PI / radius * std::sin(M_PI * z);
}

double TestFunction::phi(double t, double x) const {
    double r = 0;
    for (const auto& k : terms) r += k.weight * k.bt(t) * k.bx(x);
    return r;
}
double TestFunction::phi_t(double t, double x) const {
    double r = 0;
    for (const auto& k : terms) r += k.weight * k.bt.d(t) * k.bx(x);
    return r;
}
double TestFunction::phi_x(double t, double x) const {
    double r = 0;
    for (const auto& k : terms) r += k.weight * k.bt(t) * k.bx.d(x);
    return r;
}
TestFunction TestFunction::operator+(const TestFunction& o) const {
    TestFunction r = *this;
    r.terms.insert(r.terms.end(), o.terms.begin(), o.terms.end());
    return r;
}

std::vector<TestFunction> default_test_bank(double t0, double t1, double x_lo, double x_hi) {
    const double tc = 0.5 * (t0 + t1), tr = 0.45 * (t1 - t0);
    const double xc = 0.5 * (x_lo + x_hi), xr = 0.5 * (x_hi - x_lo);
    std::vector<TestFunction> bank;
    const double xs[3] = {xc - 0.4 * xr, xc, xc + 0.4 * xr};
    for (const double c : xs) {
        bank.push_back({{{{tc, tr}, {c, 0.5 * xr}, 1.0}}});
    }
    bank.push_back({{{{tc - 0.2 * tr, 0.6 * tr}, {xc - 0.2 * xr, 0.4 * xr}, 1.0}}});
    bank.push_back({{{{tc + 0.2 * tr, 0.6 * tr}, {xc + 0.2 * xr, 0.4 * xr}, 1.0}}});
    bank.push_back({{{{tc, tr}, {xc, 0.9 * xr}, 1.0}}});
    return bank;
}

EulerianSnapshot make_snapshot(const LagrangianState& s, const SpatialGrid& grid) {
    return {reconstruct(s, grid), extract_measures(s, grid)};
}

namespace {

struct Support {
    double t_lo, t_hi, x_lo, x_hi;
};

Support bank_support(const std::vector<TestFunction>& bank) {
    Support s{1e300, -1e300, 1e300, -1e300};
    for (const auto& f : bank) {
        for (const auto& k : f.terms) {
            s.t_lo = std::min(s.t_lo, k.bt.center - k.bt.radius);
            s.t_hi = std::max(s.t_hi, k.bt.center + k.bt.radius);
            s.x_lo = std::min(s.x_lo, k.bx.center - k.bx.radius);
            s.x_hi = std::max(s.x_hi, k.bx.center + k.bx.radius);
        }
    }
    return s;
}

void check_support(const std::vector<EulerianSnapshot>& snaps, const Support& sp) {
    if (snaps.size() < 2) throw DomainError("residuals need at least two snapshots");
    const SpatialGrid& g = snaps.front().field.grid;
    for (const auto& s : snaps) {
        if (!(s.field.grid == g)) throw GridMismatchError("snapshots do not share one grid");
    }
    if (sp.x_lo < g.x_min || sp.x_hi > g.x_max) throw DomainError("test function support leaves the x-grid");
    const double t0 = std::min(snaps.front().field.t, snaps.back().field.t);
    const double t1 = std::max(snaps.front().field.t, snaps.back().field.t);
    if (sp.t_lo < t0 - 1e-12 || sp.t_hi > t1 + 1e-12) throw DomainError("test function support leaves the time span");
}

/// Oracle terms on the x-nodes inside [x_lo, x_hi]; first index returned through i0.
NonlocalTerms oracle_on_support(const EulerianField& f, const Support& sp, std::size_t& i0) {
    const SpatialGrid& g = f.grid;
    i0 = static_cast<std::size_t>(std::max(0.0, std::floor((sp.x_lo - g.x_min) / g.h())));
    const auto i1 = std::min(g.n_points - 1, static_cast<std::size_t>(std::ceil((sp.x_hi - g.x_min) / g.h())));
    std::vector<double> xs;
    for (std::size_t i = i0; i <= i1; ++i) xs.push_back(g.x(i));
    return eulerian_oracle_at(f.pair(), xs);
}

/// Trapezoid in time over possibly non-uniform snapshot times.
double time_trapezoid(const std::vector<EulerianSnapshot>& snaps, const std::vector<double>& vals) {
    double r = 0;
    for (std::size_t k = 0; k + 1 < snaps.size(); ++k) {
        r += 0.5 * (snaps[k + 1].field.t - snaps[k].field.t) * (vals[k] + vals[k + 1]);
    }
    return r;
}

}  // namespace

std::vector<WeakResidual> weak_residual(const std::vector<EulerianSnapshot>& snaps,
                                        const std::vector<TestFunction>& bank) {
    const Support sp = bank_support(bank);
    check_support(snaps, sp);
    const SpatialGrid& g = snaps.front().field.grid;
    const std::vector<double> w = trapezoid_weights(g);
    std::vector<std::vector<double>> iu(bank.size(), std::vector<double>(snaps.size())), iv = iu;
    for (std::size_t k = 0; k < snaps.size(); ++k) {
        const EulerianField& f = snaps[k].field;
        std::size_t i0 = 0;
        const NonlocalTerms o = oracle_on_support(f, sp, i0);
        for (std::size_t b = 0; b < bank.size(); ++b) {
            double su = 0, sv = 0;
            for (std::size_t m = 0; m < o.P1.size(); ++m) {
                const std::size_t i = i0 + m;
                const double x = g.x(i);
                const double ph = bank[b].phi(f.t, x), pt = bank[b].phi_t(f.t, x), px = bank[b].phi_x(f.t, x);
                if (ph == 0 && pt == 0 && px == 0) continue;
                const double u = f.u[i], v = f.v[i], ux = f.ux[i], vx = f.vx[i];
                const double trans = pt + u * v * px;
                const double fu = u * u * v + u * ux * vx + 0.5 * v * ux * ux - o.P1[m] - o.dxP2[m];
                const double fv = u * v * v + v * ux * vx + 0.5 * u * vx * vx - o.S1[m] - o.dxS2[m];
                su += w[i] * (ux * trans + fu * ph);
                sv += w[i] * (vx * trans + fv * ph);
            }
            iu[b][k] = su;
            iv[b][k] = sv;
        }
    }
    std::vector<WeakResidual> out(bank.size());
    for (std::size_t b = 0; b < bank.size(); ++b) {
        out[b].r_u = time_trapezoid(snaps, iu[b]);
        out[b].r_v = time_trapezoid(snaps, iv[b]);
    }
    return out;
}

std::vector<double> transport_residual(const std::vector<EulerianSnapshot>& snaps, Channel which,
                                       const std::vector<TestFunction>& bank) {
    const Support sp = bank_support(bank);
    check_support(snaps, sp);
    const SpatialGrid& g = snaps.front().field.grid;
    const std::vector<double> w = trapezoid_weights(g);
    std::vector<std::vector<double>> acc(bank.size(), std::vector<double>(snaps.size()));
    for (std::size_t k = 0; k < snaps.size(); ++k) {
        const EulerianField& f = snaps[k].field;
        const RadonMeasure1D lam = [&] {
            switch (which) {
                case Channel::u: return snaps[k].measures.lam_u;
                case Channel::v: return snaps[k].measures.lam_v;
                case Channel::uv: return snaps[k].measures.lam_uv;
                default: return snaps[k].measures.sum();
            }
        }();
        std::size_t i0 = 0;
        const NonlocalTerms o = oracle_on_support(f, sp, i0);
        for (std::size_t b = 0; b < bank.size(); ++b) {
            const TestFunction& tf = bank[b];
            double s = 0;
            for (std::size_t m = 0; m < o.P1.size(); ++m) {
                const std::size_t i = i0 + m;
                const double x = g.x(i);
                const double ph = tf.phi(f.t, x), pt = tf.phi_t(f.t, x), px = tf.phi_x(f.t, x);
                if (ph == 0 && pt == 0 && px == 0) continue;
                const double u = f.u[i], v = f.v[i], ux = f.ux[i], vx = f.vx[i];
                const double a = u * u * v - o.P1[m] - o.dxP2[m];
                const double c = u * v * v - o.S1[m] - o.dxS2[m];
                double src = 0;
                switch (which) {
                    case Channel::u: src = 2 * ux * a + u * ux * ux * vx; break;
                    case Channel::v: src = 2 * vx * c + v * ux * vx * vx; break;
                    case Channel::uv: src = 2 * ux * vx * (a * vx + c * ux); break;
                    case Channel::mu:
                        src = 2 * ux * (1 + vx * vx) * a + 2 * vx * (1 + ux * ux) * c + u * ux * ux * vx +
                              v * ux * vx * vx;
                        break;
                }
                s += w[i] * (lam.ac_density[i] * (pt + u * v * px) + src * ph);
            }
            for (const Atom& at : lam.atoms) {
                const double u = lerp_grid(g, f.u, at.position), v = lerp_grid(g, f.v, at.position);
                s += at.mass * (tf.phi_t(f.t, at.position) + u * v * tf.phi_x(f.t, at.position));
            }
            acc[b][k] = s;
        }
    }
    std::vector<double> out(bank.size());
    for (std::size_t b = 0; b < bank.size(); ++b) out[b] = time_trapezoid(snaps, acc[b]);
    return out;
}

HolderReport holder_check(const std::vector<EulerianSnapshot>& snaps, std::size_t pairs, std::uint64_t seed) {
    HolderReport r;
    const std::size_t S = snaps.size();
    if (S < 2) return r;
    const SpatialGrid& g = snaps.front().field.grid;
    std::vector<double> du(g.n_points), dv(g.n_points);
    for (std::size_t a = 0; a < S; ++a) {
        for (std::size_t b = a + 1; b < S; ++b) {
            const double dt = std::abs(snaps[b].field.t - snaps[a].field.t);
            if (dt <= 0) continue;
            for (std::size_t i = 0; i < g.n_points; ++i) {
                const double x = snaps[a].field.u[i] - snaps[b].field.u[i];
                const double y = snaps[a].field.v[i] - snaps[b].field.v[i];
                du[i] = x * x;
                dv[i] = y * y;
            }
            r.lipschitz_u = std::max(r.lipschitz_u, std::sqrt(trapezoid(du, g.h())) / dt);
            r.lipschitz_v = std::max(r.lipschitz_v, std::sqrt(trapezoid(dv, g.h())) / dt);
        }
    }
    SplitMix64 rng(seed);
    for (std::size_t k = 0; k < pairs; ++k) {
        const std::size_t a = rng.below(S), b = rng.below(S);
        const std::size_t i = rng.below(g.n_points), j = rng.below(g.n_points);
        const double den = std::sqrt(std::abs(snaps[a].field.t - snaps[b].field.t)) + std::sqrt(std::abs(g.x(i) - g.x(j)));
        if (den <= 0) continue;
        r.holder_u = std::max(r.holder_u, std::abs(snaps[a].field.u[i] - snaps[b].field.u[j]) / den);
        r.holder_v = std::max(r.holder_v, std::abs(snaps[a].field.v[i] - snaps[b].field.v[j]) / den);
    }
    return r;
}

void write_snapshot_csv(const EulerianField& f, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot write " + path.string());
    os << "x,u,v,ux,vx,mask_u,mask_v\n";
    char buf[256];
    for (std::size_t i = 0; i < f.grid.n_points; ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d\n", f.grid.x(i), f.u[i], f.v[i], f.ux[i],
                      f.vx[i], int(f.mask_u[i]), int(f.mask_v[i]));
        os << buf;
    }
}

void write_measures_csv(const MeasureTriple& m, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot write " + path.string());
    os << "x,ac_u,ac_v,ac_uv\n";
    char buf[256];
    const SpatialGrid& g = m.lam_u.grid;
    for (std::size_t i = 0; i < g.n_points; ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", g.x(i), m.lam_u.ac_density[i],
                      m.lam_v.ac_density[i], m.lam_uv.ac_density[i]);
        os << buf;
    }
    os << "\nposition,mass,channel\n";
    const std::pair<const RadonMeasure1D*, const char*> chans[] = {{&m.lam_u, "u"}, {&m.lam_v, "v"}, {&m.lam_uv, "uv"}};
    for (const auto& [lam, name] : chans) {
        for (const Atom& a : lam->atoms) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%s\n", a.position, a.mass, name);
            os << buf;
        }
    }
}

}  // namespace novsemi
