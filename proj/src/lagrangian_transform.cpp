#include "novsemi/lagrangian_transform.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "novsemi/errors.hpp"

namespace novsemi {

namespace {

constexpr double pi = std::numbers::pi;
constexpr double range_slack = 1e-9;

double sgn_or_plus(double v) { return v < 0.0 ? -1.0 : 1.0; }

// Distance s >= 0 into a piece where the forward map has risen by c.
double solve_piece(double c, double len, double fa, double fb) {
    if (c <= 0.0) return 0.0;
    const double a = 0.5 * (fb - fa) / len;
    const double b = 1.0 + fa;
    const double disc = std::max(b * b + 4.0 * a * c, 0.0);
    const double s = 2.0 * c / (b + std::sqrt(disc));
    return std::clamp(s, 0.0, len);
}

}  // namespace

XiGrid XiGrid::make(double dxi, std::size_t below, std::size_t above, double offset) {
    if (!(dxi > 0.0) || !std::isfinite(dxi)) throw DomainError("label spacing must be positive");
    if (!(std::abs(offset) <= 0.5 * dxi * (1 + 1e-12))) throw DomainError("label offset exceeds half a step");
    return {dxi, below + above + 1, below, offset};
}

void LagrangianState::validate() const {
    const std::size_t n = xi.n_points;
    for (const auto* a : {&U, &V, &W, &Z, &q, &y})
        if (a->size() != n) throw StateInvalidError("state array length differs from label grid");
    for (std::size_t j = 0; j < n; ++j) {
        for (const auto* a : {&U, &V, &W, &Z, &q, &y})
            if (!std::isfinite((*a)[j])) throw StateInvalidError("non-finite field at label " + std::to_string(j));
        if (!(q[j] > 0.0)) throw StateInvalidError("q is not positive at label " + std::to_string(j));
    }
    if (const std::size_t k = first_fold(); k < n) throw StateInvalidError("y decreases at label " + std::to_string(k + 1));
}

std::size_t LagrangianState::first_fold() const {
    const BrokenLattice bl = broken();
    for (std::size_t k = 0; k + 1 < y.size(); ++k) {
        const double slack = (bl.is_break_cell(k) ? kKinkCellSlack : kMonotoneSlack) * xi.dxi;
        if (y[k + 1] < y[k] - slack) return k;
    }
    return size();
}

LabelMap::LabelMap(const RadonMeasure1D& mu0, const SigmaPair* p) {
    mu0.validate();
    const SpatialGrid& g = mu0.grid;
    if (!(g.x_min < 0.0 && g.x_max > 0.0)) throw DomainError("spatial grid must contain x = 0 in its interior");
    for (const auto& a : mu0.atoms)
        if (a.position < g.x_min || a.position > g.x_max) throw DomainError("atom outside the spatial grid");

    const BrokenLattice bl(g.lattice(), mu0.breaks);
    const auto segs = bl.segments(mu0.ac_density);

    std::vector<double> cuts;
    cuts.push_back(0.0);
    for (const auto& a : mu0.atoms) cuts.push_back(a.position);
    std::sort(cuts.begin(), cuts.end());

    double acc = 0.0;
    bool origin_set = false;
    std::size_t next_atom = 0;
    auto pass_point = [&](double x) {
        // Called with x increasing; settles the origin and the atoms at or before x.
        if (!origin_set && x >= 0.0) {
            origin_ = acc;
            origin_set = true;
        }
        while (next_atom < mu0.atoms.size() && mu0.atoms[next_atom].position <= x) {
            const auto& a = mu0.atoms[next_atom++];
            plateaus_.push_back({a.position, a.mass, acc, acc + a.mass, 0.5, 0.5});
            acc += a.mass;
        }
    };

    for (const auto& s : segs) {
        double a = s.a, fa = s.fa;
        auto emit = [&](double b, double fb) {
            if (b <= a) return;
            pass_point(a);
            Piece pc{a, b, acc, fa, fb};
            acc = pc.g1();
            pieces_.push_back(pc);
            a = b;
            fa = fb;
        };
        for (double c : cuts) {
            if (c > a && c < s.b) {
                const double fc = s.fa + (s.fb - s.fa) * (c - s.a) / (s.b - s.a);
                emit(c, fc);
            }
        }
        emit(s.b, s.fb);
    }
    pass_point(g.x_max);

    for (auto& pl : plateaus_) {
        pl.xi_lo -= origin_;
        pl.xi_hi -= origin_;
    }
    lo_ = -origin_;
    hi_ = acc - origin_;

    if (p != nullptr) {
        const BrokenLattice pb = p->broken();
        for (auto& pl : plateaus_) {
            const double a = std::pow(pb.linear(p->du0, pl.position, Side::left), 2) +
                             std::pow(pb.linear(p->du0, pl.position, Side::right), 2);
            const double b = std::pow(pb.linear(p->dv0, pl.position, Side::left), 2) +
                             std::pow(pb.linear(p->dv0, pl.position, Side::right), 2);
            if (a + b > 0.0) {
                pl.share_w = a / (a + b);
                pl.share_z = b / (a + b);
            }
        }
        for (double k : p->kinks) kink_labels_.push_back(xi_of(k));
    } else {
        for (double k : mu0.breaks) kink_labels_.push_back(xi_of(k));
    }
}

int LabelMap::plateau_of(double xi) const {
    for (std::size_t k = 0; k < plateaus_.size(); ++k)
        if (xi >= plateaus_[k].xi_lo && xi <= plateaus_[k].xi_hi) return static_cast<int>(k);
    return -1;
}

double LabelMap::y0(double xi) const {
    const double scale = std::max(1.0, hi_ - lo_);
    if (xi < lo_ - range_slack * scale || xi > hi_ + range_slack * scale)
        throw LabelDomainError("label " + std::to_string(xi) + " outside the range covered by the spatial grid");
    if (const int k = plateau_of(xi); k >= 0) return plateaus_[static_cast<std::size_t>(k)].position;
    const double T = xi + origin_;
    auto it = std::upper_bound(pieces_.begin(), pieces_.end(), T,
                               [](double v, const Piece& pc) { return v < pc.g0; });
    if (it == pieces_.begin()) return pieces_.front().x0;
    const Piece& pc = *std::prev(it);
    const double len = pc.x1 - pc.x0;
    return pc.x0 + solve_piece(std::min(T, pc.g1()) - pc.g0, len, pc.fa, pc.fb);
}

double LabelMap::xi_of(double x, Side side) const {
    if (pieces_.empty()) return 0.0;
    if (x <= pieces_.front().x0) return pieces_.front().g0 - origin_;
    if (x >= pieces_.back().x1) return pieces_.back().g1() - origin_;
    std::size_t k;
    if (side == Side::right) {
        auto it = std::upper_bound(pieces_.begin(), pieces_.end(), x,
                                   [](double v, const Piece& pc) { return v < pc.x0; });
        k = static_cast<std::size_t>(std::prev(it) - pieces_.begin());
    } else {
        auto it = std::lower_bound(pieces_.begin(), pieces_.end(), x,
                                   [](const Piece& pc, double v) { return pc.x1 < v; });
        k = static_cast<std::size_t>(it - pieces_.begin());
    }
    const Piece& pc = pieces_[k];
    const double s = x - pc.x0;
    const double len = pc.x1 - pc.x0;
    const double f = pc.fa + 0.5 * (pc.fb - pc.fa) * s / len;
    return pc.g0 + s * (1.0 + f) - origin_;
}

XiGrid make_label_grid(const LabelMap& map, std::size_t n_target, bool align_kinks) {
    if (n_target < 3) throw DomainError("label grid needs at least 3 points");
    const double lo = map.xi_lo(), hi = map.xi_hi();
    double dxi = (hi - lo) / static_cast<double>(n_target - 1);
    double offset = 0.0;
    const auto& kinks = map.kink_labels();
    if (align_kinks && !kinks.empty()) {
        const auto [a, b] = std::minmax_element(kinks.begin(), kinks.end());
        const double cells = std::round((*b - *a) / dxi);
        if (cells >= 1.0) dxi = (*b - *a) / cells;
        const double r = *a / dxi - 0.5;
        offset = (r - std::round(r)) * dxi;
    }
    const auto below = static_cast<std::size_t>(std::floor((offset - lo) / dxi));
    const auto above = static_cast<std::size_t>(std::floor((hi - offset) / dxi));
    return XiGrid::make(dxi, below, above, offset);
}

std::vector<double> build_y0_from_measure(const SigmaPair& p, const RadonMeasure1D& mu0, const XiGrid& xi) {
    if (!(p.grid == mu0.grid)) throw GridMismatchError("measure and pair live on different grids");
    const LabelMap map(mu0, &p);
    std::vector<double> y0(xi.n_points);
    for (std::size_t j = 0; j < xi.n_points; ++j) y0[j] = map.y0(xi.xi(j));
    return y0;
}

std::vector<double> build_y0_from_density(const SigmaPair& p, const XiGrid& xi) {
    p.validate();
    return build_y0_from_measure(p, ac_energy_measure(p), xi);
}

LagrangianState initialize_state(const SigmaPair& p, const std::vector<double>& y0, const XiGrid& xi,
                                 const LabelMap* map) {
    const std::size_t n = xi.n_points;
    if (y0.size() != n) throw DomainError("y0 length differs from label grid");
    LagrangianState s;
    s.xi = xi;
    s.t = 0.0;
    s.U.resize(n);
    s.V.resize(n);
    s.W.resize(n);
    s.Z.resize(n);
    s.q.assign(n, 1.0);
    s.y = y0;

    const BrokenLattice bl = p.broken();
    const double snap = 1e-12 * p.grid.h();
    auto at_kink = [&](double x) {
        auto it = std::lower_bound(p.kinks.begin(), p.kinks.end(), x - snap);
        return it != p.kinks.end() && std::abs(*it - x) <= snap;
    };
    for (std::size_t j = 0; j < n; ++j) {
        const double x = y0[j];
        double du, dv;
        if (at_kink(x)) {
            s.U[j] = 0.5 * (bl.hermite(p.u0, p.du0, x, Side::left) + bl.hermite(p.u0, p.du0, x, Side::right));
            s.V[j] = 0.5 * (bl.hermite(p.v0, p.dv0, x, Side::left) + bl.hermite(p.v0, p.dv0, x, Side::right));
            du = 0.5 * (bl.linear(p.du0, x, Side::left) + bl.linear(p.du0, x, Side::right));
            dv = 0.5 * (bl.linear(p.dv0, x, Side::left) + bl.linear(p.dv0, x, Side::right));
        } else {
            s.U[j] = bl.hermite(p.u0, p.du0, x);
            s.V[j] = bl.hermite(p.v0, p.dv0, x);
            du = bl.linear(p.du0, x);
            dv = bl.linear(p.dv0, x);
        }
        bool plateau;
        if (map != nullptr) {
            plateau = map->plateau_of(xi.xi(j)) >= 0;
        } else {
            plateau = (j > 0 && y0[j - 1] == x) || (j + 1 < n && y0[j + 1] == x);
        }
        if (plateau) {
            s.W[j] = pi * sgn_or_plus(du);
            s.Z[j] = pi * sgn_or_plus(dv);
        } else {
            s.W[j] = 2.0 * std::atan(du);
            s.Z[j] = 2.0 * std::atan(dv);
        }
    }

    if (map != nullptr) {
        s.kinks = map->kink_labels();
    } else {
        // Invert y0 linearly at each kink.
        for (double k : p.kinks) {
            auto it = std::lower_bound(y0.begin(), y0.end(), k);
            if (it == y0.begin() || it == y0.end()) continue;
            const auto j = static_cast<std::size_t>(it - y0.begin());
            const double w = (y0[j] == y0[j - 1]) ? 0.0 : (k - y0[j - 1]) / (y0[j] - y0[j - 1]);
            s.kinks.push_back(xi.xi(j - 1) + w * xi.dxi);
        }
    }
    std::sort(s.kinks.begin(), s.kinks.end());
    return s;
}

LabelSetup setup_labels(const SigmaPair& p, const RadonMeasure1D& mu0, std::size_t n_labels, bool align_kinks) {
    p.validate();
    if (!(p.grid == mu0.grid)) throw GridMismatchError("measure and pair live on different grids");
    LabelMap map(mu0, &p);
    const XiGrid xi = make_label_grid(map, n_labels, align_kinks);
    std::vector<double> y0(xi.n_points);
    for (std::size_t j = 0; j < xi.n_points; ++j) y0[j] = map.y0(xi.xi(j));
    LagrangianState st = initialize_state(p, y0, xi, &map);
    return {std::move(map), xi, std::move(st)};
}

OmegaReport check_omega_membership(const LagrangianState& s, double R1, double R2, double q_lo, double q_hi) {
    const std::size_t n = s.size();
    std::vector<double> u2(n), u4(n), v2(n), v4(n), w2(n), w4(n), z2(n), z4(n);
    OmegaReport r;
    r.q_min = n ? s.q[0] : 0.0;
    r.q_max = r.q_min;
    for (std::size_t j = 0; j < n; ++j) {
        const double cw = std::cos(0.5 * s.W[j]), cz = std::cos(0.5 * s.Z[j]);
        const double dU = 0.5 * s.q[j] * std::sin(s.W[j]) * cz * cz;
        const double dV = 0.5 * s.q[j] * cw * cw * std::sin(s.Z[j]);
        u2[j] = s.U[j] * s.U[j] + dU * dU;
        u4[j] = std::pow(s.U[j], 4) + std::pow(dU, 4);
        v2[j] = s.V[j] * s.V[j] + dV * dV;
        v4[j] = std::pow(s.V[j], 4) + std::pow(dV, 4);
        w2[j] = s.W[j] * s.W[j];
        w4[j] = w2[j] * w2[j];
        z2[j] = s.Z[j] * s.Z[j];
        z4[j] = z2[j] * z2[j];
        r.inf_W = std::max(r.inf_W, std::abs(s.W[j]));
        r.inf_Z = std::max(r.inf_Z, std::abs(s.Z[j]));
        r.q_min = std::min(r.q_min, s.q[j]);
        r.q_max = std::max(r.q_max, s.q[j]);
    }
    const double h = s.xi.dxi;
    r.norm_U = std::sqrt(trapezoid(u2, h)) + std::pow(trapezoid(u4, h), 0.25);
    r.norm_V = std::sqrt(trapezoid(v2, h)) + std::pow(trapezoid(v4, h), 0.25);
    r.l2_W = std::sqrt(trapezoid(w2, h));
    r.l2_Z = std::sqrt(trapezoid(z2, h));
    r.l4_W = std::pow(trapezoid(w4, h), 0.25);
    r.l4_Z = std::pow(trapezoid(z4, h), 0.25);
    const double wz_inf = 1.5 * pi;
    r.U_ok = r.norm_U <= R1;
    r.V_ok = r.norm_V <= R1;
    r.W_l2_ok = r.l2_W <= R2;
    r.Z_l2_ok = r.l2_Z <= R2;
    r.W_inf_ok = r.inf_W <= wz_inf;
    r.Z_inf_ok = r.inf_Z <= wz_inf;
    r.q_ok = r.q_min >= q_lo && r.q_max <= q_hi && r.q_min > 0.0;
    const double l4_bound = std::sqrt(wz_inf * R2);
    r.l4_ok = r.l4_W <= l4_bound * (1 + 1e-12) && r.l4_Z <= l4_bound * (1 + 1e-12);
    return r;
}

}  // namespace novsemi
