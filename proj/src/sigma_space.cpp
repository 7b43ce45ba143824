#include "novsemi/sigma_space.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "novsemi/errors.hpp"

namespace novsemi {

namespace {

constexpr double radicand_tol = 1e-9;
constexpr double grid_uniform_tol = 1e-12;

void require_same(const SpatialGrid& a, const SpatialGrid& b) {
    if (!(a == b)) throw GridMismatchError("pairs live on different grids");
}

double sq(double x) { return x * x; }

}  // namespace

SpatialGrid SpatialGrid::make(double x_min, double x_max, std::size_t n_points) {
    if (n_points < 3) throw DomainError("spatial grid needs at least 3 points");
    if (!(x_min < x_max) || !std::isfinite(x_min) || !std::isfinite(x_max))
        throw DomainError("spatial grid needs finite x_min < x_max");
    return {x_min, x_max, n_points};
}

void SigmaPair::validate() const {
    const std::size_t n = grid.n_points;
    for (const auto* a : {&u0, &v0, &du0, &dv0, &duv0})
        if (a->size() != n) throw ValidationError("array length differs from grid size");
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto* a : {&u0, &v0, &du0, &dv0, &duv0})
            if (!std::isfinite((*a)[i]))
                throw ValidationError("non-finite entry at node " + std::to_string(i));
        if (duv0[i] != du0[i] * dv0[i])
            throw ValidationError("duv0 differs from du0*dv0 at node " + std::to_string(i));
    }
}

double ConservedSet::excess() const { return std::max(0.0, 7.0 * E_u * E_v - H); }

RadonMeasure1D RadonMeasure1D::zero(const SpatialGrid& g) {
    return {g, std::vector<double>(g.n_points, 0.0), {}, {}};
}

void RadonMeasure1D::validate() const {
    if (ac_density.size() != grid.n_points) throw ValidationError("density length differs from grid");
    for (double d : ac_density)
        if (!(d >= 0.0) || !std::isfinite(d)) throw ValidationError("negative or non-finite density");
    for (std::size_t k = 0; k < atoms.size(); ++k) {
        if (!(atoms[k].mass > 0.0) || !std::isfinite(atoms[k].mass))
            throw ValidationError("atom mass must be positive");
        if (k > 0 && !(atoms[k].position > atoms[k - 1].position))
            throw ValidationError("atom positions must increase strictly");
    }
}

double RadonMeasure1D::ac_mass() const {
    return BrokenLattice(grid.lattice(), breaks).integrate(ac_density);
}

double RadonMeasure1D::atom_mass() const {
    double m = 0.0;
    for (const auto& a : atoms) m += a.mass;
    return m;
}

std::vector<double> RadonMeasure1D::cumulative() const {
    const BrokenLattice bl(grid.lattice(), breaks);
    std::vector<double> out(grid.n_points, 0.0);
    std::vector<Segment> segs;
    double acc = 0.0;
    std::size_t next_atom = 0;
    for (std::size_t i = 0; i < grid.n_points; ++i) {
        if (i > 0) {
            segs.clear();
            bl.cell_segments(ac_density, i - 1, segs);
            for (const auto& s : segs) acc += 0.5 * (s.b - s.a) * (s.fa + s.fb);
        }
        const double xi = grid.x(i);
        while (next_atom < atoms.size() && atoms[next_atom].position <= xi) acc += atoms[next_atom++].mass;
        out[i] = acc;
    }
    return out;
}

double metric_distance(const SigmaPair& a, const SigmaPair& b) {
    require_same(a.grid, b.grid);
    const std::size_t n = a.grid.n_points;
    std::vector<double> f(n);
    for (std::size_t i = 0; i < n; ++i)
        f[i] = sq(a.u0[i] - b.u0[i]) + sq(a.du0[i] - b.du0[i]) + sq(a.v0[i] - b.v0[i]) +
               sq(a.dv0[i] - b.dv0[i]) + sq(a.duv0[i] - b.duv0[i]);
    return std::sqrt(trapezoid(f, a.grid.h()));
}

ConservedSet conserved_from_integrals(double E_u, double E_v, double G, double H) {
    ConservedSet c{E_u, E_v, G, H, 0.0, 0.0};
    double r = 7.0 * E_u * E_v - H;
    const double scale = std::max({7.0 * E_u * E_v, std::abs(H), 1e-300});
    if (r < -radicand_tol * scale)
        throw InconsistentDataError("7 E_u E_v - H is negative beyond quadrature tolerance");
    r = std::max(r, 0.0);
    c.K_u = 0.25 * std::sqrt(E_u * r);
    c.K_v = 0.25 * std::sqrt(E_v * r);
    return c;
}

ConservedSet conserved_quantities(const SigmaPair& p) {
    const std::size_t n = p.grid.n_points;
    std::vector<double> eu(n), ev(n), g(n), hh(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = p.u0[i], v = p.v0[i], ux = p.du0[i], vx = p.dv0[i];
        eu[i] = u * u + ux * ux;
        ev[i] = v * v + vx * vx;
        g[i] = u * v + ux * vx;
        hh[i] = 3 * u * u * v * v + u * u * vx * vx + ux * ux * v * v + 4 * u * ux * v * vx -
                ux * ux * vx * vx;
    }
    const BrokenLattice bl = p.broken();
    return conserved_from_integrals(bl.integrate(eu), bl.integrate(ev), bl.integrate(g),
                                    bl.integrate(hh));
}

SigmaPair make_zero_pair(const SpatialGrid& g) {
    const std::vector<double> z(g.n_points, 0.0);
    return {g, z, z, z, z, z, {}, false};
}

SigmaPair make_peakon_pair(const SpatialGrid& g, const std::vector<Peak>& u_peaks,
                           const std::vector<Peak>& v_peaks) {
    SigmaPair p = make_zero_pair(g);
    const double snap = 1e-12 * g.h();
    auto add = [&](const std::vector<Peak>& peaks, std::vector<double>& f, std::vector<double>& df) {
        for (const auto& pk : peaks) {
            if (!(pk.position > g.x_min && pk.position < g.x_max))
                throw DomainError("peak position outside the grid");
            for (std::size_t i = 0; i < g.n_points; ++i) {
                const double d = g.x(i) - pk.position;
                const double e = pk.amplitude * std::exp(-std::abs(d));
                f[i] += e;
                if (std::abs(d) > snap) df[i] += d > 0 ? -e : e;
            }
            p.kinks.push_back(pk.position);
        }
    };
    add(u_peaks, p.u0, p.du0);
    add(v_peaks, p.v0, p.dv0);
    std::sort(p.kinks.begin(), p.kinks.end());
    p.kinks.erase(std::unique(p.kinks.begin(), p.kinks.end()), p.kinks.end());
    for (std::size_t i = 0; i < g.n_points; ++i) p.duv0[i] = p.du0[i] * p.dv0[i];
    return p;
}

SigmaPair make_pair(const SpatialGrid& g, const ScalarFn& u, const ScalarFn& du, const ScalarFn& v,
                    const ScalarFn& dv, std::vector<double> kinks) {
    SigmaPair p = make_zero_pair(g);
    for (std::size_t i = 0; i < g.n_points; ++i) {
        const double x = g.x(i);
        p.u0[i] = u(x);
        p.v0[i] = v(x);
        p.du0[i] = du(x);
        p.dv0[i] = dv(x);
        p.duv0[i] = p.du0[i] * p.dv0[i];
    }
    std::sort(kinks.begin(), kinks.end());
    p.kinks = std::move(kinks);
    p.validate();
    return p;
}

SigmaPair make_pair_from_samples(const SpatialGrid& g, std::vector<double> u, std::vector<double> v) {
    const std::size_t n = g.n_points;
    if (u.size() != n || v.size() != n) throw ValidationError("sample length differs from grid");
    auto diff = [&](const std::vector<double>& f) {
        std::vector<double> d(n);
        const double h = g.h();
        d[0] = (f[1] - f[0]) / h;
        d[n - 1] = (f[n - 1] - f[n - 2]) / h;
        for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - f[i - 1]) / (2 * h);
        return d;
    };
    SigmaPair p{g, std::move(u), std::move(v), {}, {}, {}, {}, true};
    p.du0 = diff(p.u0);
    p.dv0 = diff(p.v0);
    p.duv0.resize(n);
    for (std::size_t i = 0; i < n; ++i) p.duv0[i] = p.du0[i] * p.dv0[i];
    p.validate();
    return p;
}

RadonMeasure1D ac_energy_measure(const SigmaPair& p) {
    RadonMeasure1D m = RadonMeasure1D::zero(p.grid);
    for (std::size_t i = 0; i < p.grid.n_points; ++i) {
        const double a = p.du0[i] * p.du0[i], b = p.dv0[i] * p.dv0[i];
        m.ac_density[i] = a + b + a * b;
    }
    m.breaks = p.kinks;
    return m;
}

double boundary_ratio(const SigmaPair& p) {
    double mx = 0.0;
    for (std::size_t i = 0; i < p.grid.n_points; ++i)
        mx = std::max({mx, std::abs(p.u0[i]), std::abs(p.v0[i])});
    if (mx == 0.0) return 0.0;
    const std::size_t e = p.grid.n_points - 1;
    return std::max({std::abs(p.u0[0]), std::abs(p.v0[0]), std::abs(p.u0[e]), std::abs(p.v0[e])}) / mx;
}

void store_pair(const SigmaPair& p, const std::filesystem::path& path) {
    p.validate();
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open " + path.string() + " for writing");
    out << "# x u0 v0 du0 dv0\n";
    char buf[128];
    if (!p.kinks.empty()) {
        out << "# kinks";
        for (double k : p.kinks) {
            std::snprintf(buf, sizeof buf, " %.17g", k);
            out << buf;
        }
        out << '\n';
    }
    for (std::size_t i = 0; i < p.grid.n_points; ++i) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g %.17g\n", p.grid.x(i), p.u0[i], p.v0[i],
                      p.du0[i], p.dv0[i]);
        out << buf;
    }
    if (!out) throw ParseError("write failed for " + path.string());
}

SigmaPair load_pair(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;
    auto where = [&] { return path.string() + ":" + std::to_string(line_no); };

    if (!std::getline(in, line)) throw ParseError(where() + ": empty file");
    ++line_no;
    {
        std::istringstream hs(line);
        std::string tok, joined;
        while (hs >> tok) joined += (joined.empty() ? "" : " ") + tok;
        if (joined != "# x u0 v0 du0 dv0")
            throw ParseError(where() + ": expected header '# x u0 v0 du0 dv0'");
    }

    std::vector<double> kinks;
    std::vector<std::array<double, 5>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        if (line[first] == '#') {
            std::istringstream ks(line.substr(first + 1));
            std::string tag;
            ks >> tag;
            if (tag == "kinks") {
                std::string tok;
                while (ks >> tok) {
                    char* end = nullptr;
                    const double v = std::strtod(tok.c_str(), &end);
                    if (end == tok.c_str() || *end != '\0') throw ParseError(where() + ": bad kink value");
                    kinks.push_back(v);
                }
            }
            continue;
        }
        std::array<double, 5> r{};
        const char* c = line.c_str();
        for (std::size_t k = 0; k < 5; ++k) {
            char* end = nullptr;
            r[k] = std::strtod(c, &end);
            if (end == c) throw ParseError(where() + ": expected 5 numeric columns");
            c = end;
        }
        while (*c == ' ' || *c == '\t' || *c == '\r') ++c;
        if (*c != '\0') throw ParseError(where() + ": trailing characters");
        rows.push_back(r);
    }
    if (rows.size() < 3) throw ParseError(path.string() + ": need at least 3 data rows");

    const std::size_t n = rows.size();
    const SpatialGrid g = SpatialGrid::make(rows.front()[0], rows.back()[0], n);
    const double tol = grid_uniform_tol * (g.x_max - g.x_min);
    for (std::size_t i = 0; i < n; ++i)
        if (std::abs(rows[i][0] - g.x(i)) > tol)
            throw ParseError(path.string() + ": x column is not uniform at row " + std::to_string(i + 1));

    SigmaPair p = make_zero_pair(g);
    for (std::size_t i = 0; i < n; ++i) {
        p.u0[i] = rows[i][1];
        p.v0[i] = rows[i][2];
        p.du0[i] = rows[i][3];
        p.dv0[i] = rows[i][4];
        p.duv0[i] = p.du0[i] * p.dv0[i];
    }
    std::sort(kinks.begin(), kinks.end());
    p.kinks = std::move(kinks);
    p.validate();
    return p;
}

}  // namespace novsemi
