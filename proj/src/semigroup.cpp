#include "novsemi/semigroup.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <future>
#include <map>
#include <string>

#include "novsemi/errors.hpp"

namespace novsemi {

void FlowTriple::validate() const {
    pair.validate();
    mu.validate();
    if (!(pair.grid == mu.grid)) throw GridMismatchError("pair and measure live on different grids");
    if (!std::isfinite(t)) throw DomainError("triple time must be finite");
}

FlowTriple make_triple(const SigmaPair& p, double t) { return {p, ac_energy_measure(p), t}; }

PipelineRun run_pipeline(const FlowTriple& input, double t, const PipelineOptions& opt) {
    input.validate();
    const std::size_t n = opt.n_labels ? opt.n_labels : input.pair.grid.n_points;
    PipelineRun run{setup_labels(input.pair, input.mu, n, opt.align_kinks), {}, {}};
    run.setup.state.t = input.t;
    const Invariants inv = lagrangian_invariants(run.setup.state);
    const ConservedSet cs = conserved_from_integrals(inv.E_u, inv.E_v, inv.G, inv.H);
    FlowConfig cfg = opt.flow;
    cfg.t_end = t;
    for (double& s : cfg.stops) s += input.t;
    run.trajectory = evolve(run.setup.state, cfg, cs);
    const LagrangianState& fin = run.trajectory.snapshots.back();
    const SpatialGrid& grid = input.pair.grid;
    run.out.pair = reconstruct(fin, grid).pair();
    run.out.mu = mu_t(fin, grid);
    run.out.t = input.t + t;
    return run;
}

FlowTriple flow_map(const FlowTriple& input, double t, const PipelineOptions& opt) {
    return run_pipeline(input, t, opt).out;
}

double cumulative_distance(const RadonMeasure1D& a, const RadonMeasure1D& b) {
    if (!(a.grid == b.grid)) throw GridMismatchError("measures live on different grids");
    const auto fa = a.cumulative(), fb = b.cumulative();
    double d = 0;
    for (std::size_t i = 0; i < fa.size(); ++i) d = std::max(d, std::abs(fa[i] - fb[i]));
    return d;
}

IdentityReport identity_check(const FlowTriple& input, const PipelineOptions& opt) {
    const PipelineRun run = run_pipeline(input, 0.0, opt);
    const LagrangianState& s0 = run.setup.state;
    const LagrangianState& fin = run.trajectory.snapshots.back();
    std::vector<double> u, v;
    reconstruct_at(fin, s0.y, u, v);
    IdentityReport r;
    for (std::size_t j = 0; j < s0.size(); ++j)
        r.field_error = std::max({r.field_error, std::abs(u[j] - s0.U[j]), std::abs(v[j] - s0.V[j])});
    const double m0 = input.mu.total_mass();
    r.mass_error = std::abs(run.out.mu.total_mass() - m0) / std::max(1.0, m0);
    // Quadrature tolerance: trapezoid against midpoint rule for the energy density on smooth x-cells.
    const SigmaPair& p = input.pair;
    const double h = p.grid.h();
    auto density = [](double ux, double vx) { return ux * ux + vx * vx + ux * ux * vx * vx; };
    double defect = 0;
    for (std::size_t i = 0; i + 1 < p.grid.n_points; ++i) {
        const double xa = p.grid.x(i), xb = p.grid.x(i + 1);
        if (std::any_of(p.kinks.begin(), p.kinks.end(), [&](double k) { return k > xa && k < xb; })) continue;
        const double trap = 0.5 * (density(p.du0[i], p.dv0[i]) + density(p.du0[i + 1], p.dv0[i + 1]));
        const double mid = density(0.5 * (p.du0[i] + p.du0[i + 1]), 0.5 * (p.dv0[i] + p.dv0[i + 1]));
        defect += h * std::abs(trap - mid);
    }
    r.mass_tolerance = (defect + 1e-12 * std::max(1.0, m0)) / std::max(1.0, m0);
    return r;
}

SemigroupReport semigroup_check(const FlowTriple& input, double t, double tau, const PipelineOptions& opt) {
    SemigroupReport r;
    r.identity = identity_check(input, opt);
    const FlowTriple direct = flow_map(input, t + tau, opt);
    const FlowTriple split = flow_map(flow_map(input, tau, opt), t, opt);
    r.d_sigma = metric_distance(direct.pair, split.pair);
    r.measure_distance = cumulative_distance(direct.mu, split.mu);
    return r;
}

namespace {

double fitted_exponent(const std::vector<ContinuityRow>& rows) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t m = 0;
    for (const auto& row : rows) {
        if (!(row.d_sigma0 > 0) || !(row.gap > 0)) continue;
        const double x = std::log(row.d_sigma0), y = std::log(row.gap);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++m;
    }
    if (m < 2) return 0;
    const double den = static_cast<double>(m) * sxx - sx * sx;
    return den != 0 ? (static_cast<double>(m) * sxy - sx * sy) / den : 0;
}

std::vector<EulerianField> fields_of(const Trajectory& tr, const SpatialGrid& g) {
    std::vector<EulerianField> f;
    f.reserve(tr.snapshots.size());
    for (const auto& s : tr.snapshots) f.push_back(reconstruct_uv(s, g));
    return f;
}

}  // namespace

ContinuityReport continuity_probe(const FlowTriple& base, const std::vector<SigmaPair>& perturbations, double t_end,
                                  const PipelineOptions& opt, const std::vector<RadonMeasure1D>* measures) {
    if (measures && measures->size() != perturbations.size())
        throw DomainError("one measure per perturbation is required");
    const SpatialGrid& g = base.pair.grid;
    const auto ref = fields_of(run_pipeline(base, t_end, opt).trajectory, g);

    auto probe = [&](std::size_t k) {
        const SigmaPair& p = perturbations[k];
        if (!(p.grid == g)) throw GridMismatchError("perturbation lives on a different grid");
        const FlowTriple in{p, measures ? (*measures)[k] : ac_energy_measure(p), base.t};
        const auto f = fields_of(run_pipeline(in, t_end, opt).trajectory, g);
        if (f.size() != ref.size()) throw GridMismatchError("perturbed run has a different snapshot count");
        ContinuityRow row;
        row.d_sigma0 = metric_distance(base.pair, p);
        for (std::size_t s = 0; s < f.size(); ++s)
            for (std::size_t i = 0; i < g.n_points; ++i)
                row.gap = std::max(row.gap, std::abs(f[s].u[i] - ref[s].u[i]) + std::abs(f[s].v[i] - ref[s].v[i]));
        return row;
    };

    ContinuityReport r;
    r.rows.resize(perturbations.size());
    const std::size_t threads = std::max<std::size_t>(1, opt.threads);
    for (std::size_t lo = 0; lo < perturbations.size(); lo += threads) {
        const std::size_t hi = std::min(perturbations.size(), lo + threads);
        std::vector<std::future<ContinuityRow>> jobs;
        for (std::size_t k = lo; k < hi; ++k)
            jobs.push_back(std::async(threads > 1 ? std::launch::async : std::launch::deferred, probe, k));
        for (std::size_t k = lo; k < hi; ++k) r.rows[k] = jobs[k - lo].get();
    }
    r.gamma = fitted_exponent(r.rows);
    return r;
}

namespace {

constexpr char kMagic[8] = {'N', 'O', 'V', 'S', 'E', 'M', 'I', '1'};
constexpr double kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little, "container is written in native little-endian order");

using ArrayTable = std::vector<std::pair<std::string, std::vector<double>>>;

template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError("truncated trajectory file");
    return v;
}

std::vector<double> diag_row(const StepDiagnostics& d) {
    const MonitorReport& m = d.monitors;
    return {d.t,
            d.inv.E_u,
            d.inv.E_v,
            d.inv.G,
            d.inv.H,
            d.sup_U,
            d.sup_V,
            d.q_min,
            d.q_max,
            d.uxvx_mass,
            d.truncation_error,
            double(d.omega_inside),
            m.t,
            double(m.sup_U),
            double(m.sup_V),
            double(m.uxvx),
            double(m.q_envelope),
            double(m.gamma),
            double(m.mu_mass),
            double(m.terms),
            double(m.growth),
            double(m.conservation),
            m.sup_U_val,
            m.sup_V_val,
            m.uxvx_val,
            m.mu_val,
            m.kappa0,
            m.C_q,
            m.gamma_violation,
            m.max_drift};
}
constexpr std::size_t kDiagWidth = 30;

StepDiagnostics diag_from(const double* r) {
    StepDiagnostics d;
    d.t = r[0];
    d.inv = {r[1], r[2], r[3], r[4]};
    d.sup_U = r[5];
    d.sup_V = r[6];
    d.q_min = r[7];
    d.q_max = r[8];
    d.uxvx_mass = r[9];
    d.truncation_error = r[10];
    d.omega_inside = r[11] != 0;
    MonitorReport& m = d.monitors;
    m.t = r[12];
    bool* flags[] = {&m.sup_U, &m.sup_V,  &m.uxvx,   &m.q_envelope,  &m.gamma,
                     &m.mu_mass, &m.terms, &m.growth, &m.conservation};
    for (std::size_t k = 0; k < 9; ++k) *flags[k] = r[13 + k] != 0;
    m.sup_U_val = r[22];
    m.sup_V_val = r[23];
    m.uxvx_val = r[24];
    m.mu_val = r[25];
    m.kappa0 = r[26];
    m.C_q = r[27];
    m.gamma_violation = r[28];
    m.max_drift = r[29];
    return d;
}

const std::vector<double>& need(const std::map<std::string, std::vector<double>>& t, const std::string& name,
                                std::size_t len) {
    const auto it = t.find(name);
    if (it == t.end()) throw FormatError("missing array '" + name + "'");
    if (len != SIZE_MAX && it->second.size() != len) throw FormatError("array '" + name + "' has the wrong length");
    return it->second;
}

std::size_t as_count(double v) {
    if (!(v >= 0) || v != std::floor(v) || v > 1e15) throw FormatError("bad count in trajectory metadata");
    return static_cast<std::size_t>(v);
}

}  // namespace

void serialize_trajectory(const Trajectory& tr, const std::filesystem::path& path) {
    ArrayTable arrays;
    const ConservedSet& c = tr.conserved;
    arrays.push_back({"meta", {kFormatVersion, double(tr.snapshots.size()), double(tr.diagnostics.size()),
                               double(tr.rejected_steps)}});
    arrays.push_back({"conserved", {c.E_u, c.E_v, c.G, c.H, c.K_u, c.K_v}});
    for (std::size_t k = 0; k < tr.snapshots.size(); ++k) {
        const LagrangianState& s = tr.snapshots[k];
        const std::string p = "snap" + std::to_string(k) + ".";
        arrays.push_back({p + "grid", {s.xi.dxi, double(s.xi.n_points), double(s.xi.zero_index), s.t, s.xi.offset}});
        arrays.push_back({p + "U", s.U});
        arrays.push_back({p + "V", s.V});
        arrays.push_back({p + "W", s.W});
        arrays.push_back({p + "Z", s.Z});
        arrays.push_back({p + "q", s.q});
        arrays.push_back({p + "y", s.y});
        arrays.push_back({p + "kinks", s.kinks});
    }
    std::vector<double> diag;
    diag.reserve(tr.diagnostics.size() * kDiagWidth);
    for (const auto& d : tr.diagnostics) {
        const auto row = diag_row(d);
        diag.insert(diag.end(), row.begin(), row.end());
    }
    arrays.push_back({"diag", std::move(diag)});

    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path.string() + " for writing");
    os.write(kMagic, sizeof kMagic);
    put<std::uint64_t>(os, arrays.size());
    for (const auto& [name, data] : arrays) {
        put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put<std::uint64_t>(os, data.size());
        os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
    }
    if (!os) throw FormatError("write failed for " + path.string());
}

Trajectory restore_trajectory(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path.string());
    char magic[8];
    if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
        throw FormatError("not a NOVSEMI1 trajectory");
    const auto count = get<std::uint64_t>(is);
    std::map<std::string, std::vector<double>> table;
    for (std::uint64_t a = 0; a < count; ++a) {
        const auto name_len = get<std::uint32_t>(is);
        if (name_len > 4096) throw FormatError("array name too long");
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len)) throw FormatError("truncated trajectory file");
        const auto len = get<std::uint64_t>(is);
        if (len > (std::uint64_t(1) << 40)) throw FormatError("array '" + name + "' too long");
        std::vector<double> data(len);
        if (!is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(len * sizeof(double))))
            throw FormatError("truncated trajectory file");
        table[name] = std::move(data);
    }
    const auto& meta = need(table, "meta", 4);
    if (meta[0] != kFormatVersion) throw FormatError("unsupported trajectory version");
    Trajectory tr;
    const std::size_t n_snap = as_count(meta[1]), n_diag = as_count(meta[2]);
    tr.rejected_steps = as_count(meta[3]);
    const auto& c = need(table, "conserved", 6);
    tr.conserved = {c[0], c[1], c[2], c[3], c[4], c[5]};
    for (std::size_t k = 0; k < n_snap; ++k) {
        const std::string p = "snap" + std::to_string(k) + ".";
        const auto& g = need(table, p + "grid", 5);
        LagrangianState s;
        s.xi.dxi = g[0];
        s.xi.n_points = as_count(g[1]);
        s.xi.zero_index = as_count(g[2]);
        s.t = g[3];
        s.xi.offset = g[4];
        s.U = need(table, p + "U", s.xi.n_points);
        s.V = need(table, p + "V", s.xi.n_points);
        s.W = need(table, p + "W", s.xi.n_points);
        s.Z = need(table, p + "Z", s.xi.n_points);
        s.q = need(table, p + "q", s.xi.n_points);
        s.y = need(table, p + "y", s.xi.n_points);
        s.kinks = need(table, p + "kinks", SIZE_MAX);
        tr.snapshots.push_back(std::move(s));
    }
    const auto& diag = need(table, "diag", n_diag * kDiagWidth);
    for (std::size_t k = 0; k < n_diag; ++k) tr.diagnostics.push_back(diag_from(diag.data() + k * kDiagWidth));
    return tr;
}

}  // namespace novsemi
