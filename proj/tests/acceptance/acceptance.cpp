// Acceptance gate: one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "novsemi/cli_runner.hpp"
#include "novsemi/nonlocal_kernel.hpp"
#include "novsemi/rng.hpp"

using namespace novsemi;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

ScenarioConfig scenario(const std::string& name, std::size_t n_cells) {
    ScenarioConfig c;
    c.scenario = name;
    c.n_cells = n_cells;
    return c;
}

double term_rel_error(const NonlocalTerms& a, const NonlocalTerms& b) {
    const auto aa = a.arrays(), ba = b.arrays();
    double worst = 0;
    for (std::size_t m = 0; m < aa.size(); ++m) {
        double e = 0, scale = 0;
        for (std::size_t j = 0; j < aa[m]->size(); ++j) {
            e = std::max(e, std::abs((*aa[m])[j] - (*ba[m])[j]));
            scale = std::max(scale, std::abs((*ba[m])[j]));
        }
        worst = std::max(worst, scale > 0 ? e / scale : e);
    }
    return worst;
}

ConservedSet state_conserved(const LagrangianState& s) {
    const Invariants inv = lagrangian_invariants(s);
    return conserved_from_integrals(inv.E_u, inv.E_v, inv.G, inv.H);
}

FlowConfig quiet_flow(double dt, double t_end, std::size_t every) {
    FlowConfig f;
    f.dt = dt;
    f.t_end = t_end;
    f.monitor_every = every;
    f.kernel_pairs = 0;
    f.abort_on_violation = false;
    return f;
}

Outcome kernel_oracle() {
    double err[2];
    const std::size_t sizes[2] = {2048, 4096};
    for (int k = 0; k < 2; ++k) {
        const FlowTriple in = make_scenario(scenario("peakon-headon", sizes[k]), sizes[k]);
        const LabelSetup setup = setup_labels(in.pair, in.mu, in.pair.grid.n_points);
        err[k] = term_rel_error(evaluate_nonlocal_terms(setup.state), eulerian_oracle_at(in.pair, setup.state.y));
    }
    const double ratio = err[0] / err[1];
    return {err[1] <= 1e-4 && ratio >= 3,
            fmt("max rel error over 8 terms %.3e at N=4096 (<= 1e-4), ratio 2048->4096 %.2f (>= 3)", err[1], ratio)};
}

Outcome scan_exactness() {
    SplitMix64 rng(2024);
    double worst = 0;
    for (int trial = 0; trial < 20; ++trial) {
        LagrangianState s;
        s.xi = XiGrid::make(0.05, 256, 256);
        const std::size_t n = s.size();
        for (auto* a : {&s.U, &s.V, &s.W, &s.Z, &s.q, &s.y}) a->resize(n);
        double amp[4], freq[4], phase[4];
        for (int f = 0; f < 4; ++f) {
            amp[f] = rng.uniform(0.2, 1.0);
            freq[f] = rng.uniform(0.2, 2.0);
            phase[f] = rng.uniform(0, 2 * std::numbers::pi);
        }
        for (std::size_t j = 0; j < n; ++j) {
            const double x = s.xi.xi(j);
            const double env = std::exp(-0.05 * x * x);
            s.U[j] = env * amp[0] * std::sin(freq[0] * x + phase[0]);
            s.V[j] = env * amp[1] * std::cos(freq[1] * x + phase[1]);
            s.W[j] = env * 0.95 * std::numbers::pi * std::sin(freq[2] * x + phase[2]) * amp[2];
            s.Z[j] = env * 0.95 * std::numbers::pi * std::cos(freq[3] * x + phase[3]) * amp[3];
            s.q[j] = rng.uniform(0.5, 2.0);
        }
        const Trig tr = compute_trig(s);
        s.y[0] = s.xi.xi(0);
        for (std::size_t j = 1; j < n; ++j)
            s.y[j] = s.y[j - 1] + 0.5 * s.xi.dxi * (s.q[j - 1] * tr.cW[j - 1] * tr.cZ[j - 1] + s.q[j] * tr.cW[j] * tr.cZ[j]);
        worst = std::max(worst, term_rel_error(evaluate_nonlocal_terms(s), evaluate_nonlocal_terms_direct(s)));
    }
    return {worst <= 1e-12, fmt("max rel difference scan vs direct %.3e over 20 random states, 513 labels (<= 1e-12)", worst)};
}

Outcome conservation_smooth() {
    const FlowTriple in = make_scenario(scenario("gauss-smooth", 4096), 4096);
    const LabelSetup setup = setup_labels(in.pair, in.mu, in.pair.grid.n_points);
    const Trajectory tr = evolve(setup.state, quiet_flow(5e-4, 2.0, 100), state_conserved(setup.state));
    const Invariants ref = lagrangian_invariants(setup.state);
    double drift = 0;
    for (const auto& s : tr.snapshots) {
        const auto d = relative_drift(lagrangian_invariants(s), ref);
        drift = std::max(drift, *std::max_element(d.begin(), d.end()));
    }
    return {drift <= 1e-6, fmt("max relative drift of E_u, E_v, G, H %.3e over %zu snapshots on [0, 2] (<= 1e-6)", drift,
                               tr.snapshots.size())};
}

Outcome continuation_through_breaking() {
    const std::size_t N = 4096;
    const FlowTriple in = make_scenario(scenario("peakon-headon", N), N);
    const SpatialGrid& g = in.pair.grid;
    const LabelSetup setup = setup_labels(in.pair, in.mu, g.n_points);
    const double dt = 2.5e-4;
    const double ts = breaking_time(setup.state, dt, 1.0);
    const ConservedSet cs = state_conserved(setup.state);
    FlowConfig f = quiet_flow(dt, ts + 0.1, 1000000);
    for (int k = -10; k <= 9; ++k) f.stops.push_back(ts + 0.01 * k);
    const Trajectory tr = evolve(setup.state, f, cs);
    double worst = 0;
    std::size_t n_snap = 0;
    bool atom_u = false, atom_mu = false;
    std::size_t atoms_v = 0;
    double atom_mass = 0, atom_pos = 0, uv_mass = 0, uv_pos = 0;
    for (const auto& s : tr.snapshots) {
        if (s.t < ts - 0.1 - 1e-9 || s.t > ts + 0.09 + 1e-9) continue;
        ++n_snap;
        const MeasureTriple m = extract_measures(s, g);
        const Balances b = balances(s, m, cs);
        const double su = cs.E_u, sv = cs.E_v, sg = std::max(std::abs(cs.G), std::sqrt(su * sv)),
                     sh = std::max(std::abs(cs.H), su * sv);
        worst = std::max({worst, std::abs(b.E_u - cs.E_u) / su, std::abs(b.E_v - cs.E_v) / sv,
                          std::abs(b.G - cs.G) / sg, std::abs(b.H - cs.H) / sh});
        if (std::abs(s.t - ts) < 1e-12) {
            for (const auto& a : m.lam_u.atoms) {
                if (std::abs(a.position) <= 2 * g.h()) {
                    atom_u = true;
                    atom_mass = a.mass;
                    atom_pos = a.position;
                }
            }
            for (const auto& a : m.sum().atoms) atom_mu = atom_mu || std::abs(a.position) <= 2 * g.h();
            atoms_v = m.lam_v.atoms.size();
            for (const auto& a : m.lam_uv.atoms) {
                if (a.mass > uv_mass) {
                    uv_mass = a.mass;
                    uv_pos = a.position;
                }
            }
        }
    }
    const bool ok = n_snap == 20 && worst <= 1e-4 && atom_u && atom_mu;
    return {ok, fmt("t*=%.6f, %zu snapshots on [t*-0.1, t*+0.09], worst relative balance %.3e (<= 1e-4); "
                    "at t*: lam_u atom %.4f at x=%.2e, lam_uv atom %.2e at x=%.2e, lam_v atoms %zu (v does not break), mu atom %s",
                    ts, n_snap, worst, atom_mass, atom_pos, uv_mass, uv_pos, atoms_v, atom_mu ? "yes" : "no")};
}

Outcome apriori_monitors_all() {
    std::size_t total = 0, failures = 0;
    std::string failed;
    for (const std::string name :
         {"zero", "gauss-smooth", "peakon-single", "peakon-headon", "peakon-overtake", "nu-reduction", "atom-seed"}) {
        ScenarioConfig c = scenario(name, 1024);
        const FlowTriple in = make_scenario(c, c.n_cells);
        PipelineOptions opt;
        opt.flow = quiet_flow(1e-3, 1.0, 50);
        opt.flow.kernel_pairs = 10000;
        const PipelineRun run = run_pipeline(in, 1.0, opt);
        for (const auto& d : run.trajectory.diagnostics) {
            const MonitorReport& m = d.monitors;
            ++total;
            const bool ok = m.sup_U && m.sup_V && m.uxvx && m.q_envelope && m.gamma && m.mu_mass && m.terms && m.growth;
            if (!ok) {
                ++failures;
                if (failed.find(name) == std::string::npos) failed += " " + name;
            }
        }
    }
    return {failures == 0, fmt("%zu monitor failures over %zu snapshots of 7 scenarios (10^4 kernel pairs each)%s",
                               failures, total, failed.empty() ? "" : (", failing:" + failed).c_str())};
}

Outcome peakon_speed() {
    double err[2];
    const std::size_t sizes[2] = {4096, 8192};
    for (int k = 0; k < 2; ++k) {
        const FlowTriple in = make_scenario(scenario("peakon-single", sizes[k]), sizes[k]);
        const LabelSetup setup = setup_labels(in.pair, in.mu, in.pair.grid.n_points);
        const Trajectory tr = evolve(setup.state, quiet_flow(1e-3, 1.0, 50), state_conserved(setup.state));
        const double kink = setup.state.kinks.at(0);
        err[k] = 0;
        for (const auto& s : tr.snapshots) err[k] = std::max(err[k], std::abs(LabelInverse(s).y_at(kink) - s.t));
    }
    const double ratio = err[0] / err[1];
    return {err[1] <= 0.01 && ratio >= 1.8,
            fmt("max |q(t) - t| on [0, 1]: %.3e at N=4096, %.3e at N=8192 (<= 0.01), ratio %.2f (>= 1.8)", err[0], err[1],
                ratio)};
}

struct Residuals {
    double weak = 0;
    double transport[4] = {0, 0, 0, 0};
    bool masks_empty = true;
};

Residuals smooth_residuals(std::size_t N, double dt) {
    const FlowTriple in = make_scenario(scenario("gauss-smooth", N), N);
    PipelineOptions opt;
    opt.flow = quiet_flow(dt, 0.5, 5);
    const PipelineRun run = run_pipeline(in, 0.5, opt);
    std::vector<EulerianSnapshot> snaps;
    Residuals r;
    for (const auto& s : run.trajectory.snapshots) {
        snaps.push_back(make_snapshot(s, in.pair.grid));
        r.masks_empty = r.masks_empty && snaps.back().field.masks_empty();
    }
    const auto bank = default_test_bank(0, 0.5, -4, 4);
    for (const auto& w : weak_residual(snaps, bank)) r.weak = std::max({r.weak, std::abs(w.r_u), std::abs(w.r_v)});
    const Channel ch[4] = {Channel::u, Channel::v, Channel::uv, Channel::mu};
    for (int c = 0; c < 4; ++c)
        for (const double x : transport_residual(snaps, ch[c], bank)) r.transport[c] = std::max(r.transport[c], std::abs(x));
    return r;
}

const Residuals& residual_pair(int level) {
    static const Residuals coarse = smooth_residuals(512, 2e-3);
    static const Residuals fine = smooth_residuals(1024, 1e-3);
    return level == 0 ? coarse : fine;
}

Outcome weak_form() {
    const Residuals &a = residual_pair(0), &b = residual_pair(1);
    const double ratio = a.weak / b.weak;
    return {ratio >= 3, fmt("max weak residual over 6 test functions %.3e (N=512) -> %.3e (N=1024), ratio %.2f (>= 3)",
                            a.weak, b.weak, ratio)};
}

Outcome transport() {
    const Residuals &a = residual_pair(0), &b = residual_pair(1);
    double rmin = 1e300;
    std::string d;
    const char* names[4] = {"lam_u", "lam_v", "lam_uv", "mu"};
    for (int c = 0; c < 4; ++c) {
        const double r = a.transport[c] / b.transport[c];
        rmin = std::min(rmin, r);
        d += fmt("%s %.2f ", names[c], r);
    }
    const bool masks = a.masks_empty && b.masks_empty;
    return {rmin >= 3 && masks, fmt("ratios N=512->1024: %s(>= 3), masks %s", d.c_str(), masks ? "empty" : "NOT empty")};
}

Outcome semigroup() {
    bool ok = true;
    std::string d;
    for (const std::string name : {"gauss-smooth", "peakon-headon"}) {
        if (!d.empty()) d += "; ";
        SemigroupReport r[2];
        for (int level = 0; level < 2; ++level) {
            const std::size_t N = 1024u << level;
            PipelineOptions opt;
            opt.flow = quiet_flow(1.024 / static_cast<double>(N), 1.0, 1000000);
            r[level] = semigroup_check(make_scenario(scenario(name, N), N), 0.5, 0.5, opt);
            ok = ok && r[level].identity.ok();
        }
        const double rd = r[0].d_sigma / r[1].d_sigma, rm = r[0].measure_distance / r[1].measure_distance;
        ok = ok && rd >= 1.5 && rm >= 1.5;
        d += fmt("%s: identity field %.1e (<= 1e-10), mass %.1e (<= %.1e); d_sigma %.2e -> %.2e ratio %.2f, "
                 "measure ratio %.2f (>= 1.5)",
                 name.c_str(), r[1].identity.field_error, r[1].identity.mass_error, r[1].identity.mass_tolerance,
                 r[0].d_sigma, r[1].d_sigma, rd, rm);
    }
    return {ok, d};
}

Outcome continuity() {
    bool ok = true;
    std::string d;
    for (const std::string name : {"gauss-smooth", "peakon-headon"}) {
        ScenarioConfig c = scenario(name, 1024);
        const FlowTriple base = make_scenario(c, 1024);
        std::vector<SigmaPair> pert;
        for (const int n : {2, 4, 8, 16}) pert.push_back(bumped_pair(c, base.pair, n));
        PipelineOptions opt;
        opt.flow = quiet_flow(1e-3, 1.0, 50);
        opt.threads = 4;
        const ContinuityReport r = continuity_probe(base, pert, 1.0, opt);
        d += name + ": gaps";
        for (std::size_t k = 0; k < r.rows.size(); ++k) {
            d += fmt(" %.3e", r.rows[k].gap);
            if (k > 0) {
                const double q = r.rows[k - 1].gap / r.rows[k].gap;
                ok = ok && r.rows[k].gap < r.rows[k - 1].gap && q >= 1.5;
                d += fmt(" (x%.2f)", q);
            }
        }
        d += fmt(", gamma %.2f. ", r.gamma);
    }
    return {ok, d + "(strictly decreasing, >= 1.5 per doubling of n)"};
}

Outcome metric_axioms() {
    SplitMix64 rng(7);
    const SpatialGrid g = SpatialGrid::make(-5, 5, 65);
    auto random_pair = [&] {
        SigmaPair p = make_zero_pair(g);
        for (std::size_t i = 0; i < g.n_points; ++i) {
            p.u0[i] = rng.uniform(-1, 1);
            p.v0[i] = rng.uniform(-1, 1);
            p.du0[i] = rng.uniform(-3, 3);
            p.dv0[i] = rng.uniform(-3, 3);
            p.duv0[i] = p.du0[i] * p.dv0[i];
        }
        return p;
    };
    std::size_t sym = 0, tri = 0, ident = 0, neg = 0;
    double worst_slack = 0;
    for (int k = 0; k < 100; ++k) {
        const SigmaPair a = random_pair(), b = random_pair(), c = random_pair();
        const double ab = metric_distance(a, b), ba = metric_distance(b, a);
        const double ac = metric_distance(a, c), bc = metric_distance(b, c);
        sym += ab != ba;
        neg += ab < 0 || ac < 0 || bc < 0;
        const double excess = (ac - (ab + bc)) / (ab + bc);
        worst_slack = std::max(worst_slack, excess);
        tri += excess > 1e-12;
        SigmaPair a2 = a;
        ident += metric_distance(a, a2) != 0.0;
        a2.dv0[static_cast<std::size_t>(k) % g.n_points] += 1e-9;
        a2.duv0[static_cast<std::size_t>(k) % g.n_points] = a2.du0[static_cast<std::size_t>(k) % g.n_points] *
                                                             a2.dv0[static_cast<std::size_t>(k) % g.n_points];
        ident += !(metric_distance(a, a2) > 0.0);
    }
    return {neg == 0 && sym == 0 && tri == 0 && ident == 0,
            fmt("100 random triples: negative distances %zu, symmetry failures %zu, triangle failures %zu "
                "(max relative excess %.2e, slack 1e-12), identity failures %zu",
                neg, sym, tri, worst_slack, ident)};
}

Outcome nu_reduction() {
    const FlowTriple in = make_scenario(scenario("nu-reduction", 1024), 1024);
    const LabelSetup setup = setup_labels(in.pair, in.mu, in.pair.grid.n_points);
    FlowConfig f = quiet_flow(1e-3, 1.0, 50);
    f.kernel_pairs = 1000;
    const Trajectory tr = evolve(setup.state, f, state_conserved(setup.state));
    double worst = 0;
    for (std::size_t k = 0; k < tr.snapshots.size(); ++k) {
        const LagrangianState& s = tr.snapshots[k];
        for (std::size_t j = 0; j < s.size(); ++j)
            worst = std::max({worst, std::abs(s.U[j] - s.V[j]), std::abs(s.W[j] - s.Z[j])});
        const EulerianField fld = reconstruct(s, in.pair.grid);
        for (std::size_t i = 0; i < fld.u.size(); ++i)
            worst = std::max({worst, std::abs(fld.u[i] - fld.v[i]), std::abs(fld.ux[i] - fld.vx[i])});
        const StepDiagnostics& d = tr.diagnostics[k];
        worst = std::max({worst, std::abs(d.inv.E_u - d.inv.E_v), std::abs(d.sup_U - d.sup_V),
                          std::abs(d.monitors.sup_U_val - d.monitors.sup_V_val)});
    }
    return {worst <= 1e-10, fmt("max u/v channel difference over %zu snapshots (fields, reconstructions, diagnostics) "
                                "%.3e (<= 1e-10)",
                                tr.snapshots.size(), worst)};
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        double budget;  // seconds, 0 when the criterion sets none
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {"kernel oracle equivalence", 10, kernel_oracle},
        {"scan exactness", 5, scan_exactness},
        {"conservation (smooth)", 60, conservation_smooth},
        {"conservative continuation through breaking", 120, continuation_through_breaking},
        {"a priori monitors", 0, apriori_monitors_all},
        {"peakon speed", 0, peakon_speed},
        {"weak-form residual", 0, weak_form},
        {"transport residuals", 0, transport},
        {"semigroup", 0, semigroup},
        {"continuity of data-to-solution", 0, continuity},
        {"metric axioms", 0, metric_axioms},
        {"Novikov reduction", 0, nu_reduction},
    };
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[k].run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = criteria[k].budget == 0 || secs <= criteria[k].budget;
        const bool pass = o.pass && in_time;
        failed += !pass;
        std::string time = fmt("%.1f s", secs);
        if (criteria[k].budget > 0) time += fmt(" (<= %.0f s)", criteria[k].budget);
        std::printf("[%s] %2zu %s: %s; %s\n", pass ? "PASS" : "FAIL", k + 1, criteria[k].name, o.detail.c_str(),
                    time.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
