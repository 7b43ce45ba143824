#include "novsemi/ode_flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace novsemi {

namespace {

double sup_abs(const std::vector<double>& a) {
    double m = 0.0;
    for (const double v : a) m = std::max(m, std::abs(v));
    return m;
}

double l2_norm(const std::vector<double>& a, double h) {
    std::vector<double> sq(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) sq[j] = a[j] * a[j];
    return std::sqrt(trapezoid(sq, h));
}

void require_finite(const LagrangianState& s) {
    for (const auto* a : {&s.U, &s.V, &s.W, &s.Z, &s.q, &s.y}) {
        if (a->size() != s.size()) throw StateInvalidError("field size does not match the label grid");
        for (const double v : *a) {
            if (!std::isfinite(v)) throw StateInvalidError("non-finite field value");
        }
    }
}

LagrangianState advance(const LagrangianState& s, const Rates& k, double a) {
    LagrangianState r = s;
    for (std::size_t j = 0; j < s.size(); ++j) {
        r.U[j] += a * k.U[j];
        r.V[j] += a * k.V[j];
        r.W[j] += a * k.W[j];
        r.Z[j] += a * k.Z[j];
        r.q[j] += a * k.q[j];
        r.y[j] += a * k.y[j];
    }
    r.t += a;
    return r;
}

}  // namespace

void FlowConfig::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be positive");
    if (!std::isfinite(t_end)) throw ConfigError("t_end must be finite");
    if (monitor_every == 0) throw ConfigError("monitor_every must be positive");
    if (!(tol_conservation > 0.0)) throw ConfigError("tol_conservation must be positive");
    if (!(monitor_slack > 0.0)) throw ConfigError("monitor_slack must be positive");
    if (!(term_slack > 0.0)) throw ConfigError("term_slack must be positive");
}

Rates rhs(const LagrangianState& s, const KernelOptions& opt, NonlocalTerms* terms_out) {
    require_finite(s);
    const Trig tr = compute_trig(s);
    NonlocalTerms t = evaluate_nonlocal_terms(s, tr, opt);
    const std::size_t n = s.size();
    Rates r;
    for (auto* a : {&r.U, &r.V, &r.W, &r.Z, &r.q, &r.y}) a->resize(n);
    double fsup = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double U = s.U[j], V = s.V[j];
        const double a1 = t.P1[j] + t.dxP2[j];
        const double a2 = t.S1[j] + t.dxS2[j];
        r.U[j] = -t.dxP1[j] - t.P2[j];
        r.V[j] = -t.dxS1[j] - t.S2[j];
        r.W[j] = 2.0 * U * U * V * tr.cW[j] - V * tr.sW[j] - 2.0 * a1 * tr.cW[j];
        r.Z[j] = 2.0 * U * V * V * tr.cZ[j] - U * tr.sZ[j] - 2.0 * a2 * tr.cZ[j];
        const double f1 = U * U * V + 0.5 * V - a1;
        const double f2 = U * V * V + 0.5 * U - a2;
        r.q[j] = s.q[j] * (f1 * tr.sinW[j] + f2 * tr.sinZ[j]);
        r.y[j] = U * V;
        fsup = std::max(fsup, std::abs(f1) + std::abs(f2));
    }
    r.q_factor_sup = fsup;
    if (terms_out) *terms_out = std::move(t);
    return r;
}

LagrangianState step(const LagrangianState& s, double dt, const KernelOptions& opt, StepIncrement* inc) {
    const Rates k1 = rhs(s, opt);
    const Rates k2 = rhs(advance(s, k1, 0.5 * dt), opt);
    const Rates k3 = rhs(advance(s, k2, 0.5 * dt), opt);
    const Rates k4 = rhs(advance(s, k3, dt), opt);
    LagrangianState r = s;
    const double c = dt / 6.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
        r.U[j] += c * (k1.U[j] + 2.0 * k2.U[j] + 2.0 * k3.U[j] + k4.U[j]);
        r.V[j] += c * (k1.V[j] + 2.0 * k2.V[j] + 2.0 * k3.V[j] + k4.V[j]);
        r.W[j] += c * (k1.W[j] + 2.0 * k2.W[j] + 2.0 * k3.W[j] + k4.W[j]);
        r.Z[j] += c * (k1.Z[j] + 2.0 * k2.Z[j] + 2.0 * k3.Z[j] + k4.Z[j]);
        r.q[j] += c * (k1.q[j] + 2.0 * k2.q[j] + 2.0 * k3.q[j] + k4.q[j]);
        r.y[j] += c * (k1.y[j] + 2.0 * k2.y[j] + 2.0 * k3.y[j] + k4.y[j]);
    }
    r.t = s.t + dt;
    for (std::size_t j = 0; j < r.size(); ++j) {
        if (!(r.q[j] > 0.0)) throw StepRejectedError("q <= 0 after step at t = " + std::to_string(r.t));
    }
    if (inc) {
        const double h = s.xi.dxi, adt = std::abs(dt);
        const Rates* ks[4] = {&k1, &k2, &k3, &k4};
        *inc = StepIncrement{};
        for (const Rates* k : ks) {
            const std::vector<double>* f[4] = {&k->U, &k->V, &k->W, &k->Z};
            for (int m = 0; m < 4; ++m) {
                inc->linf[m] = std::max(inc->linf[m], adt * sup_abs(*f[m]));
                inc->l2[m] = std::max(inc->l2[m], adt * l2_norm(*f[m], h));
            }
            inc->log_q = std::max(inc->log_q, adt * k->q_factor_sup);
        }
    }
    return r;
}

Invariants lagrangian_invariants(const LagrangianState& s) {
    const Trig tr = compute_trig(s);
    const std::size_t n = s.size();
    std::vector<double> eu(n), ev(n), g(n), hh(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double q = s.q[j], U = s.U[j], V = s.V[j];
        const double cW = tr.cW[j], sW = tr.sW[j], cZ = tr.cZ[j], sZ = tr.sZ[j];
        const double ss = tr.sinW[j] * tr.sinZ[j];
        eu[j] = (U * U * cW + sW) * q * cZ;
        ev[j] = (V * V * cZ + sZ) * q * cW;
        g[j] = q * U * V * cW * cZ + 0.25 * q * ss;
        hh[j] = q * (3.0 * U * U * V * V * cW * cZ + U * U * cW * sZ + V * V * sW * cZ + U * V * ss - sW * sZ);
    }
    const double h = s.xi.dxi;
    return {trapezoid(eu, h), trapezoid(ev, h), trapezoid(g, h), trapezoid(hh, h)};
}

std::array<double, 4> relative_drift(const Invariants& now, const Invariants& ref) {
    const double eu = std::abs(ref.E_u), ev = std::abs(ref.E_v);
    const double scale[4] = {eu, ev, std::max(std::abs(ref.G), std::sqrt(eu * ev)),
                             std::max(std::abs(ref.H), eu * ev)};
    const auto a = now.values(), b = ref.values();
    std::array<double, 4> d{};
    for (int m = 0; m < 4; ++m) {
        const double diff = std::abs(a[m] - b[m]);
        d[m] = scale[m] > 1e-300 ? diff / scale[m] : diff;
    }
    return d;
}

GrowthTracker GrowthTracker::start(const LagrangianState& s) {
    GrowthTracker g;
    g.t0 = s.t;
    const std::vector<double>* f[4] = {&s.U, &s.V, &s.W, &s.Z};
    for (int m = 0; m < 4; ++m) {
        g.linf0[m] = sup_abs(*f[m]);
        g.l20[m] = l2_norm(*f[m], s.xi.dxi);
    }
    g.q_lo0 = *std::min_element(s.q.begin(), s.q.end());
    g.q_hi0 = *std::max_element(s.q.begin(), s.q.end());
    return g;
}

void GrowthTracker::add(const StepIncrement& inc) {
    for (int m = 0; m < 4; ++m) {
        linf_acc[m] += inc.linf[m];
        l2_acc[m] += inc.l2[m];
    }
    log_q_acc += inc.log_q;
}

std::string MonitorReport::failure() const {
    const std::pair<bool, const char*> all[] = {
        {sup_U, "sup_U"},       {sup_V, "sup_V"},     {uxvx, "uxvx_mass"}, {q_envelope, "q_envelope"},
        {gamma, "gamma_bound"}, {mu_mass, "mu_mass"}, {terms, "term_bounds"}, {growth, "growth"},
        {conservation, "conservation"}};
    for (const auto& [ok, name] : all) {
        if (!ok) return name;
    }
    return {};
}

MonitorReport apriori_monitors(const LagrangianState& s, const ConservedSet& cs, const MonitorOptions& opt) {
    MonitorReport r;
    r.t = s.t;
    const double eps = opt.slack, tiny = 1e-12;
    const Trig tr = compute_trig(s);
    const std::size_t n = s.size();
    const double h = s.xi.dxi;

    r.sup_U_val = sup_abs(s.U);
    r.sup_V_val = sup_abs(s.V);
    r.sup_U = r.sup_U_val <= std::sqrt(cs.E_u) * (1.0 + eps) + tiny;
    r.sup_V = r.sup_V_val <= std::sqrt(cs.E_v) * (1.0 + eps) + tiny;

    std::vector<double> uv(n), mu(n);
    for (std::size_t j = 0; j < n; ++j) {
        uv[j] = s.q[j] * tr.sW[j] * tr.sZ[j];
        mu[j] = s.q[j] * (tr.cW[j] * tr.sZ[j] + tr.sW[j] * tr.cZ[j] + tr.sW[j] * tr.sZ[j]);
    }
    const double scale = cs.mu_bound();
    r.uxvx_val = trapezoid(uv, h);
    r.uxvx = r.uxvx_val <= cs.excess() + eps * scale + tiny;
    r.mu_val = trapezoid(mu, h);
    r.mu_mass = r.mu_val <= scale * (1.0 + eps) + tiny;

    const double q_lo = *std::min_element(s.q.begin(), s.q.end());
    const double q_hi = *std::max_element(s.q.begin(), s.q.end());
    if (opt.growth) {
        const GrowthTracker& g = *opt.growth;
        const double dt = std::abs(s.t - g.t0);
        r.kappa0 = std::exp(g.log_q_acc * (1.0 + eps));
        r.C_q = dt > 0 ? g.log_q_acc / dt : 0.0;
        r.q_envelope = q_hi <= g.q_hi0 * r.kappa0 * (1.0 + eps) && q_lo >= g.q_lo0 / r.kappa0 / (1.0 + eps);
        const std::vector<double>* f[4] = {&s.U, &s.V, &s.W, &s.Z};
        for (int m = 0; m < 4; ++m) {
            const double li = sup_abs(*f[m]), l2 = l2_norm(*f[m], h);
            if (li > (g.linf0[m] + g.linf_acc[m]) * (1.0 + eps) + tiny) r.growth = false;
            if (l2 > (g.l20[m] + g.l2_acc[m]) * (1.0 + eps) + tiny) r.growth = false;
        }
    } else {
        r.q_envelope = q_lo > 0.0;
    }

    if (opt.kernel_pairs > 0) {
        const KernelBoundReport kb = kernel_bound_check(s, opt.kernel_pairs, opt.seed);
        r.gamma_violation = kb.max_violation;
        r.gamma = kb.ok();
    }
    const TermBoundReport tb = check_term_bounds(evaluate_nonlocal_terms(s, tr), cs, opt.term_slack);
    r.terms = tb.ok;
    r.terms_worst = tb.worst;

    if (opt.reference) {
        const auto d = relative_drift(lagrangian_invariants(s), *opt.reference);
        r.max_drift = *std::max_element(d.begin(), d.end());
        r.conservation = r.max_drift <= opt.tol_conservation;
    }
    return r;
}

StepDiagnostics diagnose(const LagrangianState& s, const ConservedSet& cs, const MonitorOptions& opt) {
    StepDiagnostics d;
    d.t = s.t;
    d.inv = lagrangian_invariants(s);
    d.monitors = apriori_monitors(s, cs, opt);
    d.sup_U = d.monitors.sup_U_val;
    d.sup_V = d.monitors.sup_V_val;
    d.q_min = *std::min_element(s.q.begin(), s.q.end());
    d.q_max = *std::max_element(s.q.begin(), s.q.end());
    d.uxvx_mass = d.monitors.uxvx_val;
    const Trig tr = compute_trig(s);
    d.truncation_error = truncation_estimate(s, kernel_densities(s, tr), wz_l2_radius(s));
    d.omega_inside = d.monitors.growth && d.monitors.q_envelope;
    return d;
}

bool Trajectory::monitors_ok() const {
    return std::all_of(diagnostics.begin(), diagnostics.end(),
                       [](const StepDiagnostics& d) { return d.monitors.ok(); });
}

namespace {

/// Advances by dt, splitting the step in halves while q would turn non-positive.
LagrangianState robust_step(const LagrangianState& s, double dt, const KernelOptions& opt,
                            GrowthTracker& g, std::size_t depth, std::size_t max_depth,
                            std::size_t& rejected) {
    try {
        StepIncrement inc;
        LagrangianState r = step(s, dt, opt, &inc);
        g.add(inc);
        return r;
    } catch (const StepRejectedError&) {
        if (depth >= max_depth) throw;
        ++rejected;
        const LagrangianState mid = robust_step(s, 0.5 * dt, opt, g, depth + 1, max_depth, rejected);
        return robust_step(mid, 0.5 * dt, opt, g, depth + 1, max_depth, rejected);
    }
}

}  // namespace

Trajectory evolve(const LagrangianState& s0, const FlowConfig& cfg, const ConservedSet& cs) {
    cfg.validate();
    s0.validate();
    Trajectory tr;
    tr.conserved = cs;
    const KernelOptions kopt{cfg.stiff_cell_flag};
    GrowthTracker growth = GrowthTracker::start(s0);
    const Invariants ref = lagrangian_invariants(s0);
    MonitorOptions mopt;
    mopt.slack = cfg.monitor_slack;
    mopt.term_slack = cfg.term_slack;
    mopt.kernel_pairs = cfg.kernel_pairs;
    mopt.seed = cfg.seed;
    mopt.tol_conservation = cfg.tol_conservation;
    mopt.reference = &ref;
    mopt.growth = &growth;

    auto record = [&](const LagrangianState& s) {
        StepDiagnostics d = diagnose(s, cs, mopt);
        const bool ok = d.monitors.ok();
        tr.snapshots.push_back(s);
        tr.diagnostics.push_back(d);
        if (!ok && cfg.abort_on_violation) {
            throw MonitorViolation("monitor '" + d.monitors.failure() + "' violated at t = " + std::to_string(s.t),
                                   d);
        }
    };

    const double T = cfg.t_end;
    const auto steps = static_cast<std::size_t>(std::ceil(std::abs(T) / cfg.dt - 1e-9));
    const double h = steps > 0 ? T / static_cast<double>(steps) : 0.0;
    struct Node {
        double t;
        std::size_t k;  // uniform step index, or 0 for a stop
        bool stop;
    };
    std::vector<Node> nodes;
    for (std::size_t k = 1; k <= steps; ++k) nodes.push_back({s0.t + h * static_cast<double>(k), k, false});
    const double t_lo = std::min(s0.t, s0.t + T), t_hi = std::max(s0.t, s0.t + T);
    for (const double st : cfg.stops) {
        if (st <= t_lo || st >= t_hi) continue;
        const double tol = 1e-12 * std::max(1.0, std::abs(st));
        auto same = std::find_if(nodes.begin(), nodes.end(), [&](const Node& nd) { return std::abs(nd.t - st) <= tol; });
        if (same != nodes.end()) {
            same->stop = true;
        } else {
            nodes.push_back({st, 0, true});
        }
    }
    const bool fwd = T >= 0;
    std::sort(nodes.begin(), nodes.end(), [fwd](const Node& a, const Node& b) { return fwd ? a.t < b.t : a.t > b.t; });

    LagrangianState s = s0;
    record(s);
    for (std::size_t m = 0; m < nodes.size(); ++m) {
        const Node& nd = nodes[m];
        s = robust_step(s, nd.t - s.t, kopt, growth, 0, cfg.max_halvings, tr.rejected_steps);
        s.t = nd.t;
        const bool regular = !nd.stop && nd.k % cfg.monitor_every == 0;
        if (regular || nd.stop || m + 1 == nodes.size()) record(s);
    }
    return tr;
}

namespace {

bool sign_changed(const LagrangianState& a, const LagrangianState& b) {
    for (std::size_t j = 0; j < a.size(); ++j) {
        if (std::cos(0.5 * a.W[j]) * std::cos(0.5 * b.W[j]) < 0.0) return true;
        if (std::cos(0.5 * a.Z[j]) * std::cos(0.5 * b.Z[j]) < 0.0) return true;
    }
    return false;
}

}  // namespace

double breaking_time(const LagrangianState& s0, double dt, double horizon, const KernelOptions& opt) {
    const auto steps = static_cast<std::size_t>(std::ceil(std::abs(horizon) / dt - 1e-9));
    if (steps == 0) return std::numeric_limits<double>::quiet_NaN();
    const double h = horizon / static_cast<double>(steps);
    LagrangianState s = s0;
    for (std::size_t k = 0; k < steps; ++k) {
        LagrangianState next = step(s, h, opt);
        if (sign_changed(s, next)) {
            double lo = 0.0, hi = h;
            for (int it = 0; it < 60 && std::abs(hi - lo) > 1e-15 * std::max(1.0, std::abs(s.t)); ++it) {
                const double mid = 0.5 * (lo + hi);
                if (sign_changed(s, step(s, mid, opt))) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return s.t + 0.5 * (lo + hi);
        }
        s = std::move(next);
    }
    return std::numeric_limits<double>::quiet_NaN();
}

void write_diagnostics_csv(const std::vector<StepDiagnostics>& d, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot write " + path.string());
    os << "t,E_u,E_v,G,H,sup_U,sup_V,q_min,q_max,uxvx_mass,trunc_err\n";
    char buf[512];
    for (const auto& r : d) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.t,
                      r.inv.E_u, r.inv.E_v, r.inv.G, r.inv.H, r.sup_U, r.sup_V, r.q_min, r.q_max, r.uxvx_mass,
                      r.truncation_error);
        os << buf;
    }
}

}  // namespace novsemi
