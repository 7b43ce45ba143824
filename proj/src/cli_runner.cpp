#include "novsemi/cli_runner.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "novsemi/errors.hpp"
#include "novsemi/nonlocal_kernel.hpp"

namespace novsemi {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
    double x = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc{} || p != v.data() + v.size() || !std::isfinite(x))
        throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
    return x;
}

std::size_t to_count(const std::string& key, const std::string& v) {
    std::size_t x = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
    return x;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("key '" + key + "': expected true or false, got '" + v + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

struct Domain {
    double lo, hi;
};

Domain default_domain(const std::string& scenario) {
    if (scenario.rfind("peakon", 0) == 0) return {-12, 12};
    return {-10, 10};
}

double default_amplitude(const std::string& scenario) {
    if (scenario == "peakon-single") return 1.0;
    if (scenario == "peakon-headon") return 1.6;
    if (scenario == "peakon-overtake") return 1.2;
    if (scenario == "nu-reduction") return 0.6;
    return 0.5;
}

SigmaPair gaussian_pair(const SpatialGrid& g, double au, double av, double shift) {
    auto gauss = [](double a, double c) { return [a, c](double x) { return a * std::exp(-(x - c) * (x - c)); }; };
    auto dgauss = [](double a, double c) {
        return [a, c](double x) { return -2 * (x - c) * a * std::exp(-(x - c) * (x - c)); };
    };
    return make_pair(g, gauss(au, 0), dgauss(au, 0), gauss(av, shift), dgauss(av, shift));
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string short_fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4e", v);
    return buf;
}

std::filesystem::path prepare_dir(const std::filesystem::path& p) {
    std::filesystem::create_directories(p);
    return p;
}

double ratio(double coarse, double fine) {
    if (coarse == 0 && fine == 0) return std::numeric_limits<double>::infinity();
    return fine > 0 ? coarse / fine : std::numeric_limits<double>::infinity();
}

CheckRow at_most(std::string name, double value, double tol) { return {std::move(name), value, tol, value <= tol}; }
CheckRow at_least(std::string name, double value, double tol) { return {std::move(name), value, tol, value >= tol}; }

/// Data not negligible at the domain ends.
void warn_decay(const SigmaPair& p, std::ostream& log) {
    const double r = boundary_ratio(p);
    if (r > 1e-8) log << "warning: boundary values reach " << short_fmt(r) << " of the maximum\n";
}

int table_status(const std::vector<CheckRow>& rows) {
    return std::all_of(rows.begin(), rows.end(), [](const CheckRow& r) { return r.pass; }) ? kExitOk : kExitValidation;
}

/// Options for a refinement level: n_cells * 2^level cells, dt / 2^level.
PipelineOptions refined(const ScenarioConfig& cfg, int level) {
    PipelineOptions opt = pipeline_options(cfg);
    const double f = std::ldexp(1.0, level);
    opt.flow.dt /= f;
    opt.flow.monitor_every *= static_cast<std::size_t>(f);
    if (opt.n_labels) opt.n_labels = static_cast<std::size_t>(static_cast<double>(opt.n_labels - 1) * f) + 1;
    return opt;
}

}  // namespace

const std::vector<std::string>& scenario_names() {
    static const std::vector<std::string> names = {"zero",           "gauss-smooth", "peakon-single", "peakon-headon",
                                                   "peakon-overtake", "nu-reduction", "atom-seed",     "file"};
    return names;
}

void ScenarioConfig::validate() const {
    const auto& names = scenario_names();
    if (std::find(names.begin(), names.end(), scenario) == names.end())
        throw ConfigError("key 'scenario': unknown scenario '" + scenario + "'");
    if (scenario == "file" && data_file.empty()) throw ConfigError("key 'data_file': required for scenario 'file'");
    if (scenario == "file" && !std::filesystem::exists(data_file))
        throw ConfigError("key 'data_file': no such file '" + data_file.string() + "'");
    if (n_cells < 8) throw ConfigError("key 'n_cells': at least 8 cells are required");
    if (n_labels != 0 && n_labels < 3) throw ConfigError("key 'n_labels': at least 3 labels are required");
    const Domain d = default_domain(scenario);
    if (!(x_min.value_or(d.lo) < 0 && x_max.value_or(d.hi) > 0))
        throw ConfigError("key 'x_min': the domain must contain x = 0 in its interior");
    if (amplitude && !(std::abs(*amplitude) <= 10)) throw ConfigError("key 'amplitude': must lie in [-10, 10]");
    for (const auto& a : atoms) {
        if (!(a.mass > 0)) throw ConfigError("key 'atoms': atom masses must be positive");
        if (!(a.position > x_min.value_or(d.lo) && a.position < x_max.value_or(d.hi)))
            throw ConfigError("key 'atoms': atom outside the domain");
    }
    if (threads == 0) throw ConfigError("key 'threads': must be positive");
    if (continuity_n.empty()) throw ConfigError("key 'continuity_n': list is empty");
    for (int n : continuity_n)
        if (n <= 0) throw ConfigError("key 'continuity_n': entries must be positive");
    if (!(bump_width > 0)) throw ConfigError("key 'bump_width': must be positive");
    if (residual_cells < 8) throw ConfigError("key 'residual_cells': at least 8 cells are required");
    if (!(residual_t_end > 0)) throw ConfigError("key 'residual_t_end': must be positive");
    if (!(oracle_tol > 0)) throw ConfigError("key 'oracle_tol': must be positive");
    try {
        flow.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("flow settings: ") + e.what());
    }
}

void apply_setting(ScenarioConfig& c, const std::string& key, const std::string& value) {
    const std::string& v = value;
    if (key == "scenario") {
        c.scenario = v;
    } else if (key == "data_file") {
        c.data_file = v;
    } else if (key == "x_min") {
        c.x_min = to_double(key, v);
    } else if (key == "x_max") {
        c.x_max = to_double(key, v);
    } else if (key == "n_cells") {
        c.n_cells = to_count(key, v);
    } else if (key == "n_labels") {
        c.n_labels = to_count(key, v);
    } else if (key == "amplitude") {
        c.amplitude = to_double(key, v);
    } else if (key == "atoms") {
        c.atoms.clear();
        c.atoms_set = true;
        for (const auto& item : split(v, ',')) {
            const auto parts = split(item, ':');
            if (parts.size() != 2) throw ConfigError("key 'atoms': expected position:mass pairs, got '" + item + "'");
            c.atoms.push_back({to_double(key, parts[0]), to_double(key, parts[1])});
        }
    } else if (key == "dt") {
        c.flow.dt = to_double(key, v);
    } else if (key == "t_end") {
        c.flow.t_end = to_double(key, v);
    } else if (key == "monitor_every") {
        c.flow.monitor_every = to_count(key, v);
    } else if (key == "tol_conservation") {
        c.flow.tol_conservation = to_double(key, v);
    } else if (key == "monitor_slack") {
        c.flow.monitor_slack = to_double(key, v);
    } else if (key == "term_slack") {
        c.flow.term_slack = to_double(key, v);
    } else if (key == "kernel_pairs") {
        c.flow.kernel_pairs = to_count(key, v);
    } else if (key == "seed") {
        c.flow.seed = to_count(key, v);
    } else if (key == "max_halvings") {
        c.flow.max_halvings = to_count(key, v);
    } else if (key == "abort_on_violation") {
        c.flow.abort_on_violation = to_bool(key, v);
    } else if (key == "stiff_cell_flag") {
        c.flow.stiff_cell_flag = to_bool(key, v);
    } else if (key == "stops") {
        c.flow.stops.clear();
        for (const auto& s : split(v, ',')) c.flow.stops.push_back(to_double(key, s));
    } else if (key == "output_dir") {
        c.output_dir = v;
    } else if (key == "threads") {
        c.threads = to_count(key, v);
    } else if (key == "semigroup_t") {
        c.semigroup_t = to_double(key, v);
    } else if (key == "semigroup_tau") {
        c.semigroup_tau = to_double(key, v);
    } else if (key == "continuity_n") {
        c.continuity_n.clear();
        for (const auto& s : split(v, ',')) c.continuity_n.push_back(static_cast<int>(to_count(key, s)));
    } else if (key == "bump_amplitude") {
        c.bump_amplitude = to_double(key, v);
    } else if (key == "bump_center") {
        c.bump_center = to_double(key, v);
    } else if (key == "bump_width") {
        c.bump_width = to_double(key, v);
    } else if (key == "residual_cells") {
        c.residual_cells = to_count(key, v);
    } else if (key == "residual_t_end") {
        c.residual_t_end = to_double(key, v);
    } else if (key == "oracle_tol") {
        c.oracle_tol = to_double(key, v);
    } else {
        throw ConfigError("unknown key '" + key + "'");
    }
}

void apply_override(ScenarioConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
    apply_setting(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

ScenarioConfig parse_config(std::istream& in, const std::string& source) {
    ScenarioConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(source + ":" + std::to_string(line_no) + ": expected key = value");
        try {
            apply_setting(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(source + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    return parse_config(in, path.string());
}

SpatialGrid scenario_grid(const ScenarioConfig& cfg, std::size_t n_cells) {
    const Domain d = default_domain(cfg.scenario);
    return SpatialGrid::make(cfg.x_min.value_or(d.lo), cfg.x_max.value_or(d.hi), n_cells + 1);
}

FlowTriple make_scenario(const ScenarioConfig& cfg, std::size_t n_cells) {
    cfg.validate();
    const std::string& s = cfg.scenario;
    const double a = cfg.amplitude.value_or(default_amplitude(s));
    SigmaPair p;
    if (s == "file") {
        p = load_pair(cfg.data_file);
    } else {
        const SpatialGrid g = scenario_grid(cfg, n_cells);
        if (s == "zero") {
            p = make_zero_pair(g);
        } else if (s == "gauss-smooth" || s == "atom-seed") {
            p = gaussian_pair(g, a, 0.8 * a, 0.3);
        } else if (s == "nu-reduction") {
            p = gaussian_pair(g, a, a, 0.0);
        } else if (s == "peakon-single") {
            p = make_peakon_pair(g, {{a, 0.0}}, {{a, 0.0}});
        } else if (s == "peakon-headon") {
            p = make_peakon_pair(g, {{a, -0.5}, {-a, 0.5}}, {{a, -0.5}, {a, 0.5}});
        } else if (s == "peakon-overtake") {
            p = make_peakon_pair(g, {{a, -3.0}, {0.5 * a, 0.0}}, {{a, -3.0}, {0.5 * a, 0.0}});
        }
    }
    FlowTriple t = make_triple(p);
    std::vector<Atom> atoms = cfg.atoms;
    if (s == "atom-seed" && !cfg.atoms_set) atoms = {{0.0, 0.5}};
    for (const auto& at : atoms) {
        if (!(at.position >= p.grid.x_min && at.position <= p.grid.x_max))
            throw ConfigError("key 'atoms': atom outside the grid");
        t.mu.atoms.push_back(at);
    }
    std::sort(t.mu.atoms.begin(), t.mu.atoms.end(), [](const Atom& x, const Atom& y) { return x.position < y.position; });
    t.validate();
    return t;
}

SigmaPair bumped_pair(const ScenarioConfig& cfg, const SigmaPair& p, int n) {
    SigmaPair q = p;
    const double inv = 1.0 / n;
    for (std::size_t i = 0; i < q.grid.n_points; ++i) {
        const double z = (q.grid.x(i) - cfg.bump_center) / cfg.bump_width;
        const double b = cfg.bump_amplitude * std::exp(-z * z);
        q.u0[i] += inv * b;
        q.du0[i] += inv * (-2 * z / cfg.bump_width) * b;
        q.duv0[i] = q.du0[i] * q.dv0[i];
    }
    return q;
}

PipelineOptions pipeline_options(const ScenarioConfig& cfg) {
    PipelineOptions opt;
    opt.flow = cfg.flow;
    opt.n_labels = cfg.n_labels;
    opt.threads = cfg.threads;
    return opt;
}

void print_checks(const std::vector<CheckRow>& rows, std::ostream& os) {
    std::size_t w = 5;
    for (const auto& r : rows) w = std::max(w, r.name.size());
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-*s  %-12s  %-12s  %s\n", int(w), "check", "value", "tolerance", "status");
    os << buf;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%-*s  %-12s  %-12s  %s\n", int(w), r.name.c_str(), short_fmt(r.value).c_str(),
                      short_fmt(r.tolerance).c_str(), r.pass ? "PASS" : "FAIL");
        os << buf;
    }
}

void write_checks_csv(const std::vector<CheckRow>& rows, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path.string() + " for writing");
    os << "check,value,tolerance,pass\n";
    for (const auto& r : rows) os << r.name << ',' << fmt(r.value) << ',' << fmt(r.tolerance) << ',' << int(r.pass) << '\n';
}

int run_simulate(const ScenarioConfig& cfg, std::ostream& log) {
    const FlowTriple in = make_scenario(cfg, cfg.n_cells);
    warn_decay(in.pair, log);
    std::optional<PipelineRun> result;
    try {
        result.emplace(run_pipeline(in, cfg.flow.t_end, pipeline_options(cfg)));
    } catch (const MonitorViolation& e) {
        log << "monitor violation: " << e.what() << '\n';
        return kExitMonitor;
    }
    const PipelineRun& run = *result;
    const auto dir = prepare_dir(cfg.output_dir);
    const auto snap_dir = prepare_dir(dir / "snapshots");
    const auto meas_dir = prepare_dir(dir / "measures");
    const Trajectory& tr = run.trajectory;
    write_diagnostics_csv(tr.diagnostics, dir / "diagnostics.csv");
    for (std::size_t k = 0; k < tr.snapshots.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "_%04zu.csv", k);
        const EulerianSnapshot s = make_snapshot(tr.snapshots[k], in.pair.grid);
        write_snapshot_csv(s.field, snap_dir / ("snapshot" + std::string(name)));
        write_measures_csv(s.measures, meas_dir / ("measures" + std::string(name)));
    }
    store_pair(run.out.pair, dir / "final_pair.txt");
    serialize_trajectory(tr, dir / "trajectory.nsm");

    double drift = 0;
    for (const auto& d : tr.diagnostics) drift = std::max(drift, d.monitors.max_drift);
    log << "scenario " << cfg.scenario << ": " << tr.snapshots.size() << " snapshots to t = " << tr.snapshots.back().t
        << ", rejected steps " << tr.rejected_steps << ", max relative drift " << short_fmt(drift) << '\n';
    for (const auto& d : tr.diagnostics) {
        if (!d.monitors.ok()) {
            log << "monitor '" << d.monitors.failure() << "' violated at t = " << d.t << '\n';
            return kExitMonitor;
        }
    }
    log << "all monitors passed; outputs in " << dir.string() << '\n';
    return kExitOk;
}

namespace {

double kernel_oracle_error(const FlowTriple& in, std::size_t n_labels) {
    const LabelSetup setup = setup_labels(in.pair, in.mu, n_labels);
    const NonlocalTerms a = evaluate_nonlocal_terms(setup.state);
    const NonlocalTerms b = eulerian_oracle_at(in.pair, setup.state.y);
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

double scan_error(const FlowTriple& in) {
    const LabelSetup setup = setup_labels(in.pair, in.mu, 513);
    const NonlocalTerms a = evaluate_nonlocal_terms(setup.state);
    const NonlocalTerms b = evaluate_nonlocal_terms_direct(setup.state);
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

struct ResidualSet {
    double weak = 0;
    double transport[4] = {0, 0, 0, 0};
};

ResidualSet residuals(const ScenarioConfig& cfg, std::size_t n_cells, double dt) {
    const FlowTriple in = make_scenario(cfg, n_cells);
    PipelineOptions opt = pipeline_options(cfg);
    opt.n_labels = 0;
    opt.flow.dt = dt;
    opt.flow.monitor_every = 5;
    opt.flow.kernel_pairs = 0;
    opt.flow.abort_on_violation = false;
    const PipelineRun run = run_pipeline(in, cfg.residual_t_end, opt);
    std::vector<EulerianSnapshot> snaps;
    for (const auto& s : run.trajectory.snapshots) snaps.push_back(make_snapshot(s, in.pair.grid));
    const SpatialGrid& g = in.pair.grid;
    const double half = 0.4 * (g.x_max - g.x_min) / 2;
    const double xc = 0.5 * (g.x_min + g.x_max);
    const auto bank = default_test_bank(0, cfg.residual_t_end, xc - half, xc + half);
    ResidualSet r;
    for (const auto& w : weak_residual(snaps, bank)) r.weak = std::max({r.weak, std::abs(w.r_u), std::abs(w.r_v)});
    const Channel ch[4] = {Channel::u, Channel::v, Channel::uv, Channel::mu};
    for (int c = 0; c < 4; ++c)
        for (const double x : transport_residual(snaps, ch[c], bank)) r.transport[c] = std::max(r.transport[c], std::abs(x));
    return r;
}

}  // namespace

int run_validate(const ScenarioConfig& cfg, std::ostream& log) {
    std::vector<CheckRow> rows;
    const FlowTriple in = make_scenario(cfg, cfg.n_cells);
    warn_decay(in.pair, log);
    const std::size_t n_labels = cfg.n_labels ? cfg.n_labels : in.pair.grid.n_points;
    rows.push_back(at_most("kernel_oracle_rel_error", kernel_oracle_error(in, n_labels), cfg.oracle_tol));
    rows.push_back(at_most("scan_vs_direct_rel_error", scan_error(in), 1e-12));

    PipelineOptions opt = pipeline_options(cfg);
    opt.flow.abort_on_violation = false;
    const PipelineRun run = run_pipeline(in, cfg.flow.t_end, opt);
    const Invariants ref = lagrangian_invariants(run.setup.state);
    double drift = 0, gamma = 0;
    std::size_t failing = 0;
    for (const auto& s : run.trajectory.snapshots) {
        const auto d = relative_drift(lagrangian_invariants(s), ref);
        drift = std::max(drift, *std::max_element(d.begin(), d.end()));
    }
    for (const auto& d : run.trajectory.diagnostics) {
        gamma = std::max(gamma, d.monitors.gamma_violation);
        const MonitorReport& m = d.monitors;
        failing += !(m.sup_U && m.sup_V && m.uxvx && m.q_envelope && m.gamma && m.mu_mass && m.terms && m.growth);
    }
    rows.push_back(at_most("conservation_drift", drift, cfg.flow.tol_conservation));
    rows.push_back(at_most("gamma_bound_violation", gamma, 1e-12));
    rows.push_back(at_most("apriori_monitor_failures", double(failing), 0));

    if (cfg.scenario != "file") {
        const double dt = 1.024 / static_cast<double>(cfg.residual_cells);
        const ResidualSet a = residuals(cfg, cfg.residual_cells, dt);
        const ResidualSet b = residuals(cfg, 2 * cfg.residual_cells, 0.5 * dt);
        rows.push_back(at_least("weak_residual_ratio", ratio(a.weak, b.weak), 3));
        const char* names[4] = {"transport_lam_u_ratio", "transport_lam_v_ratio", "transport_lam_uv_ratio",
                                "transport_mu_ratio"};
        for (int c = 0; c < 4; ++c) rows.push_back(at_least(names[c], ratio(a.transport[c], b.transport[c]), 3));
    }
    print_checks(rows, log);
    write_checks_csv(rows, prepare_dir(cfg.output_dir) / "validate.csv");
    return table_status(rows);
}

int run_semigroup(const ScenarioConfig& cfg, std::ostream& log) {
    if (cfg.scenario == "file") throw ConfigError("key 'scenario': refinement needs a built-in scenario");
    const bool identity_only = cfg.semigroup_t == 0 || cfg.semigroup_tau == 0;
    std::vector<CheckRow> rows;
    SemigroupReport rep[2];
    for (int level = 0; level < 2; ++level) {
        const std::size_t n = cfg.n_cells << level;
        const FlowTriple in = make_scenario(cfg, n);
        const PipelineOptions opt = refined(cfg, level);
        const std::string tag = "N" + std::to_string(n);
        if (identity_only) {
            rep[level].identity = identity_check(in, opt);
        } else {
            rep[level] = semigroup_check(in, cfg.semigroup_t, cfg.semigroup_tau, opt);
        }
        const IdentityReport& id = rep[level].identity;
        rows.push_back(at_most("identity_field_error_" + tag, id.field_error, 1e-10));
        rows.push_back(at_most("identity_mass_error_" + tag, id.mass_error, id.mass_tolerance));
        if (!identity_only) {
            rows.push_back({"composition_d_sigma_" + tag, rep[level].d_sigma, 0, true});
            rows.push_back({"composition_measure_" + tag, rep[level].measure_distance, 0, true});
        }
    }
    if (!identity_only) {
        rows.push_back(at_least("composition_d_sigma_ratio", ratio(rep[0].d_sigma, rep[1].d_sigma), 1.5));
        rows.push_back(
            at_least("composition_measure_ratio", ratio(rep[0].measure_distance, rep[1].measure_distance), 1.5));
    }
    print_checks(rows, log);
    write_checks_csv(rows, prepare_dir(cfg.output_dir) / "semigroup.csv");
    return table_status(rows);
}

int run_continuity(const ScenarioConfig& cfg, std::ostream& log) {
    if (cfg.scenario == "file") throw ConfigError("key 'scenario': refinement needs a built-in scenario");
    std::vector<CheckRow> rows;
    std::ofstream csv(prepare_dir(cfg.output_dir) / "continuity.csv");
    csv << "n_cells,n,d_sigma0,gap\n";
    for (int level = 0; level < 2; ++level) {
        const std::size_t cells = cfg.n_cells << level;
        const FlowTriple base = make_scenario(cfg, cells);
        std::vector<SigmaPair> pert;
        for (const int n : cfg.continuity_n) pert.push_back(bumped_pair(cfg, base.pair, n));
        std::vector<RadonMeasure1D> measures;
        for (const auto& p : pert) {
            RadonMeasure1D m = ac_energy_measure(p);
            m.atoms = base.mu.atoms;
            measures.push_back(std::move(m));
        }
        const ContinuityReport r = continuity_probe(base, pert, cfg.flow.t_end, refined(cfg, level), &measures);
        const std::string tag = "N" + std::to_string(cells);
        for (std::size_t k = 0; k < r.rows.size(); ++k) {
            csv << cells << ',' << cfg.continuity_n[k] << ',' << fmt(r.rows[k].d_sigma0) << ',' << fmt(r.rows[k].gap)
                << '\n';
            rows.push_back({"gap_" + tag + "_n" + std::to_string(cfg.continuity_n[k]), r.rows[k].gap, 0, true});
            if (k > 0) {
                const double q = ratio(r.rows[k - 1].gap, r.rows[k].gap);
                rows.push_back(at_least("gap_ratio_" + tag + "_n" + std::to_string(cfg.continuity_n[k]), q, 1.5));
            }
        }
        rows.push_back({"fitted_gamma_" + tag, r.gamma, 0, r.gamma > 0});
    }
    print_checks(rows, log);
    return table_status(rows);
}

}  // namespace novsemi
