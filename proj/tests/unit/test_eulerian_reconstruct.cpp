#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "novsemi/errors.hpp"
#include "novsemi/eulerian_reconstruct.hpp"
#include "novsemi/ode_flow.hpp"
#include "support.hpp"

using namespace novsemi;

namespace {

double max_abs(const std::vector<double>& a) {
    double m = 0;
    for (const double x : a) m = std::max(m, std::abs(x));
    return m;
}

SigmaPair gauss_pair(const SpatialGrid& g, double amp, bool twin = false) {
    const double s = twin ? 0.0 : 0.3, b = twin ? 1.0 : 0.8;
    return make_pair(
        g, [amp](double x) { return amp * std::exp(-x * x); }, [amp](double x) { return -2 * amp * x * std::exp(-x * x); },
        [=](double x) { return b * amp * std::exp(-(x - s) * (x - s)); },
        [=](double x) { return -2 * b * amp * (x - s) * std::exp(-(x - s) * (x - s)); });
}

FlowConfig quiet(double dt, double t_end, std::size_t every) {
    FlowConfig f;
    f.dt = dt;
    f.t_end = t_end;
    f.monitor_every = every;
    f.kernel_pairs = 0;
    f.abort_on_violation = false;
    return f;
}

ConservedSet own_conserved(const LagrangianState& s) {
    const Invariants i = lagrangian_invariants(s);
    return conserved_from_integrals(i.E_u, i.E_v, i.G, i.H);
}

std::vector<EulerianSnapshot> run_snapshots(const SigmaPair& p, double dt, double t_end, std::size_t every) {
    const LabelSetup setup = setup_labels(p, ac_energy_measure(p), p.grid.n_points);
    const Trajectory tr = evolve(setup.state, quiet(dt, t_end, every), own_conserved(setup.state));
    std::vector<EulerianSnapshot> out;
    for (const auto& s : tr.snapshots) out.push_back(make_snapshot(s, p.grid));
    return out;
}

}  // namespace

TEST_CASE("reconstruction of the zero state vanishes") {
    const LagrangianState s = testing::zero_state(50, 50, 0.1);
    const EulerianField f = reconstruct(s, SpatialGrid::make(-4, 4, 81));
    CHECK(max_abs(f.u) == 0.0);
    CHECK(max_abs(f.v) == 0.0);
    CHECK(max_abs(f.ux) == 0.0);
    CHECK(max_abs(f.vx) == 0.0);
    CHECK(f.masks_empty());
}

TEST_CASE("points outside the image of y are vacuum") {
    LagrangianState s = testing::zero_state(10, 10, 0.1);
    std::fill(s.U.begin(), s.U.end(), 0.5);
    const EulerianField f = reconstruct_uv(s, SpatialGrid::make(-3, 3, 61));
    CHECK(f.u.front() == 0.0);
    CHECK(f.u.back() == 0.0);
    CHECK(f.u[30] == doctest::Approx(0.5));
}

TEST_CASE("at t = 0 the label images return the label values") {
    const SigmaPair p = gauss_pair(SpatialGrid::make(-10, 10, 801), 0.7);
    const LabelSetup setup = setup_labels(p, ac_energy_measure(p), 801);
    const LagrangianState& s = setup.state;
    std::vector<double> u, v;
    reconstruct_at(s, s.y, u, v);
    for (std::size_t j = 0; j < s.size(); ++j) {
        CHECK(u[j] == s.U[j]);
        CHECK(v[j] == s.V[j]);
    }
}

TEST_CASE("peakon round trip matches the exponential") {
    const SpatialGrid g = SpatialGrid::make(-12, 12, 4097);
    const SigmaPair p = make_peakon_pair(g, {{1.0, 0.0}}, {{1.0, 0.0}});
    const LabelSetup setup = setup_labels(p, ac_energy_measure(p), 4097);
    const EulerianField f = reconstruct_uv(setup.state, g);
    // Nodes beyond the outermost label images read as vacuum.
    const double lo = setup.state.y.front(), hi = setup.state.y.back();
    double e = 0;
    for (std::size_t i = 0; i < g.n_points; ++i) {
        if (g.x(i) < lo || g.x(i) > hi) continue;
        e = std::max(e, std::abs(f.u[i] - std::exp(-std::abs(g.x(i)))));
    }
    CHECK(e <= 1e-6);
}

TEST_CASE("folded characteristics are rejected") {
    LagrangianState s = testing::zero_state(10, 10, 0.1);
    s.y[6] = s.y[5] - 0.05;
    CHECK_THROWS_AS(reconstruct_uv(s, SpatialGrid::make(-1, 1, 21)), StateInvalidError);
}

TEST_CASE("W = pi/2 gives unit slope") {
    LagrangianState s = testing::zero_state(40, 40, 0.1);
    std::fill(s.W.begin(), s.W.end(), 0.5 * std::numbers::pi);
    testing::integrate_y(s);
    const EulerianField f = reconstruct(s, SpatialGrid::make(-1.5, 1.5, 31));
    for (std::size_t i = 0; i < f.ux.size(); ++i) CHECK(f.ux[i] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f.masks_empty());
}

TEST_CASE("reconstructed derivative matches finite differences at second order") {
    double err[2];
    for (int k = 0; k < 2; ++k) {
        const std::size_t n = 513u + 512u * static_cast<std::size_t>(k);
        const SigmaPair p = gauss_pair(SpatialGrid::make(-10, 10, n), 1.0);
        const LabelSetup setup = setup_labels(p, ac_energy_measure(p), n);
        const Trajectory tr = evolve(setup.state, quiet(1e-3, 0.1, 100), own_conserved(setup.state));
        const EulerianField f = reconstruct(tr.snapshots.back(), p.grid);
        CHECK(f.masks_empty());
        const double h = p.grid.h();
        double e = 0;
        for (std::size_t i = 1; i + 1 < n; ++i) e = std::max(e, std::abs((f.u[i + 1] - f.u[i - 1]) / (2 * h) - f.ux[i]));
        err[k] = e;
    }
    CHECK(err[0] / err[1] > 3.0);
}

TEST_CASE("measures of the zero state vanish") {
    const MeasureTriple m = extract_measures(testing::zero_state(50, 50, 0.1), SpatialGrid::make(-4, 4, 81));
    for (const auto* r : {&m.lam_u, &m.lam_v, &m.lam_uv}) {
        CHECK(r->total_mass() == 0.0);
        CHECK(r->atoms.empty());
    }
}

TEST_CASE("measures of smooth data at t = 0 carry the squared derivatives") {
    const SpatialGrid g = SpatialGrid::make(-10, 10, 2049);
    const SigmaPair p = gauss_pair(g, 0.8);
    const LabelSetup setup = setup_labels(p, ac_energy_measure(p), 2049);
    const MeasureTriple m = extract_measures(setup.state, g);
    CHECK(m.lam_u.atoms.empty());
    CHECK(m.lam_v.atoms.empty());
    CHECK(m.lam_uv.atoms.empty());
    double eu = 0, ev = 0, euv = 0;
    for (std::size_t i = 0; i < g.n_points; ++i) {
        eu = std::max(eu, std::abs(m.lam_u.ac_density[i] - p.du0[i] * p.du0[i]));
        ev = std::max(ev, std::abs(m.lam_v.ac_density[i] - p.dv0[i] * p.dv0[i]));
        euv = std::max(euv, std::abs(m.lam_uv.ac_density[i] - p.duv0[i] * p.duv0[i]));
    }
    CHECK(eu <= 1e-3);
    CHECK(ev <= 1e-3);
    CHECK(euv <= 1e-3);
}

TEST_CASE("energy measure is the sum of the triple") {
    SplitMix64 rng(21);
    const LagrangianState s = testing::random_state(rng, 200, 0.04);
    const SpatialGrid g = SpatialGrid::make(-5, 5, 201);
    const MeasureTriple m = extract_measures(s, g);
    const RadonMeasure1D mu = mu_t(s, g), sum = m.sum();
    for (std::size_t i = 0; i < g.n_points; ++i) CHECK(std::abs(mu.ac_density[i] - sum.ac_density[i]) <= 1e-14);
    CHECK(mu.atoms.size() == sum.atoms.size());
}

TEST_CASE("collision creates an atom and keeps the energy balance") {
    const std::size_t n = 2049;
    const SpatialGrid g = SpatialGrid::make(-12, 12, n);
    const SigmaPair p = make_peakon_pair(g, {{1.6, -0.5}, {-1.6, 0.5}}, {{1.6, -0.5}, {1.6, 0.5}});
    const LabelSetup setup = setup_labels(p, ac_energy_measure(p), n);
    const double ts = breaking_time(setup.state, 5e-4, 1.0);
    FlowConfig f = quiet(5e-4, ts, 1000000);
    const ConservedSet cs = own_conserved(setup.state);
    const Trajectory tr = evolve(setup.state, f, cs);
    const LagrangianState& s = tr.snapshots.back();
    const MeasureTriple m = extract_measures(s, g);
    REQUIRE_FALSE(m.lam_u.atoms.empty());
    CHECK(std::abs(m.lam_u.atoms[0].position) < 2 * g.h());
    const Balances b = balances(s, m, cs);
    CHECK(std::abs(b.E_u - cs.E_u) / cs.E_u <= 1e-4);
    CHECK(b.csho_margin >= -1e-6 * cs.H);
    const EulerianField fld = reconstruct(s, g);
    const SingularSupport sup = singular_support(fld, m.lam_u, Channel::u);
    CHECK(sup.atoms == m.lam_u.atoms.size());
}

TEST_CASE("total energy measure stays below the mass bound") {
    const SigmaPair p = make_peakon_pair(SpatialGrid::make(-12, 12, 1025), {{1.0, -1.0}}, {{0.5, 1.0}});
    const LabelSetup setup = setup_labels(p, ac_energy_measure(p), 1025);
    const ConservedSet cs = own_conserved(setup.state);
    const Trajectory tr = evolve(setup.state, quiet(1e-3, 1.0, 250), cs);
    for (const auto& s : tr.snapshots) CHECK(mu_t(s, p.grid).total_mass() <= cs.mu_bound() * (1 + 1e-6));
}

TEST_CASE("plateaus of y carry constant fields") {
    const SigmaPair p = make_zero_pair(SpatialGrid::make(-5, 5, 201));
    RadonMeasure1D mu = RadonMeasure1D::zero(p.grid);
    mu.atoms.push_back({0.0, 0.5});
    const LabelSetup setup = setup_labels(p, mu, 201);
    CHECK(plateau_consistency(setup.state) <= 1e-12);
}

TEST_CASE("residuals of the zero solution vanish") {
    const SpatialGrid g = SpatialGrid::make(-5, 5, 101);
    const std::vector<EulerianSnapshot> snaps = run_snapshots(make_zero_pair(g), 0.05, 0.5, 2);
    const auto bank = default_test_bank(0, 0.5, -3, 3);
    for (const auto& r : weak_residual(snaps, bank)) {
        CHECK(r.r_u == 0.0);
        CHECK(r.r_v == 0.0);
    }
    for (const Channel c : {Channel::u, Channel::v, Channel::uv, Channel::mu})
        for (const double r : transport_residual(snaps, c, bank)) CHECK(r == 0.0);
    const HolderReport h = holder_check(snaps, 1000);
    CHECK(h.lipschitz_u == 0.0);
    CHECK(h.holder_u == 0.0);
}

TEST_CASE("test functions must stay inside the domain") {
    const SpatialGrid g = SpatialGrid::make(-5, 5, 101);
    const std::vector<EulerianSnapshot> snaps = run_snapshots(make_zero_pair(g), 0.05, 0.5, 2);
    CHECK_THROWS_AS(weak_residual(snaps, default_test_bank(0, 0.5, -8, 8)), DomainError);
    CHECK_THROWS_AS(transport_residual(snaps, Channel::u, default_test_bank(0, 2.0, -3, 3)), DomainError);
}

TEST_CASE("residuals decay at second order on smooth data") {
    double weak[2], tr[2];
    for (int k = 0; k < 2; ++k) {
        const std::size_t n = 513u + 512u * static_cast<std::size_t>(k);
        const auto snaps =
            run_snapshots(gauss_pair(SpatialGrid::make(-10, 10, n), 0.5), 2e-3 / (1 << k), 0.5, 5);
        const auto bank = default_test_bank(0, 0.5, -4, 4);
        weak[k] = 0;
        for (const auto& r : weak_residual(snaps, bank)) weak[k] = std::max({weak[k], std::abs(r.r_u), std::abs(r.r_v)});
        tr[k] = max_abs(transport_residual(snaps, Channel::mu, bank));
    }
    CHECK(weak[0] / weak[1] > 3.0);
    CHECK(tr[0] / tr[1] > 3.0);
}

TEST_CASE("symmetric data gives identical transport residuals for u and v") {
    const auto snaps = run_snapshots(gauss_pair(SpatialGrid::make(-10, 10, 257), 0.5, true), 4e-3, 0.5, 5);
    const auto bank = default_test_bank(0, 0.5, -4, 4);
    const auto ru = transport_residual(snaps, Channel::u, bank), rv = transport_residual(snaps, Channel::v, bank);
    for (std::size_t k = 0; k < ru.size(); ++k) CHECK(std::abs(ru[k] - rv[k]) <= 1e-10);
}

TEST_CASE("Holder constant of a travelling peakon stabilizes under refinement") {
    double hc[2];
    for (int k = 0; k < 2; ++k) {
        const std::size_t n = 513u << k;
        const SigmaPair p = make_peakon_pair(SpatialGrid::make(-12, 12, n), {{1.0, -2.0}}, {{1.0, -2.0}});
        const auto snaps = run_snapshots(p, 2e-3, 1.0, 25);
        hc[k] = holder_check(snaps, 20000, 7).holder_u;
    }
    CHECK(hc[1] > 0.0);
    CHECK(hc[0] / hc[1] == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("bump test functions") {
    const Bump b{0.0, 1.0};
    CHECK(b(0.0) == doctest::Approx(1.0));
    CHECK(b(1.0) == doctest::Approx(0.0));
    CHECK(b(2.0) == 0.0);
    CHECK(b.d(0.0) == doctest::Approx(0.0));
    const double h = 1e-6;
    CHECK(b.d(0.3) == doctest::Approx((b(0.3 + h) - b(0.3 - h)) / (2 * h)).epsilon(1e-6));
    const auto bank = default_test_bank(0, 1, -2, 2);
    CHECK(bank.size() == 6);
}

TEST_CASE("snapshot and measure CSV exports") {
    const SpatialGrid g = SpatialGrid::make(-5, 5, 21);
    const LagrangianState s = testing::zero_state(50, 50, 0.1);
    const auto dir = std::filesystem::temp_directory_path();
    write_snapshot_csv(reconstruct(s, g), dir / "novsemi_snap.csv");
    write_measures_csv(extract_measures(s, g), dir / "novsemi_meas.csv");
    std::ifstream a(dir / "novsemi_snap.csv"), b(dir / "novsemi_meas.csv");
    std::string line;
    std::getline(a, line);
    CHECK(line == "x,u,v,ux,vx,mask_u,mask_v");
    std::getline(b, line);
    CHECK(line == "x,ac_u,ac_v,ac_uv");
}
