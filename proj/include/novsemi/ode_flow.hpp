#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "novsemi/errors.hpp"
#include "novsemi/lagrangian_transform.hpp"
#include "novsemi/nonlocal_kernel.hpp"
#include "novsemi/sigma_space.hpp"

namespace novsemi {

struct FlowConfig {
    double dt = 1e-3;
    double t_end = 1.0;
    std::size_t monitor_every = 10;  // steps between snapshots and monitor runs
    double tol_conservation = 1e-4;  // relative drift allowed for the four invariants
    bool stiff_cell_flag = false;
    double monitor_slack = 1e-6;     // relative slack on the analytic bounds
    double term_slack = 0.05;        // slack on the uniform bounds of the nonlocal terms
    std::size_t kernel_pairs = 10000;
    std::uint64_t seed = 1;
    std::size_t max_halvings = 6;
    bool abort_on_violation = true;
    std::vector<double> stops;  // extra absolute times that get an exact snapshot

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// Time derivatives of the six fields.
struct Rates {
    std::vector<double> U, V, W, Z, q, y;
    double q_factor_sup = 0;  // sup of the two factors multiplying q sin W and q sin Z
};

Rates rhs(const LagrangianState& s, const KernelOptions& opt = {}, NonlocalTerms* terms = nullptr);

/// Per-field bounds on how far one step moved the state (for the growth monitors).
struct StepIncrement {
    std::array<double, 4> linf{};  // U, V, W, Z
    std::array<double, 4> l2{};
    double log_q = 0;  // bound on |log q(t+dt) - log q(t)|
};

/// One classical RK4 step; throws StepRejectedError if q <= 0 afterwards.
LagrangianState step(const LagrangianState& s, double dt, const KernelOptions& opt = {},
                     StepIncrement* inc = nullptr);

struct Invariants {
    double E_u = 0, E_v = 0, G = 0, H = 0;
    [[nodiscard]] std::array<double, 4> values() const { return {E_u, E_v, G, H}; }
};

/// Trapezoid quadrature of the four label-space conserved integrands.
Invariants lagrangian_invariants(const LagrangianState& s);

/// Drift of each invariant relative to its natural scale (E_u, E_v, sqrt(E_u E_v), E_u E_v at least).
std::array<double, 4> relative_drift(const Invariants& now, const Invariants& ref);

/// Running totals behind the growth and q-envelope monitors.
struct GrowthTracker {
    double t0 = 0;
    std::array<double, 4> linf0{}, l20{};
    std::array<double, 4> linf_acc{}, l2_acc{};
    double log_q_acc = 0;
    double q_lo0 = 1, q_hi0 = 1;

    static GrowthTracker start(const LagrangianState& s);
    void add(const StepIncrement& inc);
};

struct MonitorReport {
    double t = 0;
    bool sup_U = true, sup_V = true, uxvx = true, q_envelope = true, gamma = true, mu_mass = true;
    bool terms = true, growth = true, conservation = true;
    double sup_U_val = 0, sup_V_val = 0, uxvx_val = 0, mu_val = 0, kappa0 = 1, C_q = 0;
    double gamma_violation = 0, max_drift = 0;
    std::string terms_worst;

    [[nodiscard]] bool ok() const {
        return sup_U && sup_V && uxvx && q_envelope && gamma && mu_mass && terms && growth && conservation;
    }
    /// Name of the first failing monitor, or empty.
    [[nodiscard]] std::string failure() const;
};

struct MonitorOptions {
    double slack = 1e-6;
    double term_slack = 0.05;
    std::size_t kernel_pairs = 10000;
    std::uint64_t seed = 1;
    double tol_conservation = 1e-4;
    const Invariants* reference = nullptr;  // invariants at t0 for the drift monitor
    const GrowthTracker* growth = nullptr;
};

MonitorReport apriori_monitors(const LagrangianState& s, const ConservedSet& cs, const MonitorOptions& opt = {});

struct StepDiagnostics {
    double t = 0;
    Invariants inv;
    double sup_U = 0, sup_V = 0, q_min = 0, q_max = 0, uxvx_mass = 0, truncation_error = 0;
    bool omega_inside = true;
    MonitorReport monitors;
};

StepDiagnostics diagnose(const LagrangianState& s, const ConservedSet& cs, const MonitorOptions& opt = {});

class MonitorViolation : public Error {
public:
    MonitorViolation(const std::string& what, StepDiagnostics d) : Error(what), diag_(std::move(d)) {}
    [[nodiscard]] const StepDiagnostics& diagnostics() const { return diag_; }

private:
    StepDiagnostics diag_;
};

struct Trajectory {
    std::vector<LagrangianState> snapshots;
    std::vector<StepDiagnostics> diagnostics;  // one per snapshot
    ConservedSet conserved;                   // of the initial data
    std::size_t rejected_steps = 0;

    [[nodiscard]] bool monitors_ok() const;
};

/**
 * Integrates from s0.t to s0.t + cfg.t_end (either sign) with fixed steps,
 * halving a step that drives q non-positive. Snapshots and diagnostics are
 * taken every cfg.monitor_every steps and at the end.
 */
Trajectory evolve(const LagrangianState& s0, const FlowConfig& cfg, const ConservedSet& cs);

/**
 * First time after s.t (within `horizon`, either sign) at which cos(W/2) or
 * cos(Z/2) changes sign at some label. Found by stepping with dt and then
 * bisecting the size of the last step; NaN if no label breaks.
 */
double breaking_time(const LagrangianState& s, double dt, double horizon, const KernelOptions& opt = {});

void write_diagnostics_csv(const std::vector<StepDiagnostics>& d, const std::filesystem::path& path);

}  // namespace novsemi
