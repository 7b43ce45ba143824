#pragma once

#include <filesystem>
#include <vector>

#include "novsemi/eulerian_reconstruct.hpp"
#include "novsemi/lagrangian_transform.hpp"
#include "novsemi/ode_flow.hpp"
#include "novsemi/sigma_space.hpp"

namespace novsemi {

/// A point (u, v, mu) of the flow at time t.
struct FlowTriple {
    SigmaPair pair;
    RadonMeasure1D mu;
    double t = 0;

    void validate() const;
};

/// Data plus its energy measure (no singular part).
FlowTriple make_triple(const SigmaPair& p, double t = 0);

struct PipelineOptions {
    FlowConfig flow;
    std::size_t n_labels = 0;  // 0: one label per x-cell
    bool align_kinks = true;
    std::size_t threads = 1;  // concurrent pipeline runs in probes
};

/// Every stage of one run of the flow map.
struct PipelineRun {
    LabelSetup setup;
    Trajectory trajectory;
    FlowTriple out;
};

/**
 * label map -> initial state -> evolve by t -> reconstruct -> mu_t. The
 * conserved set is taken from the label-space invariants of the initial state,
 * so atoms of the input measure are included.
 */
PipelineRun run_pipeline(const FlowTriple& input, double t, const PipelineOptions& opt);
FlowTriple flow_map(const FlowTriple& input, double t, const PipelineOptions& opt);

/// Sup distance between the cumulative mass functions of two measures on one grid.
double cumulative_distance(const RadonMeasure1D& a, const RadonMeasure1D& b);

struct IdentityReport {
    double field_error = 0;  // max over label images of |output - sampled input|, u and v
    double mass_error = 0;   // |mu_(0)(R) - mu_0(R)| / max(1, mu_0(R))
    double mass_tolerance = 0;  // x-grid trapezoid minus midpoint of the energy density off kinks, same scaling
    [[nodiscard]] bool ok() const { return field_error <= 1e-10 && mass_error <= mass_tolerance; }
};
IdentityReport identity_check(const FlowTriple& input, const PipelineOptions& opt);

struct SemigroupReport {
    double d_sigma = 0;
    double measure_distance = 0;
    IdentityReport identity;
};
/// Compares flow_map(input, t + tau) with flow_map(flow_map(input, tau), t).
SemigroupReport semigroup_check(const FlowTriple& input, double t, double tau, const PipelineOptions& opt);

struct ContinuityRow {
    double d_sigma0 = 0;  // distance of the perturbed data from the base
    double gap = 0;       // sup over snapshots and nodes of |u_n - u| + |v_n - v|
};
struct ContinuityReport {
    std::vector<ContinuityRow> rows;
    double gamma = 0;  // least-squares slope of log gap against log d_sigma0
};
/// Perturbations carry their own energy measure unless `measures` supplies one per entry.
ContinuityReport continuity_probe(const FlowTriple& base, const std::vector<SigmaPair>& perturbations, double t_end,
                                  const PipelineOptions& opt, const std::vector<RadonMeasure1D>* measures = nullptr);

/**
 * Container: the 8 bytes "NOVSEMI1", a uint64 array count, then per array a
 * uint32 name length, the name, a uint64 element count and raw little-endian
 * float64 values. Monitor names of failing checks are not stored.
 */
void serialize_trajectory(const Trajectory& tr, const std::filesystem::path& path);
Trajectory restore_trajectory(const std::filesystem::path& path);

}  // namespace novsemi
