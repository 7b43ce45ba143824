#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "novsemi/lagrangian_transform.hpp"
#include "novsemi/sigma_space.hpp"

namespace novsemi {

/// Half-angle quantities of W and Z at every label.
struct Trig {
    std::vector<double> cW, sW, sinW;  // cos^2(W/2), sin^2(W/2), sin W
    std::vector<double> cZ, sZ, sinZ;
};
Trig compute_trig(const LagrangianState& s);

struct KernelDensities {
    std::vector<double> p1, s1, p2, s2;
    std::vector<double> A;  // int_0^xi q cos^2(W/2) cos^2(Z/2)
};

/// The eight nonlocal terms, on labels or on spatial points.
struct NonlocalTerms {
    std::vector<double> P1, dxP1, P2, dxP2, S1, dxS1, S2, dxS2;

    static constexpr std::array<const char*, 8> names{"P1", "dxP1", "P2", "dxP2", "S1", "dxS1", "S2", "dxS2"};
    [[nodiscard]] std::array<const std::vector<double>*, 8> arrays() const {
        return {&P1, &dxP1, &P2, &dxP2, &S1, &dxS1, &S2, &dxS2};
    }
    [[nodiscard]] std::array<std::vector<double>*, 8> arrays() {
        return {&P1, &dxP1, &P2, &dxP2, &S1, &dxS1, &S2, &dxS2};
    }
    void resize(std::size_t n);
};

struct KernelOptions {
    /// Integrate each cell exactly against the exponential instead of freezing it at the ends.
    bool exact_cells = false;
};

std::vector<double> cumulative_transport_density(const LagrangianState& s);
KernelDensities kernel_densities(const LagrangianState& s, const Trig& tr);
double kernel_value(const std::vector<double>& A, std::size_t i, std::size_t j);

/// O(N) evaluation by left/right exponential scans.
NonlocalTerms evaluate_nonlocal_terms(const LagrangianState& s, const KernelOptions& opt = {});
NonlocalTerms evaluate_nonlocal_terms(const LagrangianState& s, const Trig& tr, const KernelOptions& opt = {});
/// Same quadrature as a direct double loop; O(N^2), for cross-checks.
NonlocalTerms evaluate_nonlocal_terms_direct(const LagrangianState& s);

/**
 * Green's-function quadrature of the Eulerian definitions,
 * P1(x) = 1/2 int e^{-|x-z|} (u^2 v + u u_x v_x + v u_x^2 / 2)(z) dz and the
 * seven analogues, with the signed kernel for the x-derivatives. O(N) per
 * target point; cells holding a kink of the data or the target are split.
 */
NonlocalTerms eulerian_oracle_at(const SigmaPair& p, std::span<const double> xs);
NonlocalTerms eulerian_oracle_terms(const SigmaPair& p);

/**
 * d/dxi of the eight label-space terms. With A' = q cos^2(W/2) cos^2(Z/2):
 * d(value)/dxi = A' * derivative-term and d(derivative-term)/dxi = -2c d + A' * value-term,
 * where c is the prefactor (1/2 or 1/8) and d the density.
 */
NonlocalTerms derivative_in_label(const LagrangianState& s, const NonlocalTerms& terms);

struct KernelBoundReport {
    double R2 = 0, q_minus = 0;
    std::size_t pairs = 0;
    double max_violation = 0;  // max of log E - log Gamma; must stay <= 1e-12
    double gamma_l1 = 0;       // (8/q^-) exp(q^- R2^2 / 4)
    [[nodiscard]] bool ok() const { return max_violation <= 1e-12; }
};

/// Samples `pairs` random index pairs and compares the kernel with Gamma.
KernelBoundReport kernel_bound_check(const LagrangianState& s, std::size_t pairs, std::uint64_t seed,
                                     const std::vector<double>* A = nullptr);

/// Uniform bounds on the eight terms in terms of the conserved quantities.
struct TermBoundReport {
    std::array<double, 8> max_abs{};
    std::array<double, 8> bound{};
    bool ok = true;
    std::string worst;
};
TermBoundReport check_term_bounds(const NonlocalTerms& t, const ConservedSet& cs, double slack = 0.05);

/// Estimate of the error made by truncating the label line to the grid.
double truncation_estimate(const LagrangianState& s, const KernelDensities& d, double R2);

/// max(||W||_{L2}, ||Z||_{L2}) by trapezoid.
double wz_l2_radius(const LagrangianState& s);

}  // namespace novsemi
