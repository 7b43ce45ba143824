#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include "novsemi/lattice.hpp"

namespace novsemi {

/// Uniform grid on [x_min, x_max].
struct SpatialGrid {
    double x_min = -1.0;
    double x_max = 1.0;
    std::size_t n_points = 3;

    /// Validating factory: n_points >= 3 and x_min < x_max.
    static SpatialGrid make(double x_min, double x_max, std::size_t n_points);

    [[nodiscard]] double h() const { return (x_max - x_min) / static_cast<double>(n_points - 1); }
    [[nodiscard]] double x(std::size_t i) const { return x_min + h() * static_cast<double>(i); }
    [[nodiscard]] Lattice lattice() const { return {x_min, h(), n_points}; }
    bool operator==(const SpatialGrid&) const = default;
};

/**
 * Sampled initial data (u0, v0) with stored derivatives.
 *
 * `kinks` lists positions where du0 or dv0 jump (peaks). Quadrature and
 * interpolation never straddle them. At a kink that sits on a node the stored
 * derivative is the mean of the one-sided limits.
 */
struct SigmaPair {
    SpatialGrid grid;
    std::vector<double> u0, v0, du0, dv0, duv0;
    std::vector<double> kinks;
    bool derivatives_estimated = false;  // true when built from central differences

    /// Throws ValidationError on size mismatch, non-finite entries or duv0 != du0*dv0.
    void validate() const;
    [[nodiscard]] BrokenLattice broken() const { return {grid.lattice(), kinks}; }
};

struct ConservedSet {
    double E_u = 0, E_v = 0, G = 0, H = 0, K_u = 0, K_v = 0;

    /// 7 E_u E_v - H, the radicand shared by K_u and K_v (clamped at 0).
    [[nodiscard]] double excess() const;
    /// E_u + E_v + 7 E_u E_v - H, the bound on the total energy measure.
    [[nodiscard]] double mu_bound() const { return E_u + E_v + excess(); }
};

struct Atom {
    double position = 0;
    double mass = 0;
};

/// Positive measure: nodal density of the absolutely continuous part plus atoms.
struct RadonMeasure1D {
    SpatialGrid grid;
    std::vector<double> ac_density;
    std::vector<Atom> atoms;
    std::vector<double> breaks;  // positions where ac_density jumps

    static RadonMeasure1D zero(const SpatialGrid& g);
    void validate() const;
    [[nodiscard]] double ac_mass() const;
    [[nodiscard]] double atom_mass() const;
    [[nodiscard]] double total_mass() const { return ac_mass() + atom_mass(); }
    /// mu((-inf, x]) at every node, the ac part by the broken-linear model.
    [[nodiscard]] std::vector<double> cumulative() const;
};

struct Peak {
    double amplitude;
    double position;
};

double metric_distance(const SigmaPair& a, const SigmaPair& b);

/// Builds the set from the four integrals, clamping a slightly negative radicand.
ConservedSet conserved_from_integrals(double E_u, double E_v, double G, double H);
ConservedSet conserved_quantities(const SigmaPair& p);

SigmaPair make_zero_pair(const SpatialGrid& g);
SigmaPair make_peakon_pair(const SpatialGrid& g, const std::vector<Peak>& u_peaks,
                           const std::vector<Peak>& v_peaks);
using ScalarFn = std::function<double(double)>;
SigmaPair make_pair(const SpatialGrid& g, const ScalarFn& u, const ScalarFn& du, const ScalarFn& v,
                    const ScalarFn& dv, std::vector<double> kinks = {});
/// Derivatives by central differences (one-sided at the ends).
SigmaPair make_pair_from_samples(const SpatialGrid& g, std::vector<double> u, std::vector<double> v);

/// Energy measure with density du0^2 + dv0^2 + du0^2 dv0^2 and no atoms.
RadonMeasure1D ac_energy_measure(const SigmaPair& p);

/// max(|u0|,|v0|) at the two boundary nodes divided by the overall max (0 for zero data).
double boundary_ratio(const SigmaPair& p);

SigmaPair load_pair(const std::filesystem::path& path);
void store_pair(const SigmaPair& p, const std::filesystem::path& path);

}  // namespace novsemi
