#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "novsemi/lagrangian_transform.hpp"
#include "novsemi/nonlocal_kernel.hpp"
#include "novsemi/sigma_space.hpp"

namespace novsemi {

/// Physical solution on the x-grid. Masked derivatives are undefined and stored as 0.
struct EulerianField {
    SpatialGrid grid;
    double t = 0;
    std::vector<double> u, v, ux, vx;
    std::vector<unsigned char> mask_u, mask_v;
    std::vector<double> kinks;  // images of the kink labels

    [[nodiscard]] bool masks_empty() const;
    /// The field as data for the Eulerian oracle (masked derivatives read as 0).
    [[nodiscard]] SigmaPair pair() const;
};

/**
 * Inverse of the characteristic map y(t, .) on a state.
 *
 * y is modelled by piecewise cubic Hermite interpolation in xi using the exact
 * slopes q cos^2(W/2) cos^2(Z/2) (limited to keep the model monotone), broken
 * at kink labels. A point is assigned the leftmost label that maps onto it.
 * Tiny decreases of y (within the monotonicity slack) are removed by taking
 * the running maximum.
 */
class LabelInverse {
public:
    explicit LabelInverse(const LagrangianState& s);

    /// Label with y(label) = x, or NaN when x lies outside the image of y.
    [[nodiscard]] double locate(double x) const;
    [[nodiscard]] double y_at(double xi) const;
    [[nodiscard]] double U_at(double xi) const;
    [[nodiscard]] double V_at(double xi) const;
    [[nodiscard]] double W_at(double xi) const;
    [[nodiscard]] double Z_at(double xi) const;
    /// The monotone envelope of y at the labels.
    [[nodiscard]] const std::vector<double>& y() const { return y_; }

private:
    const LagrangianState* s_;
    BrokenLattice bl_;
    std::vector<double> y_, dy_, dU_, dV_;
};

/// Threshold on cos^2(W/2) (resp. Z) below which a derivative is undefined.
inline constexpr double kMaskThreshold = 1e-8;
/// Threshold on the cell average of cos^2(W/2) cos^2(Z/2) below which a label cell is an atom.
inline constexpr double kAtomThreshold = 1e-8;

EulerianField reconstruct_uv(const LagrangianState& s, const SpatialGrid& grid);
void reconstruct_derivatives(const LagrangianState& s, EulerianField& f, double mask_eps = kMaskThreshold);
EulerianField reconstruct(const LagrangianState& s, const SpatialGrid& grid, double mask_eps = kMaskThreshold);

/// u and v at arbitrary points (vacuum outside the image of y).
void reconstruct_at(const LagrangianState& s, std::span<const double> xs, std::vector<double>& u,
                    std::vector<double>& v);

struct MeasureTriple {
    RadonMeasure1D lam_u, lam_v, lam_uv;

    [[nodiscard]] RadonMeasure1D sum() const;
};

enum class Channel { u, v, uv, mu };
const char* channel_name(Channel c);

/**
 * Label cells with image length above the atom threshold deposit their three
 * masses uniformly over their image into the node control volumes (so the
 * x-trapezoid of the density returns the mass exactly); the others become
 * atoms at the image midpoint. Kink images off the nodes become density breaks,
 * and the nodes within two cells of them carry one-sided point densities,
 * scaled so that each channel keeps its deposited mass.
 */
MeasureTriple extract_measures(const LagrangianState& s, const SpatialGrid& grid, double eps_atom = kAtomThreshold);
RadonMeasure1D mu_t(const LagrangianState& s, const SpatialGrid& grid, double eps_atom = kAtomThreshold);

/// The conservation balances of a conservative solution, evaluated on one state.
struct Balances {
    double t = 0;
    double u2 = 0, v2 = 0;                   // int u^2 dx, int v^2 dx
    double lam_u = 0, lam_v = 0, lam_uv = 0;  // total masses
    double lam_uv_ac = 0;
    double E_u = 0, E_v = 0, G = 0, H = 0;   // left-hand sides of the balances
    double csho_margin = 0;                  // left side minus right side of the inequality
    double u2_grid = 0, v2_grid = 0;         // int u^2 dx by x-trapezoid of the reconstruction
};

/**
 * Field integrals are pushed forward to labels (int f(u, ...) dx = int f(U, ...) y_xi dxi),
 * measure masses come from the triple.
 */
Balances balances(const LagrangianState& s, const MeasureTriple& m, const ConservedSet& cs,
                  const EulerianField* field = nullptr);

/// Largest |U| and |V| mismatch across flat stretches of y (flat to within slack * dxi).
double plateau_consistency(const LagrangianState& s, double slack = 1e-12);

/// Atoms of one channel whose position sees |other field| <= sqrt(tol).
struct SingularSupport {
    std::size_t atoms = 0, on_zero_set = 0;
};
SingularSupport singular_support(const EulerianField& f, const RadonMeasure1D& lam, Channel c, double tol = 1e-6);

// ---- weak-form checks ---------------------------------------------------------------

/// cos^2 bump of half-width r around c.
struct Bump {
    double center = 0, radius = 1;
    [[nodiscard]] double operator()(double s) const;
    [[nodiscard]] double d(double s) const;
};

/// Sum of separable bumps phi(t, x) = sum_k w_k b_k(t) c_k(x).
struct TestFunction {
    struct Term {
        Bump bt, bx;
        double weight = 1;
    };
    std::vector<Term> terms;

    [[nodiscard]] double phi(double t, double x) const;
    [[nodiscard]] double phi_t(double t, double x) const;
    [[nodiscard]] double phi_x(double t, double x) const;
    TestFunction operator+(const TestFunction& o) const;
};

/// Six bumps tiling the interior of [t0, t1] x [x_lo, x_hi].
std::vector<TestFunction> default_test_bank(double t0, double t1, double x_lo, double x_hi);

/// One stored time level with everything the residuals need.
struct EulerianSnapshot {
    EulerianField field;
    MeasureTriple measures;
};
EulerianSnapshot make_snapshot(const LagrangianState& s, const SpatialGrid& grid);

struct WeakResidual {
    double r_u = 0, r_v = 0;
};
/// Space-time trapezoid of the weak identities; snapshots must share one grid.
std::vector<WeakResidual> weak_residual(const std::vector<EulerianSnapshot>& snaps,
                                        const std::vector<TestFunction>& bank);
std::vector<double> transport_residual(const std::vector<EulerianSnapshot>& snaps, Channel which,
                                       const std::vector<TestFunction>& bank);

struct HolderReport {
    double lipschitz_u = 0, lipschitz_v = 0;  // max ||u(t1)-u(t2)||_L2 / |t1-t2|
    double holder_u = 0, holder_v = 0;        // max |u(t1,x1)-u(t2,x2)| / (|dt|^1/2 + |dx|^1/2)
};
HolderReport holder_check(const std::vector<EulerianSnapshot>& snaps, std::size_t pairs = 20000,
                          std::uint64_t seed = 7);

void write_snapshot_csv(const EulerianField& f, const std::filesystem::path& path);
void write_measures_csv(const MeasureTriple& m, const std::filesystem::path& path);

}  // namespace novsemi
