#pragma once

#include <vector>

#include "novsemi/lattice.hpp"
#include "novsemi/sigma_space.hpp"

namespace novsemi {

/// Tolerated decrease of y between neighbouring labels, relative to the label step.
inline constexpr double kMonotoneSlack = 1e-2;
/// The same on cells holding a kink label, where the two nodes converge onto the kink.
inline constexpr double kKinkCellSlack = 0.5;

/// Uniform label grid xi_j = offset + (j - zero_index) * dxi with |offset| <= dxi / 2.
struct XiGrid {
    double dxi = 1.0;
    std::size_t n_points = 1;
    std::size_t zero_index = 0;
    double offset = 0.0;

    /// Grid with `below` nodes left of `offset` and `above` nodes right of it.
    static XiGrid make(double dxi, std::size_t below, std::size_t above, double offset = 0.0);

    [[nodiscard]] Lattice lattice() const { return {xi_min(), dxi, n_points}; }
    [[nodiscard]] double xi(std::size_t j) const { return lattice().at(j); }
    [[nodiscard]] double xi_min() const { return offset - static_cast<double>(zero_index) * dxi; }
    [[nodiscard]] double xi_max() const { return xi(n_points - 1); }
    bool operator==(const XiGrid&) const = default;
};

/**
 * Five-field state plus characteristic positions at one time.
 * `kinks` holds the labels across which W or Z jump (images of data kinks).
 */
struct LagrangianState {
    XiGrid xi;
    double t = 0.0;
    std::vector<double> U, V, W, Z, q, y;
    std::vector<double> kinks;

    [[nodiscard]] std::size_t size() const { return xi.n_points; }
    [[nodiscard]] BrokenLattice broken() const { return {xi.lattice(), kinks}; }
    /// Throws StateInvalidError on size mismatch, non-finite values, q <= 0 or decreasing y.
    void validate() const;
    /// Index of the first cell where y decreases beyond the slack, or size() if none.
    [[nodiscard]] std::size_t first_fold() const;
};

/// An atom of mu0 and the label interval it occupies.
struct AtomPlateau {
    double position = 0;
    double mass = 0;
    double xi_lo = 0, xi_hi = 0;
    double share_w = 0.5, share_z = 0.5;  // split of the mass between the W and Z channels
};

/**
 * The map xi <-> y0 defined by xi = y + mu0([0, y]) (and its mirror for y < 0).
 *
 * The absolutely continuous part of mu0 is integrated exactly under its
 * broken-linear model, so the inversion solves a quadratic per piece. Atoms
 * produce jumps of the forward map, i.e. plateaus of y0.
 */
class LabelMap {
public:
    LabelMap(const RadonMeasure1D& mu0, const SigmaPair* p = nullptr);

    /// Generalized inverse; throws LabelDomainError outside the covered range.
    [[nodiscard]] double y0(double xi) const;
    /// Label of a spatial point approached from `side` (jumps at atoms).
    [[nodiscard]] double xi_of(double x, Side side = Side::right) const;
    [[nodiscard]] double xi_lo() const { return lo_; }
    [[nodiscard]] double xi_hi() const { return hi_; }
    [[nodiscard]] const std::vector<AtomPlateau>& plateaus() const { return plateaus_; }
    /// Index into plateaus() of the atom whose plateau holds xi, or -1.
    [[nodiscard]] int plateau_of(double xi) const;
    /// Labels of the kinks of the data (empty when built without a pair).
    [[nodiscard]] const std::vector<double>& kink_labels() const { return kink_labels_; }

private:
    struct Piece {
        double x0, x1;  // spatial extent
        double g0;      // forward map value at x0 (right limit)
        double fa, fb;  // density at the ends
        [[nodiscard]] double g1() const { return g0 + (x1 - x0) * (1.0 + 0.5 * (fa + fb)); }
    };
    std::vector<Piece> pieces_;
    std::vector<AtomPlateau> plateaus_;
    std::vector<double> kink_labels_;
    double origin_ = 0.0;  // forward map at 0 from the left
    double lo_ = 0.0, hi_ = 0.0;
};

/**
 * Label grid covering the range of the label map, rounded inward to whole
 * steps. When the data has kinks, the step is adjusted so that a whole number
 * of cells separates the outermost kink labels, and the grid is offset so that
 * both sit at cell midpoints.
 */
XiGrid make_label_grid(const LabelMap& map, std::size_t n_target, bool align_kinks = true);

std::vector<double> build_y0_from_density(const SigmaPair& p, const XiGrid& xi);
std::vector<double> build_y0_from_measure(const SigmaPair& p, const RadonMeasure1D& mu0, const XiGrid& xi);

/**
 * Samples U0, V0 (cubic Hermite on the stored derivatives), W0, Z0 (arctan of the
 * linearly sampled derivatives), q0 = 1, y = y0. With a map, atom plateaus get
 * W0 = Z0 = +-pi and kink labels are copied; without one, plateaus are detected
 * from repeated y0 values.
 */
LagrangianState initialize_state(const SigmaPair& p, const std::vector<double>& y0, const XiGrid& xi,
                                 const LabelMap* map = nullptr);

/// Everything the flow map needs at t = 0.
struct LabelSetup {
    LabelMap map;
    XiGrid xi;
    LagrangianState state;
};
LabelSetup setup_labels(const SigmaPair& p, const RadonMeasure1D& mu0, std::size_t n_labels,
                        bool align_kinks = true);

struct OmegaReport {
    double norm_U = 0, norm_V = 0;  // H1 norm + W^{1,4} norm, derivatives from the label identities
    double l2_W = 0, l2_Z = 0, inf_W = 0, inf_Z = 0, l4_W = 0, l4_Z = 0;
    double q_min = 0, q_max = 0;
    bool U_ok = false, V_ok = false, W_l2_ok = false, Z_l2_ok = false;
    bool W_inf_ok = false, Z_inf_ok = false, q_ok = false, l4_ok = false;
    [[nodiscard]] bool inside() const {
        return U_ok && V_ok && W_l2_ok && Z_l2_ok && W_inf_ok && Z_inf_ok && q_ok && l4_ok;
    }
};

OmegaReport check_omega_membership(const LagrangianState& s, double R1, double R2, double q_lo, double q_hi);

}  // namespace novsemi
