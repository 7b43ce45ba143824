#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace novsemi {

/// Uniform 1-D node set origin + i*step, i = 0..n-1.
struct Lattice {
    double origin = 0.0;
    double step = 1.0;
    std::size_t n = 0;

    [[nodiscard]] double at(std::size_t i) const { return origin + step * static_cast<double>(i); }
    [[nodiscard]] double back() const { return at(n - 1); }
};

enum class Side { left, right };

/// One linear piece of a sampled function.
struct Segment {
    double a, b;    // endpoints, a <= b
    double fa, fb;  // one-sided values at the endpoints
};

/**
 * Piecewise model of nodal samples that respects known break points
 * (positions where the sampled function or its derivative jumps).
 *
 * Away from breaks the model is the usual linear (or cubic Hermite)
 * interpolant. In a cell that contains a break, each side of the break is
 * represented by extending the model of the neighbouring clean cell on that
 * side, so no interpolant ever straddles a break. A break sitting exactly on
 * a node makes that node's own sample unused.
 */
class BrokenLattice {
public:
    BrokenLattice() = default;
    BrokenLattice(Lattice lat, std::vector<double> breaks);

    [[nodiscard]] const Lattice& lattice() const { return lat_; }
    [[nodiscard]] const std::vector<double>& breaks() const { return breaks_; }

    /// Cell holding x; a point on a node belongs to the cell on `side`.
    [[nodiscard]] std::size_t cell_of(double x, Side side) const;
    /// Cell whose interpolant represents the data at x approached from `side`.
    [[nodiscard]] std::size_t source_cell(double x, Side side) const;

    [[nodiscard]] double linear(std::span<const double> f, double x, Side side = Side::right) const;
    /// Cubic Hermite model; df holds derivatives with respect to the lattice coordinate.
    [[nodiscard]] double hermite(std::span<const double> f, std::span<const double> df, double x,
                                 Side side = Side::right) const;

    /// Linear pieces covering [origin, back()] in increasing order.
    [[nodiscard]] std::vector<Segment> segments(std::span<const double> f) const;
    /// Pieces of a single cell (one, or two when a break sits inside).
    void cell_segments(std::span<const double> f, std::size_t c, std::vector<Segment>& out) const;
    /// True if cell c needs the piecewise treatment.
    [[nodiscard]] bool is_break_cell(std::size_t c) const { return kind_[c] != Kind::none; }
    [[nodiscard]] const std::vector<std::size_t>& break_cells() const { return break_cells_; }

    /// Integral of the linear model (trapezoid away from breaks).
    [[nodiscard]] double integrate(std::span<const double> f) const;

private:
    enum class Kind : unsigned char { none, interior, left_node, right_node, both_nodes };

    Lattice lat_{};
    std::vector<double> breaks_;
    std::vector<Kind> kind_;
    std::vector<double> where_;  // break position for interior cells
    std::vector<std::size_t> break_cells_;

    [[nodiscard]] std::size_t clamp_cell(std::ptrdiff_t c) const;
};

/// Composite trapezoid on a uniform lattice.
double trapezoid(std::span<const double> f, double h);

}  // namespace novsemi
