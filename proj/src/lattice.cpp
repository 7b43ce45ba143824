#include "novsemi/lattice.hpp"

#include <algorithm>
#include <cmath>

namespace novsemi {

namespace {
constexpr double node_snap = 1e-9;  // relative to the step
}

BrokenLattice::BrokenLattice(Lattice lat, std::vector<double> breaks)
    : lat_(lat), breaks_(std::move(breaks)), kind_(lat.n > 1 ? lat.n - 1 : 0, Kind::none),
      where_(kind_.size(), 0.0) {
    std::sort(breaks_.begin(), breaks_.end());
    const double h = lat_.step;
    for (double b : breaks_) {
        const double t = (b - lat_.origin) / h;
        const double r = std::round(t);
        if (t <= 0.0 || t >= static_cast<double>(lat_.n - 1)) continue;
        if (std::abs(t - r) <= node_snap) {
            const auto k = static_cast<std::size_t>(r);
            if (k == 0 || k + 1 >= lat_.n) continue;
            auto mark = [&](std::size_t c, Kind k_new) {
                Kind& kd = kind_[c];
                if (kd == Kind::none) kd = k_new;
                else if (kd != k_new) kd = Kind::both_nodes;
            };
            mark(k - 1, Kind::right_node);
            mark(k, Kind::left_node);
        } else {
            const auto c = static_cast<std::size_t>(std::floor(t));
            if (kind_[c] == Kind::none) {
                kind_[c] = Kind::interior;
                where_[c] = b;
            }
        }
    }
    for (std::size_t c = 0; c < kind_.size(); ++c)
        if (kind_[c] != Kind::none) break_cells_.push_back(c);
}

std::size_t BrokenLattice::clamp_cell(std::ptrdiff_t c) const {
    const auto last = static_cast<std::ptrdiff_t>(lat_.n) - 2;
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(c, 0, std::max<std::ptrdiff_t>(last, 0)));
}

std::size_t BrokenLattice::cell_of(double x, Side side) const {
    const double t = (x - lat_.origin) / lat_.step;
    auto c = static_cast<std::ptrdiff_t>(std::floor(t));
    if (side == Side::left && t == std::floor(t)) c -= 1;
    return clamp_cell(c);
}

std::size_t BrokenLattice::source_cell(double x, Side side) const {
    const std::size_t c = cell_of(x, side);
    const auto ci = static_cast<std::ptrdiff_t>(c);
    switch (kind_.empty() ? Kind::none : kind_[c]) {
        case Kind::none:
        case Kind::both_nodes:
            return c;
        case Kind::left_node:
            return clamp_cell(ci + 1);
        case Kind::right_node:
            return clamp_cell(ci - 1);
        case Kind::interior: {
            const double b = where_[c];
            const bool left_of = x < b || (x == b && side == Side::left);
            return clamp_cell(left_of ? ci - 1 : ci + 1);
        }
    }
    return c;
}

double BrokenLattice::linear(std::span<const double> f, double x, Side side) const {
    if (lat_.n == 1) return f[0];
    const std::size_t s = source_cell(x, side);
    const double t = (x - lat_.at(s)) / lat_.step;
    return f[s] + (f[s + 1] - f[s]) * t;
}

double BrokenLattice::hermite(std::span<const double> f, std::span<const double> df, double x,
                              Side side) const {
    if (lat_.n == 1) return f[0];
    const std::size_t s = source_cell(x, side);
    const double h = lat_.step;
    const double t = (x - lat_.at(s)) / h;
    const double t2 = t * t, t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1;
    const double h10 = t3 - 2 * t2 + t;
    const double h01 = -2 * t3 + 3 * t2;
    const double h11 = t3 - t2;
    return h00 * f[s] + h10 * h * df[s] + h01 * f[s + 1] + h11 * h * df[s + 1];
}

void BrokenLattice::cell_segments(std::span<const double> f, std::size_t c,
                                  std::vector<Segment>& out) const {
    const double a = lat_.at(c), b = lat_.at(c + 1);
    switch (kind_[c]) {
        case Kind::none:
        case Kind::both_nodes:
            out.push_back({a, b, f[c], f[c + 1]});
            return;
        case Kind::left_node:
            out.push_back({a, b, linear(f, a, Side::right), f[c + 1]});
            return;
        case Kind::right_node:
            out.push_back({a, b, f[c], linear(f, b, Side::left)});
            return;
        case Kind::interior: {
            const double m = where_[c];
            out.push_back({a, m, f[c], linear(f, m, Side::left)});
            out.push_back({m, b, linear(f, m, Side::right), f[c + 1]});
            return;
        }
    }
}

std::vector<Segment> BrokenLattice::segments(std::span<const double> f) const {
    std::vector<Segment> out;
    out.reserve(kind_.size() + break_cells_.size());
    for (std::size_t c = 0; c < kind_.size(); ++c) cell_segments(f, c, out);
    return out;
}

double BrokenLattice::integrate(std::span<const double> f) const {
    double sum = trapezoid(f, lat_.step);
    std::vector<Segment> segs;
    for (std::size_t c : break_cells_) {
        segs.clear();
        cell_segments(f, c, segs);
        sum -= 0.5 * lat_.step * (f[c] + f[c + 1]);
        for (const auto& s : segs) sum += 0.5 * (s.b - s.a) * (s.fa + s.fb);
    }
    return sum;
}

double trapezoid(std::span<const double> f, double h) {
    if (f.size() < 2) return 0.0;
    double s = 0.5 * (f.front() + f.back());
    for (std::size_t i = 1; i + 1 < f.size(); ++i) s += f[i];
    return s * h;
}

}  // namespace novsemi
