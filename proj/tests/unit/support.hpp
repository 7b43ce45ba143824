// Shared helpers for the unit tests.
#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "novsemi/lagrangian_transform.hpp"
#include "novsemi/nonlocal_kernel.hpp"
#include "novsemi/rng.hpp"

namespace novsemi::testing {

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                               int depth = 40) {
    struct Rec {
        const std::function<double(double)>& f;
        double run(double a, double b, double fa, double fm, double fb, double whole, double tol, int depth) const {
            const double m = 0.5 * (a + b), lm = 0.5 * (a + m), rm = 0.5 * (m + b);
            const double flm = f(lm), frm = f(rm);
            const double left = (m - a) / 6 * (fa + 4 * flm + fm), right = (b - m) / 6 * (fm + 4 * frm + fb);
            const double diff = left + right - whole;
            if (depth <= 0 || std::abs(diff) <= 15 * tol) return left + right + diff / 15;
            return run(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + run(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
        }
    };
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    return Rec{f}.run(a, b, fa, fm, fb, (b - a) / 6 * (fa + 4 * fm + fb), tol, depth);
}

/// Root of a monotone increasing f on [a, b] by bisection.
inline double bisect(const std::function<double(double)>& f, double a, double b, double target) {
    for (int k = 0; k < 200 && b - a > 1e-15 * std::max(1.0, std::abs(a)); ++k) {
        const double m = 0.5 * (a + b);
        (f(m) < target ? a : b) = m;
    }
    return 0.5 * (a + b);
}

/// State with q = 1, all fields zero and y = xi.
inline LagrangianState zero_state(std::size_t below, std::size_t above, double dxi) {
    LagrangianState s;
    s.xi = XiGrid::make(dxi, below, above);
    const std::size_t n = s.size();
    s.U.assign(n, 0.0);
    s.V.assign(n, 0.0);
    s.W.assign(n, 0.0);
    s.Z.assign(n, 0.0);
    s.q.assign(n, 1.0);
    s.y.resize(n);
    for (std::size_t j = 0; j < n; ++j) s.y[j] = s.xi.xi(j);
    return s;
}

/// y = cumulative trapezoid of q cos^2(W/2) cos^2(Z/2), zero at xi = 0.
inline void integrate_y(LagrangianState& s) {
    const Trig tr = compute_trig(s);
    const std::size_t z = s.xi.zero_index, n = s.size();
    auto a = [&](std::size_t j) { return s.q[j] * tr.cW[j] * tr.cZ[j]; };
    s.y[z] = 0.0;
    for (std::size_t j = z; j + 1 < n; ++j) s.y[j + 1] = s.y[j] + 0.5 * s.xi.dxi * (a(j) + a(j + 1));
    for (std::size_t j = z; j-- > 0;) s.y[j] = s.y[j + 1] - 0.5 * s.xi.dxi * (a(j) + a(j + 1));
}

/// Smooth random state inside the angle range (-pi, pi), q in [0.5, 2].
inline LagrangianState random_state(SplitMix64& rng, std::size_t half, double dxi) {
    LagrangianState s = zero_state(half, half, dxi);
    double amp[5], freq[5], phase[5];
    for (int f = 0; f < 5; ++f) {
        amp[f] = rng.uniform(0.2, 1.0);
        freq[f] = rng.uniform(0.2, 1.5);
        phase[f] = rng.uniform(0, 2 * std::numbers::pi);
    }
    for (std::size_t j = 0; j < s.size(); ++j) {
        const double x = s.xi.xi(j);
        const double env = std::exp(-0.1 * x * x);
        s.U[j] = env * amp[0] * std::sin(freq[0] * x + phase[0]);
        s.V[j] = env * amp[1] * std::cos(freq[1] * x + phase[1]);
        s.W[j] = 0.9 * std::numbers::pi * env * amp[2] * std::sin(freq[2] * x + phase[2]);
        s.Z[j] = 0.9 * std::numbers::pi * env * amp[3] * std::cos(freq[3] * x + phase[3]);
        s.q[j] = 1.25 + 0.75 * std::sin(freq[4] * x + phase[4]);
    }
    integrate_y(s);
    return s;
}

}  // namespace novsemi::testing
