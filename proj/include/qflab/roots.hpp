#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "qflab/linalg.hpp"

namespace qflab {

// Brent's method on a sign-changing bracket [lo, hi].  Inverse quadratic /
// secant steps with bisection fallback; converges for any continuous f.
template <typename F>
double brent_root(F&& f, double lo, double hi, double xtol = 1e-15,
                  int max_iter = 200) {
    double a = lo, b = hi;
    double fa = f(a), fb = f(b);
    if (fa == 0.0)
        return a;
    if (fb == 0.0)
        return b;
    if (fa * fb > 0.0)
        throw numeric_error("brent_root: endpoints do not bracket a root");
    double c = a, fc = fa;
    double d = b - a, e = d;
    for (int iter = 0; iter < max_iter; ++iter) {
        if (std::fabs(fc) < std::fabs(fb)) {
            a = b; b = c; c = a;
            fa = fb; fb = fc; fc = fa;
        }
        const double tol = 2.0 * std::numeric_limits<double>::epsilon() *
                               std::fabs(b) + 0.5 * xtol;
        const double m = 0.5 * (c - b);
        if (std::fabs(m) <= tol || fb == 0.0)
            return b;
        if (std::fabs(e) < tol || std::fabs(fa) <= std::fabs(fb)) {
            d = m; e = m;
        } else {
            double p, q;
            const double s = fb / fa;
            if (a == c) {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                const double qq = fa / fc, r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0)
                q = -q;
            p = std::fabs(p);
            if (2.0 * p < std::min(3.0 * m * q - std::fabs(tol * q),
                                   std::fabs(e * q))) {
                e = d; d = p / q;
            } else {
                d = m; e = m;
            }
        }
        a = b; fa = fb;
        b += (std::fabs(d) > tol) ? d : (m > 0.0 ? tol : -tol);
        fb = f(b);
        if ((fb > 0.0) == (fc > 0.0)) {
            c = a; fc = fa;
            d = b - a; e = d;
        }
    }
    return b;
}

// Expand a bracket for a function that is negative left of its root and
// positive right of it (increasing through zero), starting from x0 > 0 and
// doubling/halving.  Used by the radius solvers where h(rho) = u(rho) - r.
template <typename F>
void bracket_increasing(F&& f, double x0, double& lo, double& hi,
                        int max_doublings = 500) {
    lo = hi = x0;
    int it = 0;
    while (f(lo) > 0.0) {
        lo *= 0.5;
        if (++it > max_doublings)
            throw numeric_error("bracket_increasing: no lower bracket");
    }
    while (f(hi) < 0.0) {
        hi *= 2.0;
        if (++it > max_doublings)
            throw numeric_error("bracket_increasing: no upper bracket");
    }
}

// All roots of f on a sampled grid: refine every sign change with Brent.
// Sign changes whose function gap exceeds max_jump are treated as wrap
// discontinuities (angle differences jump by ~2*pi) and skipped.
template <typename F>
std::vector<double> scan_roots(F&& f, const std::vector<double>& grid,
                               double max_jump =
                                   std::numeric_limits<double>::infinity()) {
    std::vector<double> roots;
    if (grid.size() < 2)
        return roots;
    double prev = f(grid[0]);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double cur = f(grid[i]);
        if (prev == 0.0) {
            roots.push_back(grid[i - 1]);
        } else if (prev * cur < 0.0 && std::fabs(prev - cur) < max_jump) {
            roots.push_back(brent_root(f, grid[i - 1], grid[i]));
        }
        prev = cur;
    }
    if (prev == 0.0)
        roots.push_back(grid.back());
    return roots;
}

} // namespace qflab
