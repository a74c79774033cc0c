#pragma once

#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include "qflab/linalg.hpp"

namespace qflab {

// Grids and tolerances shared by the verification sweeps and solvers.
struct NumericPolicy {
    std::vector<double> u_grid;
    std::vector<double> t_grid;
    double atol = 1e-12;
    double rtol = 1e-10;
    int max_newton_iters = 100;
    int bracket_subdivisions = 64;

    // Identity checks (decomposability, quasi-simplicity, SO2) accept
    // residuals up to this bound; catalog formulas mix exp/log/powers over a
    // moderate dynamic range and settle around 1e-12..1e-10.
    double identity_tol = 1e-9;

    // Half-width of the band around t = k*pi inside which removable-
    // singularity boundary values are substituted and ellipticity equality
    // is allowed.
    double guard_band = 1e-6;

    bool close(double a, double b) const { return qflab::close(a, b, atol, rtol); }
};

inline std::vector<double> log_spaced(double lo, double hi, int n) {
    std::vector<double> g(n);
    const double llo = std::log(lo), lhi = std::log(hi);
    for (int i = 0; i < n; ++i)
        g[i] = std::exp(llo + (lhi - llo) * i / double(n - 1));
    return g;
}

inline std::vector<double> uniform_angles(int n) {
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i)
        g[i] = tau * i / double(n);
    return g;
}

// Default: 33 log-spaced radii in [1/8, 8] (symmetric about 1) and 256
// uniform angles in [0, 2*pi), which include 0 and pi exactly enough for the
// kernel rays once directions are snapped.
inline NumericPolicy default_policy() {
    NumericPolicy p;
    p.u_grid = log_spaced(0.125, 8.0, 33);
    p.t_grid = uniform_angles(256);
    return p;
}

// Reduced grid for families whose evaluation needs a nested or multistart
// solve per point; keeps classification sweeps well under the time budget.
inline NumericPolicy coarse_policy(int n_u, int n_t, double u_lo = 0.125,
                                   double u_hi = 8.0) {
    NumericPolicy p;
    p.u_grid = log_spaced(u_lo, u_hi, n_u);
    p.t_grid = uniform_angles(n_t);
    return p;
}

// QFLAB_TOL overrides rtol when set to a positive value.
inline void apply_env_tolerance(NumericPolicy& p) {
    if (const char* v = std::getenv("QFLAB_TOL")) {
        char* end = nullptr;
        const double x = std::strtod(v, &end);
        if (end != v && x > 0.0)
            p.rtol = x;
    }
}

} // namespace qflab
