#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "qflab/linalg.hpp"

namespace qflab {

// One compact factor of a loop section at a fixed radius u, normalized so
// a_u(t) = a(u,t)/a(u,0) and b_u(t) = b(u,t).
struct CompactLoopProfile {
    std::function<double(double)> a_u;
    std::function<double(double)> b_u;
    double u_tag = 1.0;
    std::string note;
};

struct RFunction {
    std::function<double(double)> R;
    std::string description;
};

namespace diff_detail {

constexpr double fd_step = tau / 4096.0;

// Second-order accurate everywhere: central in the interior, three-point
// one-sided at the endpoints of [0, 2pi].
inline double deriv(const std::function<double(double)>& f, double x,
                    double h = fd_step) {
    double v;
    if (x - h < 0.0)
        v = (-3.0 * f(x) + 4.0 * f(x + h) - f(x + 2.0 * h)) / (2.0 * h);
    else if (x + h > tau)
        v = (3.0 * f(x) - 4.0 * f(x - h) + f(x - 2.0 * h)) / (2.0 * h);
    else
        v = (f(x + h) - f(x - h)) / (2.0 * h);
    if (!std::isfinite(v))
        throw numeric_error("grid too coarse: non-finite derivative estimate");
    return v;
}

// Composite Simpson with per-panel midpoints over [x0, x1].
inline double simpson_panels(const std::function<double(double)>& g,
                             double x0, double x1, int panels) {
    const double h = (x1 - x0) / panels;
    double acc = 0.0;
    for (int i = 0; i < panels; ++i) {
        const double a = x0 + h * i, b = a + h;
        acc += (h / 6.0) * (g(a) + 4.0 * g(0.5 * (a + b)) + g(b));
    }
    return acc;
}

} // namespace diff_detail

// Validating constructor: enforces the endpoint invariants a_u(0) =
// a_u(2pi) = 1 and b_u(0) = b_u(2pi) = 0.
inline CompactLoopProfile
make_profile(std::function<double(double)> a_u,
             std::function<double(double)> b_u, double u_tag = 1.0,
             double endpoint_tol = 1e-9) {
    if (!a_u)
        throw domain_error("profile requires a_u");
    if (!b_u)
        b_u = [](double) { return 0.0; };
    const double a0 = a_u(0.0), a1 = a_u(tau);
    const double b0 = b_u(0.0), b1 = b_u(tau);
    if (std::fabs(a0 - 1.0) > endpoint_tol || std::fabs(a1 - 1.0) > endpoint_tol)
        throw domain_error("profile invariant violated: a_u(0) and a_u(2pi) "
                           "must equal 1 (got " + std::to_string(a0) + ", " +
                           std::to_string(a1) + ")");
    if (std::fabs(b0) > endpoint_tol || std::fabs(b1) > endpoint_tol)
        throw domain_error("profile invariant violated: b_u(0) and b_u(2pi) "
                           "must vanish");
    return {std::move(a_u), std::move(b_u), u_tag, ""};
}

struct MarginPoint {
    double t = 0.0;
    double lhs = 0.0;
    double margin = 0.0;
};

struct C1Report {
    bool ok = false;
    bool boundary = false; // some margin within +-1e-9 of zero
    double min_margin = 0.0;
    double endpoint_margin = 0.0;
    std::vector<MarginPoint> violations;
    std::string note;
};

// The differential inequalities on the normalized pair: with
// abar = 1/a_u and bbar = -b_u,
//   abar'^2 + bbar abar' + bbar' abar - abar^2 < 0  on [0, 2pi],
//   bbar'(0) < 1 - abar'^2(0).
inline C1Report c1_inequality_check(const CompactLoopProfile& p,
                                    int n_points = 1024) {
    if (n_points < 8)
        throw domain_error("c1_inequality_check needs at least 8 grid points");
    auto abar = [&p](double t) { return 1.0 / p.a_u(t); };
    auto bbar = [&p](double t) { return -p.b_u(t); };

    C1Report rep;
    rep.min_margin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_points; ++i) {
        const double t = tau * i / double(n_points - 1);
        const double av = abar(t);
        const double ad = diff_detail::deriv(abar, t);
        const double bv = bbar(t);
        const double bd = diff_detail::deriv(bbar, t);
        const double lhs = ad * ad + bv * ad + bd * av - av * av;
        if (!std::isfinite(lhs))
            throw numeric_error("grid too coarse: non-finite inequality value");
        const double margin = -lhs;
        rep.min_margin = std::min(rep.min_margin, margin);
        if (margin < -1e-9)
            rep.violations.push_back({t, lhs, margin});
        else if (margin <= 1e-9)
            rep.boundary = true;
    }
    const double ad0 = diff_detail::deriv(abar, 0.0);
    const double bd0 = diff_detail::deriv(bbar, 0.0);
    rep.endpoint_margin = 1.0 - ad0 * ad0 - bd0;
    if (rep.endpoint_margin < -1e-9)
        rep.violations.push_back({0.0, bd0 - (1.0 - ad0 * ad0),
                                  rep.endpoint_margin});
    else if (rep.endpoint_margin <= 1e-9)
        rep.boundary = true;
    rep.ok = rep.violations.empty() && !rep.boundary;
    return rep;
}

// a_u from a continuous R: a_u^{-1}(t) = e^t (1 - int_0^t R(s) e^{-s} ds).
// The admissibility of R's Fourier series is an assumption of the source
// construction that cannot be checked here; positivity and the periodic
// endpoint are checked instead.
inline CompactLoopProfile compact_loop_from_R(const RFunction& rf,
                                              int quadrature_n) {
    if (quadrature_n < 64)
        throw domain_error("compact_loop_from_R requires quadrature_n >= 64");
    if (!rf.R)
        throw domain_error("compact_loop_from_R requires a function R");
    const auto R = rf.R;
    auto integrand = [R](double s) { return R(s) * std::exp(-s); };

    // Positivity of 1 - J(s) along the cumulative quadrature.
    {
        const int n = quadrature_n;
        const double h = tau / n;
        double J = 0.0;
        for (int i = 0; i < n; ++i) {
            const double a = h * i, b = a + h;
            J += (h / 6.0) * (integrand(a) + 4.0 * integrand(0.5 * (a + b)) +
                              integrand(b));
            if (!(1.0 - J > 0.0))
                throw domain_error("invalid R: a_u^{-1} becomes nonpositive "
                                   "near s = " + std::to_string(b));
        }
    }

    const int n_cap = quadrature_n;
    auto a_fn = [integrand, n_cap](double t) {
        if (t <= 0.0)
            return 1.0;
        const int panels =
            std::max(1, int(std::ceil(n_cap * t / tau)));
        const double J = diff_detail::simpson_panels(integrand, 0.0, t, panels);
        return std::exp(-t) / (1.0 - J);
    };

    // Endpoint tolerance scaled by a Richardson estimate of the quadrature
    // error, amplified by the e^t factor in front of the integral.
    const double I_full =
        diff_detail::simpson_panels(integrand, 0.0, tau, quadrature_n);
    const double I_half =
        diff_detail::simpson_panels(integrand, 0.0, tau, quadrature_n / 2);
    const double quad_err = std::fabs(I_full - I_half) / 15.0;
    const double tol = std::max(1e-9, 50.0 * std::exp(tau) * quad_err);

    auto prof = make_profile(a_fn, nullptr, 1.0, tol);
    prof.note = "membership of R's Fourier series in the admissible set is "
                "an unchecked hypothesis";
    return prof;
}

struct BoundReport {
    bool ok = false;
    bool boundary = false;
    double min_margin = 0.0;
    std::vector<MarginPoint> violations;
};

// b_u(t) > -a_u(t) int_0^t (a_u^2 - a_u'^2)/a_u^4 ds on (0, 2pi).
inline BoundReport b_bound_check(const CompactLoopProfile& p,
                                 int quadrature_n = 512) {
    if (quadrature_n < 16)
        throw domain_error("b_bound_check requires quadrature_n >= 16");
    auto g = [&p](double s) {
        const double a = p.a_u(s);
        const double ad = diff_detail::deriv(p.a_u, s);
        const double v = (a * a - ad * ad) / (a * a * a * a);
        if (!std::isfinite(v))
            throw numeric_error("grid too coarse: non-finite integrand");
        return v;
    };
    BoundReport rep;
    rep.min_margin = std::numeric_limits<double>::infinity();
    const double h = tau / quadrature_n;
    double I = 0.0;
    for (int k = 1; k < quadrature_n; ++k) {
        const double a = h * (k - 1), b = h * k;
        I += (h / 6.0) * (g(a) + 4.0 * g(0.5 * (a + b)) + g(b));
        const double t = b;
        const double rhs = -p.a_u(t) * I;
        const double margin = p.b_u(t) - rhs;
        rep.min_margin = std::min(rep.min_margin, margin);
        if (margin < -1e-9)
            rep.violations.push_back({t, rhs, margin});
        else if (margin <= 1e-9)
            rep.boundary = true;
    }
    rep.ok = rep.violations.empty() && !rep.boundary;
    return rep;
}

// e^{-t} < a_u(t) < e^t on (0, 2pi); requires the b_u == 0 case.
inline BoundReport exp_band_check(const CompactLoopProfile& p,
                                  int n_points = 1024) {
    for (int i = 0; i <= 16; ++i)
        if (std::fabs(p.b_u(tau * i / 16.0)) > 1e-9)
            throw domain_error("exp_band_check requires b_u = 0");
    BoundReport rep;
    rep.min_margin = std::numeric_limits<double>::infinity();
    for (int i = 1; i < n_points - 1; ++i) {
        const double t = tau * i / double(n_points - 1);
        const double a = p.a_u(t);
        const double margin = std::min(a - std::exp(-t), std::exp(t) - a);
        rep.min_margin = std::min(rep.min_margin, margin);
        if (margin < -1e-9)
            rep.violations.push_back({t, a, margin});
        else if (margin <= 1e-9)
            rep.boundary = true;
    }
    rep.ok = rep.violations.empty() && !rep.boundary;
    return rep;
}

// Piecewise-linear interpolant through (xs, ys), clamped outside the span.
inline std::function<double(double)> linear_interpolant(std::vector<double> xs,
                                                        std::vector<double> ys) {
    return [xs = std::move(xs), ys = std::move(ys)](double x) {
        if (x <= xs.front())
            return ys.front();
        if (x >= xs.back())
            return ys.back();
        const auto it = std::upper_bound(xs.begin(), xs.end(), x);
        const std::size_t j = std::size_t(it - xs.begin());
        const double w = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
        return ys[j - 1] * (1.0 - w) + ys[j] * w;
    };
}

// Sampled profile with linear interpolation, for JSON imports.
inline CompactLoopProfile
profile_from_samples(std::vector<double> t, std::vector<double> a,
                     std::vector<double> b, double u_tag = 1.0,
                     double endpoint_tol = 1e-9) {
    if (t.size() < 2 || t.size() != a.size() ||
        (!b.empty() && b.size() != t.size()))
        throw domain_error("profile samples need matching t/a/b arrays with "
                           "at least two points");
    for (std::size_t i = 1; i < t.size(); ++i)
        if (!(t[i] > t[i - 1]))
            throw domain_error("profile sample t values must increase");
    if (std::fabs(t.front()) > 1e-9 || std::fabs(t.back() - tau) > 1e-9)
        throw domain_error("profile samples must span [0, 2pi]");
    std::function<double(double)> a_fn = linear_interpolant(t, std::move(a));
    std::function<double(double)> b_fn;
    if (!b.empty())
        b_fn = linear_interpolant(std::move(t), std::move(b));
    return make_profile(std::move(a_fn), std::move(b_fn), u_tag, endpoint_tol);
}

// The compact factor of a section at radius u, normalized per the profile
// convention.
template <typename Section>
CompactLoopProfile profile_of_section(const Section& s, double u,
                                      double endpoint_tol = 1e-9) {
    const double a0 = s.a(u, 0.0);
    auto a_fn = [s, u, a0](double t) { return s.a(u, wrap_angle(t)) / a0; };
    auto b_fn = [s, u](double t) { return s.b(u, wrap_angle(t)); };
    return make_profile(a_fn, b_fn, u, endpoint_tol);
}

} // namespace qflab
