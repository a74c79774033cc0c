#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "qflab/linalg.hpp"
#include "qflab/policy.hpp"
#include "qflab/roots.hpp"

namespace qflab {

// The pair (a(u,t), b(u,t)) on (0,inf) x [0,2pi) defining a section
//   sigma(u,t) = u * rotation(t) * triangular(a(u,t), b(u,t)).
struct SectionPair {
    std::string name;
    std::vector<std::pair<std::string, double>> params;
    std::function<double(double, double)> a;
    std::function<double(double, double)> b;
};

struct PolarParam {
    double r = 1.0;
    double t = 0.0;
};

struct QuasifieldLoop {
    SectionPair section;
    NumericPolicy policy;
    // Optional native coordinates of the spread set behind the section: the
    // smooth chart p -> sigma(p) together with the inverse of its first
    // column p -> sigma(p) e1.  Division falls back to them where the polar
    // parameterization folds; both may be left empty.
    std::function<Mat2(double, double)> chart;
    std::function<std::array<double, 2>(Vec2)> chart_of_column;
};

// One reproducible counterexample: the named test, the grid point where the
// worst residual occurred, and both sides of the violated identity.
struct Witness {
    std::string test;
    double r = 0.0;
    double t = 0.0;
    int k = 0;
    double lhs = 0.0;
    double rhs = 0.0;
    double residual = 0.0;
};

inline Mat2 section_matrix(const SectionPair& s, PolarParam p) {
    if (!(p.r > 0.0))
        throw domain_error("section_matrix: r must be positive");
    const double a = s.a(p.r, p.t);
    if (!(a > 0.0) || !std::isfinite(a))
        throw domain_error("section_matrix: a(u,t) must be positive, got " +
                           std::to_string(a));
    const double b = s.b(p.r, p.t);
    return rotation(p.t) * triangular(a, b) * p.r;
}

// The loop element whose left translation is section_matrix(s, p):
// the image of the identity (1,0)^t.
inline Vec2 element_of(const SectionPair& s, PolarParam p) {
    const double a = s.a(p.r, p.t);
    if (!(a > 0.0) || !std::isfinite(a))
        throw domain_error("element_of: a(u,t) must be positive");
    return {p.r * std::cos(p.t) * a, -p.r * std::sin(p.t) * a};
}

// Inverse of element_of.  The element direction is always -t because
// a(u,t) > 0, so t comes from atan2 in closed form; the radius then solves
// r * a(r,t) = |v|, which is strictly increasing in r for valid sections.
inline PolarParam polar_of(const SectionPair& s, Vec2 v,
                           const NumericPolicy& policy) {
    if (v.x == 0.0 && v.y == 0.0)
        throw domain_error("polar_of: zero vector has no polar parameter");
    const double t = wrap_angle(std::atan2(-v.y, v.x));
    const double n = v.norm();
    auto f = [&](double r) { return r * s.a(r, t) - n; };
    double lo, hi;
    try {
        bracket_increasing(f, n, lo, hi);
    } catch (const numeric_error&) {
        throw numeric_error("polar_of: no radius bracket for |v|=" +
                            std::to_string(n) + " at t=" + std::to_string(t));
    }
    const double r =
        brent_root(f, lo, hi, 1e-15, std::max(200, policy.max_newton_iters));
    return {r, t};
}

inline Vec2 multiply(const QuasifieldLoop& L, Vec2 p, Vec2 q) {
    if (p.x == 0.0 && p.y == 0.0)
        throw domain_error("multiply: left factor must be nonzero");
    return section_matrix(L.section, polar_of(L.section, p, L.policy)) * q;
}

inline Vec2 left_divide(const QuasifieldLoop& L, Vec2 p, Vec2 w) {
    if (p.x == 0.0 && p.y == 0.0)
        throw domain_error("left_divide: divisor must be nonzero");
    return section_matrix(L.section, polar_of(L.section, p, L.policy)).inverse() * w;
}

namespace detail {

// With the angle fixed, |M(u,t) q| grows through |w| as u does (the same
// monotonicity polar_of leans on), which pins the radius per angle.  a and b
// may depend on u, so this cannot be reduced to a scale factor.
inline double rdiv_radius(const SectionPair& s, Vec2 q, double wn, double t) {
    auto f = [&](double u) {
        return (section_matrix(s, {u, t}) * q).norm() - wn;
    };
    double lo, hi;
    bracket_increasing(f, wn / q.norm(), lo, hi);
    return brent_root(f, lo, hi);
}

// All candidate angles t for M(u,t) q = w are roots of this one-variable
// mismatch, each evaluated at the radius already matched to |w|.
inline std::vector<double> rdiv_angle_candidates(const SectionPair& s, Vec2 q,
                                                 Vec2 w, int n_scan) {
    const double target = std::atan2(w.y, w.x);
    const double wn = w.norm();
    auto angdiff = [&](double t) {
        const Vec2 r = section_matrix(s, {rdiv_radius(s, q, wn, t), t}) * q;
        return angle_diff(std::atan2(r.y, r.x), target);
    };
    std::vector<double> grid(n_scan + 1);
    for (int i = 0; i <= n_scan; ++i)
        grid[i] = tau * i / n_scan;
    // Jumps of ~2*pi are the branch cut of angle_diff, not roots.
    return scan_roots(angdiff, grid, pi);
}

// Continuation fallback for the cases the scan cannot see: when |M(u,t) q|
// is not monotone in u, the per-angle radius can sit on the wrong branch and
// the solution hides behind it.  sigma(p) q sweeps the punctured plane
// exactly once, so the preimage of a path from q (the image of the identity,
// at (u,t) = (1,0)) to w can be tracked step by step with Newton correction.
inline std::optional<PolarParam> rdiv_continuation(const SectionPair& s,
                                                   Vec2 q, Vec2 w) {
    const double lr0 = std::log(q.norm()), lr1 = std::log(w.norm());
    const double a0 = std::atan2(q.y, q.x);
    double da = std::atan2(w.y, w.x) - a0;
    while (da > pi)
        da -= tau;
    while (da < -pi)
        da += tau;
    auto gamma = [&](double f) -> Vec2 {
        const double r = std::exp(lr0 + (lr1 - lr0) * f);
        const double th = a0 + da * f;
        return {r * std::cos(th), r * std::sin(th)};
    };
    auto value = [&](double uu, double tt, Vec2& out) -> bool {
        if (!(uu > 0.0))
            return false;
        try {
            out = section_matrix(s, {uu, wrap_angle(tt)}) * q;
        } catch (const std::exception&) {
            return false;
        }
        return std::isfinite(out.x) && std::isfinite(out.y);
    };
    // The parameterization (u,t) -> M(u,t) q can have nearly parallel
    // derivative columns even though the map itself is injective, so the
    // correction is damped and the tracking tolerance stays loose; only the
    // final point gets polished hard.
    auto correct = [&](double& uref, double& tref, Vec2 target,
                       double tol) -> bool {
        double uu = uref, tt = tref;
        Vec2 g;
        if (!value(uu, tt, g))
            return false;
        for (int it = 0; it < 30; ++it) {
            const Vec2 r = g - target;
            const double rn = r.norm();
            uref = uu;
            tref = tt;
            if (rn <= tol)
                return true;
            const double hu = 1e-8 * std::max(1.0, std::fabs(uu));
            const double ht = 1e-8;
            Vec2 gu, gt;
            if (!value(uu + hu, tt, gu) || !value(uu, tt + ht, gt))
                return false;
            const Mat2 J{(gu.x - g.x) / hu, (gt.x - g.x) / ht,
                         (gu.y - g.y) / hu, (gt.y - g.y) / ht};
            if (J.det() == 0.0)
                return false;
            const Vec2 d = J.inverse() * Vec2{-r.x, -r.y};
            double lam = 1.0;
            bool moved = false;
            for (int ls = 0; ls < 20; ++ls) {
                Vec2 gn;
                if (value(uu + lam * d.x, tt + lam * d.y, gn) &&
                    (gn - target).norm() < rn) {
                    uu += lam * d.x;
                    tt += lam * d.y;
                    g = gn;
                    moved = true;
                    break;
                }
                lam *= 0.5;
            }
            if (!moved)
                return false;
        }
        return false;
    };
    double u = 1.0, t = 0.0, frac = 0.0, step = 1.0 / 16.0;
    for (int guard = 0; frac < 1.0 && guard < 4000; ++guard) {
        const double fnext = std::min(1.0, frac + step);
        const Vec2 target = gamma(fnext);
        double uu = u, tt = t;
        if (correct(uu, tt, target, 1e-9 * std::max(1.0, target.norm()))) {
            u = uu;
            t = tt;
            frac = fnext;
            step = std::min(step * 2.0, 1.0 / 8.0);
        } else {
            step *= 0.5;
            if (step < 1e-6)
                return std::nullopt;
        }
    }
    if (frac < 1.0)
        return std::nullopt;
    correct(u, t, w, 1e-13 * std::max(1.0, w.norm()));
    return PolarParam{u, wrap_angle(t)};
}

// Damped Newton for chart(p) q = target in the spread's native chart, where
// p -> sigma(p) q is an immersion whenever the spread set's tangent
// combinations stay invertible, so |sigma(p) q - target| has no spurious
// stationary points there.  The polar parameterization enjoys no such
// guarantee: its chart transition can fold even though the underlying map
// is injective.  Leaves p at the best point reached.
inline bool chart_newton(const std::function<Mat2(double, double)>& chart,
                         Vec2 q, Vec2 target, std::array<double, 2>& p,
                         double tol) {
    auto val = [&](std::array<double, 2> pp, Vec2& out) -> bool {
        try {
            out = chart(pp[0], pp[1]) * q - target;
        } catch (const std::exception&) {
            return false;
        }
        return std::isfinite(out.x) && std::isfinite(out.y);
    };
    Vec2 g;
    if (!val(p, g))
        return false;
    for (int it = 0; it < 60; ++it) {
        const double gn = g.norm();
        if (gn <= tol)
            return true;
        const double h0 = 1e-7 * std::max(1.0, std::fabs(p[0]));
        const double h1 = 1e-7 * std::max(1.0, std::fabs(p[1]));
        Vec2 ga, gb;
        if (!val({p[0] + h0, p[1]}, ga) || !val({p[0], p[1] + h1}, gb))
            return false;
        const Mat2 J{(ga.x - g.x) / h0, (gb.x - g.x) / h1,
                     (ga.y - g.y) / h0, (gb.y - g.y) / h1};
        if (J.det() == 0.0)
            return false;
        const Vec2 d = J.inverse() * Vec2{-g.x, -g.y};
        double lam = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 30 && !moved; ++ls) {
            const std::array<double, 2> pn{p[0] + lam * d.x,
                                           p[1] + lam * d.y};
            Vec2 gnext;
            if (val(pn, gnext) && gnext.norm() < gn) {
                p = pn;
                g = gnext;
                moved = true;
            }
            lam *= 0.5;
        }
        if (!moved)
            return false;
    }
    return g.norm() <= tol;
}

// Native-chart fallback for right division.  The solution's first column is
// the sought element x itself, so candidate columns double as seeds: the
// best scan candidate, the identity, and shells of directions scaled to
// |w| / |q|.  Newton runs from the closest few; spreading the seeds matters
// because charts with singular tangent combinations (a perfect-square det)
// have rank-1 lines that a single basin cannot cross.  When every seed
// fails, a log-polar path from q to w is tracked from the identity's chart
// point.  Returns the element, the first column of the solved matrix.
inline std::optional<Vec2> rdiv_chart_solve(const QuasifieldLoop& L, Vec2 q,
                                            Vec2 w,
                                            const std::vector<Vec2>& hints) {
    if (!L.chart || !L.chart_of_column)
        return std::nullopt;
    const double wn = w.norm();
    const double tol = L.policy.identity_tol * std::max(1.0, wn);
    auto from_col = [&](Vec2 col) -> std::optional<std::array<double, 2>> {
        try {
            return L.chart_of_column(col);
        } catch (const std::exception&) {
            return std::nullopt;
        }
    };
    auto column_of = [&](const std::array<double, 2>& p) -> Vec2 {
        const Mat2 m = L.chart(p[0], p[1]);
        return {m.m11, m.m21};
    };
    std::vector<Vec2> cols = hints;
    cols.push_back({1.0, 0.0});
    // The element's norm is only loosely tied to |w| / |q| (a matrix can be
    // enormous yet send q almost to its kernel direction), so the shells
    // span several decades around that scale.
    const double scale = wn / q.norm();
    for (int e = -4; e <= 6; ++e)
        for (int k = 0; k < 24; ++k) {
            const double f = std::pow(10.0, 0.5 * e);
            const double th = tau * k / 24.0;
            cols.push_back(
                {f * scale * std::cos(th), f * scale * std::sin(th)});
        }
    std::vector<std::pair<double, std::array<double, 2>>> ranked;
    for (Vec2 c : cols)
        if (auto p = from_col(c)) {
            try {
                const Vec2 r = L.chart((*p)[0], (*p)[1]) * q - w;
                if (std::isfinite(r.x) && std::isfinite(r.y))
                    ranked.push_back({r.norm(), *p});
            } catch (const std::exception&) {
            }
        }
    std::sort(ranked.begin(), ranked.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [res, p] : ranked)
        if (chart_newton(L.chart, q, w, p, tol))
            return column_of(p);
    const auto p0 = from_col({1.0, 0.0});
    if (!p0)
        return std::nullopt;
    const double lr0 = std::log(q.norm()), lr1 = std::log(wn);
    const double a0 = std::atan2(q.y, q.x);
    double da = std::atan2(w.y, w.x) - a0;
    while (da > pi)
        da -= tau;
    while (da < -pi)
        da += tau;
    auto gamma = [&](double f) -> Vec2 {
        const double r = std::exp(lr0 + (lr1 - lr0) * f);
        const double th = a0 + da * f;
        return {r * std::cos(th), r * std::sin(th)};
    };
    std::array<double, 2> p = *p0;
    double frac = 0.0, step = 0.25;
    for (int guard = 0; frac < 1.0 && guard < 600; ++guard) {
        const double fnext = std::min(1.0, frac + step);
        const Vec2 target = gamma(fnext);
        std::array<double, 2> pn = p;
        if (chart_newton(L.chart, q, target, pn,
                         1e-9 * std::max(1.0, target.norm()))) {
            p = pn;
            frac = fnext;
            step = std::min(step * 2.0, 0.25);
        } else {
            step *= 0.5;
            if (step < 1e-5)
                return std::nullopt;
        }
    }
    if (frac < 1.0 || !chart_newton(L.chart, q, w, p, tol))
        return std::nullopt;
    return column_of(p);
}

} // namespace detail

// Solve p * q = w for p.  Per candidate angle the radius is pinned by the
// norm equation; the full vector equation then filters the candidates.
// Sharp transitivity promises exactly one survivor: several signal an
// invalid section, none a solver failure.
inline Vec2 right_divide(const QuasifieldLoop& L, Vec2 q, Vec2 w) {
    if (q.x == 0.0 && q.y == 0.0)
        throw domain_error("right_divide: divisor must be nonzero");
    if (w.x == 0.0 && w.y == 0.0)
        throw domain_error("right_divide: target must be nonzero");
    const SectionPair& s = L.section;
    const double wn = w.norm();

    const auto angles = detail::rdiv_angle_candidates(s, q, w, 256);
    std::vector<PolarParam> sols;
    double best_residual = std::numeric_limits<double>::infinity();
    std::optional<PolarParam> best;
    for (double t : angles) {
        const double u = detail::rdiv_radius(s, q, wn, t);
        const Vec2 r = section_matrix(s, {u, t}) * q - w;
        const double res = r.norm() / std::max(1.0, wn);
        if (res < best_residual) {
            best_residual = res;
            best = PolarParam{u, wrap_angle(t)};
        }
        if (res <= L.policy.identity_tol) {
            bool duplicate = false;
            for (const auto& sp : sols)
                if (std::fabs(angle_diff(sp.t, t)) < 10.0 * L.policy.guard_band &&
                    std::fabs(sp.r - u) <= 1e-6 * std::max(1.0, sp.r))
                    duplicate = true;
            if (!duplicate)
                sols.push_back({u, wrap_angle(t)});
        }
    }
    if (sols.size() > 1)
        throw transitivity_error(
            "right_divide: " + std::to_string(sols.size()) +
            " distinct solutions found; section is not sharply transitive");
    if (sols.size() == 1)
        return element_of(s, sols.front());
    std::vector<Vec2> hints;
    if (best)
        hints.push_back(element_of(s, *best));
    if (const auto xc = detail::rdiv_chart_solve(L, q, w, hints))
        return *xc;
    if (const auto cont = detail::rdiv_continuation(s, q, w)) {
        const Vec2 r = section_matrix(s, {cont->r, cont->t}) * q - w;
        if (r.norm() / std::max(1.0, wn) <= L.policy.identity_tol)
            return element_of(s, *cont);
    }
    throw numeric_error("right_divide: no solution found, best residual " +
                        std::to_string(best_residual));
}

struct SectionCheck {
    bool ok = false;          // a>0 finite on the grid, a(1,0)=1, b(1,0)=0
    bool slice_loops = false; // b(u,0)=0 for every grid u (the u-slices F_u)
    std::vector<Witness> witnesses;
};

inline SectionCheck is_loop_section(const SectionPair& s,
                                    const NumericPolicy& policy) {
    SectionCheck out;
    out.ok = true;
    out.slice_loops = true;
    const double a10 = s.a(1.0, 0.0);
    if (!policy.close(a10, 1.0)) {
        out.ok = false;
        out.witnesses.push_back({"a(1,0)=1", 1.0, 0.0, 0, a10, 1.0,
                                 rel_residual(a10, 1.0)});
    }
    const double b10 = s.b(1.0, 0.0);
    if (!policy.close(b10, 0.0)) {
        out.ok = false;
        out.witnesses.push_back({"b(1,0)=0", 1.0, 0.0, 0, b10, 0.0,
                                 rel_residual(b10, 0.0)});
    }
    for (double u : policy.u_grid) {
        for (double t : policy.t_grid) {
            const double a = s.a(u, t);
            if (!(a > 0.0) || !std::isfinite(a)) {
                out.ok = false;
                out.witnesses.push_back({"a(u,t)>0", u, t, 0, a, 0.0,
                                         std::numeric_limits<double>::infinity()});
            }
        }
        const double b0 = s.b(u, 0.0);
        if (std::fabs(b0) > policy.identity_tol) {
            out.slice_loops = false;
            out.witnesses.push_back({"b(u,0)=0", u, 0.0, 0, b0, 0.0,
                                     std::fabs(b0)});
        }
    }
    return out;
}

struct TransitivityFailure {
    Vec2 q, w;
    std::string reason;
    double residual = 0.0;
};

struct TransitivityReport {
    int n_samples = 0;
    std::vector<TransitivityFailure> failures;
    bool ok() const { return failures.empty(); }
};

// Property check of unique right division: right_divide must succeed with a
// small residual, and a coarse angular scan must not reveal a second
// solution, for n random (q, w) pairs drawn from the loop's own image.
inline TransitivityReport verify_sharp_transitivity(const QuasifieldLoop& L,
                                                    int n_samples,
                                                    std::uint64_t seed = 0) {
    TransitivityReport rep;
    rep.n_samples = n_samples;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ang(0.0, tau);
    std::uniform_real_distribution<double> lr(std::log(0.25), std::log(4.0));
    for (int i = 0; i < n_samples; ++i) {
        const Vec2 q = element_of(L.section, {std::exp(lr(rng)), ang(rng)});
        const Vec2 w = element_of(L.section, {std::exp(lr(rng)), ang(rng)});
        try {
            const Vec2 p = right_divide(L, q, w);
            const Vec2 r = multiply(L, p, q) - w;
            const double res = r.norm() / std::max(1.0, w.norm());
            if (res > 1e-8)
                rep.failures.push_back({q, w, "residual above 1e-8", res});
        } catch (const transitivity_error& e) {
            rep.failures.push_back({q, w, e.what(), 0.0});
        } catch (const numeric_error& e) {
            rep.failures.push_back({q, w, e.what(), 0.0});
        }
    }
    return rep;
}

} // namespace qflab
