#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "qflab/linalg.hpp"
#include "qflab/section.hpp"

namespace qflab {

struct SpreadElement {
    std::array<double, 2> params{0.0, 0.0};
    Mat2 m;
};

// Finite, parameter-tagged sample of a spread set.  The vertical component
// {0} x X has no matrix; includes_vertical records that the sampled plane
// carries it alongside these elements.
struct SpreadSample {
    std::string name;
    std::vector<std::string> param_names; // chart axis labels for elements[i].params
    std::vector<double> params;           // family parameters, declaration order
    std::vector<SpreadElement> elements;
    bool includes_vertical = true;
};

// A two-parameter spread evaluator plus the inverse lookup that recovers the
// parameters of the unique element with a prescribed first column.
struct SpreadFamily {
    std::function<Mat2(double, double)> evaluate;
    std::function<std::array<double, 2>(Vec2)> params_for_first_column;
    std::string param_domain;
};

struct M1Violation {
    std::size_t i = 0, j = 0;
    double det = 0.0;
};

struct M1Report {
    double min_abs_det = std::numeric_limits<double>::infinity();
    std::size_t n_pairs = 0;
    std::vector<M1Violation> violations;
    bool ok() const { return violations.empty(); }
};

// Pairwise-difference bijectivity: det(w_i - w_j) must stay away from zero.
inline M1Report check_M1(const SpreadSample& sample, double atol = 1e-12) {
    M1Report rep;
    const auto& e = sample.elements;
    for (std::size_t i = 0; i + 1 < e.size(); ++i) {
        for (std::size_t j = i + 1; j < e.size(); ++j) {
            const double d = (e[i].m - e[j].m).det();
            ++rep.n_pairs;
            rep.min_abs_det = std::min(rep.min_abs_det, std::fabs(d));
            if (std::fabs(d) <= atol)
                rep.violations.push_back({i, j, d});
        }
    }
    return rep;
}

struct M2Miss {
    Vec2 x, target;
    double best_dist = std::numeric_limits<double>::infinity();
};

struct M2Report {
    int covered = 0;
    int total = 0;
    std::vector<M2Miss> uncovered;
    double coverage() const { return total ? double(covered) / total : 1.0; }
};

namespace detail {

// Damped 2-variable Newton for G(p) = evaluate(p) * x - w with numeric
// Jacobian; returns the parameters on success.
inline bool newton_on_evaluation(const std::function<Mat2(double, double)>& ev,
                                 Vec2 x, Vec2 w, std::array<double, 2>& p,
                                 double tol) {
    auto G = [&](const std::array<double, 2>& q, Vec2& out) -> bool {
        Mat2 M;
        try {
            M = ev(q[0], q[1]);
        } catch (const std::exception&) {
            return false;
        }
        const Vec2 r = M * x - w;
        if (!std::isfinite(r.x) || !std::isfinite(r.y))
            return false;
        out = r;
        return true;
    };
    Vec2 g0;
    if (!G(p, g0))
        return false;
    for (int iter = 0; iter < 80; ++iter) {
        const double n0 = g0.norm();
        if (n0 <= tol)
            return true;
        const double h = 1e-7;
        Vec2 gx, gy;
        std::array<double, 2> px{p[0] + h, p[1]}, py{p[0], p[1] + h};
        if (!G(px, gx) || !G(py, gy))
            return false;
        const Mat2 J{(gx.x - g0.x) / h, (gy.x - g0.x) / h,
                     (gx.y - g0.y) / h, (gy.y - g0.y) / h};
        if (J.det() == 0.0)
            return false;
        const Vec2 step = J.inverse() * Vec2{-g0.x, -g0.y};
        double lambda = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 40; ++ls) {
            std::array<double, 2> pn{p[0] + lambda * step.x,
                                     p[1] + lambda * step.y};
            Vec2 gn;
            if (G(pn, gn) && gn.norm() < n0) {
                p = pn;
                g0 = gn;
                moved = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!moved) {
            // The joint step can stall when one parameter direction crosses
            // a chart branch and poisons its Jacobian column; retry along
            // each parameter axis alone before giving up.
            const Vec2 cols[2] = {{J.m11, J.m21}, {J.m12, J.m22}};
            for (int axis = 0; axis < 2 && !moved; ++axis) {
                const double denom =
                    cols[axis].x * cols[axis].x + cols[axis].y * cols[axis].y;
                if (!(denom > 0.0) || !std::isfinite(denom))
                    continue;
                double s =
                    -(cols[axis].x * g0.x + cols[axis].y * g0.y) / denom;
                for (int ls = 0; ls < 40 && !moved; ++ls) {
                    std::array<double, 2> pn = p;
                    pn[axis] += s;
                    Vec2 gn;
                    if (G(pn, gn) && gn.norm() < n0) {
                        p = pn;
                        g0 = gn;
                        moved = true;
                    }
                    s *= 0.5;
                }
            }
        }
        if (!moved)
            return false;
    }
    return g0.norm() <= tol;
}

} // namespace detail

// Sampled evaluation surjectivity: each target w must be omega(x) for some
// parameter.  With the family evaluator the parameter is root-searched
// (Newton tried from the closest few sample elements, plus the first-column
// inverse when x is e1); with only the finite sample, coverage degrades to a
// nearest-element test at sample_tol.
// Default target set for coverage checks: radii well inside the sampled
// shells so nearest-element lookups stay meaningful.
inline std::vector<Vec2> coverage_targets(int n_r = 8, int n_t = 8) {
    std::vector<Vec2> out;
    for (double r : log_spaced(0.5, 2.0, n_r))
        for (double t : uniform_angles(n_t))
            out.push_back({r * std::cos(t), r * std::sin(t)});
    return out;
}

inline M2Report check_M2(const SpreadSample& sample,
                         const std::vector<Vec2>& x_samples,
                         const std::vector<Vec2>& targets,
                         const SpreadFamily* family = nullptr,
                         double tol = 1e-8, double sample_tol = 0.25) {
    M2Report rep;
    for (const Vec2& x : x_samples) {
        const bool x_is_e1 =
            std::fabs(x.x - 1.0) < 1e-12 && std::fabs(x.y) < 1e-12;
        for (const Vec2& w : targets) {
            ++rep.total;
            std::vector<std::pair<double, std::array<double, 2>>> ranked;
            ranked.reserve(sample.elements.size());
            for (const auto& el : sample.elements)
                ranked.push_back({(el.m * x - w).norm(), el.params});
            const std::size_t seeds = std::min<std::size_t>(ranked.size(), 8);
            std::partial_sort(ranked.begin(), ranked.begin() + seeds,
                              ranked.end(), [](const auto& a, const auto& b) {
                                  return a.first < b.first;
                              });
            const double best =
                ranked.empty() ? std::numeric_limits<double>::infinity()
                               : ranked.front().first;
            bool hit = false;
            if (family) {
                const double gtol = tol * std::max(1.0, w.norm());
                if (x_is_e1 && family->params_for_first_column) {
                    try {
                        auto p = family->params_for_first_column(w);
                        hit = detail::newton_on_evaluation(family->evaluate, x,
                                                           w, p, gtol);
                    } catch (const std::exception&) {
                    }
                }
                for (std::size_t k = 0; !hit && k < seeds; ++k) {
                    auto p = ranked[k].second;
                    hit = detail::newton_on_evaluation(family->evaluate, x, w,
                                                       p, gtol);
                }
            } else {
                hit = best <= sample_tol * std::max(1.0, w.norm());
            }
            if (hit)
                ++rep.covered;
            else
                rep.uncovered.push_back({x, w, best});
        }
    }
    return rep;
}

// Carry a spread sample into normalized position: the element tagged i0 maps
// to the zero matrix and the element tagged i1 to the identity, via
// omega -> (omega - omega0) * (omega1 - omega0)^{-1}.
inline SpreadSample normalize_spread(const SpreadSample& sample, std::size_t i0,
                                     std::size_t i1) {
    if (i0 >= sample.elements.size() || i1 >= sample.elements.size())
        throw domain_error("normalize_spread: element tag out of range");
    const Mat2& w0 = sample.elements[i0].m;
    const Mat2 diff = sample.elements[i1].m - w0;
    if (std::fabs(diff.det()) < 1e-300)
        throw domain_error("normalize_spread: omega1 - omega0 is singular");
    const Mat2 inv = diff.inverse();
    SpreadSample out = sample;
    out.name = sample.name + " (normalized)";
    for (auto& el : out.elements)
        el.m = (el.m - w0) * inv;
    return out;
}

// Loop multiplication recovered from a spread: m o x = omega(x) where omega
// is the unique element whose image of e equals m.  For e = (1,0) that image
// is the first column, matched by the family's dedicated inverse; other unit
// elements fall back to Newton seeded from the first-column match.
inline std::function<Vec2(Vec2, Vec2)>
loop_from_spread(const SpreadFamily& family, Vec2 e = {1.0, 0.0}) {
    const bool canonical = (e.x == 1.0 && e.y == 0.0);
    return [family, e, canonical](Vec2 m, Vec2 x) -> Vec2 {
        std::array<double, 2> p = family.params_for_first_column(m);
        if (!canonical) {
            if (!detail::newton_on_evaluation(family.evaluate, e, m, p,
                                              1e-11 * std::max(1.0, m.norm())))
                throw numeric_error("loop_from_spread: no element maps e to m");
        }
        const Mat2 M = family.evaluate(p[0], p[1]);
        const Vec2 img = M * e;
        const double res = (img - m).norm() / std::max(1.0, m.norm());
        if (res > 1e-8)
            throw numeric_error(
                "loop_from_spread: first-column match residual " +
                std::to_string(res));
        return M * x;
    };
}

struct SigmaConversion {
    Mat2 sigma_prime;
    Mat2 sigma;
    double a = 1.0;
    double b = 0.0;
    double max_diff = 0.0;
};

// The same section value written against the two stabilizer normal forms:
// through H' = {[[1, c], [0, d]], d > 0} the coset representative factors as
// rotation * diag(r a, (r a)^{-1}) * [[1, b/a], [0, r^2]], which multiplies
// out to the rotation * (r I) * [[a, b], [0, 1/a]] shape used everywhere
// else.  Both products are returned along with their elementwise gap.
inline SigmaConversion sigma_prime_to_sigma(double r, double t, double a,
                                            double b) {
    if (!(r > 0.0) || !(a > 0.0))
        throw domain_error("sigma_prime_to_sigma: r and a must be positive");
    const Mat2 diag{r * a, 0.0, 0.0, 1.0 / (r * a)};
    const Mat2 unitri{1.0, b / a, 0.0, r * r};
    SigmaConversion out;
    out.sigma_prime = rotation(t) * (diag * unitri);
    out.sigma = rotation(t) * triangular(a, b) * r;
    out.a = a;
    out.b = b;
    out.max_diff = out.sigma_prime.max_abs_diff(out.sigma);
    return out;
}

} // namespace qflab
