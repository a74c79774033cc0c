#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace qflab {

inline constexpr double tau = 2.0 * std::numbers::pi;
inline constexpr double pi = std::numbers::pi;

// Thrown when an input lies outside an operation's mathematical domain
// (nonpositive determinant, k <= 0, zero vector where a loop element is
// required, parameters violating a family's constraints).
class domain_error : public std::runtime_error {
public:
    explicit domain_error(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when an iterative solver fails to converge within its budget.
// CLI maps this to exit code 3.
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when a division solver finds more than one solution, which a
// sharply transitive section cannot produce; signals an invalid section.
class transitivity_error : public numeric_error {
public:
    explicit transitivity_error(const std::string& what) : numeric_error(what) {}
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double norm() const { return std::hypot(x, y); }
};

struct Mat2 {
    double m11 = 0.0, m12 = 0.0;
    double m21 = 0.0, m22 = 0.0;

    double det() const { return m11 * m22 - m12 * m21; }

    Mat2 operator*(const Mat2& o) const {
        return {m11 * o.m11 + m12 * o.m21, m11 * o.m12 + m12 * o.m22,
                m21 * o.m11 + m22 * o.m21, m21 * o.m12 + m22 * o.m22};
    }
    Vec2 operator*(const Vec2& v) const {
        return {m11 * v.x + m12 * v.y, m21 * v.x + m22 * v.y};
    }
    Mat2 operator*(double s) const { return {m11 * s, m12 * s, m21 * s, m22 * s}; }
    Mat2 operator-(const Mat2& o) const {
        return {m11 - o.m11, m12 - o.m12, m21 - o.m21, m22 - o.m22};
    }
    Mat2 operator+(const Mat2& o) const {
        return {m11 + o.m11, m12 + o.m12, m21 + o.m21, m22 + o.m22};
    }

    Mat2 inverse() const {
        const double d = det();
        if (d == 0.0)
            throw domain_error("Mat2::inverse: singular matrix");
        return {m22 / d, -m12 / d, -m21 / d, m11 / d};
    }

    static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }

    double max_abs_diff(const Mat2& o) const {
        double d = std::fabs(m11 - o.m11);
        d = std::max(d, std::fabs(m12 - o.m12));
        d = std::max(d, std::fabs(m21 - o.m21));
        d = std::max(d, std::fabs(m22 - o.m22));
        return d;
    }
};

// Coordinates of g = u * rotation(t) * triangular(k, l) with u, k > 0.
struct GroupCoords {
    double u = 1.0;
    double t = 0.0;
    double k = 1.0;
    double l = 0.0;
};

// Normalize an angle into [0, 2*pi). Ties at 2*pi map to 0.
inline double wrap_angle(double t) {
    double r = std::fmod(t, tau);
    if (r < 0.0)
        r += tau;
    if (r >= tau)
        r = 0.0;
    return r;
}

// Signed distance between two angles, in (-pi, pi].
inline double angle_diff(double t1, double t2) {
    double d = wrap_angle(t1 - t2 + pi);
    return d - pi;
}

inline Mat2 rotation(double t) {
    const double c = std::cos(t), s = std::sin(t);
    return {c, s, -s, c};
}

inline Mat2 triangular(double k, double l) {
    if (!(k > 0.0))
        throw domain_error("triangular: k must be positive, got " + std::to_string(k));
    return {k, l, 0.0, 1.0 / k};
}

// Unique factorization g = u * rotation(t) * triangular(k, l) for det(g) > 0.
// u carries the scale, t the direction of the first column, (k, l) the
// remaining shear. Closed form, no iteration.
inline GroupCoords decompose_gl2plus(const Mat2& g) {
    const double d = g.det();
    if (!(d > 0.0))
        throw domain_error("decompose_gl2plus: determinant must be positive, got " +
                           std::to_string(d));
    GroupCoords c;
    c.u = std::sqrt(d);
    c.t = wrap_angle(std::atan2(-g.m21, g.m11));
    c.k = std::hypot(g.m11, g.m21) / c.u;
    c.l = (g.m12 * std::cos(c.t) - g.m22 * std::sin(c.t)) / c.u;
    return c;
}

inline Mat2 compose_gl2plus(const GroupCoords& c) {
    return rotation(c.t) * triangular(c.k, c.l) * c.u;
}

// Combined absolute/relative closeness test, scale-free over wide ranges.
inline bool close(double a, double b, double atol, double rtol) {
    return std::fabs(a - b) <= atol + rtol * std::max(std::fabs(a), std::fabs(b));
}

// Residual of lhs == rhs normalized so that O(1) quantities and large
// quantities are judged alike: |lhs-rhs| / max(1, |lhs|, |rhs|).
inline double rel_residual(double lhs, double rhs) {
    return std::fabs(lhs - rhs) /
           std::max({1.0, std::fabs(lhs), std::fabs(rhs)});
}

// cos/sin of t with components below 1e-12 snapped to exact zero.  Grids
// contain floating-point multiples of pi whose sine is ~1.2e-16; fractional
// powers in the catalog formulas amplify such stray components (a cube root
// turns 1e-16 into 5e-6), so direction-targeted solvers must treat the axis
// rays exactly.
inline void snap_direction(double t, double& c, double& s) {
    c = std::cos(t);
    s = std::sin(t);
    if (std::fabs(s) < 1e-12) {
        s = 0.0;
        c = (c > 0.0) ? 1.0 : -1.0;
    } else if (std::fabs(c) < 1e-12) {
        c = 0.0;
        s = (s > 0.0) ? 1.0 : -1.0;
    }
}

} // namespace qflab
