#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "qflab/linalg.hpp"

using namespace qflab;

TEST_CASE("decompose recovers the documented coordinates for a rotation") {
    // [[0, 2], [-2, 0]] is 2 * rotation(pi/2) with trivial triangular part.
    const Mat2 g{0.0, 2.0, -2.0, 0.0};
    const GroupCoords c = decompose_gl2plus(g);
    CHECK(c.u == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(c.t == doctest::Approx(pi / 2.0).epsilon(1e-14));
    CHECK(c.k == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::fabs(c.l) < 1e-14);
}

TEST_CASE("decompose and compose are mutually inverse") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> entry(-3.0, 3.0);
    int tried = 0;
    while (tried < 1000) {
        const Mat2 g{entry(rng), entry(rng), entry(rng), entry(rng)};
        if (g.det() <= 1e-3)
            continue;
        ++tried;
        const GroupCoords c = decompose_gl2plus(g);
        CHECK(c.u > 0.0);
        CHECK(c.k > 0.0);
        CHECK(c.t >= 0.0);
        CHECK(c.t < tau);
        const Mat2 back = compose_gl2plus(c);
        CHECK(back.max_abs_diff(g) <= 1e-12 * (1.0 + std::fabs(g.m11) +
                                               std::fabs(g.m12) +
                                               std::fabs(g.m21) +
                                               std::fabs(g.m22)));
    }
}

TEST_CASE("composed matrices obey the det = u^2 law") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> lu(-2.0, 2.0);
    std::uniform_real_distribution<double> ang(0.0, tau);
    std::uniform_real_distribution<double> lk(-1.5, 1.5);
    std::uniform_real_distribution<double> ll(-4.0, 4.0);
    for (int i = 0; i < 1000; ++i) {
        GroupCoords c;
        c.u = std::exp(lu(rng));
        c.t = ang(rng);
        c.k = std::exp(lk(rng));
        c.l = ll(rng);
        const double d = compose_gl2plus(c).det();
        CHECK(rel_residual(d, c.u * c.u) <= 1e-12);
    }
}

TEST_CASE("decompose rejects non-orientation-preserving input") {
    CHECK_THROWS_AS(decompose_gl2plus(Mat2{1.0, 0.0, 0.0, -1.0}),
                    domain_error);
    CHECK_THROWS_AS(decompose_gl2plus(Mat2{1.0, 2.0, 2.0, 4.0}), domain_error);
    CHECK_THROWS_AS(triangular(-1.0, 0.0), domain_error);
}

TEST_CASE("angle helpers wrap and difference correctly") {
    CHECK(wrap_angle(tau + 0.25) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(wrap_angle(-0.25) == doctest::Approx(tau - 0.25).epsilon(1e-14));
    CHECK(wrap_angle(0.0) == 0.0);
    CHECK(wrap_angle(tau) == 0.0);
    CHECK(angle_diff(0.1, tau - 0.1) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(angle_diff(tau - 0.1, 0.1) == doctest::Approx(-0.2).epsilon(1e-12));
    CHECK(std::fabs(angle_diff(3.0, 3.0)) < 1e-15);
}

TEST_CASE("snap_direction zeroes the crosswise component on the axes") {
    double c = 0.0, s = 0.0;
    snap_direction(pi, c, s);
    CHECK(c == -1.0);
    CHECK(s == 0.0);
    snap_direction(pi / 2.0, c, s);
    CHECK(c == 0.0);
    CHECK(s == 1.0);
    snap_direction(33.0 * pi, c, s); // accumulated rounding stays snapped
    CHECK(c == -1.0);
    CHECK(s == 0.0);
    snap_direction(0.3, c, s);
    CHECK(c == doctest::Approx(std::cos(0.3)).epsilon(1e-15));
    CHECK(s == doctest::Approx(std::sin(0.3)).epsilon(1e-15));
}

TEST_CASE("rotation and triangular have the expected shapes") {
    const Mat2 r = rotation(0.7);
    CHECK(r.m11 == doctest::Approx(std::cos(0.7)));
    CHECK(r.m12 == doctest::Approx(std::sin(0.7)));
    CHECK(r.m21 == doctest::Approx(-std::sin(0.7)));
    CHECK(rel_residual(r.det(), 1.0) < 1e-15);
    const Mat2 t = triangular(2.0, -3.0);
    CHECK(t.m11 == 2.0);
    CHECK(t.m12 == -3.0);
    CHECK(t.m21 == 0.0);
    CHECK(t.m22 == 0.5);
    const Mat2 m{1.0, 2.0, 3.0, 4.0};
    const Mat2 id = m * m.inverse();
    CHECK(id.max_abs_diff(Mat2{1.0, 0.0, 0.0, 1.0}) < 1e-15);
}
