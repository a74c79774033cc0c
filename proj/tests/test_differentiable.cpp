#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "qflab/differentiable.hpp"
#include "qflab/families.hpp"

using namespace qflab;

TEST_CASE("a constant unit curvature reconstructs the flat profile") {
    const RFunction rf{[](double) { return 1.0; }, "R = 1"};
    const CompactLoopProfile p = compact_loop_from_R(rf, 4096);
    double worst = 0.0;
    for (int i = 0; i <= 64; ++i)
        worst = std::max(worst, std::fabs(p.a_u(tau * i / 64.0) - 1.0));
    CHECK(worst <= 1e-10);

    // The coarse reconstruction stays inside its own error estimate.
    const CompactLoopProfile coarse = compact_loop_from_R(rf, 64);
    CHECK(std::fabs(coarse.a_u(pi) - 1.0) < 1e-5);
}

TEST_CASE("R = 0 violates the closed-profile invariant and is rejected") {
    const RFunction rf{[](double) { return 0.0; }, "R = 0"};
    CHECK_THROWS_AS(compact_loop_from_R(rf, 256), domain_error);
}

TEST_CASE("the quadrature converges at fourth order") {
    // With R = 1 the profile is exactly 1, so the defect at t = pi is pure
    // quadrature error; the panel count halves exactly between runs.
    const RFunction rf{[](double) { return 1.0; }, "R = 1"};
    const double e64 =
        std::fabs(compact_loop_from_R(rf, 64).a_u(pi) - 1.0);
    const double e128 =
        std::fabs(compact_loop_from_R(rf, 128).a_u(pi) - 1.0);
    REQUIRE(e64 > 1e-12);
    REQUIRE(e128 > 1e-13);
    const double order = std::log2(e64 / e128);
    CHECK(order >= 3.9);
    CHECK(order <= 4.3);
}

TEST_CASE("overly large curvature drives the profile nonpositive") {
    const RFunction rf{[](double) { return 2.0; }, "R = 2"};
    CHECK_THROWS_AS(compact_loop_from_R(rf, 256), domain_error);
    CHECK_THROWS_AS(compact_loop_from_R(rf, 8), domain_error);
    CHECK_THROWS_AS(compact_loop_from_R(RFunction{}, 256), domain_error);
}

TEST_CASE("the differentiability inequality holds strictly for the flat "
          "profile") {
    const CompactLoopProfile p =
        make_profile([](double) { return 1.0; }, nullptr);
    const C1Report rep = c1_inequality_check(p);
    CHECK(rep.ok);
    CHECK_FALSE(rep.boundary);
    CHECK(rep.min_margin == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(rep.endpoint_margin == doctest::Approx(1.0).epsilon(1e-6));
    CHECK_THROWS_AS(c1_inequality_check(p, 4), domain_error);
}

TEST_CASE("b(t) = -t sits exactly on the boundary") {
    // Constructed directly: the endpoint invariant b(2pi) = 0 fails for this
    // profile, which is the point of the example.
    CompactLoopProfile p;
    p.a_u = [](double) { return 1.0; };
    p.b_u = [](double t) { return -t; };
    const C1Report c1 = c1_inequality_check(p);
    CHECK(c1.boundary);
    CHECK_FALSE(c1.ok);
    CHECK(std::fabs(c1.min_margin) <= 1e-9);

    const BoundReport bb = b_bound_check(p);
    CHECK(bb.boundary);
    CHECK_FALSE(bb.ok);
    CHECK(std::fabs(bb.min_margin) <= 1e-8);
}

TEST_CASE("the integral bound separates admissible from inadmissible shears") {
    auto parabola = [](double c) {
        return [c](double t) { return -c * t * (tau - t) / tau; };
    };
    CompactLoopProfile good;
    good.a_u = [](double) { return 1.0; };
    good.b_u = parabola(1.0);
    const BoundReport ok_rep = b_bound_check(good);
    CHECK(ok_rep.ok);
    CHECK_FALSE(ok_rep.boundary);
    CHECK(ok_rep.min_margin > 0.0);

    CompactLoopProfile bad;
    bad.a_u = [](double) { return 1.0; };
    bad.b_u = parabola(2.0); // dips below -t near the start
    const BoundReport bad_rep = b_bound_check(bad);
    CHECK_FALSE(bad_rep.ok);
    CHECK_FALSE(bad_rep.violations.empty());
}

TEST_CASE("the exponential band bounds hold for admissible profiles") {
    const CompactLoopProfile flat =
        make_profile([](double) { return 1.0; }, nullptr);
    const BoundReport rep = exp_band_check(flat);
    CHECK(rep.ok);
    CHECK(rep.min_margin > 0.0);

    CompactLoopProfile edge;
    edge.a_u = [](double t) { return std::exp(t); };
    edge.b_u = [](double) { return 0.0; };
    const BoundReport boundary_rep = exp_band_check(edge);
    CHECK(boundary_rep.boundary);
    CHECK_FALSE(boundary_rep.ok);

    CompactLoopProfile sheared;
    sheared.a_u = [](double) { return 1.0; };
    sheared.b_u = [](double t) { return std::sin(t); };
    CHECK_THROWS_AS(exp_band_check(sheared), domain_error);
}

TEST_CASE("catalog sections produce admissible compact-factor profiles") {
    const FamilyInstance p11a = instantiate_default(FamilyId::P11a);
    const CompactLoopProfile prof = profile_of_section(p11a.section, 1.0);
    const C1Report c1 = c1_inequality_check(prof);
    CHECK(c1.ok);
    CHECK(c1.min_margin > 0.01);
    const BoundReport bb = b_bound_check(prof);
    CHECK(bb.ok);

    // At u = 1 the P16b compact factor is the trivial profile.
    const FamilyInstance p16b = instantiate_default(FamilyId::P16b);
    const CompactLoopProfile trivial = profile_of_section(p16b.section, 1.0);
    const C1Report t1 = c1_inequality_check(trivial);
    CHECK(t1.ok);
    CHECK(t1.min_margin == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("sampled profiles interpolate linearly and validate their span") {
    const CompactLoopProfile p = profile_from_samples(
        {0.0, pi, tau}, {1.0, 1.2, 1.0}, {0.0, 0.3, 0.0});
    CHECK(p.a_u(pi / 2.0) == doctest::Approx(1.1).epsilon(1e-12));
    CHECK(p.b_u(1.5 * pi) == doctest::Approx(0.15).epsilon(1e-12));
    CHECK(p.a_u(-1.0) == 1.0);  // clamped outside the span
    CHECK(p.a_u(10.0) == 1.0);

    CHECK_THROWS_AS(profile_from_samples({0.0, pi}, {1.0, 1.0}, {}),
                    domain_error); // span stops short of 2pi
    CHECK_THROWS_AS(profile_from_samples({0.0, 2.0, 1.0, tau},
                                         {1.0, 1.0, 1.0, 1.0}, {}),
                    domain_error); // not increasing
    CHECK_THROWS_AS(profile_from_samples({0.0, tau}, {1.0, 2.0}, {}),
                    domain_error); // a(2pi) != 1
}

TEST_CASE("make_profile enforces the closed-profile endpoints") {
    CHECK_THROWS_AS(make_profile([](double t) { return std::exp(t); }, nullptr),
                    domain_error);
    CHECK_THROWS_AS(
        make_profile([](double) { return 1.0; },
                     [](double t) { return t; }),
        domain_error);
    const CompactLoopProfile ok = make_profile(
        [](double t) { return 1.0 + 0.2 * std::sin(t) * std::sin(t); },
        [](double t) { return 0.4 * std::sin(t); });
    CHECK(ok.a_u(0.3) > 1.0);
}

TEST_CASE("derivative estimates are second order accurate at the ends") {
    const auto f = [](double t) { return std::sin(t); };
    CHECK(std::fabs(diff_detail::deriv(f, 0.0) - 1.0) < 1e-5);
    CHECK(std::fabs(diff_detail::deriv(f, 1.0) - std::cos(1.0)) < 1e-6);
    CHECK(std::fabs(diff_detail::deriv(f, tau) - 1.0) < 1e-5);
}
