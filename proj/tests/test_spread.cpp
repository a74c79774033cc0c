#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "qflab/spread.hpp"

using namespace qflab;

namespace {

SpreadSample sample_of(std::vector<Mat2> mats) {
    SpreadSample s;
    s.name = "handmade";
    for (std::size_t i = 0; i < mats.size(); ++i)
        s.elements.push_back({{double(i), 0.0}, mats[i]});
    return s;
}

SpreadFamily complex_family() {
    SpreadFamily f;
    f.evaluate = [](double s, double v) { return Mat2{s, -v, v, s}; };
    f.params_for_first_column = [](Vec2 m) {
        return std::array<double, 2>{m.x, m.y};
    };
    f.param_domain = "(s, v) in R^2 minus the origin";
    return f;
}

} // namespace

TEST_CASE("M1 flags pairs whose difference is singular") {
    const Mat2 id{1.0, 0.0, 0.0, 1.0};
    const Mat2 shear{1.0, 1.0, 0.0, 1.0}; // difference is nilpotent
    const M1Report bad = check_M1(sample_of({id, shear}));
    CHECK_FALSE(bad.ok());
    REQUIRE(bad.violations.size() == 1);
    CHECK(bad.violations[0].i == 0);
    CHECK(bad.violations[0].j == 1);
    CHECK(std::fabs(bad.violations[0].det) < 1e-15);

    const Mat2 rot{0.0, -1.0, 1.0, 0.0};
    const M1Report good = check_M1(sample_of({id, id * 2.0, rot}));
    CHECK(good.ok());
    CHECK(good.n_pairs == 3);
    CHECK(good.min_abs_det > 0.5);
}

TEST_CASE("M2 coverage reports the directions scalar matrices miss") {
    std::vector<Mat2> scalars;
    for (int i = 0; i < 40; ++i) {
        const double s = 0.5 * std::pow(4.0, i / 39.0);
        scalars.push_back(Mat2{s, 0.0, 0.0, s});
    }
    const auto targets = coverage_targets();
    const M2Report rep =
        check_M2(sample_of(scalars), {{1.0, 0.0}}, targets);
    CHECK(rep.total == int(targets.size()));
    // scalar * (1,0) stays on the positive x ray: exactly one of the eight
    // directions is reachable.
    CHECK(rep.coverage() == doctest::Approx(0.125).epsilon(1e-12));
    bool missed_vertical = false;
    for (const auto& m : rep.uncovered)
        if (std::fabs(m.target.x) < 1e-12 && m.target.y > 0.0)
            missed_vertical = true;
    CHECK(missed_vertical);
}

TEST_CASE("M2 passes for the complex spread with Newton refinement") {
    const SpreadFamily fam = complex_family();
    std::vector<Mat2> mats;
    for (int i = 0; i < 12; ++i) {
        const double r = 0.5 * std::pow(4.0, i / 11.0);
        for (int k = 0; k < 16; ++k) {
            const double t = tau * k / 16.0;
            mats.push_back(fam.evaluate(r * std::cos(t), r * std::sin(t)));
        }
    }
    const M2Report rep = check_M2(sample_of(mats), {{1.0, 0.0}, {0.0, 1.0}},
                                  coverage_targets(), &fam);
    CHECK(rep.coverage() == doctest::Approx(1.0));
}

TEST_CASE("normalization maps two chosen elements to 0 and the identity") {
    const Mat2 two{2.0, 0.0, 0.0, 2.0};
    const Mat2 three{3.0, 0.0, 0.0, 3.0};
    const Mat2 four{4.0, 0.0, 0.0, 4.0};
    const SpreadSample norm = normalize_spread(sample_of({two, three, four}),
                                               0, 1);
    CHECK(norm.elements[0].m.max_abs_diff(Mat2{0, 0, 0, 0}) < 1e-14);
    CHECK(norm.elements[1].m.max_abs_diff(Mat2{1, 0, 0, 1}) < 1e-14);
    CHECK(norm.elements[2].m.max_abs_diff(Mat2{2, 0, 0, 2}) < 1e-14);

    // Re-normalizing a normalized sample changes nothing.
    const SpreadSample again = normalize_spread(norm, 0, 1);
    for (std::size_t i = 0; i < norm.elements.size(); ++i)
        CHECK(again.elements[i].m.max_abs_diff(norm.elements[i].m) < 1e-14);

    CHECK_THROWS_AS(normalize_spread(sample_of({two, three}), 0, 5),
                    domain_error);
}

TEST_CASE("the loop recovered from a spread multiplies like the family") {
    const SpreadFamily fam = complex_family();
    const auto mul = loop_from_spread(fam);
    const Vec2 p{0.0, 1.0};
    const Vec2 sq = mul(p, p);
    CHECK(sq.x == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(std::fabs(sq.y) < 1e-12);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> coord(-2.0, 2.0);
    for (int i = 0; i < 50; ++i) {
        const Vec2 m{coord(rng), coord(rng)};
        const Vec2 x{coord(rng), coord(rng)};
        if (m.norm() < 0.1)
            continue;
        const Vec2 got = mul(m, x);
        // complex product (m.x + i m.y)(x.x + i x.y)
        CHECK(got.x == doctest::Approx(m.x * x.x - m.y * x.y).epsilon(1e-10));
        CHECK(got.y == doctest::Approx(m.x * x.y + m.y * x.x).epsilon(1e-10));
    }
}

TEST_CASE("both stabilizer normal forms compose to the same matrix") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> lr(-1.5, 1.5);
    std::uniform_real_distribution<double> ang(0.0, tau);
    std::uniform_real_distribution<double> bb(-3.0, 3.0);
    for (int i = 0; i < 200; ++i) {
        const double r = std::exp(lr(rng));
        const double t = ang(rng);
        const double a = std::exp(lr(rng));
        const double b = bb(rng);
        const SigmaConversion conv = sigma_prime_to_sigma(r, t, a, b);
        CHECK(conv.max_diff <= 1e-12 * (1.0 + r * (a + std::fabs(b)) + r));
    }
    CHECK_THROWS_AS(sigma_prime_to_sigma(-1.0, 0.0, 1.0, 0.0), domain_error);
    CHECK_THROWS_AS(sigma_prime_to_sigma(1.0, 0.0, -1.0, 0.0), domain_error);
}
