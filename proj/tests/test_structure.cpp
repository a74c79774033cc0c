#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "qflab/families.hpp"
#include "qflab/structure.hpp"

using namespace qflab;

namespace {

SectionPair plain_section(std::function<double(double, double)> a,
                          std::function<double(double, double)> b,
                          const char* name) {
    SectionPair s;
    s.name = name;
    s.a = std::move(a);
    s.b = std::move(b);
    return s;
}

} // namespace

TEST_CASE("the complex field classifies as the non-proper group case") {
    const ClassificationReport rep =
        classify(loop_of(instantiate_default(FamilyId::Complex)));
    CHECK(rep.kernel_is_diagonal);
    CHECK(rep.decomposable);
    CHECK_FALSE(rep.quasi_simple);
    CHECK(rep.contains_so2);
    CHECK(rep.t_all_elliptic);
    CHECK(rep.t_normal);
    CHECK_FALSE(rep.proper);
    CHECK(rep.consistency_ok);
    CHECK(rep.kernel_monotone_ok);
    CHECK(rep.max_decomposition_residual < 1e-12);
}

TEST_CASE("P11a is a decomposable proper loop with scalar kernel") {
    const ClassificationReport rep =
        classify(loop_of(instantiate_default(FamilyId::P11a)));
    CHECK(rep.decomposable);
    CHECK_FALSE(rep.quasi_simple);
    CHECK_FALSE(rep.contains_so2);
    CHECK(rep.kernel_is_diagonal);
    CHECK(rep.proper);
    CHECK_FALSE(rep.t_normal);
    CHECK(rep.t_all_elliptic);
    CHECK(rep.consistency_ok);
}

TEST_CASE("P16b contains SO2 but its kernel is not scalar") {
    const ClassificationReport rep =
        classify(loop_of(instantiate_default(FamilyId::P16b)));
    CHECK(rep.decomposable);
    CHECK(rep.quasi_simple);
    CHECK(rep.contains_so2);
    CHECK_FALSE(rep.kernel_is_diagonal);
    CHECK(rep.proper);
    CHECK_FALSE(rep.t_normal);
    CHECK(rep.consistency_ok);
}

TEST_CASE("standalone predicates agree with the full classification") {
    const FamilyInstance inst = instantiate_default(FamilyId::P11a);
    CHECK(is_decomposable(inst.section, inst.policy).value);
    CHECK_FALSE(contains_so2(inst.section, inst.policy).value);

    // The P11a section is u-independent and pi-periodic, so the shift
    // identities hold and the compact part is a nontrivial normal subloop.
    const PredicateResult qs = is_quasi_simple(inst.section, inst.policy);
    CHECK_FALSE(qs.value);
    CHECK(qs.max_residual < 1e-9);

    // P11b breaks the identities by a wide margin and is quasi-simple.
    const FamilyInstance p11b = instantiate_default(FamilyId::P11b);
    const PredicateResult qs_b = is_quasi_simple(p11b.section, p11b.policy);
    CHECK(qs_b.value);
    CHECK(qs_b.max_residual >= 1e-3);
}

TEST_CASE("the group detector accepts only the complex section") {
    const FamilyInstance cx = instantiate_default(FamilyId::Complex);
    CHECK(t_normality_check(cx.section, cx.policy));
    const FamilyInstance p16a = instantiate_default(FamilyId::P16a);
    CHECK_FALSE(t_normality_check(p16a.section, p16a.policy));
    const FamilyInstance p16b = instantiate_default(FamilyId::P16b);
    CHECK_FALSE(t_normality_check(p16b.section, p16b.policy));
    const FamilyInstance p11a = instantiate_default(FamilyId::P11a);
    CHECK_FALSE(t_normality_check(p11a.section, p11a.policy));
}

TEST_CASE("kernel translations are scalar for the complex field") {
    const FamilyInstance cx = instantiate_default(FamilyId::Complex);
    const KernelSample ks =
        kernel_translations(cx.section, cx.policy.u_grid);
    CHECK(ks.kernel_is_diagonal);
    CHECK(ks.monotone_ok);
    CHECK(ks.diagnostic.empty());
    for (const auto& e : ks.entries) {
        const double lambda = e.r * (e.k ? -1.0 : 1.0);
        CHECK(e.m.max_abs_diff(Mat2{lambda, 0.0, 0.0, lambda}) <
              1e-9 * std::max(1.0, std::fabs(lambda)));
        CHECK(e.x == doctest::Approx(lambda));
    }
}

TEST_CASE("kernel translations of P11b are diagonal but not scalar") {
    const FamilyInstance inst = instantiate_default(FamilyId::P11b);
    const KernelSample ks =
        kernel_translations(inst.section, inst.policy.u_grid);
    CHECK_FALSE(ks.kernel_is_diagonal);
    CHECK(ks.monotone_ok);
    double worst_off_diag = 0.0;
    double worst_unit_gap = 0.0;
    for (const auto& e : ks.entries) {
        worst_off_diag = std::max({worst_off_diag, std::fabs(e.m.m12),
                                   std::fabs(e.m.m21)});
        worst_unit_gap = std::max(
            worst_unit_gap, std::fabs(e.m.m11 / (e.r * (e.k ? -1.0 : 1.0)) -
                                      1.0));
    }
    CHECK(worst_off_diag < 1e-9); // b vanishes on the axis: diagonal matrices
    CHECK(worst_unit_gap > 0.1);  // but a(r, kpi) is genuinely not 1
}

TEST_CASE("non-monotone axis translations produce a diagnostic") {
    const SectionPair s = plain_section(
        [](double r, double) { return (1.0 + 0.9 * std::sin(3.0 * std::log(r))) / r; },
        [](double, double) { return 0.0; }, "wobble");
    const KernelSample ks = kernel_translations(s, default_policy().u_grid);
    CHECK_FALSE(ks.monotone_ok);
    CHECK(ks.diagnostic.find("not strictly monotone") != std::string::npos);
}

TEST_CASE("ellipticity holds strictly for b = sin t") {
    const SectionPair s = plain_section([](double, double) { return 1.0; },
                                        [](double, double t) { return std::sin(t); },
                                        "sin-shear");
    const EllipticityReport rep = t_ellipticity_check(s, 1.0, default_policy());
    CHECK(rep.ok);
    CHECK_FALSE(rep.boundary);
    CHECK(rep.cross_check_ok);
    CHECK_FALSE(rep.b_is_zero);
    CHECK(rep.max_abs_E <= 2.0 + 1e-12);
}

TEST_CASE("ellipticity flags the tangent case as boundary, not failure") {
    // a(1,t) = (1+|sin t|)/|cos t| makes E(t) = 2 sign(cos t) off the axes.
    const SectionPair s = plain_section(
        [](double, double t) {
            return (1.0 + std::fabs(std::sin(t))) /
                   std::max(std::fabs(std::cos(t)), 1e-8);
        },
        [](double, double) { return 0.0; }, "tangent");
    const EllipticityReport rep = t_ellipticity_check(s, 1.0, default_policy());
    CHECK(rep.boundary);
    CHECK(rep.ok);
    CHECK(rep.b_is_zero);
    CHECK(rep.max_abs_E_off_band <= 2.0 + 1e-9);
}

TEST_CASE("ellipticity fails for a large constant shear") {
    const SectionPair s = plain_section([](double, double) { return 1.0; },
                                        [](double, double) { return 3.0; },
                                        "strong-shear");
    const EllipticityReport rep = t_ellipticity_check(s, 1.0, default_policy());
    CHECK_FALSE(rep.ok);
    CHECK_FALSE(rep.witnesses.empty());
    CHECK(rep.max_abs_E > 2.0);
}

TEST_CASE("classify rejects sections that are not loop sections") {
    const SectionPair s = plain_section([](double, double) { return 1.0; },
                                        [](double, double) { return 0.1; },
                                        "shifted");
    CHECK_THROWS_AS(classify(QuasifieldLoop{s, default_policy()}),
                    domain_error);
}

TEST_CASE("classification reports carry witnesses for failed identities") {
    const ClassificationReport rep =
        classify(loop_of(instantiate_default(FamilyId::P11a)));
    // P11a is not SO2-invariant and quasi-simple: both facts need witnesses.
    bool saw_so2 = false, saw_qs = false;
    for (const auto& w : rep.witnesses) {
        if (w.test.find("a(u,t) = a(u,0)") != std::string::npos ||
            w.test.find("b(u,t) = b(u,0)") != std::string::npos)
            saw_so2 = true;
        if (w.test.find("phi+kpi") != std::string::npos ||
            w.test.find("a(r,kpi) = 1") != std::string::npos ||
            w.test.find("b(r,kpi) = 0") != std::string::npos)
            saw_qs = true;
    }
    CHECK(saw_so2);
    CHECK(saw_qs);
}
