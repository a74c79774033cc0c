#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qflab/linalg.hpp"
#include "qflab/policy.hpp"
#include "qflab/roots.hpp"
#include "qflab/section.hpp"
#include "qflab/spread.hpp"

namespace qflab {

// The catalog of locally compact 2-dimensional quasifield families, plus the
// complex field as the degenerate reference case.
enum class FamilyId {
    P11a, P11b, P11c, P12a, P12b, P13a, P13b, P13c, P14,
    P16a, P16b, RemarkF, P17a, P17b,
    Complex
};

inline const std::vector<FamilyId>& catalog_families() {
    static const std::vector<FamilyId> ids = {
        FamilyId::P11a, FamilyId::P11b, FamilyId::P11c, FamilyId::P12a,
        FamilyId::P12b, FamilyId::P13a, FamilyId::P13b, FamilyId::P13c,
        FamilyId::P14,  FamilyId::P16a, FamilyId::P16b, FamilyId::RemarkF,
        FamilyId::P17a, FamilyId::P17b};
    return ids;
}

inline std::string to_string(FamilyId id) {
    switch (id) {
    case FamilyId::P11a: return "P11a";
    case FamilyId::P11b: return "P11b";
    case FamilyId::P11c: return "P11c";
    case FamilyId::P12a: return "P12a";
    case FamilyId::P12b: return "P12b";
    case FamilyId::P13a: return "P13a";
    case FamilyId::P13b: return "P13b";
    case FamilyId::P13c: return "P13c";
    case FamilyId::P14: return "P14";
    case FamilyId::P16a: return "P16a";
    case FamilyId::P16b: return "P16b";
    case FamilyId::RemarkF: return "RemarkF";
    case FamilyId::P17a: return "P17a";
    case FamilyId::P17b: return "P17b";
    case FamilyId::Complex: return "complex";
    }
    return "?";
}

inline std::optional<FamilyId> family_from_string(const std::string& s) {
    for (FamilyId id : catalog_families())
        if (to_string(id) == s)
            return id;
    if (s == "complex" || s == "Complex")
        return FamilyId::Complex;
    return std::nullopt;
}

struct FamilySpec {
    FamilyId id = FamilyId::Complex;
    std::map<std::string, double> params;
    std::function<double(double)> f; // RemarkF only
    std::string f_name;

    double at(const std::string& key) const {
        auto it = params.find(key);
        if (it == params.end())
            throw domain_error("missing parameter '" + key + "' for family " +
                               to_string(id));
        return it->second;
    }
};

inline std::vector<std::string> param_names(FamilyId id) {
    switch (id) {
    case FamilyId::P11a: return {"w"};
    case FamilyId::P12b: return {"gamma"};
    case FamilyId::P13a: return {"s", "w", "z", "p", "q"};
    case FamilyId::P13b: return {"w", "z", "p", "q"};
    case FamilyId::P13c: return {"k", "w", "z", "p", "q"};
    case FamilyId::P14: return {"w", "z", "p", "q"};
    case FamilyId::P16a: return {"w", "c"};
    case FamilyId::P16b: return {"d"};
    case FamilyId::P17a: return {"p", "q", "c", "d"};
    case FamilyId::P17b: return {"m", "n", "c", "d"};
    default: return {};
    }
}

inline FamilySpec default_spec(FamilyId id) {
    FamilySpec s;
    s.id = id;
    switch (id) {
    case FamilyId::P11a: s.params = {{"w", 2.0}}; break;
    case FamilyId::P12b: s.params = {{"gamma", 1.0}}; break;
    case FamilyId::P13a:
        s.params = {{"s", 0.5}, {"w", -1.0}, {"z", 0.0}, {"p", 1.0}, {"q", 0.0}};
        break;
    case FamilyId::P13b:
        s.params = {{"w", -1.0}, {"z", 0.0}, {"p", 1.0}, {"q", 0.0}};
        break;
    case FamilyId::P13c:
        s.params = {{"k", 2.0}, {"w", -1.0}, {"z", 0.0}, {"p", 2.0}, {"q", 0.0}};
        break;
    case FamilyId::P14:
        s.params = {{"w", 0.0}, {"z", -1.0}, {"p", 0.0}, {"q", 1.0}};
        break;
    case FamilyId::P16a: s.params = {{"w", 2.0}, {"c", 0.0}}; break;
    case FamilyId::P16b: s.params = {{"d", 1.0}}; break;
    case FamilyId::RemarkF:
        s.f = [](double u) { return u + u * u * u; };
        s.f_name = "u + u^3";
        break;
    case FamilyId::P17a:
        s.params = {{"p", 1.0}, {"q", 1.0}, {"c", 0.0}, {"d", -0.5}};
        break;
    case FamilyId::P17b:
        // The simplest interior tuple: d = 1 gives exactly the complex
        // field and d on the equality locus of the published inequality
        // leaves the matching angles resolvable only to cube-root accuracy,
        // so the documented default sits strictly inside at d = 3/2.
        s.params = {{"m", 1.0}, {"n", 2.0}, {"c", 0.0}, {"d", 1.5}};
        break;
    default: break;
    }
    return s;
}

inline std::string constraint_summary(FamilyId id) {
    switch (id) {
    case FamilyId::P11a: return "w > 1";
    case FamilyId::P11b: return "(no parameters)";
    case FamilyId::P11c: return "(no parameters)";
    case FamilyId::P12a: return "(no parameters)";
    case FamilyId::P12b: return "0 < |gamma| <= 1";
    case FamilyId::P13a:
        return "0 < s < 1; z^2 + 4w(1-s^2) <= 0; q^2 - 4p(1-s^2) <= 0";
    case FamilyId::P13b: return "(z/2)^2 <= -w-1; (q/2)^2 <= p-1";
    case FamilyId::P13c:
        return "k != 0; (4+k^2)(z^2+(w+1)^2) <= k^2(1-w)^2; "
               "(4+k^2)(q^2+(p-1)^2) <= k^2(p+1)^2; (w,z,p,q) != (-1,0,1,0)";
    case FamilyId::P14:
        return "(3w)^2 <= -16z(z+1); (3p)^2 <= 16q(q-1); q > 0; z < 0; "
               "(w,z,p,q) != (0,-1/3,0,3)";
    case FamilyId::P16a: return "0 < w; w != 1; (w-1)^2 c^2 <= 4w";
    case FamilyId::P16b: return "4d^2 >= 1";
    case FamilyId::RemarkF:
        return "f continuous and strictly increasing on [0,inf), nonlinear, "
               "f(0) = 0, f(u) -> inf";
    case FamilyId::P17a:
        return "p = q > 0 with -1 <= d < 0, or q > 0, p = (k-1)/(k+1) q for "
               "an integer k >= 1 with d > 0; -(q+p)^2 A + (q-p)^2 B - 4AB "
               ">= 0 where A = ((d-1)^2+c^2)/(4d), B = ((d+1)^2+c^2)/(4d)";
    case FamilyId::P17b:
        return "coprime integers m, n: m = n = 1 with -1 <= d < 0, or "
               "n = m+1 with d > 0, or odd m with n = m+2 and d > 0; "
               "(n-m)^2 B >= (n+m)^2 A where A = ((d-1)^2+c^2)/(4d), "
               "B = ((d+1)^2+c^2)/(4d)";
    case FamilyId::Complex: return "(no parameters)";
    }
    return "";
}

namespace fam_detail {

inline bool is_integer(double x, double tol = 1e-9) {
    return std::fabs(x - std::round(x)) <= tol;
}

inline long long igcd(long long a, long long b) {
    a = std::llabs(a);
    b = std::llabs(b);
    while (b) {
        const long long t = a % b;
        a = b;
        b = t;
    }
    return a;
}

} // namespace fam_detail

// Check every published parameter constraint; returns the named violations
// (empty means the tuple is admissible).
inline std::vector<std::string> validate(const FamilySpec& spec) {
    std::vector<std::string> bad;
    auto need = [&](const char* k) -> std::optional<double> {
        auto it = spec.params.find(k);
        if (it == spec.params.end()) {
            bad.push_back(std::string("missing parameter '") + k + "'");
            return std::nullopt;
        }
        return it->second;
    };
    switch (spec.id) {
    case FamilyId::P11a: {
        if (auto w = need("w"); w && !(*w > 1.0))
            bad.push_back("requires w > 1, got w = " + std::to_string(*w));
        break;
    }
    case FamilyId::P11b:
    case FamilyId::P11c:
    case FamilyId::P12a:
    case FamilyId::Complex:
        break;
    case FamilyId::P12b: {
        if (auto g = need("gamma");
            g && !(0.0 < std::fabs(*g) && std::fabs(*g) <= 1.0))
            bad.push_back("requires 0 < |gamma| <= 1, got gamma = " +
                          std::to_string(*g));
        break;
    }
    case FamilyId::P13a: {
        auto s = need("s"), w = need("w"), z = need("z"), p = need("p"),
             q = need("q");
        if (s && !(0.0 < *s && *s < 1.0))
            bad.push_back("requires 0 < s < 1, got s = " + std::to_string(*s));
        if (s && w && z && *z * *z + 4.0 * *w * (1.0 - *s * *s) > 0.0)
            bad.push_back("requires z^2 + 4w(1-s^2) <= 0");
        if (s && p && q && *q * *q - 4.0 * *p * (1.0 - *s * *s) > 0.0)
            bad.push_back("requires q^2 - 4p(1-s^2) <= 0");
        break;
    }
    case FamilyId::P13b: {
        auto w = need("w"), z = need("z"), p = need("p"), q = need("q");
        if (w && z && (*z / 2.0) * (*z / 2.0) > -*w - 1.0)
            bad.push_back("requires (z/2)^2 <= -w-1");
        if (p && q && (*q / 2.0) * (*q / 2.0) > *p - 1.0)
            bad.push_back("requires (q/2)^2 <= p-1");
        break;
    }
    case FamilyId::P13c: {
        auto k = need("k"), w = need("w"), z = need("z"), p = need("p"),
             q = need("q");
        if (k && *k == 0.0)
            bad.push_back("requires k != 0");
        if (k && w && z) {
            const double lhs = (4.0 + *k * *k) * (*z * *z + (*w + 1.0) * (*w + 1.0));
            const double rhs = *k * *k * (1.0 - *w) * (1.0 - *w);
            if (lhs > rhs)
                bad.push_back("requires (4+k^2)(z^2+(w+1)^2) <= k^2(1-w)^2");
        }
        if (k && p && q) {
            const double lhs = (4.0 + *k * *k) * (*q * *q + (*p - 1.0) * (*p - 1.0));
            const double rhs = *k * *k * (*p + 1.0) * (*p + 1.0);
            if (lhs > rhs)
                bad.push_back("requires (4+k^2)(q^2+(p-1)^2) <= k^2(p+1)^2");
        }
        if (w && z && p && q && *w == -1.0 && *z == 0.0 && *p == 1.0 && *q == 0.0)
            bad.push_back("excluded tuple (w,z,p,q) = (-1,0,1,0)");
        break;
    }
    case FamilyId::P14: {
        auto w = need("w"), z = need("z"), p = need("p"), q = need("q");
        if (w && z && 9.0 * *w * *w > -16.0 * *z * (*z + 1.0))
            bad.push_back("requires (3w)^2 <= -16z(z+1)");
        if (p && q && 9.0 * *p * *p > 16.0 * *q * (*q - 1.0))
            bad.push_back("requires (3p)^2 <= 16q(q-1)");
        if (q && !(*q > 0.0))
            bad.push_back("requires q > 0");
        if (z && !(*z < 0.0))
            bad.push_back("requires z < 0");
        if (w && z && p && q && *w == 0.0 && *z == -1.0 / 3.0 && *p == 0.0 &&
            *q == 3.0)
            bad.push_back("excluded tuple (w,z,p,q) = (0,-1/3,0,3)");
        break;
    }
    case FamilyId::P16a: {
        auto w = need("w"), c = need("c");
        if (w && !(*w > 0.0))
            bad.push_back("requires 0 < w, got w = " + std::to_string(*w));
        if (w && *w == 1.0)
            bad.push_back("requires w != 1");
        if (w && c && (*w - 1.0) * (*w - 1.0) * *c * *c > 4.0 * *w)
            bad.push_back("requires (w-1)^2 c^2 <= 4w");
        break;
    }
    case FamilyId::P16b: {
        if (auto d = need("d"); d && 4.0 * *d * *d < 1.0)
            bad.push_back("requires 4d^2 >= 1, got 4d^2 = " +
                          std::to_string(4.0 * *d * *d));
        break;
    }
    case FamilyId::RemarkF: {
        if (!spec.f) {
            bad.push_back("missing monotone function f");
            break;
        }
        if (std::fabs(spec.f(0.0)) > 1e-12)
            bad.push_back("requires f(0) = 0");
        double prev = spec.f(0.0);
        bool increasing = true;
        for (int i = 1; i <= 32; ++i) {
            const double u = 0.25 * i;
            const double v = spec.f(u);
            if (!(v > prev))
                increasing = false;
            prev = v;
        }
        if (!increasing)
            bad.push_back("requires f strictly increasing on the sampled grid");
        if (!(spec.f(1.0) > 0.0))
            bad.push_back("requires f(1) > 0");
        bool nonlinear = false;
        const double f1 = spec.f(1.0);
        for (int i = 1; i <= 32 && !nonlinear; ++i) {
            const double u = 0.25 * i;
            if (std::fabs(spec.f(u) - f1 * u) > 1e-9 * std::max(1.0, std::fabs(f1 * u)))
                nonlinear = true;
        }
        if (!nonlinear)
            bad.push_back("requires f nonlinear (f(u) = f(1) u is the complex field)");
        break;
    }
    case FamilyId::P17a: {
        auto p = need("p"), q = need("q"), c = need("c"), d = need("d");
        if (!(p && q && c && d))
            break;
        bool branch_ok = false;
        if (*d < 0.0) {
            if (*p == *q && *q > 0.0 && -1.0 <= *d)
                branch_ok = true;
            else
                bad.push_back("for d < 0 requires p = q > 0 and -1 <= d < 0");
        } else if (*d > 0.0) {
            if (*q > 0.0 && *q != *p) {
                // p = (k-1)/(k+1) q for an integer k >= 1.
                const double k = (*q + *p) / (*q - *p);
                if (k >= 1.0 - 1e-9 && fam_detail::is_integer(k))
                    branch_ok = true;
            }
            if (*q > 0.0 && *p == 0.0)
                branch_ok = true; // k = 1
            if (!branch_ok)
                bad.push_back("for d > 0 requires q > 0 and p = (k-1)/(k+1) q "
                              "with integer k >= 1");
        } else {
            bad.push_back("requires d != 0");
        }
        const double A = ((*d - 1.0) * (*d - 1.0) + *c * *c) / (4.0 * *d);
        const double B = ((*d + 1.0) * (*d + 1.0) + *c * *c) / (4.0 * *d);
        const double grand =
            -(*q + *p) * (*q + *p) * A + (*q - *p) * (*q - *p) * B - 4.0 * A * B;
        if (!(grand >= 0.0))
            bad.push_back("requires -(q+p)^2 A + (q-p)^2 B - 4AB >= 0, got " +
                          std::to_string(grand));
        break;
    }
    case FamilyId::P17b: {
        auto m = need("m"), n = need("n"), c = need("c"), d = need("d");
        if (!(m && n && c && d))
            break;
        if (!fam_detail::is_integer(*m) || !fam_detail::is_integer(*n)) {
            bad.push_back("requires integer m, n");
            break;
        }
        const long long mi = llround(*m), ni = llround(*n);
        if (fam_detail::igcd(mi, ni) != 1)
            bad.push_back("requires coprime m, n");
        bool branch_ok = false;
        if (mi == 1 && ni == 1 && -1.0 <= *d && *d < 0.0)
            branch_ok = true;
        if (mi >= 1 && ni == mi + 1 && *d > 0.0)
            branch_ok = true;
        if (mi >= 1 && mi % 2 == 1 && ni == mi + 2 && *d > 0.0)
            branch_ok = true;
        if (!branch_ok)
            bad.push_back("requires m = n = 1 with -1 <= d < 0, or n = m+1 "
                          "with d > 0, or odd m with n = m+2 and d > 0");
        if (*d != 0.0) {
            const double A = ((*d - 1.0) * (*d - 1.0) + *c * *c) / (4.0 * *d);
            const double B = ((*d + 1.0) * (*d + 1.0) + *c * *c) / (4.0 * *d);
            const double nm = double(ni - mi), np = double(ni + mi);
            if (!(nm * nm * B >= np * np * A))
                bad.push_back("requires (n-m)^2 B >= (n+m)^2 A");
        }
        break;
    }
    }
    return bad;
}

struct ExpectedVerdicts {
    bool decomposable = false;
    bool quasi_simple = false;
    bool contains_so2 = false;
    bool kernel_is_diagonal = false;
};

inline ExpectedVerdicts expected_verdicts(FamilyId id) {
    switch (id) {
    case FamilyId::P11a: return {true, false, false, true};
    case FamilyId::P11b: return {false, true, false, false};
    case FamilyId::P11c: return {false, true, false, true};
    case FamilyId::P12a: return {false, true, false, true};
    case FamilyId::P12b: return {false, true, false, true};
    case FamilyId::P13a: return {false, true, false, true};
    case FamilyId::P13b: return {false, true, false, true};
    case FamilyId::P13c: return {false, true, false, true};
    case FamilyId::P14: return {false, true, false, true};
    case FamilyId::P16a: return {true, true, true, false};
    case FamilyId::P16b: return {true, true, true, false};
    case FamilyId::RemarkF: return {true, true, true, false};
    case FamilyId::P17a: return {false, true, false, false};
    case FamilyId::P17b: return {true, false, false, true};
    case FamilyId::Complex: return {true, false, true, true};
    }
    return {};
}

// ------------------------------------------------------------------------
// Spread evaluators.  Parameters (p1, p2) are each family's own coordinates.

namespace fam_detail {

inline Mat2 rot_ccw(double phi) {
    const double c = std::cos(phi), s = std::sin(phi);
    return {c, -s, s, c};
}

inline Mat2 sp_complex(double s, double v) { return {s, -v, v, s}; }

inline Mat2 sp_P11a(double s, double v, double w) {
    return {s, -v / w, v, s};
}

inline Mat2 sp_P11b(double al, double be) {
    if (al >= -0.75 * be * be)
        return {al, -al * be - be * be * be, be, al + be * be};
    return {al, al * be / 3.0, be, al / 9.0 + be * be / 3.0};
}

inline Mat2 sp_P11c(double s, double v) {
    return {v, -s * s * s / 3.0, s, s * s + v};
}

inline Mat2 sp_P12a(double s, double v) {
    return {v, -s * s * s / 3.0 - s, s, s * s + v};
}

inline Mat2 sp_P12b(double u, double v, double gam) {
    const double cu = std::cos(u), su = std::sin(u);
    return {v - gam * su, u + gam * (cu - 1.0),
            gam * (cu - 1.0) - u, v + gam * su};
}

struct P13aParams { double s, w, z, p, q; };

inline Mat2 sp_P13a(double al, double be, const P13aParams& c) {
    const double e1 = (1.0 - c.s) / (1.0 + c.s);
    const double e2 = 1.0 / (1.0 + c.s);
    if (be >= 0.0)
        return {al, c.w * std::pow(be, e1), be, c.z * std::pow(be, e2) + al};
    const double nb = -be;
    return {al, c.p * std::pow(nb, e1), be, c.q * std::pow(nb, e2) + al};
}

struct P13bParams { double w, z, p, q; };

inline Mat2 sp_P13b(double al, double be, const P13bParams& c) {
    if (be == 0.0)
        return {al, 0.0, 0.0, al};
    if (be > 0.0) {
        const double lb = std::log(be);
        return {al, c.w * be - c.z * be * lb - be * lb * lb,
                be, al + c.z * be + 2.0 * be * lb};
    }
    const double lb = std::log(-be);
    return {al, -c.p * be - be * lb * lb + c.q * be * lb,
            be, c.q * (-be) + al + 2.0 * be * lb};
}

struct P13cParams { double k, w, z, p, q; };

inline Mat2 sp_P13c(double u, double be, const P13cParams& c) {
    if (be == 0.0)
        return {u, 0.0, 0.0, u};
    if (be > 0.0) {
        const double l = std::log(be) / c.k;
        const double sl = std::sin(l), cl = std::cos(l);
        return Mat2{u - (c.w + 1.0) * sl * cl + c.z * sl * sl,
                    c.w * cl * cl - c.z * sl * cl - sl * sl,
                    cl * cl - c.z * sl * cl - c.w * sl * sl,
                    c.z * cl * cl + (c.w + 1.0) * sl * cl + u} *
               be;
    }
    const double l1 = std::log(-be) / c.k;
    const double sl = std::sin(l1), cl = std::cos(l1);
    return Mat2{(c.p - 1.0) * sl * cl - c.q * sl * sl - u,
                c.q * sl * cl - c.p * cl * cl - sl * sl,
                cl * cl + c.q * sl * cl + c.p * sl * sl,
                (1.0 - c.p) * sl * cl - c.q * cl * cl - u} *
           be;
}

struct P14Params { double w, z, p, q; };

inline Mat2 sp_P14(double al, double be, const P14Params& c) {
    const double h = al + be * be / 2.0;
    double m12, m22;
    if (h >= 0.0) {
        m12 = (-c.p / c.q) * al + (c.p / c.q) * std::pow(h, 1.5) +
              ((1.0 - c.q) / c.q) * be * h - be * be * be / (3.0 * c.q);
        m22 = (-c.p / c.q) * be + be * be / (2.0 * c.q) + h;
    } else {
        m12 = (-c.p / c.q) * al + (c.w / c.q) * std::pow(-h, 1.5) +
              ((c.z + 1.0) / c.q) * be * h - be * be * be / (3.0 * c.q);
        m22 = (-c.p / c.q) * be + be * be / (2.0 * c.q) - (c.z / c.q) * h;
    }
    return {al, m12, be, m22};
}

inline Mat2 sp_P16a(double s, double phi, double w, double c) {
    return rot_ccw(phi) * Mat2{s, c * (std::pow(s, w) - s), 0.0, std::pow(s, w)};
}

inline Mat2 sp_P16b(double s, double phi, double d) {
    const double es = std::exp(s);
    return rot_ccw(phi) * Mat2{es, es * s / d, 0.0, es};
}

inline Mat2 sp_RemarkF(double u, double phi,
                       const std::function<double(double)>& f) {
    const double f1 = f(1.0);
    const double c = std::cos(phi), s = std::sin(phi);
    return {u * c, -f(u) * s / f1, u * s, f(u) * c / f1};
}

struct P17aParams { double p, q, c, d; };

inline Mat2 sp_P17a(double s, double t, const P17aParams& cp) {
    const double E = std::exp(cp.q * pi);
    const double e = std::exp(cp.q * t - cp.p * s);
    const double cs = std::cos(s), ss = std::sin(s);
    const double ct = std::cos(t), st = std::sin(t);
    const double al = e * (cs * ct + cp.c * st * cs + cp.d * st * ss);
    const double be = e * (cp.d * cs * st - ss * ct - cp.c * ss * st);
    const double ga = e * (cp.d * ct * ss - st * cs + cp.c * ct * cs);
    const double de = e * (cp.d * ct * cs + st * ss - cp.c * ct * ss);
    return {(al + E) / (1.0 + E), (ga - cp.c * al) / (cp.d * (1.0 + E)),
            be / (1.0 + E), (de - cp.c * be + cp.d * E) / (cp.d * (1.0 + E))};
}

struct P17bParams { double m, n, c, d; };

inline Mat2 p17b_inner(double tau, const P17bParams& cp) {
    const double cn = std::cos(cp.n * tau), sn = std::sin(cp.n * tau);
    const double cm = std::cos(cp.m * tau), sm = std::sin(cp.m * tau);
    const double a11 = cn * cm + cp.c * sn * cm + cp.d * sn * sm;
    const double a12 = cp.d * sn * cm - cn * sm - cp.c * sn * sm;
    const double a21 = cp.d * cn * sm - sn * cm + cp.c * cn * sm;
    const double a22 = cp.d * cn * cm + sn * sm - cp.c * cn * sm;
    return {a11, (-cp.c / cp.d) * a11 + a21 / cp.d,
            a12, (-cp.c / cp.d) * a12 + a22 / cp.d};
}

inline Mat2 sp_P17b(double s, double tau, const P17bParams& cp) {
    return p17b_inner(tau, cp) * s;
}

// ------------------------------------------------------------------------
// Inverse solvers: (r, t) -> (a, b) through the family's own substitution
// variables, plus first-column parameter recovery for the spread view.

using EvalAB = std::function<std::pair<double, double>(double, double)>;

// Families whose spread element's first column equals the parameter vector:
// walk out along the ray (cos t, -sin t) until sqrt(det) matches r.
inline std::pair<double, double>
ray_solve(const std::function<Mat2(double, double)>& col1_builder, double r,
          double t) {
    double C, S;
    snap_direction(t, C, S);
    S = -S;
    auto h = [&](double rho) {
        const double det = col1_builder(rho * C, rho * S).det();
        return std::sqrt(std::max(det, 0.0)) - r;
    };
    double lo, hi;
    bracket_increasing(h, r, lo, hi);
    const double rho = brent_root(h, lo, hi);
    const GroupCoords g = decompose_gl2plus(col1_builder(rho * C, rho * S));
    if (std::fabs(g.u - r) > 1e-9 * std::max(1.0, r))
        throw numeric_error("ray_solve: radius mismatch " + std::to_string(g.u) +
                            " vs " + std::to_string(r));
    return {g.k, g.l};
}

inline std::pair<double, double> sec_P11a(double r, double t, double w) {
    const double ct = std::cos(t), st = std::sin(t);
    const double a = 1.0 / std::sqrt(ct * ct + st * st / w);
    return {a, a * ((1.0 - w) / w) * st * ct};
}

// P12b substitution: u solves u - gamma cos u + gamma = rho sin t, then
// v = rho cos t + gamma sin u; rho is fixed by sqrt(det) = r.
inline std::pair<double, double> p12b_uv(double rho_s, double rho_c,
                                         double gam) {
    auto g = [&](double u) { return u - gam * std::cos(u) + gam - rho_s; };
    const double pad = 2.0 * std::fabs(gam) + 1e-12;
    const double u = brent_root(g, rho_s - pad, rho_s + pad);
    return {u, rho_c + gam * std::sin(u)};
}

inline std::pair<double, double> sec_P12b(double r, double t, double gam) {
    double C, S;
    snap_direction(t, C, S);
    auto h = [&](double rho) {
        const auto [u, v] = p12b_uv(rho * S, rho * C, gam);
        const double det =
            u * u + v * v - 2.0 * gam * gam * (1.0 - std::cos(u));
        return std::sqrt(std::max(det, 0.0)) - r;
    };
    double lo, hi;
    bracket_increasing(h, r, lo, hi);
    const double rho = brent_root(h, lo, hi);
    auto [u, v] = p12b_uv(rho * S, rho * C, gam);
    const double tol = 1e-9 * std::max(1.0, r);
    GroupCoords g = decompose_gl2plus(sp_P12b(u, v, gam));
    if (std::fabs(g.u - r) > tol && std::fabs(S) > 1e-12) {
        // Where 1 + gam sin u vanishes, u moves steeply with rho and the
        // rho-space root leaves a visible det residual.  Polish in u, where
        // the derivative of det stays O(1); v follows the chart relation
        // v = (u - gam cos u + gam) (C / S) + gam sin u.  Only engaged when
        // the plain result misses: the C / S factor would shred precision
        // at small angles, and no tangency lives there anyway.
        const double ratio = C / S;
        for (int i = 0; i < 50; ++i) {
            const double su = std::sin(u), cu = std::cos(u);
            const double vv = (u - gam * cu + gam) * ratio + gam * su;
            const double F =
                u * u + vv * vv - 2.0 * gam * gam * (1.0 - cu) - r * r;
            const double dv = (1.0 + gam * su) * ratio + gam * cu;
            const double dF = 2.0 * u + 2.0 * vv * dv - 2.0 * gam * gam * su;
            if (!std::isfinite(dF) || std::fabs(dF) < 1e-14)
                break;
            const double step = F / dF;
            u -= step;
            if (std::fabs(step) < 1e-15 * std::max(1.0, std::fabs(u)))
                break;
        }
        v = (u - gam * std::cos(u) + gam) * ratio + gam * std::sin(u);
        g = decompose_gl2plus(sp_P12b(u, v, gam));
    }
    if (std::fabs(g.u - r) > tol)
        throw numeric_error("P12b: radius mismatch");
    return {g.k, g.l};
}

inline std::vector<double> log_grid_around(double center, double halfwidth,
                                           int n) {
    std::vector<double> g(n);
    const double lo = std::log(center) - halfwidth;
    const double step = 2.0 * halfwidth / (n - 1);
    for (int i = 0; i < n; ++i)
        g[i] = std::exp(lo + step * i);
    return g;
}

// P13c substitution: with cot t eliminated, the branch variable beta (or its
// negative) satisfies a one-dimensional equation solved on a log grid.
inline std::pair<double, double> sec_P13c(double r, double t,
                                          const P13cParams& cp) {
    t = wrap_angle(t);
    const double st = std::sin(t), ct = std::cos(t);
    if (std::fabs(st) < 1e-12)
        return {1.0, 0.0};
    const double cot = ct / st;
    std::function<double(double)> u_of, h;
    if (st < 0.0) { // t in (pi, 2pi): beta > 0 piece
        u_of = [&cp, cot](double be) {
            const double l = std::log(be) / cp.k;
            const double sl = std::sin(l), cl = std::cos(l);
            const double g2 = cl * cl - cp.z * sl * cl - cp.w * sl * sl;
            return (cp.w + 1.0) * sl * cl - cp.z * sl * sl - cot * g2;
        };
        h = [&cp, &u_of, r](double be) {
            const double u = u_of(be);
            return be * std::sqrt(u * u + u * cp.z - cp.w) - r;
        };
    } else { // t in (0, pi): beta < 0 piece, solve bt = -beta > 0
        u_of = [&cp, cot](double bt) {
            const double l1 = std::log(bt) / cp.k;
            const double sl = std::sin(l1), cl = std::cos(l1);
            const double i2 = cl * cl + cp.q * sl * cl + cp.p * sl * sl;
            return (cp.p - 1.0) * sl * cl - cp.q * sl * sl + cot * i2;
        };
        h = [&cp, &u_of, r](double bt) {
            const double u = u_of(bt);
            return bt * std::sqrt(u * u + u * cp.q + cp.p) - r;
        };
    }
    const auto grid = log_grid_around(r, 14.0, 1201);
    const auto roots = scan_roots(h, grid);
    if (roots.empty())
        throw numeric_error("P13c: no branch-variable root at r=" +
                            std::to_string(r) + " t=" + std::to_string(t));
    const double be = roots.front();
    const Mat2 M = (st < 0.0) ? sp_P13c(u_of(be), be, cp)
                              : sp_P13c(u_of(be), -be, cp);
    const GroupCoords g = decompose_gl2plus(M);
    if (std::fabs(g.u - r) > 1e-8 * std::max(1.0, r) ||
        std::fabs(angle_diff(g.t, t)) > 1e-8)
        throw numeric_error("P13c: solution check failed");
    return {g.k, g.l};
}

inline std::pair<double, double> sec_P16a(double r, double /*t*/, double w,
                                          double c) {
    const double e = (1.0 - w) / (1.0 + w);
    const double re = std::pow(r, e);
    return {re, c * (1.0 / re - re)};
}

inline std::pair<double, double>
sec_RemarkF(double r, const std::function<double(double)>& f) {
    const double f1 = f(1.0);
    auto g = [&](double u) { return u * f(u) / f1 - r * r; };
    double lo, hi;
    bracket_increasing(g, r, lo, hi);
    const double u = brent_root(g, lo, hi);
    return {u / r, 0.0};
}

// Two-angle families: all candidate inner angles tau whose first-column
// direction matches, refined from a fine scan; every root must yield the
// same section value.
class P17bSolver {
public:
    explicit P17bSolver(const P17bParams& cp) : cp_(cp) {
        const int n = 2049;
        grid_.resize(n);
        for (int i = 0; i < n; ++i)
            grid_[i] = tau * i / double(n - 1);
    }

    std::vector<double> direction_roots(double target_angle) const {
        auto diff = [&](double tv) {
            const Mat2 M = p17b_inner(tv, cp_);
            return angle_diff(std::atan2(-M.m21, M.m11), target_angle);
        };
        return scan_roots(diff, grid_, pi);
    }

    std::pair<double, double> eval(double r, double t) const {
        const auto roots = direction_roots(wrap_angle(t));
        if (roots.empty())
            throw numeric_error("P17b: no inner angle matches t=" +
                                std::to_string(t));
        std::vector<std::pair<double, double>> vals;
        for (double tv : roots) {
            const Mat2 M = p17b_inner(tv, cp_);
            const double det = M.det();
            if (!(det > 0.0))
                throw numeric_error("P17b: inner determinant not positive");
            const GroupCoords g = decompose_gl2plus(M * (r / std::sqrt(det)));
            vals.emplace_back(g.k, g.l);
        }
        for (std::size_t i = 1; i < vals.size(); ++i)
            if (std::fabs(vals[i].first - vals[0].first) > 1e-9 ||
                std::fabs(vals[i].second - vals[0].second) > 1e-9)
                throw transitivity_error("P17b: matching angles disagree");
        return vals.front();
    }

    std::array<double, 2> params_for_first_column(Vec2 m) const {
        const double target = std::atan2(-m.y, m.x);
        const auto roots = direction_roots(wrap_angle(target));
        if (roots.empty())
            throw numeric_error("P17b: no first-column direction match");
        std::vector<std::array<double, 2>> cands;
        Mat2 first;
        bool have_first = false;
        for (double tv : roots) {
            const Mat2 M = p17b_inner(tv, cp_);
            const double n1 = std::hypot(M.m11, M.m21);
            const double s = m.norm() / n1;
            const Vec2 col{M.m11 * s, M.m21 * s};
            if ((col - m).norm() > 1e-9 * std::max(1.0, m.norm()))
                continue;
            const Mat2 full = M * s;
            if (have_first) {
                if (full.max_abs_diff(first) > 1e-9)
                    throw transitivity_error(
                        "P17b: distinct spread elements share a first column");
            } else {
                first = full;
                have_first = true;
            }
            cands.push_back({s, tv});
        }
        if (cands.empty())
            throw numeric_error("P17b: first-column match failed");
        return cands.front();
    }

private:
    P17bParams cp_;
    std::vector<double> grid_;
};

// One-angle exponential families: a damped two-variable Newton in the
// substitution variables (s, t), warm-started along each radius row and
// multistarted from a ladder of seeds otherwise.
class P17aSolver {
public:
    explicit P17aSolver(const P17aParams& cp) : cp_(cp) {}

    std::pair<double, double> eval(double r, double t) {
        std::lock_guard<std::mutex> lock(mu_);
        auto wi = warm_.find(r);
        if (wi != warm_.end()) {
            if (auto x = newton(wi->second, r, t)) {
                warm_[r] = *x;
                const GroupCoords g = decompose_gl2plus(sp_P17a((*x)[0], (*x)[1], cp_));
                return {g.k, g.l};
            }
        }
        std::vector<std::array<double, 2>> sols = multistart(r, t);
        if (sols.empty())
            throw numeric_error("P17a: no spread parameters at r=" +
                                std::to_string(r) + " t=" + std::to_string(t));
        std::vector<std::pair<double, double>> vals;
        for (const auto& x : sols) {
            const GroupCoords g = decompose_gl2plus(sp_P17a(x[0], x[1], cp_));
            vals.emplace_back(g.k, g.l);
        }
        for (std::size_t i = 1; i < vals.size(); ++i)
            if (std::fabs(vals[i].first - vals[0].first) > 1e-7 ||
                std::fabs(vals[i].second - vals[0].second) > 1e-7)
                throw transitivity_error("P17a: matching parameters disagree");
        warm_[r] = sols.front();
        return vals.front();
    }

    std::array<double, 2> params_for_first_column(Vec2 m) const {
        const double lr = std::log(std::max(m.norm(), 1e-300));
        std::array<double, 2> best{};
        Mat2 first;
        bool have = false;
        for (int i = 0; i < 61; ++i) {
            const double tv = -9.0 + 18.0 * i / 60.0;
            std::array<double, 2> x{tv, (lr + cp_.p * tv) / cp_.q};
            auto ev = [this](double s, double t) { return sp_P17a(s, t, cp_); };
            if (!detail::newton_on_evaluation(ev, {1.0, 0.0}, m, x,
                                              1e-11 * std::max(1.0, m.norm())))
                continue;
            const Mat2 full = sp_P17a(x[0], x[1], cp_);
            if (have) {
                if (full.max_abs_diff(first) > 1e-8)
                    throw transitivity_error(
                        "P17a: distinct spread elements share a first column");
            } else {
                first = full;
                best = x;
                have = true;
            }
        }
        if (!have)
            throw numeric_error("P17a: first-column match failed");
        return best;
    }

private:
    // Residual (log radius gap, wrapped angle gap); empty when the matrix
    // leaves the group or overflows.
    std::optional<std::array<double, 2>> F(const std::array<double, 2>& x,
                                           double r, double t) const {
        const Mat2 M = sp_P17a(x[0], x[1], cp_);
        const double det = M.det();
        if (!std::isfinite(det) || det <= 0.0)
            return std::nullopt;
        const double ang = std::atan2(-M.m21, M.m11);
        return std::array<double, 2>{std::log(std::sqrt(det) / r),
                                     angle_diff(ang, t)};
    }

    std::optional<std::array<double, 2>> newton(std::array<double, 2> x,
                                                double r, double t) const {
        for (int iter = 0; iter < 80; ++iter) {
            const auto f0 = F(x, r, t);
            if (!f0)
                return std::nullopt;
            const double n0 = std::hypot((*f0)[0], (*f0)[1]);
            if (n0 < 1e-13)
                return x;
            const double h = 1e-7;
            Mat2 J;
            for (int j = 0; j < 2; ++j) {
                auto xp = x;
                xp[j] += h;
                const auto fp = F(xp, r, t);
                if (!fp)
                    return std::nullopt;
                if (j == 0) {
                    J.m11 = ((*fp)[0] - (*f0)[0]) / h;
                    J.m21 = ((*fp)[1] - (*f0)[1]) / h;
                } else {
                    J.m12 = ((*fp)[0] - (*f0)[0]) / h;
                    J.m22 = ((*fp)[1] - (*f0)[1]) / h;
                }
            }
            if (J.det() == 0.0)
                return std::nullopt;
            const Vec2 dx = J.inverse() * Vec2{-(*f0)[0], -(*f0)[1]};
            double step = 1.0;
            bool moved = false;
            for (int ls = 0; ls < 40; ++ls) {
                const std::array<double, 2> xn{x[0] + step * dx.x,
                                               x[1] + step * dx.y};
                const auto fn = F(xn, r, t);
                if (fn && std::hypot((*fn)[0], (*fn)[1]) < n0) {
                    x = xn;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if (!moved)
                return std::nullopt;
        }
        return std::nullopt;
    }

    std::vector<std::array<double, 2>> multistart(double r, double t) const {
        std::vector<std::array<double, 2>> sols;
        const double lr = std::log(r);
        for (int i = 0; i < 61; ++i) {
            const double tv = -9.0 + 18.0 * i / 60.0;
            const auto x = newton({tv, (lr + cp_.p * tv) / cp_.q}, r, t);
            if (!x)
                continue;
            bool dup = false;
            for (const auto& s : sols)
                if (std::fabs((*x)[0] - s[0]) < 1e-6 &&
                    std::fabs((*x)[1] - s[1]) < 1e-6)
                    dup = true;
            if (!dup)
                sols.push_back(*x);
        }
        return sols;
    }

    P17aParams cp_;
    mutable std::mutex mu_;
    std::map<double, std::array<double, 2>> warm_;
};

// First-column inversion helpers for the nested families.

inline std::array<double, 2> p12b_params_for_col(Vec2 m, double gam) {
    // col1 = (v - gamma sin u, gamma(cos u - 1) - u)
    auto g = [&](double u) { return u - gam * std::cos(u) + gam + m.y; };
    const double pad = 2.0 * std::fabs(gam) + 1e-12;
    const double u = brent_root(g, -m.y - pad, -m.y + pad);
    return {u, m.x + gam * std::sin(u)};
}

inline std::array<double, 2> p13c_params_for_col(Vec2 m, const P13cParams& cp) {
    if (std::fabs(m.y) < 1e-12)
        return {m.x, 0.0};
    if (m.y > 0.0) { // beta > 0 piece
        auto h = [&](double be) {
            const double l = std::log(be) / cp.k;
            const double sl = std::sin(l), cl = std::cos(l);
            return be * (cl * cl - cp.z * sl * cl - cp.w * sl * sl) - m.y;
        };
        const auto grid = log_grid_around(m.y, 14.0, 1201);
        const auto roots = scan_roots(h, grid);
        if (roots.empty())
            throw numeric_error("P13c: first-column beta root not found");
        const double be = roots.front();
        const double l = std::log(be) / cp.k;
        const double sl = std::sin(l), cl = std::cos(l);
        const double u =
            m.x / be + (cp.w + 1.0) * sl * cl - cp.z * sl * sl;
        return {u, be};
    }
    auto h = [&](double bt) { // beta < 0 piece, bt = -beta
        const double l1 = std::log(bt) / cp.k;
        const double sl = std::sin(l1), cl = std::cos(l1);
        return bt * (cl * cl + cp.q * sl * cl + cp.p * sl * sl) + m.y;
    };
    const auto grid = log_grid_around(-m.y, 14.0, 1201);
    const auto roots = scan_roots(h, grid);
    if (roots.empty())
        throw numeric_error("P13c: first-column beta root not found");
    const double bt = roots.front();
    const double l1 = std::log(bt) / cp.k;
    const double sl = std::sin(l1), cl = std::cos(l1);
    const double u = (cp.p - 1.0) * sl * cl - cp.q * sl * sl + m.x / bt;
    return {u, -bt};
}

} // namespace fam_detail

// A constructed family: section and spread views of the same quasifield,
// the verdict grids recommended for it, and the classification the source
// material states for it.
struct FamilyInstance {
    FamilySpec spec;
    SectionPair section;
    SpreadFamily spread;
    NumericPolicy policy;
    ExpectedVerdicts expected;
};

namespace fam_detail {

// Wrap a joint (a,b) evaluator as the SectionPair's separate a and b
// callbacks with a one-slot memo, so sweeps that read both pay one solve.
inline void attach_eval(SectionPair& sec, EvalAB eval) {
    struct Slot {
        double r = -1.0, t = -1.0, a = 1.0, b = 0.0;
        bool filled = false;
    };
    auto slot = std::make_shared<Slot>();
    auto cached = [slot, eval](double r, double t) {
        if (!slot->filled || slot->r != r || slot->t != t) {
            const auto [a, b] = eval(r, t);
            *slot = {r, t, a, b, true};
        }
        return std::pair<double, double>{slot->a, slot->b};
    };
    sec.a = [cached](double r, double t) { return cached(r, t).first; };
    sec.b = [cached](double r, double t) { return cached(r, t).second; };
}

} // namespace fam_detail

inline FamilyInstance instantiate(const FamilySpec& spec) {
    using namespace fam_detail;
    const auto violations = validate(spec);
    if (!violations.empty()) {
        std::string msg = "invalid parameters for " + to_string(spec.id) + ":";
        for (const auto& v : violations)
            msg += " " + v + ";";
        throw domain_error(msg);
    }

    FamilyInstance inst;
    inst.spec = spec;
    inst.expected = expected_verdicts(spec.id);
    inst.policy = default_policy();
    inst.section.name = to_string(spec.id);
    for (const auto& [k, v] : spec.params)
        inst.section.params.emplace_back(k, v);

    switch (spec.id) {
    case FamilyId::Complex: {
        inst.spread.evaluate = [](double s, double v) { return sp_complex(s, v); };
        inst.spread.params_for_first_column = [](Vec2 m) {
            return std::array<double, 2>{m.x, m.y};
        };
        inst.spread.param_domain = "(s, v) in R^2 \\ {0}";
        attach_eval(inst.section, [](double, double) {
            return std::pair<double, double>{1.0, 0.0};
        });
        break;
    }
    case FamilyId::P11a: {
        const double w = spec.at("w");
        inst.spread.evaluate = [w](double s, double v) { return sp_P11a(s, v, w); };
        inst.spread.params_for_first_column = [](Vec2 m) {
            return std::array<double, 2>{m.x, m.y};
        };
        inst.spread.param_domain = "(s, v) in R^2 \\ {0}";
        attach_eval(inst.section, [w](double r, double t) {
            return sec_P11a(r, t, w);
        });
        break;
    }
    case FamilyId::P11b: {
        inst.spread.evaluate = [](double al, double be) { return sp_P11b(al, be); };
        inst.spread.params_for_first_column = [](Vec2 m) {
            return std::array<double, 2>{m.x, m.y};
        };
        inst.spread.param_domain = "(alpha, beta) in R^2 \\ {0}";
        attach_eval(inst.section, [](double r, double t) {
            return ray_solve([](double c1, double c2) { return sp_P11b(c1, c2); },
                             r, t);
        });
        break;
    }
    case FamilyId::P11c: {
        inst.spread.evaluate = [](double s, double v) { return sp_P11c(s, v); };
        inst.spread.params_for_first_column = [](Vec2 m) {
            return std::array<double, 2>{m.y, m.x}; // col1 = (v, s)
        };
        inst.spread.param_domain = "(s, v) in R^2 \\ {0}";
        attach_eval(inst.section, [](double r, double t) {
            return ray_solve([](double c1, double c2) { return sp_P11c(c2, c1); },
                             r, t);
        });
        break;
    }
    case FamilyId::P12a: {
        inst.spread.evaluate = [](double s, double v) { return sp_P12a(s, v); };
        inst.spread.params_for_first_column = [](Vec2 m) {
            return std::array<double, 2>{m.y, m.x};
        };
        inst.spread.param_domain = "(s, v) in R^2 \\ {0}";
        attach_eval(inst.section, [](double r, double t) {
            return ray_solve([](double c1, double c2) { return sp_P12a(c2, c1); },
                             r, t);
        });
        break;
    }
    case FamilyId::P12b: {
        const double gam = spec.at("gamma");
        inst.spread.evaluate = [gam](double u, double v) {
            return sp_P12b(u, v, gam);
        };
        inst.spread.params_for_first_column = [gam](Vec2 m) {
            return p12b_params_for_col(m, gam);
        };
        inst.spread.param_domain = "(u, v) in R^2 \\ {0}";
        attach_eval(inst.section, [gam](double r, double t) {
            return sec_P12b(r, t, gam);
        });
        break;
    }
    case FamilyId::P13a: {
        const P13aParams cp{spec.at("s"), spec.at("w"), spec.at("z"),
                            spec.at("p"), spec.at("q")};
        inst.spread.evaluate = [cp](double al, double be) {
            return sp_P13a(al, be, cp);
        };
        inst.spread.params_for_first_column = [](Vec2 m) {
            return std::array<double, 2>{m.x, m.y};
        };
        inst.spread.param_domain = "(alpha, beta) in R^2 \\ {0}";
        attach_eval(inst.section, [cp](double r, double t) {
            return ray_solve(
                [cp](double c1, double c2) { return sp_P13a(c1, c2, cp); }, r, t);
        });
        break;
    }
    case FamilyId::P13b: {
        const P13bParams cp{spec.at("w"), spec.at("z"), spec.at("p"),
                            spec.at("q")};
        inst.spread.evaluate = [cp](double al, double be) {
            return sp_P13b(al, be, cp);
        };
        inst.spread.params_for_first_column = [](Vec2 m) {
            return std::array<double, 2>{m.x, m.y};
        };
        inst.spread.param_domain = "(alpha, beta) in R^2 \\ {0}";
        attach_eval(inst.section, [cp](double r, double t) {
            return ray_solve(
                [cp](double c1, double c2) { return sp_P13b(c1, c2, cp); }, r, t);
        });
        break;
    }
    case FamilyId::P13c: {
        const P13cParams cp{spec.at("k"), spec.at("w"), spec.at("z"),
                            spec.at("p"), spec.at("q")};
        inst.spread.evaluate = [cp](double u, double be) {
            return sp_P13c(u, be, cp);
        };
        inst.spread.params_for_first_column = [cp](Vec2 m) {
            return p13c_params_for_col(m, cp);
        };
        inst.spread.param_domain = "(u, beta) in R^2, scalar piece at beta = 0";
        attach_eval(inst.section, [cp](double r, double t) {
            return sec_P13c(r, t, cp);
        });
        break;
    }
    case FamilyId::P14: {
        const P14Params cp{spec.at("w"), spec.at("z"), spec.at("p"),
                           spec.at("q")};
        inst.spread.evaluate = [cp](double al, double be) {
            return sp_P14(al, be, cp);
        };
        inst.spread.params_for_first_column = [](Vec2 m) {
            return std::array<double, 2>{m.x, m.y};
        };
        inst.spread.param_domain = "(alpha, beta) in R^2 \\ {0}";
        attach_eval(inst.section, [cp](double r, double t) {
            return ray_solve(
                [cp](double c1, double c2) { return sp_P14(c1, c2, cp); }, r, t);
        });
        break;
    }
    case FamilyId::P16a: {
        const double w = spec.at("w"), c = spec.at("c");
        inst.spread.evaluate = [w, c](double s, double phi) {
            return sp_P16a(s, phi, w, c);
        };
        inst.spread.params_for_first_column = [](Vec2 m) {
            return std::array<double, 2>{m.norm(),
                                         wrap_angle(std::atan2(m.y, m.x))};
        };
        inst.spread.param_domain = "s > 0, phi in [0, 2pi)";
        attach_eval(inst.section, [w, c](double r, double t) {
            return sec_P16a(r, t, w, c);
        });
        break;
    }
    case FamilyId::P16b: {
        const double d = spec.at("d");
        inst.spread.evaluate = [d](double s, double phi) {
            return sp_P16b(s, phi, d);
        };
        inst.spread.params_for_first_column = [](Vec2 m) {
            return std::array<double, 2>{std::log(m.norm()),
                                         wrap_angle(std::atan2(m.y, m.x))};
        };
        inst.spread.param_domain = "s in R, phi in [0, 2pi)";
        attach_eval(inst.section, [d](double r, double) {
            return std::pair<double, double>{1.0, std::log(r) / d};
        });
        break;
    }
    case FamilyId::RemarkF: {
        if (!spec.f)
            throw domain_error("RemarkF requires a function handle");
        const auto f = spec.f;
        inst.spread.evaluate = [f](double u, double phi) {
            return sp_RemarkF(u, phi, f);
        };
        inst.spread.params_for_first_column = [](Vec2 m) {
            return std::array<double, 2>{m.norm(),
                                         wrap_angle(std::atan2(m.y, m.x))};
        };
        inst.spread.param_domain = "u > 0, phi in [0, 2pi)";
        attach_eval(inst.section, [f](double r, double) {
            return sec_RemarkF(r, f);
        });
        break;
    }
    case FamilyId::P17a: {
        const P17aParams cp{spec.at("p"), spec.at("q"), spec.at("c"),
                            spec.at("d")};
        auto solver = std::make_shared<P17aSolver>(cp);
        inst.spread.evaluate = [cp](double s, double t) {
            return sp_P17a(s, t, cp);
        };
        inst.spread.params_for_first_column = [solver](Vec2 m) {
            return solver->params_for_first_column(m);
        };
        inst.spread.param_domain = "(s, t) in R^2";
        attach_eval(inst.section, [solver](double r, double t) {
            return solver->eval(r, t);
        });
        inst.policy = coarse_policy(9, 24, 0.25, 4.0);
        break;
    }
    case FamilyId::P17b: {
        const P17bParams cp{spec.at("m"), spec.at("n"), spec.at("c"),
                            spec.at("d")};
        auto solver = std::make_shared<P17bSolver>(cp);
        inst.spread.evaluate = [cp](double s, double tv) {
            return sp_P17b(s, tv, cp);
        };
        inst.spread.params_for_first_column = [solver](Vec2 m) {
            return solver->params_for_first_column(m);
        };
        inst.spread.param_domain = "s > 0, tau in [0, 2pi)";
        attach_eval(inst.section, [solver](double r, double t) {
            return solver->eval(r, t);
        });
        break;
    }
    }
    return inst;
}

inline FamilyInstance instantiate_default(FamilyId id) {
    return instantiate(default_spec(id));
}

inline QuasifieldLoop loop_of(const FamilyInstance& inst) {
    QuasifieldLoop L{inst.section, inst.policy};
    L.chart = inst.spread.evaluate;
    L.chart_of_column = inst.spread.params_for_first_column;
    return L;
}

// A well-spaced finite sample of the family's spread in its own parameters:
// n_r shells by n_t directions.  Families whose chart bunches up somewhere
// (P12b and P13c near beta = 0, P17a where exp(qt - ps) collapses) are placed
// by first column instead, which keeps the elements spread apart.
inline SpreadSample sample_spread(const FamilyInstance& inst, int n_r = 10,
                                  int n_t = 20) {
    SpreadSample out;
    out.name = to_string(inst.spec.id);
    out.includes_vertical = true;
    for (const auto& key : param_names(inst.spec.id))
        out.params.push_back(inst.spec.at(key));
    switch (inst.spec.id) {
    case FamilyId::P13a: case FamilyId::P13b: case FamilyId::P14:
    case FamilyId::P11b:
        out.param_names = {"alpha", "beta"}; break;
    case FamilyId::P12b: case FamilyId::P13c:
        out.param_names = {"u", "beta"}; break;
    case FamilyId::P16a: case FamilyId::P16b:
        out.param_names = {"s", "phi"}; break;
    case FamilyId::RemarkF:
        out.param_names = {"u", "phi"}; break;
    case FamilyId::P17a:
        out.param_names = {"s", "t"}; break;
    case FamilyId::P17b:
        out.param_names = {"s", "tau"}; break;
    default:
        out.param_names = {"s", "v"}; break;
    }
    const auto radii = log_spaced(0.5, 2.0, n_r);
    switch (inst.spec.id) {
    case FamilyId::P16a:
    case FamilyId::RemarkF:
    case FamilyId::P17b: {
        for (double s : radii)
            for (int j = 0; j < n_t; ++j) {
                const double phi = tau * j / n_t;
                out.elements.push_back(
                    {{s, phi}, inst.spread.evaluate(s, phi)});
            }
        break;
    }
    case FamilyId::P16b: {
        for (int i = 0; i < n_r; ++i) {
            const double s =
                std::log(0.5) + (std::log(2.0) - std::log(0.5)) * i /
                                    double(n_r - 1);
            for (int j = 0; j < n_t; ++j) {
                const double phi = tau * j / n_t;
                out.elements.push_back(
                    {{s, phi}, inst.spread.evaluate(s, phi)});
            }
        }
        break;
    }
    case FamilyId::P12b:
    case FamilyId::P13c:
    case FamilyId::P17a: {
        // First-column placement: solve for the parameters whose element
        // sends e1 to the annulus point.  P12b gets wider shells so that the
        // second columns of its sample straddle the coverage annulus too.
        const auto shells = inst.spec.id == FamilyId::P12b
                                ? log_spaced(0.5, 6.0, n_r)
                                : radii;
        for (double rho : shells)
            for (int j = 0; j < n_t; ++j) {
                const double th = tau * j / n_t;
                const Vec2 col{rho * std::cos(th), rho * std::sin(th)};
                const auto p = inst.spread.params_for_first_column(col);
                out.elements.push_back(
                    {{p[0], p[1]}, inst.spread.evaluate(p[0], p[1])});
            }
        break;
    }
    default: { // families parameterized by a plane point
        for (double rho : radii)
            for (int j = 0; j < n_t; ++j) {
                const double th = tau * j / n_t;
                const double p1 = rho * std::cos(th);
                const double p2 = rho * std::sin(th);
                out.elements.push_back(
                    {{p1, p2}, inst.spread.evaluate(p1, p2)});
            }
        break;
    }
    }
    return out;
}

} // namespace qflab
