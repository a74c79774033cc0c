#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "qflab/linalg.hpp"
#include "qflab/policy.hpp"
#include "qflab/section.hpp"

namespace qflab {

struct PredicateResult {
    bool value = false;
    double max_residual = 0.0;
    std::vector<Witness> witnesses;
};

struct KernelEntry {
    double x = 1.0; // signed kernel element r cos(k pi) a(r, k pi)
    double r = 1.0;
    int k = 0;
    Mat2 m;
};

struct KernelSample {
    std::vector<KernelEntry> entries;
    bool kernel_is_diagonal = false;
    bool monotone_ok = true;
    std::string diagnostic; // set when f1 or f2 fails strict monotonicity
};

// The left translations fixing the x-axis: section matrices at t = 0 and
// t = pi.  The kernel is scalar exactly when every such matrix is r cos(k
// pi) times the identity.
inline KernelSample kernel_translations(const SectionPair& s,
                                        const std::vector<double>& r_grid,
                                        double tol = 1e-9) {
    KernelSample out;
    double worst = 0.0;
    std::vector<double> f1, f2;
    for (double r : r_grid) {
        if (!(r > 0.0))
            throw domain_error("kernel_translations: r grid must be positive");
        for (int k = 0; k < 2; ++k) {
            const double t = k ? pi : 0.0;
            const double a = s.a(r, t), b = s.b(r, t);
            KernelEntry e;
            e.r = r;
            e.k = k;
            e.x = r * (k ? -1.0 : 1.0) * a;
            e.m = section_matrix(s, {r, t});
            out.entries.push_back(e);
            worst = std::max(worst,
                             std::max(std::fabs(a - 1.0), std::fabs(b)));
            (k ? f2 : f1).push_back(k ? -r * a : r * a);
        }
    }
    out.kernel_is_diagonal = worst < tol;
    auto strictly_monotone = [](const std::vector<double>& f) {
        bool inc = true, dec = true;
        for (std::size_t i = 1; i < f.size(); ++i) {
            if (!(f[i] > f[i - 1]))
                inc = false;
            if (!(f[i] < f[i - 1]))
                dec = false;
        }
        return inc || dec;
    };
    if (!strictly_monotone(f1)) {
        out.monotone_ok = false;
        out.diagnostic = "f1(r) = r a(r,0) is not strictly monotone on the "
                         "sampled grid; the section cannot be sharply "
                         "transitive";
    } else if (!strictly_monotone(f2)) {
        out.monotone_ok = false;
        out.diagnostic = "f2(r) = -r a(r,pi) is not strictly monotone on the "
                         "sampled grid; the section cannot be sharply "
                         "transitive";
    }
    return out;
}

namespace detail {

// One full evaluation of the section over the verdict grids, shared by all
// predicates.  A[k]/B[k] hold a and b at (u, t + k pi), row-major in (u, t).
struct SweepCache {
    std::vector<double> U, T;
    std::vector<double> a_unit, b_unit;       // at u = 1 over T
    std::vector<double> a0, b0, api, bpi;     // at t = 0 and t = pi over U
    std::vector<double> A[2], B[2];
    std::size_t nt = 0;

    double a_at(std::size_t iu, std::size_t it, int k) const {
        return A[k][iu * nt + it];
    }
    double b_at(std::size_t iu, std::size_t it, int k) const {
        return B[k][iu * nt + it];
    }
    double a_kpi(std::size_t iu, int k) const { return k ? api[iu] : a0[iu]; }
    double b_kpi(std::size_t iu, int k) const { return k ? bpi[iu] : b0[iu]; }
};

inline SweepCache build_sweep(const SectionPair& s, const NumericPolicy& pol) {
    SweepCache c;
    c.U = pol.u_grid;
    c.T = pol.t_grid;
    c.nt = c.T.size();
    const std::size_t nu = c.U.size(), nt = c.nt;

    // When T is the uniform full-circle grid with even count, t + pi lands
    // back on the grid and the shifted tables are free.
    bool uniform = nt % 2 == 0 && nt > 0;
    for (std::size_t i = 0; uniform && i < nt; ++i)
        if (std::fabs(c.T[i] - tau * double(i) / double(nt)) > 1e-12)
            uniform = false;

    c.a_unit.resize(nt);
    c.b_unit.resize(nt);
    for (std::size_t i = 0; i < nt; ++i) {
        c.a_unit[i] = s.a(1.0, c.T[i]);
        c.b_unit[i] = s.b(1.0, c.T[i]);
    }
    c.a0.resize(nu);
    c.b0.resize(nu);
    c.api.resize(nu);
    c.bpi.resize(nu);
    for (int k = 0; k < 2; ++k) {
        c.A[k].resize(nu * nt);
        c.B[k].resize(nu * nt);
    }
    for (std::size_t iu = 0; iu < nu; ++iu) {
        const double u = c.U[iu];
        c.a0[iu] = s.a(u, 0.0);
        c.b0[iu] = s.b(u, 0.0);
        c.api[iu] = s.a(u, pi);
        c.bpi[iu] = s.b(u, pi);
        for (std::size_t it = 0; it < nt; ++it) {
            c.A[0][iu * nt + it] = s.a(u, c.T[it]);
            c.B[0][iu * nt + it] = s.b(u, c.T[it]);
        }
        for (std::size_t it = 0; it < nt; ++it) {
            if (uniform) {
                const std::size_t j = (it + nt / 2) % nt;
                c.A[1][iu * nt + it] = c.A[0][iu * nt + j];
                c.B[1][iu * nt + it] = c.B[0][iu * nt + j];
            } else {
                const double tp = wrap_angle(c.T[it] + pi);
                c.A[1][iu * nt + it] = s.a(u, tp);
                c.B[1][iu * nt + it] = s.b(u, tp);
            }
        }
    }
    return c;
}

struct IdentityScan {
    double max_res = 0.0;
    Witness worst;
    void feed(const char* test, double r, double t, int k, double lhs,
              double rhs) {
        const double res = rel_residual(lhs, rhs);
        if (res >= max_res) {
            max_res = res;
            worst = Witness{test, r, t, k, lhs, rhs, res};
        }
    }
};

inline PredicateResult decomposable_from(const SweepCache& c, double tol) {
    IdentityScan ia, ib;
    for (std::size_t iu = 0; iu < c.U.size(); ++iu)
        for (int k = 0; k < 2; ++k) {
            const double ak = c.a_kpi(iu, k), bk = c.b_kpi(iu, k);
            for (std::size_t it = 0; it < c.nt; ++it) {
                ia.feed("a(r,t+kpi) = a(1,t) a(r,kpi)", c.U[iu], c.T[it], k,
                        c.a_at(iu, it, k), c.a_unit[it] * ak);
                ib.feed("b(r,t+kpi) = a(1,t) b(r,kpi) + b(1,t)/a(r,kpi)",
                        c.U[iu], c.T[it], k, c.b_at(iu, it, k),
                        c.a_unit[it] * bk + c.b_unit[it] / ak);
            }
        }
    PredicateResult res;
    res.max_residual = std::max(ia.max_res, ib.max_res);
    res.value = res.max_residual < tol;
    if (ia.max_res >= tol || !res.value)
        res.witnesses.push_back(ia.worst);
    if (ib.max_res >= tol)
        res.witnesses.push_back(ib.worst);
    return res;
}

inline PredicateResult quasi_simple_from(const SweepCache& c, double tol) {
    IdentityScan scan;
    for (std::size_t iu = 0; iu < c.U.size(); ++iu)
        for (int k = 0; k < 2; ++k) {
            scan.feed("a(r,kpi) = 1", c.U[iu], k * pi, k, c.a_kpi(iu, k), 1.0);
            scan.feed("b(r,kpi) = 0", c.U[iu], k * pi, k, c.b_kpi(iu, k), 0.0);
            for (std::size_t it = 0; it < c.nt; ++it) {
                scan.feed("a(r,phi+kpi) = a(1,phi)", c.U[iu], c.T[it], k,
                          c.a_at(iu, it, k), c.a_unit[it]);
                scan.feed("b(r,phi+kpi) = b(1,phi)", c.U[iu], c.T[it], k,
                          c.b_at(iu, it, k), c.b_unit[it]);
            }
        }
    PredicateResult res;
    res.max_residual = scan.max_res;
    // The normal subloop N* exists exactly when every identity holds, and
    // then the loop is not quasi-simple.
    res.value = !(scan.max_res < tol);
    res.witnesses.push_back(scan.worst);
    return res;
}

inline PredicateResult so2_from(const SweepCache& c, double tol) {
    IdentityScan scan;
    for (std::size_t iu = 0; iu < c.U.size(); ++iu)
        for (std::size_t it = 0; it < c.nt; ++it) {
            scan.feed("a(u,t) = a(u,0)", c.U[iu], c.T[it], 0,
                      c.a_at(iu, it, 0), c.a0[iu]);
            scan.feed("b(u,t) = b(u,0)", c.U[iu], c.T[it], 0,
                      c.b_at(iu, it, 0), c.b0[iu]);
        }
    PredicateResult res;
    res.max_residual = scan.max_res;
    bool monotone = true;
    Witness mono_witness;
    {
        bool inc = true, dec = true;
        for (std::size_t iu = 1; iu < c.U.size(); ++iu) {
            const double prev = c.U[iu - 1] * c.a0[iu - 1];
            const double cur = c.U[iu] * c.a0[iu];
            if (!(cur > prev))
                inc = false;
            if (!(cur < prev))
                dec = false;
            if (!inc && !dec) {
                mono_witness = Witness{"u a(u,0) strictly monotone",
                                       c.U[iu], 0.0, 0, prev, cur, 0.0};
                break;
            }
        }
        monotone = inc || dec;
    }
    res.value = scan.max_res < tol && monotone;
    if (!monotone)
        res.witnesses.push_back(mono_witness);
    res.witnesses.push_back(scan.worst);
    return res;
}

inline bool group_case_from(const SweepCache& c, double tol) {
    double worst = 0.0;
    for (int k = 0; k < 2; ++k)
        for (std::size_t i = 0; i < c.A[k].size(); ++i)
            worst = std::max(worst, std::max(std::fabs(c.A[k][i] - 1.0),
                                             std::fabs(c.B[k][i])));
    return worst < tol;
}

struct EllipticityRow {
    bool ok = true;
    bool boundary = false;
    double max_abs = 0.0;
    double max_abs_off_band = 0.0;
    Witness worst;
};

// |cos t (a(1,t)+a(1,t)^{-1}) - sin t b(u,t)| <= 2 with equality admitted
// only inside the guard bands of t = k pi.
inline EllipticityRow
ellipticity_row(const std::vector<double>& T, const std::vector<double>& a1,
                const std::vector<double>& bu, double guard) {
    EllipticityRow row;
    for (std::size_t i = 0; i < T.size(); ++i) {
        const double t = T[i];
        const double E = std::cos(t) * (a1[i] + 1.0 / a1[i]) -
                         std::sin(t) * bu[i];
        const double abs_e = std::fabs(E);
        const bool in_band = std::fabs(angle_diff(t, 0.0)) < guard ||
                             std::fabs(angle_diff(t, pi)) < guard;
        if (abs_e > row.max_abs)
            row.max_abs = abs_e;
        if (in_band) {
            if (abs_e > 2.0 + 1e-12) {
                row.ok = false;
                row.worst = Witness{"|E(t)| <= 2 at t = kpi", 0.0, t, 0,
                                    abs_e, 2.0, abs_e - 2.0};
            }
            continue;
        }
        if (abs_e > row.max_abs_off_band)
            row.max_abs_off_band = abs_e;
        const double margin = 2.0 - abs_e;
        if (margin < -1e-9) {
            row.ok = false;
            row.worst = Witness{"|E(t)| < 2 off t = kpi", 0.0, t, 0, abs_e,
                                2.0, -margin};
        } else if (margin <= 1e-9) {
            row.boundary = true;
            if (row.worst.test.empty())
                row.worst = Witness{"|E(t)| = 2 off t = kpi (boundary)", 0.0,
                                    t, 0, abs_e, 2.0, std::fabs(margin)};
        }
    }
    return row;
}

} // namespace detail

inline PredicateResult is_decomposable(const SectionPair& s,
                                       const NumericPolicy& pol) {
    return detail::decomposable_from(detail::build_sweep(s, pol),
                                     pol.identity_tol);
}

inline PredicateResult is_quasi_simple(const SectionPair& s,
                                       const NumericPolicy& pol) {
    return detail::quasi_simple_from(detail::build_sweep(s, pol),
                                     pol.identity_tol);
}

inline PredicateResult contains_so2(const SectionPair& s,
                                    const NumericPolicy& pol) {
    return detail::so2_from(detail::build_sweep(s, pol), pol.identity_tol);
}

// True exactly when every compact factor of the section is SO2, i.e. the
// section is u rot(t) throughout: the complex field.  Testing only the
// u = 1 slice would also accept proper loops whose unit circle happens to
// be SO2 (the t-independent catalog members), so the scan runs over all u.
inline bool t_normality_check(const SectionPair& s, const NumericPolicy& pol) {
    return detail::group_case_from(detail::build_sweep(s, pol),
                                   pol.identity_tol);
}

struct EllipticityReport {
    bool ok = true;
    bool boundary = false;      // off-band equality within 1e-9
    bool b_is_zero = false;
    bool cross_check_ok = true;
    double max_abs_E = 0.0;
    double max_abs_E_off_band = 0.0;
    std::vector<Witness> witnesses;
};

inline EllipticityReport t_ellipticity_check(const SectionPair& s, double u,
                                             const NumericPolicy& pol) {
    EllipticityReport rep;
    const std::size_t nt = pol.t_grid.size();
    std::vector<double> a1(nt), bu(nt);
    double max_b = 0.0;
    for (std::size_t i = 0; i < nt; ++i) {
        a1[i] = s.a(1.0, pol.t_grid[i]);
        bu[i] = s.b(u, pol.t_grid[i]);
        max_b = std::max(max_b, std::fabs(bu[i]));
    }
    rep.b_is_zero = max_b < pol.identity_tol;

    const auto row = detail::ellipticity_row(pol.t_grid, a1, bu,
                                             pol.guard_band);
    rep.ok = row.ok;
    rep.boundary = row.boundary;
    rep.max_abs_E = row.max_abs;
    rep.max_abs_E_off_band = row.max_abs_off_band;
    if (!row.worst.test.empty())
        rep.witnesses.push_back(row.worst);

    // Division-free cross-checks of the same bounds.
    for (std::size_t i = 0; i < nt; ++i) {
        const double t = pol.t_grid[i];
        const bool in_band = std::fabs(angle_diff(t, 0.0)) < pol.guard_band ||
                             std::fabs(angle_diff(t, pi)) < pol.guard_band;
        double lhs, limit;
        const char* name;
        if (rep.b_is_zero) {
            // a^2 |cos t| - 2a + |cos t| <= 0, the two-sided bound on a(1,t).
            lhs = a1[i] * a1[i] * std::fabs(std::cos(t)) - 2.0 * a1[i] +
                  std::fabs(std::cos(t));
            limit = 0.0;
            name = "a^2|cos t| - 2a + |cos t| <= 0";
        } else {
            const double sum = a1[i] + 1.0 / a1[i];
            lhs = sum * sum * std::cos(t) * std::cos(t) -
                  2.0 * sum * std::sin(t) * std::cos(t) * bu[i] +
                  std::sin(t) * std::sin(t) * bu[i] * bu[i];
            limit = 4.0;
            name = "(a+1/a)^2 cos^2 t - 2(a+1/a) sin t cos t b + sin^2 t b^2 < 4";
        }
        const double margin = limit - lhs;
        if (in_band) {
            if (margin < -1e-9) {
                rep.cross_check_ok = false;
                rep.witnesses.push_back(
                    Witness{name, u, t, 0, lhs, limit, -margin});
            }
        } else if (margin < -1e-9) {
            rep.cross_check_ok = false;
            rep.witnesses.push_back(
                Witness{name, u, t, 0, lhs, limit, -margin});
        } else if (margin <= 1e-9) {
            rep.boundary = true;
        }
    }
    return rep;
}

struct ClassificationReport {
    bool kernel_is_diagonal = false;
    bool decomposable = false;
    bool quasi_simple = false;
    bool contains_so2 = false;
    bool t_all_elliptic = false;
    bool proper = true;      // false exactly in the group case a=1, b=0
    bool t_normal = false;
    bool elliptic_boundary = false;
    bool kernel_monotone_ok = true;
    std::string kernel_diagnostic;
    bool consistency_ok = true;
    std::string consistency_message;
    double max_decomposition_residual = 0.0;
    std::vector<Witness> witnesses;
};

inline ClassificationReport classify(const QuasifieldLoop& L) {
    const SectionPair& s = L.section;
    const NumericPolicy& pol = L.policy;
    const auto loop_check = is_loop_section(s, pol);
    if (!loop_check.ok) {
        std::string msg = "classify: the section fails the loop conditions";
        for (const auto& w : loop_check.witnesses)
            msg += "; " + w.test;
        throw domain_error(msg);
    }

    const auto cache = detail::build_sweep(s, pol);
    const double tol = pol.identity_tol;
    ClassificationReport rep;

    // Kernel: scalar iff a(r,kpi)=1 and b(r,kpi)=0 throughout.
    {
        detail::IdentityScan scan;
        std::vector<double> f1, f2;
        for (std::size_t iu = 0; iu < cache.U.size(); ++iu) {
            for (int k = 0; k < 2; ++k) {
                scan.feed("a(r,kpi) = 1, b(r,kpi) = 0", cache.U[iu], k * pi, k,
                          cache.a_kpi(iu, k), 1.0);
                scan.feed("a(r,kpi) = 1, b(r,kpi) = 0", cache.U[iu], k * pi, k,
                          cache.b_kpi(iu, k), 0.0);
            }
            f1.push_back(cache.U[iu] * cache.a0[iu]);
            f2.push_back(-cache.U[iu] * cache.api[iu]);
        }
        rep.kernel_is_diagonal = scan.max_res < tol;
        if (!rep.kernel_is_diagonal)
            rep.witnesses.push_back(scan.worst);
        auto strictly_monotone = [](const std::vector<double>& f) {
            bool inc = true, dec = true;
            for (std::size_t i = 1; i < f.size(); ++i) {
                if (!(f[i] > f[i - 1]))
                    inc = false;
                if (!(f[i] < f[i - 1]))
                    dec = false;
            }
            return inc || dec;
        };
        if (!strictly_monotone(f1) || !strictly_monotone(f2)) {
            rep.kernel_monotone_ok = false;
            rep.kernel_diagnostic =
                "kernel map r a(r,0) or -r a(r,pi) is not strictly monotone; "
                "the section is not sharply transitive on the x-axis";
        }
    }

    const auto dec = detail::decomposable_from(cache, tol);
    rep.decomposable = dec.value;
    rep.max_decomposition_residual = dec.max_residual;
    for (const auto& w : dec.witnesses)
        if (!rep.decomposable)
            rep.witnesses.push_back(w);

    const auto qs = detail::quasi_simple_from(cache, tol);
    rep.quasi_simple = qs.value;
    for (const auto& w : qs.witnesses)
        rep.witnesses.push_back(w);

    const auto so2 = detail::so2_from(cache, tol);
    rep.contains_so2 = so2.value;
    if (!rep.contains_so2)
        for (const auto& w : so2.witnesses)
            rep.witnesses.push_back(w);

    rep.t_normal = detail::group_case_from(cache, tol);
    rep.proper = !rep.t_normal;

    // Ellipticity of every compact factor: a(1,t) row against b(u,t) rows.
    rep.t_all_elliptic = true;
    for (std::size_t iu = 0; iu < cache.U.size(); ++iu) {
        std::vector<double> bu(cache.nt);
        for (std::size_t it = 0; it < cache.nt; ++it)
            bu[it] = cache.b_at(iu, it, 0);
        auto row = detail::ellipticity_row(cache.T, cache.a_unit, bu,
                                           pol.guard_band);
        if (!row.ok) {
            rep.t_all_elliptic = false;
            Witness w = row.worst;
            w.r = cache.U[iu];
            rep.witnesses.push_back(w);
        }
        if (row.boundary)
            rep.elliptic_boundary = true;
    }

    // Report-level implications; a violation signals tolerance trouble, not
    // a property of the input family.
    auto inconsistent = [&rep](const std::string& msg) {
        rep.consistency_ok = false;
        if (!rep.consistency_message.empty())
            rep.consistency_message += "; ";
        rep.consistency_message += msg;
    };
    if (!rep.quasi_simple && !rep.decomposable)
        inconsistent("internal error: not quasi-simple but not decomposable");
    if (rep.contains_so2 && !rep.decomposable)
        inconsistent("internal error: contains SO2 but not decomposable");
    if (rep.t_normal &&
        !(rep.kernel_is_diagonal && rep.decomposable && !rep.quasi_simple &&
          rep.contains_so2 && rep.t_all_elliptic))
        inconsistent("internal error: T normal (complex field) but the "
                     "remaining verdicts disagree");
    return rep;
}

} // namespace qflab
