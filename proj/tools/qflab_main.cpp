// qflab: explore two-dimensional locally compact quasifields presented as
// sharply transitive sections in GL2+(R).
//
// Exit codes, disjoint by design:
//   0  requested checks pass / verdicts match
//   1  checks ran but a verdict or bound failed
//   2  usage, constraint, or input-file error
//   3  numeric failure (solver did not converge, section degenerate)

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "qflab/serialize.hpp"

namespace {

using namespace qflab;

constexpr int kPass = 0;
constexpr int kMismatch = 1;
constexpr int kUsage = 2;
constexpr int kNumeric = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

Vec2 parse_pair(const std::string& text) {
    std::istringstream in(text);
    double x = 0.0, y = 0.0;
    char comma = 0;
    if (!(in >> x >> comma >> y) || comma != ',')
        throw UsageError("expected a pair 'x,y', got '" + text + "'");
    in >> std::ws;
    if (!in.eof())
        throw UsageError("trailing characters in pair '" + text + "'");
    return {x, y};
}

// Coordinates print as integers when they are integers, else shortest
// round-trip decimals.
std::string fmt_coord(double v) {
    const double r = std::round(v);
    if (std::fabs(v - r) <= 1e-12) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.0f", r == 0.0 ? 0.0 : r);
        return buf;
    }
    return csv_number(v);
}

void emit_text(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(out_path, std::ios::binary);
    if (!f)
        throw UsageError("cannot open output file '" + out_path + "'");
    f << text;
}

void emit_json(const ojson& j, const std::string& out_path) {
    emit_text(j.dump(2) + "\n", out_path);
}

// Every parameter any family accepts, attached as an optional flag; which of
// them are legal is decided per family after parsing.
struct ParamFlags {
    std::map<std::string, double> storage;
    std::map<std::string, CLI::Option*> opts;

    void attach(CLI::App* cmd) {
        for (const char* key :
             {"w", "z", "p", "q", "s", "c", "d", "k", "gamma", "m", "n"})
            opts[key] = cmd->add_option("--" + std::string(key), storage[key],
                                        std::string("family parameter ") + key);
    }

    std::map<std::string, double> provided() const {
        std::map<std::string, double> out;
        for (const auto& [key, opt] : opts)
            if (opt->count() > 0)
                out.emplace(key, storage.at(key));
        return out;
    }
};

struct GridFlags {
    int nr = 0;
    int nt = 0;
    double rtol = 0.0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--nr", nr, "override radial grid size");
        cmd->add_option("--nt", nt, "override angular grid size");
        cmd->add_option("--rtol", rtol, "override relative tolerance");
    }

    void apply(NumericPolicy& p) const {
        if (nr > 1)
            p.u_grid = log_spaced(p.u_grid.front(), p.u_grid.back(), nr);
        if (nt > 1)
            p.t_grid = uniform_angles(nt);
        apply_env_tolerance(p);
        if (rtol > 0.0)
            p.rtol = rtol;
    }
};

FamilySpec spec_for(const std::string& family,
                    const std::map<std::string, double>& overrides) {
    const auto id = family_from_string(family);
    if (!id)
        throw UsageError("unknown family '" + family + "'");
    FamilySpec spec = default_spec(*id);
    const auto names = param_names(*id);
    for (const auto& [key, value] : overrides) {
        if (std::find(names.begin(), names.end(), key) == names.end())
            throw UsageError("family " + family + " has no parameter '" + key +
                             "'");
        spec.params[key] = value;
    }
    const auto violations = validate(spec);
    if (!violations.empty()) {
        std::string msg = "constraint violations for " + family + ":";
        for (const auto& v : violations)
            msg += "\n  " + v;
        throw UsageError(msg);
    }
    return spec;
}

SpreadSample load_spread_file(const std::string& path) {
    std::ifstream f(path);
    if (!f)
        throw UsageError("cannot open spread file '" + path + "'");
    try {
        return spread_sample_from_json(ojson::parse(f));
    } catch (const std::exception& e) {
        throw UsageError("malformed spread file '" + path + "': " + e.what());
    }
}

// Rebuild the catalog instance a spread file was exported from, then
// cross-check a handful of its elements against the family evaluator.
FamilyInstance instance_from_spread(const SpreadSample& s) {
    const auto id = family_from_string(s.name);
    if (!id)
        throw UsageError("spread file names unknown family '" + s.name + "'");
    FamilySpec spec = default_spec(*id);
    const auto names = param_names(*id);
    if (s.params.size() != names.size())
        throw UsageError("spread file carries " +
                         std::to_string(s.params.size()) +
                         " parameters, family " + s.name + " expects " +
                         std::to_string(names.size()));
    for (std::size_t i = 0; i < names.size(); ++i)
        spec.params[names[i]] = s.params[i];
    const auto violations = validate(spec);
    if (!violations.empty())
        throw UsageError("spread file parameters violate the constraints of " +
                         s.name);
    FamilyInstance inst = instantiate(spec);
    const std::size_t n_check = std::min<std::size_t>(s.elements.size(), 32);
    for (std::size_t i = 0; i < n_check; ++i) {
        const auto& e = s.elements[i];
        const Mat2 m = inst.spread.evaluate(e.params[0], e.params[1]);
        double scale = std::max({1.0, std::fabs(e.m.m11), std::fabs(e.m.m12),
                                 std::fabs(e.m.m21), std::fabs(e.m.m22)});
        if (m.max_abs_diff(e.m) > 1e-8 * scale)
            throw UsageError("spread file elements disagree with family " +
                             s.name);
    }
    return inst;
}

// Shared --family/--spread source selection.
struct SourceFlags {
    std::string family;
    std::string spread_path;
    ParamFlags params;

    void attach(CLI::App* cmd, bool with_params = true) {
        auto* f = cmd->add_option("--family", family, "catalog family id");
        auto* s =
            cmd->add_option("--spread", spread_path, "spread sample JSON file");
        f->excludes(s);
        s->excludes(f);
        if (with_params)
            params.attach(cmd);
    }

    FamilyInstance resolve() const {
        if (!spread_path.empty()) {
            if (!params.provided().empty())
                throw UsageError(
                    "parameter flags only apply with --family; the spread "
                    "file carries its own parameters");
            return instance_from_spread(load_spread_file(spread_path));
        }
        if (family.empty())
            throw UsageError("need either --family or --spread");
        return instantiate(spec_for(family, params.provided()));
    }
};

ojson expected_json(const ExpectedVerdicts& e) {
    return ojson{{"decomposable", e.decomposable},
                 {"quasi_simple", e.quasi_simple},
                 {"contains_so2", e.contains_so2},
                 {"kernel_is_diagonal", e.kernel_is_diagonal}};
}

int cmd_family_list(const std::string& out) {
    ojson arr = ojson::array();
    for (FamilyId id : catalog_families())
        arr.push_back(ojson{{"family", to_string(id)},
                            {"constraints", constraint_summary(id)}});
    emit_json(arr, out);
    return kPass;
}

int cmd_family_show(const std::string& name, const std::string& out) {
    const auto id = family_from_string(name);
    if (!id)
        throw UsageError("unknown family '" + name + "'");
    emit_json(family_show_json(*id), out);
    return kPass;
}

int cmd_family_export(const std::string& name, const ParamFlags& params,
                      int n_r, int n_t, const std::string& out) {
    const FamilyInstance inst =
        instantiate(spec_for(name, params.provided()));
    emit_json(to_json(sample_spread(inst, n_r, n_t)), out);
    return kPass;
}

int cmd_classify(const SourceFlags& src, const GridFlags& grid,
                 const std::string& out) {
    FamilyInstance inst = src.resolve();
    grid.apply(inst.policy);
    ojson report;
    try {
        const ClassificationReport rep = classify(loop_of(inst));
        report = classification_json(inst.spec, rep);
        report["expected_verdicts"] = expected_json(inst.expected);
        const bool match = rep.decomposable == inst.expected.decomposable &&
                           rep.quasi_simple == inst.expected.quasi_simple &&
                           rep.contains_so2 == inst.expected.contains_so2 &&
                           rep.kernel_is_diagonal ==
                               inst.expected.kernel_is_diagonal;
        report["verdicts_match"] = match;
        emit_json(report, out);
        if (!rep.consistency_ok)
            return kNumeric;
        return match ? kPass : kMismatch;
    } catch (const domain_error& e) {
        report["family"] = to_string(inst.spec.id);
        report["params"] = params_json(inst.spec);
        report["error"] = e.what();
        emit_json(report, out);
        return kNumeric;
    }
}

int cmd_binary_op(const std::string& op, const SourceFlags& src,
                  const std::string& lhs_text, const std::string& rhs_text) {
    const FamilyInstance inst = src.resolve();
    const QuasifieldLoop L = loop_of(inst);
    const Vec2 lhs = parse_pair(lhs_text);
    const Vec2 rhs = parse_pair(rhs_text);
    Vec2 result{};
    if (op == "mul") {
        result = multiply(L, lhs, rhs);
    } else if (op == "ldiv") {
        result = left_divide(L, lhs, rhs);
    } else {
        result = right_divide(L, rhs, lhs);
    }
    std::cout << fmt_coord(result.x) << "," << fmt_coord(result.y) << "\n";
    if (op == "rdiv") {
        const Vec2 back = multiply(L, result, rhs);
        const double res = (back - lhs).norm() / std::max(1.0, lhs.norm());
        std::cout << "residual " << csv_number(res) << "\n";
        if (res > 1e-8)
            return kNumeric;
    }
    return kPass;
}

int cmd_verify_spread(const SourceFlags& src, const std::string& out) {
    SpreadSample sample;
    std::optional<FamilyInstance> inst;
    const SpreadFamily* fam = nullptr;
    if (!src.spread_path.empty()) {
        sample = load_spread_file(src.spread_path);
        // A recognized name enables Newton refinement in the coverage check;
        // a foreign sample is still checked by nearest element.
        try {
            inst = instance_from_spread(sample);
            fam = &inst->spread;
        } catch (const UsageError&) {
            fam = nullptr;
        }
    } else {
        inst = src.resolve();
        sample = sample_spread(*inst);
        fam = &inst->spread;
    }
    const M1Report m1 = check_M1(sample);
    const M2Report m2 = check_M2(sample, {{1.0, 0.0}, {0.0, 1.0}},
                                 coverage_targets(), fam);
    const bool ok = m1.ok() && m2.coverage() >= 0.99;
    ojson rep;
    rep["check"] = "spread";
    rep["name"] = sample.name;
    rep["n_elements"] = sample.elements.size();
    rep["m1"] = to_json(m1);
    rep["m2"] = to_json(m2);
    rep["ok"] = ok;
    emit_json(rep, out);
    return ok ? kPass : kMismatch;
}

int cmd_verify_section(const SourceFlags& src, const GridFlags& grid,
                       int n_samples, std::uint64_t seed,
                       const std::string& out) {
    FamilyInstance inst = src.resolve();
    grid.apply(inst.policy);
    const QuasifieldLoop L = loop_of(inst);
    const SectionCheck sc = is_loop_section(L.section, L.policy);
    const TransitivityReport tr = verify_sharp_transitivity(L, n_samples, seed);
    const bool ok = sc.ok && tr.ok();
    ojson rep;
    rep["check"] = "section";
    rep["family"] = to_string(inst.spec.id);
    rep["section_check"] = to_json(sc);
    rep["transitivity"] = to_json(tr);
    rep["ok"] = ok;
    emit_json(rep, out);
    return ok ? kPass : kMismatch;
}

struct ProfileInput {
    CompactLoopProfile profile;
    bool endpoint_ok = true;
};

ProfileInput profile_from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f)
        throw UsageError("cannot open profile file '" + path + "'");
    ojson j;
    std::vector<double> t, a, b;
    double u_tag = 1.0;
    try {
        j = ojson::parse(f);
        for (const auto& v : j.at("t"))
            t.push_back(v.get<double>());
        for (const auto& v : j.at("a"))
            a.push_back(v.get<double>());
        if (j.contains("b"))
            for (const auto& v : j.at("b"))
                b.push_back(v.get<double>());
        if (j.contains("u"))
            u_tag = j.at("u").get<double>();
    } catch (const std::exception& e) {
        throw UsageError("malformed profile file '" + path + "': " + e.what());
    }
    if (t.size() < 2 || t.size() != a.size() ||
        (!b.empty() && b.size() != t.size()))
        throw UsageError("profile file needs matching t/a arrays (and "
                         "optional b) with at least two points");
    for (std::size_t i = 1; i < t.size(); ++i)
        if (!(t[i] > t[i - 1]))
            throw UsageError("profile t values must increase");
    if (std::fabs(t.front()) > 1e-9 || std::fabs(t.back() - tau) > 1e-9)
        throw UsageError("profile t values must span [0, 2pi]");

    // Build the interpolants directly so out-of-spec profiles can still be
    // checked; the endpoint invariant is reported instead of enforced.
    ProfileInput in;
    std::function<double(double)> a_fn = linear_interpolant(t, std::move(a));
    std::function<double(double)> b_fn;
    if (b.empty())
        b_fn = [](double) { return 0.0; };
    else
        b_fn = linear_interpolant(t, std::move(b));
    in.endpoint_ok = std::fabs(a_fn(0.0) - 1.0) <= 1e-9 &&
                     std::fabs(a_fn(tau) - 1.0) <= 1e-9 &&
                     std::fabs(b_fn(0.0)) <= 1e-9 &&
                     std::fabs(b_fn(tau)) <= 1e-9;
    in.profile = CompactLoopProfile{std::move(a_fn), std::move(b_fn), u_tag,
                                    "imported from " + path};
    return in;
}

int cmd_verify_c1(const SourceFlags& src, const std::string& profile_path,
                  double u, int n_points, int quadrature_n,
                  const std::string& out) {
    ProfileInput in;
    std::string label;
    if (!profile_path.empty()) {
        if (!src.family.empty() || !src.spread_path.empty())
            throw UsageError("--profile excludes --family/--spread");
        in = profile_from_file(profile_path);
        label = profile_path;
    } else {
        const FamilyInstance inst = src.resolve();
        try {
            in.profile = profile_of_section(inst.section, u);
        } catch (const domain_error& e) {
            // A family section that breaks the profile invariant is a solver
            // problem, not an input problem.
            throw numeric_error(e.what());
        }
        label = to_string(inst.spec.id);
    }

    const C1Report c1 = c1_inequality_check(in.profile, n_points);
    const BoundReport bb = b_bound_check(in.profile, quadrature_n);
    bool b_zero = true;
    for (int i = 0; i <= 16; ++i)
        if (std::fabs(in.profile.b_u(tau * i / 16.0)) > 1e-9) {
            b_zero = false;
            break;
        }
    ojson rep;
    rep["check"] = "c1";
    rep["source"] = label;
    rep["u"] = in.profile.u_tag;
    rep["endpoint_invariant_ok"] = in.endpoint_ok;
    rep["c1"] = to_json(c1);
    rep["b_bound"] = to_json(bb);
    bool ok = in.endpoint_ok && c1.ok && bb.ok;
    bool boundary = c1.boundary || bb.boundary;
    if (b_zero) {
        const BoundReport band = exp_band_check(in.profile, n_points);
        rep["exp_band"] = to_json(band);
        ok = ok && band.ok;
        boundary = boundary || band.boundary;
    }
    rep["boundary"] = boundary;
    rep["ok"] = ok;
    emit_json(rep, out);
    return ok ? kPass : kMismatch;
}

int cmd_export_translations(const SourceFlags& src, const GridFlags& grid,
                            const std::string& format, const std::string& out) {
    FamilyInstance inst = src.resolve();
    grid.apply(inst.policy);
    if (format == "csv") {
        emit_text(translations_csv(inst, inst.policy.u_grid,
                                   inst.policy.t_grid),
                  out);
        return kPass;
    }
    if (format != "json")
        throw UsageError("unknown format '" + format + "' (want csv or json)");
    ojson rep;
    rep["family"] = to_string(inst.spec.id);
    rep["params"] = params_json(inst.spec);
    rep["rows"] = ojson::array();
    for (double r : inst.policy.u_grid)
        for (double t : inst.policy.t_grid) {
            ojson row;
            row["r"] = r;
            row["t"] = t;
            row["a"] = inst.section.a(r, t);
            row["b"] = inst.section.b(r, t);
            const Mat2 m = section_matrix(inst.section, {r, t});
            row["m"] = {{m.m11, m.m12}, {m.m21, m.m22}};
            rep["rows"].push_back(std::move(row));
        }
    emit_json(rep, out);
    return kPass;
}

template <typename Fn> int guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumeric;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-dimensional locally compact quasifields as sharply "
                 "transitive sections in GL2+(R)"};
    app.require_subcommand(1);
    int rc = kPass;

    // family list | show | export
    auto* family = app.add_subcommand("family", "catalog inspection");
    family->require_subcommand(1);
    {
        auto* list = family->add_subcommand("list", "all catalog families");
        auto out = std::make_shared<std::string>();
        list->add_option("--out", *out, "write JSON here instead of stdout");
        list->callback(
            [&rc, out] { rc = guarded([&] { return cmd_family_list(*out); }); });
    }
    {
        auto* show = family->add_subcommand("show", "constraints and defaults");
        auto name = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        show->add_option("id", *name, "family id")->required();
        show->add_option("--out", *out, "write JSON here instead of stdout");
        show->callback([&rc, name, out] {
            rc = guarded([&] { return cmd_family_show(*name, *out); });
        });
    }
    {
        auto* exp = family->add_subcommand("export", "sample the spread set");
        auto name = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto params = std::make_shared<ParamFlags>();
        auto n_r = std::make_shared<int>(10);
        auto n_t = std::make_shared<int>(20);
        exp->add_option("id", *name, "family id")->required();
        params->attach(exp);
        exp->add_option("--shells", *n_r, "radial shells to sample");
        exp->add_option("--directions", *n_t, "directions per shell");
        exp->add_option("--out", *out, "write JSON here instead of stdout");
        exp->callback([&rc, name, params, n_r, n_t, out] {
            rc = guarded([&] {
                return cmd_family_export(*name, *params, *n_r, *n_t, *out);
            });
        });
    }

    // classify
    {
        auto* cls = app.add_subcommand("classify", "structural verdicts");
        auto src = std::make_shared<SourceFlags>();
        auto grid = std::make_shared<GridFlags>();
        auto out = std::make_shared<std::string>();
        auto seed = std::make_shared<std::uint64_t>(0);
        src->attach(cls);
        grid->attach(cls);
        cls->add_option("--seed", *seed, "accepted for reproducible scripts");
        cls->add_option("--out", *out, "write JSON here instead of stdout");
        cls->callback([&rc, src, grid, out] {
            rc = guarded([&] { return cmd_classify(*src, *grid, *out); });
        });
    }

    // mul / ldiv / rdiv
    for (const char* op : {"mul", "ldiv", "rdiv"}) {
        const std::string desc =
            op == std::string("mul")
                ? "loop product lhs * rhs"
                : (op == std::string("ldiv") ? "solve lhs * x = rhs for x"
                                             : "solve x * rhs = lhs for x");
        auto* cmd = app.add_subcommand(op, desc);
        auto src = std::make_shared<SourceFlags>();
        auto lhs = std::make_shared<std::string>();
        auto rhs = std::make_shared<std::string>();
        src->attach(cmd);
        cmd->add_option("--lhs", *lhs, "left operand x,y")->required();
        cmd->add_option("--rhs", *rhs, "right operand x,y")->required();
        std::string opname = op;
        cmd->callback([&rc, opname, src, lhs, rhs] {
            rc = guarded(
                [&] { return cmd_binary_op(opname, *src, *lhs, *rhs); });
        });
    }

    // verify spread | section | c1
    auto* verify = app.add_subcommand("verify", "axiom and regularity checks");
    verify->require_subcommand(1);
    {
        auto* vs = verify->add_subcommand("spread", "M1 and M2 on a sample");
        auto src = std::make_shared<SourceFlags>();
        auto out = std::make_shared<std::string>();
        src->attach(vs);
        vs->add_option("--out", *out, "write JSON here instead of stdout");
        vs->callback([&rc, src, out] {
            rc = guarded([&] { return cmd_verify_spread(*src, *out); });
        });
    }
    {
        auto* vc = verify->add_subcommand(
            "section", "loop-section identities and sharp transitivity");
        auto src = std::make_shared<SourceFlags>();
        auto grid = std::make_shared<GridFlags>();
        auto out = std::make_shared<std::string>();
        auto n = std::make_shared<int>(100);
        auto seed = std::make_shared<std::uint64_t>(0);
        src->attach(vc);
        grid->attach(vc);
        vc->add_option("--samples", *n, "random (q, w) pairs to test");
        vc->add_option("--seed", *seed, "RNG seed");
        vc->add_option("--out", *out, "write JSON here instead of stdout");
        vc->callback([&rc, src, grid, n, seed, out] {
            rc = guarded([&] {
                return cmd_verify_section(*src, *grid, int(*n), *seed, *out);
            });
        });
    }
    {
        auto* v1 = verify->add_subcommand(
            "c1", "compact-factor differentiability inequalities");
        auto src = std::make_shared<SourceFlags>();
        auto profile = std::make_shared<std::string>();
        auto u = std::make_shared<double>(1.0);
        auto points = std::make_shared<int>(1024);
        auto quad = std::make_shared<int>(512);
        auto out = std::make_shared<std::string>();
        src->attach(v1);
        v1->add_option("--profile", *profile, "sampled profile JSON file");
        v1->add_option("--u", *u, "radius of the compact factor");
        v1->add_option("--points", *points, "evaluation grid size");
        v1->add_option("--quadrature", *quad, "quadrature panels");
        v1->add_option("--out", *out, "write JSON here instead of stdout");
        v1->callback([&rc, src, profile, u, points, quad, out] {
            rc = guarded([&] {
                return cmd_verify_c1(*src, *profile, *u, *points, *quad, *out);
            });
        });
    }

    // export-translations
    {
        auto* et = app.add_subcommand("export-translations",
                                      "grid of decomposed coordinates and "
                                      "matrices");
        auto src = std::make_shared<SourceFlags>();
        auto grid = std::make_shared<GridFlags>();
        auto format = std::make_shared<std::string>("csv");
        auto out = std::make_shared<std::string>();
        src->attach(et);
        grid->attach(et);
        et->add_option("--format", *format, "csv or json");
        et->add_option("--out", *out, "write here instead of stdout");
        et->callback([&rc, src, grid, format, out] {
            rc = guarded([&] {
                return cmd_export_translations(*src, *grid, *format, *out);
            });
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kPass : kUsage;
    }
    return rc;
}
