#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "qflab/differentiable.hpp"
#include "qflab/families.hpp"
#include "qflab/section.hpp"
#include "qflab/spread.hpp"
#include "qflab/structure.hpp"

namespace qflab {

// Insertion-ordered JSON keeps reruns byte-identical.
using ojson = nlohmann::ordered_json;

inline ojson to_json(const Witness& w) {
    return ojson{{"test", w.test}, {"r", w.r},     {"t", w.t},
                 {"k", w.k},       {"lhs", w.lhs}, {"rhs", w.rhs},
                 {"residual", w.residual}};
}

inline ojson to_json(const SpreadSample& s) {
    ojson j;
    j["name"] = s.name;
    j["params"] = s.params;
    j["axes"] = s.param_names;
    j["includes_vertical"] = s.includes_vertical;
    j["elements"] = ojson::array();
    for (const auto& e : s.elements) {
        ojson el;
        el["p"] = {e.params[0], e.params[1]};
        el["m"] = {{e.m.m11, e.m.m12}, {e.m.m21, e.m.m22}};
        j["elements"].push_back(std::move(el));
    }
    return j;
}

inline SpreadSample spread_sample_from_json(const ojson& j) {
    SpreadSample s;
    s.name = j.at("name").get<std::string>();
    if (j.contains("params"))
        for (const auto& p : j.at("params"))
            s.params.push_back(p.get<double>());
    if (j.contains("axes"))
        for (const auto& n : j.at("axes"))
            s.param_names.push_back(n.get<std::string>());
    if (j.contains("includes_vertical"))
        s.includes_vertical = j.at("includes_vertical").get<bool>();
    for (const auto& el : j.at("elements")) {
        SpreadElement e;
        const auto& p = el.at("p");
        e.params = {p.at(0).get<double>(), p.at(1).get<double>()};
        const auto& m = el.at("m");
        e.m = Mat2{m.at(0).at(0).get<double>(), m.at(0).at(1).get<double>(),
                   m.at(1).at(0).get<double>(), m.at(1).at(1).get<double>()};
        s.elements.push_back(e);
    }
    return s;
}

// Family parameters in declaration order, with RemarkF's function noted by
// name.
inline ojson params_json(const FamilySpec& spec) {
    ojson p = ojson::object();
    for (const auto& n : param_names(spec.id))
        p[n] = spec.at(n);
    if (spec.id == FamilyId::RemarkF)
        p["f"] = spec.f_name;
    return p;
}

inline ojson classification_json(const FamilySpec& spec,
                                 const ClassificationReport& rep) {
    ojson j;
    j["family"] = to_string(spec.id);
    j["params"] = params_json(spec);
    ojson v;
    v["kernel_is_diagonal"] = rep.kernel_is_diagonal;
    v["decomposable"] = rep.decomposable;
    v["quasi_simple"] = rep.quasi_simple;
    v["contains_so2"] = rep.contains_so2;
    v["t_all_elliptic"] = rep.t_all_elliptic;
    v["proper"] = rep.proper;
    v["t_normal"] = rep.t_normal;
    j["verdicts"] = std::move(v);
    j["max_decomposition_residual"] = rep.max_decomposition_residual;
    j["kernel_monotone_ok"] = rep.kernel_monotone_ok;
    if (!rep.kernel_diagnostic.empty())
        j["kernel_diagnostic"] = rep.kernel_diagnostic;
    j["consistency_ok"] = rep.consistency_ok;
    if (!rep.consistency_message.empty())
        j["consistency_message"] = rep.consistency_message;
    j["witnesses"] = ojson::array();
    for (const auto& w : rep.witnesses)
        j["witnesses"].push_back(to_json(w));
    return j;
}

inline ojson to_json(const SectionCheck& c) {
    ojson j;
    j["ok"] = c.ok;
    j["slice_loops"] = c.slice_loops;
    j["witnesses"] = ojson::array();
    for (const auto& w : c.witnesses)
        j["witnesses"].push_back(to_json(w));
    return j;
}

inline ojson to_json(const TransitivityReport& r) {
    ojson j;
    j["n_samples"] = r.n_samples;
    j["ok"] = r.ok();
    j["failures"] = ojson::array();
    for (const auto& f : r.failures) {
        ojson e;
        e["q"] = {f.q.x, f.q.y};
        e["w"] = {f.w.x, f.w.y};
        e["reason"] = f.reason;
        e["residual"] = f.residual;
        j["failures"].push_back(std::move(e));
    }
    return j;
}

inline ojson to_json(const M1Report& r) {
    ojson j;
    j["ok"] = r.ok();
    j["min_abs_det"] = r.min_abs_det;
    j["n_pairs"] = r.n_pairs;
    j["violations"] = ojson::array();
    for (const auto& v : r.violations)
        j["violations"].push_back(
            ojson{{"i", v.i}, {"j", v.j}, {"det", v.det}});
    return j;
}

inline ojson to_json(const M2Report& r) {
    ojson j;
    j["covered"] = r.covered;
    j["total"] = r.total;
    j["coverage"] = r.coverage();
    j["uncovered"] = ojson::array();
    std::size_t cap = 0;
    for (const auto& m : r.uncovered) {
        if (++cap > 16)
            break;
        ojson e;
        e["x"] = {m.x.x, m.x.y};
        e["target"] = {m.target.x, m.target.y};
        e["best_dist"] = m.best_dist;
        j["uncovered"].push_back(std::move(e));
    }
    return j;
}

inline ojson to_json(const C1Report& r) {
    ojson j;
    j["ok"] = r.ok;
    j["boundary"] = r.boundary;
    j["min_margin"] = r.min_margin;
    j["endpoint_margin"] = r.endpoint_margin;
    j["violations"] = ojson::array();
    for (const auto& v : r.violations)
        j["violations"].push_back(
            ojson{{"t", v.t}, {"lhs", v.lhs}, {"margin", v.margin}});
    if (!r.note.empty())
        j["note"] = r.note;
    return j;
}

inline ojson to_json(const BoundReport& r) {
    ojson j;
    j["ok"] = r.ok;
    j["boundary"] = r.boundary;
    j["min_margin"] = r.min_margin;
    j["violations"] = ojson::array();
    for (const auto& v : r.violations)
        j["violations"].push_back(
            ojson{{"t", v.t}, {"lhs", v.lhs}, {"margin", v.margin}});
    return j;
}

inline ojson family_show_json(FamilyId id) {
    ojson j;
    j["family"] = to_string(id);
    j["constraints"] = constraint_summary(id);
    j["param_names"] = param_names(id);
    j["defaults"] = params_json(default_spec(id));
    const auto e = expected_verdicts(id);
    j["expected_verdicts"] = ojson{{"decomposable", e.decomposable},
                                   {"quasi_simple", e.quasi_simple},
                                   {"contains_so2", e.contains_so2},
                                   {"kernel_is_diagonal", e.kernel_is_diagonal}};
    return j;
}

// RFC 4180: quote fields containing separators, escape quotes by doubling,
// CRLF record ends.
inline std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos)
        return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"')
            out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline std::string csv_number(double v) { return ojson(v).dump(); }

// One row per (r, t) grid point: the decomposed coordinates and the full
// left-translation matrix.
inline std::string translations_csv(const FamilyInstance& inst,
                                    const std::vector<double>& r_grid,
                                    const std::vector<double>& t_grid) {
    std::string out = "family";
    const auto names = param_names(inst.spec.id);
    for (const auto& n : names)
        out += "," + csv_escape(n);
    out += ",r,t,a,b,m11,m12,m21,m22\r\n";
    std::string param_cells;
    for (const auto& n : names)
        param_cells += "," + csv_number(inst.spec.at(n));
    for (double r : r_grid)
        for (double t : t_grid) {
            const double a = inst.section.a(r, t);
            const double b = inst.section.b(r, t);
            const Mat2 m = section_matrix(inst.section, {r, t});
            out += csv_escape(to_string(inst.spec.id)) + param_cells;
            out += "," + csv_number(r) + "," + csv_number(t);
            out += "," + csv_number(a) + "," + csv_number(b);
            out += "," + csv_number(m.m11) + "," + csv_number(m.m12);
            out += "," + csv_number(m.m21) + "," + csv_number(m.m22);
            out += "\r\n";
        }
    return out;
}

} // namespace qflab
