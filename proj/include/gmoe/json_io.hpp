#pragma once

// JSON documents for mixing measures and the other artifacts. Floating
// point values are always written with 17 significant digits so that a
// re-parse gives back the identical double.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gmoe/errors.hpp"
#include "gmoe/model.hpp"

namespace gmoe {

using Json = nlohmann::ordered_json;

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline void dump_json(const Json& j, std::string& out, int indent, int depth) {
    const auto newline = [&](int lvl) {
        if (indent < 0) return;
        out += '\n';
        out.append(static_cast<std::size_t>(lvl * indent), ' ');
    };
    switch (j.type()) {
        case Json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += '{';
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ',';
                first = false;
                newline(depth + 1);
                out += Json(it.key()).dump();
                out += indent < 0 ? ":" : ": ";
                dump_json(it.value(), out, indent, depth + 1);
            }
            newline(depth);
            out += '}';
            return;
        }
        case Json::value_t::array: {
            // numeric arrays stay on one line
            bool flat = true;
            for (const auto& e : j) flat = flat && e.is_primitive();
            out += '[';
            bool first = true;
            for (const auto& e : j) {
                if (!first) out += flat || indent < 0 ? ", " : ",";
                first = false;
                if (!flat) newline(depth + 1);
                dump_json(e, out, indent, depth + 1);
            }
            if (!flat && !j.empty()) newline(depth);
            out += ']';
            return;
        }
        case Json::value_t::number_float: {
            const double v = j.get<double>();
            // JSON has no inf/nan
            out += std::isfinite(v) ? format_double(v) : "null";
            return;
        }
        default:
            out += j.dump();
    }
}

}  // namespace detail

/// Serialize with %.17g floats. indent < 0 gives a single line.
inline std::string dump_json(const Json& j, int indent = 2) {
    std::string out;
    detail::dump_json(j, out, indent, 0);
    return out;
}

inline Json vector_to_json(const Vector& v) {
    Json arr = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

inline Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Vector vector_from_json(const Json& j, const char* field) {
    if (!j.is_array()) throw DomainError(std::string("measure json: '") + field + "' must be an array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    return v;
}

inline Matrix matrix_from_json(const Json& j, const char* field) {
    if (!j.is_array() || j.empty() || !j[0].is_array()) {
        throw DomainError(std::string("measure json: '") + field + "' must be an array of rows");
    }
    Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
    for (std::size_t r = 0; r < j.size(); ++r) {
        if (j[r].size() != j[0].size()) throw DomainError("measure json: ragged matrix");
        for (std::size_t c = 0; c < j[r].size(); ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
        }
    }
    return m;
}

/// {"dim": d, "atoms": [{"weight", "c", "gamma", "a", "b", "nu"}, ...]}
inline Json measure_to_json(const MixingMeasure& g) {
    Json doc;
    doc["dim"] = g.dim();
    Json atoms = Json::array();
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto& comp = g.component(i);
        Json at;
        at["weight"] = g.weight(i);
        at["c"] = vector_to_json(comp.c);
        at["gamma"] = matrix_to_json(comp.gamma);
        at["a"] = vector_to_json(comp.a);
        at["b"] = comp.b;
        at["nu"] = comp.nu;
        atoms.push_back(std::move(at));
    }
    doc["atoms"] = std::move(atoms);
    return doc;
}

inline MixingMeasure measure_from_json(const Json& doc, const Floors& floors = {}) {
    try {
        const auto dim = doc.at("dim").get<std::size_t>();
        std::vector<double> weights;
        std::vector<Component> comps;
        for (const auto& at : doc.at("atoms")) {
            weights.push_back(at.at("weight").get<double>());
            Component comp;
            comp.c = vector_from_json(at.at("c"), "c");
            comp.gamma = matrix_from_json(at.at("gamma"), "gamma");
            comp.a = vector_from_json(at.at("a"), "a");
            comp.b = at.at("b").get<double>();
            comp.nu = at.at("nu").get<double>();
            if (comp.dim() != dim) throw DomainError("measure json: atom dimension differs from 'dim'");
            comps.push_back(std::move(comp));
        }
        return MixingMeasure(std::move(weights), std::move(comps), floors);
    } catch (const Json::exception& e) {
        throw DomainError(std::string("measure json: ") + e.what());
    }
}

inline std::string measure_to_string(const MixingMeasure& g) { return dump_json(measure_to_json(g)); }

inline MixingMeasure measure_from_string(const std::string& text, const Floors& floors = {}) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw DomainError(std::string("measure json: ") + e.what());
    }
    return measure_from_json(doc, floors);
}

inline Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return Json::parse(ss.str());
    } catch (const Json::parse_error& e) {
        throw DomainError(path + ": " + e.what());
    }
}

}  // namespace gmoe
