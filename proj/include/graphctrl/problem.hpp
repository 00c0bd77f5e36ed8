#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "graphctrl/graph.hpp"
#include "graphctrl/polynomial.hpp"

namespace graphctrl {

class ProblemError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ControlSpec {
    std::string description;
    std::map<std::string, std::vector<double>> potentials;  // edge id -> ascending coefficients
    bool operator==(const ControlSpec&) const = default;
};

struct Tolerances {
    double resonance = 1e-10;
    double decay_floor = 1e-14;
    double bisection = 1e-13;
    double length = 1e-9;
    bool operator==(const Tolerances&) const = default;
};

struct SolverSettings {
    std::size_t num_modes = 50;
    double scan_resolution = 0.0;  // 0 selects a quarter of the admissible maximum
    double horizon = 0.0;
    long q_max = 10000;
    Tolerances tolerances;
    bool operator==(const SolverSettings&) const = default;
};

struct Problem {
    MetricGraph graph;
    ControlSpec control;
    SolverSettings solver;
    bool assert_admissible_lengths = false;

    double scan_resolution() const
    {
        if (solver.scan_resolution > 0.0) return solver.scan_resolution;
        return std::numbers::pi / (8.0 * graph.total_length());
    }

    // Per-edge potentials in edge order; missing edges carry the zero polynomial.
    std::vector<Polynomial> potentials() const
    {
        std::vector<Polynomial> out;
        for (const auto& e : graph.edges()) {
            auto it = control.potentials.find(e.id);
            out.push_back(it == control.potentials.end() ? Polynomial{} : Polynomial(it->second));
        }
        return out;
    }

    bool operator==(const Problem&) const = default;
};

namespace detail {

using nlohmann::json;

inline std::string id_of(const json& j, const std::string& where)
{
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number_integer()) return std::to_string(j.get<long long>());
    throw ProblemError(where + ": expected string or integer id");
}

inline const json& require(const json& obj, const char* key, const std::string& where)
{
    if (!obj.is_object() || !obj.contains(key)) throw ProblemError(where + ": missing field '" + key + "'");
    return obj.at(key);
}

inline double number_at(const json& j, const std::string& where)
{
    if (!j.is_number()) throw ProblemError(where + ": expected number");
    return j.get<double>();
}

inline std::size_t line_of(const std::string& text, std::size_t byte)
{
    byte = std::min(byte, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
}

}  // namespace detail

inline Problem parse_problem(const std::string& text)
{
    using detail::json;
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ProblemError("parse error at line " + std::to_string(detail::line_of(text, e.byte)) + ": " + e.what());
    }
    if (!root.is_object()) throw ProblemError("top level: expected object");

    const json& g = detail::require(root, "graph", "top level");
    const json& jedges = detail::require(g, "edges", "graph");
    const json& jverts = detail::require(g, "vertices", "graph");
    if (!jedges.is_array()) throw ProblemError("graph.edges: expected array");
    if (!jverts.is_array()) throw ProblemError("graph.vertices: expected array");

    std::vector<Edge> edges;
    for (std::size_t i = 0; i < jedges.size(); ++i) {
        std::string where = "graph.edges[" + std::to_string(i) + "]";
        const json& je = jedges[i];
        Edge e;
        e.id = detail::id_of(detail::require(je, "id", where), where + ".id");
        e.length = detail::number_at(detail::require(je, "length", where), where + ".length");
        e.from = detail::id_of(detail::require(je, "from", where), where + ".from");
        e.to = detail::id_of(detail::require(je, "to", where), where + ".to");
        edges.push_back(std::move(e));
    }
    std::vector<Vertex> vertices;
    for (std::size_t i = 0; i < jverts.size(); ++i) {
        std::string where = "graph.vertices[" + std::to_string(i) + "]";
        const json& jv = jverts[i];
        Vertex v;
        v.id = detail::id_of(detail::require(jv, "id", where), where + ".id");
        const json& bc = detail::require(jv, "bc", where);
        if (!bc.is_string()) throw ProblemError(where + ".bc: expected \"D\", \"N\" or \"NK\"");
        try {
            v.bc = parse_boundary_condition(bc.get<std::string>());
        } catch (const GraphError& e) {
            throw ProblemError(where + ".bc: " + e.what());
        }
        vertices.push_back(std::move(v));
    }

    ControlSpec control;
    if (root.contains("control")) {
        const json& c = root.at("control");
        if (!c.is_object()) throw ProblemError("control: expected object");
        if (c.contains("description")) {
            if (!c.at("description").is_string()) throw ProblemError("control.description: expected string");
            control.description = c.at("description").get<std::string>();
        }
        if (c.contains("potentials")) {
            const json& pots = c.at("potentials");
            if (!pots.is_object()) throw ProblemError("control.potentials: expected object keyed by edge id");
            for (const auto& [edge, coeffs] : pots.items()) {
                std::string where = "control.potentials." + edge;
                if (!coeffs.is_array()) throw ProblemError(where + ": expected coefficient array");
                std::vector<double> cs;
                for (std::size_t i = 0; i < coeffs.size(); ++i)
                    cs.push_back(detail::number_at(coeffs[i], where + "[" + std::to_string(i) + "]"));
                if (cs.size() > 13) throw ProblemError(where + ": degree exceeds 12");
                control.potentials[edge] = std::move(cs);
            }
        }
    }

    SolverSettings solver;
    if (root.contains("solver")) {
        const json& s = root.at("solver");
        if (!s.is_object()) throw ProblemError("solver: expected object");
        if (s.contains("num_modes")) {
            if (!s.at("num_modes").is_number_integer() || s.at("num_modes").get<long long>() < 1)
                throw ProblemError("solver.num_modes: expected positive integer");
            solver.num_modes = s.at("num_modes").get<std::size_t>();
        }
        if (s.contains("scan_resolution"))
            solver.scan_resolution = detail::number_at(s.at("scan_resolution"), "solver.scan_resolution");
        if (s.contains("horizon")) solver.horizon = detail::number_at(s.at("horizon"), "solver.horizon");
        if (s.contains("q_max")) {
            if (!s.at("q_max").is_number_integer()) throw ProblemError("solver.q_max: expected integer");
            solver.q_max = s.at("q_max").get<long>();
        }
        if (s.contains("tolerances")) {
            const json& t = s.at("tolerances");
            if (!t.is_object()) throw ProblemError("solver.tolerances: expected object");
            auto opt = [&](const char* key, double& out) {
                if (t.contains(key)) out = detail::number_at(t.at(key), std::string("solver.tolerances.") + key);
            };
            opt("resonance", solver.tolerances.resonance);
            opt("decay_floor", solver.tolerances.decay_floor);
            opt("bisection", solver.tolerances.bisection);
            opt("length", solver.tolerances.length);
        }
    }
    bool asserted = false;
    if (root.contains("assert_admissible_lengths")) {
        if (!root.at("assert_admissible_lengths").is_boolean())
            throw ProblemError("assert_admissible_lengths: expected boolean");
        asserted = root.at("assert_admissible_lengths").get<bool>();
    }

    try {
        MetricGraph graph(std::move(edges), std::move(vertices));
        for (const auto& [edge, coeffs] : control.potentials) {
            (void)coeffs;
            graph.edge_index(edge);
        }
        return Problem{std::move(graph), std::move(control), solver, asserted};
    } catch (const GraphError& e) {
        throw ProblemError(std::string("invalid graph: ") + e.what());
    }
}

inline Problem load_problem(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ProblemError("cannot open problem file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_problem(ss.str());
}

inline nlohmann::json to_json(const Problem& p)
{
    using nlohmann::json;
    json edges = json::array();
    for (const auto& e : p.graph.edges()) edges.push_back({{"id", e.id}, {"length", e.length}, {"from", e.from}, {"to", e.to}});
    json verts = json::array();
    for (const auto& v : p.graph.vertices()) verts.push_back({{"id", v.id}, {"bc", to_string(v.bc)}});
    json pots = json::object();
    for (const auto& [edge, coeffs] : p.control.potentials) pots[edge] = coeffs;
    const auto& t = p.solver.tolerances;
    return {
        {"graph", {{"edges", edges}, {"vertices", verts}}},
        {"control", {{"description", p.control.description}, {"potentials", pots}}},
        {"solver",
         {{"num_modes", p.solver.num_modes},
          {"scan_resolution", p.solver.scan_resolution},
          {"horizon", p.solver.horizon},
          {"q_max", p.solver.q_max},
          {"tolerances",
           {{"resonance", t.resonance}, {"decay_floor", t.decay_floor}, {"bisection", t.bisection}, {"length", t.length}}}}},
        {"assert_admissible_lengths", p.assert_admissible_lengths},
    };
}

inline std::string serialize(const Problem& p) { return to_json(p).dump(2); }

}  // namespace graphctrl
