#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace graphctrl {

class GraphError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class BoundaryCondition { Dirichlet, Neumann, NeumannKirchhoff };

inline std::string to_string(BoundaryCondition bc)
{
    switch (bc) {
    case BoundaryCondition::Dirichlet: return "D";
    case BoundaryCondition::Neumann: return "N";
    case BoundaryCondition::NeumannKirchhoff: return "NK";
    }
    return "?";
}

inline BoundaryCondition parse_boundary_condition(const std::string& tag)
{
    if (tag == "D") return BoundaryCondition::Dirichlet;
    if (tag == "N") return BoundaryCondition::Neumann;
    if (tag == "NK") return BoundaryCondition::NeumannKirchhoff;
    throw GraphError("unknown boundary condition tag '" + tag + "' (expected D, N or NK)");
}

enum class Topology { Interval, Star, StarWithLoops, UniformChainFamily };

inline std::string to_string(Topology t)
{
    switch (t) {
    case Topology::Interval: return "Interval";
    case Topology::Star: return "Star";
    case Topology::StarWithLoops: return "StarWithLoops";
    case Topology::UniformChainFamily: return "UniformChainFamily";
    }
    return "?";
}

struct Vertex {
    std::string id;
    BoundaryCondition bc = BoundaryCondition::Dirichlet;
    bool operator==(const Vertex&) const = default;
};

struct Edge {
    std::string id;
    double length = 0.0;
    std::string from;
    std::string to;
    bool is_loop() const { return from == to; }
    bool operator==(const Edge&) const = default;
};

// Validated compact metric graph. Star edges run from the external vertex
// (coordinate 0) to the center (coordinate L).
class MetricGraph {
public:
    MetricGraph(std::vector<Edge> edges, std::vector<Vertex> vertices)
        : edges_(std::move(edges)), vertices_(std::move(vertices))
    {
        validate();
        topology_ = classify();
        if (topology_ == Topology::Star) orient_star();
    }

    const std::vector<Edge>& edges() const { return edges_; }
    const std::vector<Vertex>& vertices() const { return vertices_; }
    Topology topology() const { return topology_; }
    std::size_t num_edges() const { return edges_.size(); }

    std::vector<double> lengths() const
    {
        std::vector<double> out;
        out.reserve(edges_.size());
        for (const auto& e : edges_) out.push_back(e.length);
        return out;
    }

    double total_length() const
    {
        double s = 0.0;
        for (const auto& e : edges_) s += e.length;
        return s;
    }

    const Vertex& vertex(const std::string& id) const
    {
        for (const auto& v : vertices_)
            if (v.id == id) return v;
        throw GraphError("unknown vertex '" + id + "'");
    }

    std::size_t degree(const std::string& id) const
    {
        std::size_t d = 0;
        for (const auto& e : edges_) {
            if (e.from == id) ++d;
            if (e.to == id) ++d;
        }
        return d;
    }

    std::size_t edge_index(const std::string& id) const
    {
        for (std::size_t i = 0; i < edges_.size(); ++i)
            if (edges_[i].id == id) return i;
        throw GraphError("unknown edge '" + id + "'");
    }

    // Boundary condition at the coordinate-0 end of a star or interval edge.
    BoundaryCondition external_bc(std::size_t edge) const { return vertex(edges_.at(edge).from).bc; }

    // Interval: the condition at the coordinate-L end.
    BoundaryCondition far_bc(std::size_t edge) const { return vertex(edges_.at(edge).to).bc; }

    bool operator==(const MetricGraph& o) const { return edges_ == o.edges_ && vertices_ == o.vertices_; }

    static MetricGraph interval(double length, BoundaryCondition left, BoundaryCondition right)
    {
        return MetricGraph({{"e1", length, "v0", "v1"}}, {{"v0", left}, {"v1", right}});
    }

    static MetricGraph star(const std::vector<double>& lengths, const std::vector<BoundaryCondition>& externals)
    {
        if (lengths.size() != externals.size())
            throw GraphError("star: lengths and boundary conditions differ in size");
        std::vector<Edge> edges;
        std::vector<Vertex> vertices;
        for (std::size_t i = 0; i < lengths.size(); ++i) {
            auto n = std::to_string(i + 1);
            edges.push_back({"e" + n, lengths[i], "v" + n, "c"});
            vertices.push_back({"v" + n, externals[i]});
        }
        vertices.push_back({"c", BoundaryCondition::NeumannKirchhoff});
        return MetricGraph(std::move(edges), std::move(vertices));
    }

    static MetricGraph star(const std::vector<double>& lengths, BoundaryCondition externals)
    {
        std::vector<BoundaryCondition> bcs(lengths.size(), externals);
        return star(lengths, bcs);
    }

private:
    void validate() const
    {
        if (edges_.empty()) throw GraphError("graph has no edges");
        std::set<std::string> vids;
        for (const auto& v : vertices_)
            if (!vids.insert(v.id).second) throw GraphError("duplicate vertex id '" + v.id + "'");
        std::set<std::string> eids;
        for (const auto& e : edges_) {
            if (!eids.insert(e.id).second) throw GraphError("duplicate edge id '" + e.id + "'");
            if (!(e.length > 0.0) || !std::isfinite(e.length))
                throw GraphError("edge '" + e.id + "' has non-positive or non-finite length");
            if (!vids.count(e.from)) throw GraphError("edge '" + e.id + "' references unknown vertex '" + e.from + "'");
            if (!vids.count(e.to)) throw GraphError("edge '" + e.id + "' references unknown vertex '" + e.to + "'");
        }
        for (const auto& v : vertices_) {
            auto d = degree(v.id);
            if (d == 0) throw GraphError("vertex '" + v.id + "' is isolated");
            bool external = d == 1;
            if (external && v.bc == BoundaryCondition::NeumannKirchhoff)
                throw GraphError("D or N required on external vertex '" + v.id + "'");
            if (!external && v.bc != BoundaryCondition::NeumannKirchhoff)
                throw GraphError("NK required on internal vertex '" + v.id + "'");
        }
    }

    Topology classify() const
    {
        std::vector<std::string> internal;
        for (const auto& v : vertices_)
            if (degree(v.id) > 1) internal.push_back(v.id);
        if (edges_.size() == 1 && !edges_[0].is_loop()) return Topology::Interval;
        bool any_loop = false;
        for (const auto& e : edges_) any_loop = any_loop || e.is_loop();
        if (internal.size() == 1) {
            for (const auto& e : edges_)
                if (e.from != internal[0] && e.to != internal[0])
                    throw GraphError("unsupported topology: edge '" + e.id + "' misses the center");
            return any_loop ? Topology::StarWithLoops : Topology::Star;
        }
        if (!any_loop && edges_.size() + 1 == vertices_.size()) {
            std::vector<double> ls = lengths();
            bool uniform = true;
            for (double l : ls) uniform = uniform && std::abs(l - ls[0]) <= 1e-12 * ls[0];
            std::size_t max_deg = 0;
            for (const auto& v : vertices_) max_deg = std::max(max_deg, degree(v.id));
            if (uniform && max_deg <= 2) return Topology::UniformChainFamily;
        }
        throw GraphError("unsupported topology");
    }

    void orient_star()
    {
        for (auto& e : edges_)
            if (degree(e.from) > 1 && degree(e.to) == 1) std::swap(e.from, e.to);
    }

    std::vector<Edge> edges_;
    std::vector<Vertex> vertices_;
    Topology topology_ = Topology::Interval;
};

struct RationalHit {
    std::size_t k = 0;  // 1-based index of numerator length
    std::size_t j = 0;  // 1-based index of denominator length
    long p = 0;
    long q = 0;
    double residual = 0.0;
    bool operator==(const RationalHit&) const = default;
};

struct LengthSetReport {
    std::vector<std::vector<double>> ratios;
    std::vector<RationalHit> rational_hits;
    bool independence_flag = true;
};

// Scans every ratio L_k/L_j (k > j) against p/q with q <= q_max and reports the
// best approximant whenever it lies within tol.
inline LengthSetReport check_length_set(std::span<const double> lengths, long q_max = 10000, double tol = 1e-9)
{
    if (lengths.empty()) throw GraphError("check_length_set: empty length list");
    if (q_max < 1) throw GraphError("check_length_set: Q_max must be >= 1");
    if (!(tol > 0.0)) throw GraphError("check_length_set: tol must be positive");
    for (double l : lengths)
        if (!(l > 0.0) || !std::isfinite(l)) throw GraphError("check_length_set: lengths must be positive and finite");

    const std::size_t n = lengths.size();
    LengthSetReport report;
    report.ratios.assign(n, std::vector<double>(n, 1.0));
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < n; ++j) report.ratios[k][j] = lengths[k] / lengths[j];

    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t j = 0; j < k; ++j) {
            // Orient so that the reported ratio is >= 1; keeps hits symmetric under relabeling.
            std::size_t num = lengths[k] >= lengths[j] ? k : j;
            std::size_t den = num == k ? j : k;
            double r = report.ratios[num][den];
            RationalHit best;
            double best_res = std::numeric_limits<double>::infinity();
            for (long q = 1; q <= q_max; ++q) {
                double pr = std::round(r * static_cast<double>(q));
                long p = static_cast<long>(pr);
                if (std::gcd(p, q) != 1) continue;
                double res = std::abs(r - pr / static_cast<double>(q));
                if (res < best_res) {
                    best_res = res;
                    best = {num + 1, den + 1, p, q, res};
                }
                if (res == 0.0) break;
            }
            if (best_res < tol) report.rational_hits.push_back(best);
        }
    }
    report.independence_flag = report.rational_hits.empty();
    return report;
}

}  // namespace graphctrl
