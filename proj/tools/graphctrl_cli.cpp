#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "graphctrl/graphctrl.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace graphctrl;

namespace {

constexpr const char* tool_version = "0.1.0";

enum ExitCode : int { exit_ok = 0, exit_invalid = 2, exit_numerical = 3, exit_usage = 64 };

// Input that fails validation (exit 2).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Settings {
    std::string problem;
    std::size_t modes = 0;
    double T = 0.0;
    double eps = 0.0;
    double tol_res = 1e-10;
    std::string out_dir = ".";
    unsigned threads = 1;

    // command-specific
    std::string freqs, target, control, mode = "direct", resonant;
    double sample_rate = 100.0;
    std::size_t initial = 1, fidelity_level = 0, stride = 0;
    bool all = false;
    std::vector<std::string> sections;
};

std::string num(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 1469598103934665603ULL)
{
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex(std::uint64_t v)
{
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Writes artifacts into the output directory and records them for the manifest.
class ArtifactWriter {
public:
    explicit ArtifactWriter(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

    void write(const std::string& name, const std::string& content)
    {
        std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + (dir_ / name).string() + "'");
        out << content;
        files_.push_back(name);
    }

    void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

    void manifest(const std::string& command, const std::string& input_hash, const json& settings, double wall)
    {
        auto outputs = files_;
        outputs.push_back("manifest.json");
        json m{{"command", command},
               {"input_hash", input_hash},
               {"settings", settings},
               {"tool_version", tool_version},
               {"wall_time_s", wall},
               {"outputs", outputs}};
        std::ofstream out(dir_ / "manifest.json", std::ios::binary | std::ios::trunc);
        out << m.dump(2) << "\n";
    }

private:
    fs::path dir_;
    std::vector<std::string> files_;
};

std::vector<std::vector<std::string>> read_csv(const std::string& path)
{
    std::istringstream in(read_file(path));
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

double to_double(const std::string& s, const std::string& where)
{
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (s.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw InputError(where + ": expected a number, got '" + s + "'");
    }
}

bool is_header(const std::vector<std::string>& row)
{
    if (row.empty()) return false;
    try {
        (void)std::stod(row[0]);
        return false;
    } catch (const std::exception&) {
        return true;
    }
}

// Column lookup by header name, falling back to position.
std::size_t column(const std::vector<std::string>& header, const std::string& name, std::size_t fallback)
{
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    return fallback;
}

struct Loaded {
    Problem problem;
    std::string hash;
};

Loaded load(const Settings& s)
{
    if (s.problem.empty()) throw InputError("--problem is required");
    const auto text = read_file(s.problem);
    return {parse_problem(text), hex(fnv1a(text))};
}

std::size_t modes_of(const Settings& s, const Problem& p) { return s.modes > 0 ? s.modes : p.solver.num_modes; }

ControlOperator operator_of(const Problem& p)
{
    ControlOperator op;
    op.per_edge_potential = p.potentials();
    op.description = p.control.description;
    return op;
}

json fit_json(const PowerLawFit& f)
{
    return {{"exponent", f.exponent}, {"constant", f.constant}, {"residual", f.residual}, {"samples", f.samples}};
}

json settings_json(const Settings& s)
{
    return {{"problem", s.problem}, {"modes", s.modes}, {"T", s.T},         {"eps", s.eps},
            {"tol_res", s.tol_res}, {"threads", s.threads}, {"mode", s.mode}, {"sample_rate", s.sample_rate}};
}

// ---- spectrum --------------------------------------------------------------

json spectrum_summary(const SpectralBasis& basis)
{
    json lambdas = json::array();
    for (std::size_t k = 0; k < std::min<std::size_t>(basis.size(), 10); ++k) lambdas.push_back(basis[k].lambda);
    return {{"modes", basis.size()},
            {"first_lambdas", lambdas},
            {"gap", {{"M", basis.gap_report.M}, {"delta", basis.gap_report.delta}}},
            {"weyl", {{"c1", basis.weyl_report.c1}, {"c2", basis.weyl_report.c2}}}};
}

std::string spectrum_csv(const SpectralBasis& basis, const MetricGraph& g)
{
    std::map<int, int> group_size;
    for (const auto& m : basis.modes)
        if (m.multiplicity_group) ++group_size[*m.multiplicity_group];
    std::string out = "k,lambda,omega,multiplicity";
    for (const auto& e : g.edges()) out += ",amp_" + e.id;
    out += "\n";
    for (const auto& m : basis.modes) {
        out += std::to_string(m.index) + "," + num(m.lambda) + "," + num(m.omega) + "," +
               std::to_string(m.multiplicity_group ? group_size[*m.multiplicity_group] : 1);
        for (const auto& c : m.per_edge) out += "," + num(c.amplitude);
        out += "\n";
    }
    return out;
}

int cmd_spectrum(const Settings& s, ArtifactWriter& w, std::string& hash)
{
    auto [p, h] = load(s);
    hash = h;
    auto basis = solve_spectrum(p.graph, modes_of(s, p), p.scan_resolution());
    w.write("spectrum.csv", spectrum_csv(basis, p.graph));
    return exit_ok;
}

// ---- check-assumptions -----------------------------------------------------

json assumptions_json(const Problem& p, const SpectralBasis& basis, const Settings& s)
{
    const auto op = operator_of(p);
    json out;
    if (basis.size() < 30) throw InputError("check-assumptions needs --modes >= 30");
    AssumptionIOptions o;
    o.tol_res = s.tol_res;
    o.threads = s.threads;
    auto r1 = check_assumption_I(op, basis, basis.size(), o);
    json quads = json::array();
    for (const auto& q : r1.resonant_quadruples)
        quads.push_back({{"first", {q.first.first, q.first.second}},
                         {"second", {q.second.first, q.second.second}},
                         {"spectral_defect", q.spectral_defect},
                         {"diagonal_combination", q.diagonal_combination}});
    out["eta_fit"] = fit_json(r1.eta_fit);
    out["envelope_fit"] = fit_json(r1.envelope_fit);
    out["fit_range"] = {r1.fit_lo, r1.fit_hi};
    out["quadruples"] = quads;
    out["zero_elements"] = r1.zero_elements;
    if (p.graph.topology() == Topology::Star) {
        auto r2 = check_assumption_II(op, p.graph, &basis, basis.size());
        json conds = json::array();
        for (const auto& c : r2.vertex_conditions)
            conds.push_back({{"condition", c.condition}, {"residual", c.residual}, {"satisfied", c.satisfied}});
        out["assumption_II"] = {{"certified_d", r2.certified_d ? json(*r2.certified_d) : json(nullptr)},
                                {"preserves_H2G", r2.preserves_H2G},
                                {"regime", r2.regime},
                                {"center_vanishing_order", r2.center_vanishing_order},
                                {"max_mode_residual", r2.max_mode_residual},
                                {"conditions", conds}};
    } else {
        out["assumption_II"] = {{"certified_d", nullptr}, {"conditions", json::array()}, {"note", "star graph required"}};
    }
    return out;
}

int cmd_check(const Settings& s, ArtifactWriter& w, std::string& hash)
{
    auto [p, h] = load(s);
    hash = h;
    auto basis = solve_spectrum(p.graph, modes_of(s, p), p.scan_resolution());
    w.write_json("assumptions.json", assumptions_json(p, basis, s));
    return exit_ok;
}

// ---- lowerbounds -----------------------------------------------------------

json lowerbounds_json(const Problem& p, const SpectralBasis& basis, double eps, std::string* csv, unsigned threads)
{
    auto G = build_G(p.graph);
    auto fit = fit_Gprime_bound(G, basis, basis.size());
    if (csv) {
        *csv = "k,sqrt_lambda,absGprime,bound_model\n";
        for (const auto& e : fit.entries)
            *csv += std::to_string(e.k) + "," + num(e.sqrt_lambda) + "," + num(e.abs_Gprime) + "," + num(e.bound_model) + "\n";
    }
    json inf = json::object();
    for (std::size_t i = 0; i < epsilon_grid.size(); ++i) inf[num(epsilon_grid[i])] = fit.inf_scaled[i];
    const auto L = p.graph.lengths();
    const double lo = std::numbers::pi / (2.0 * *std::min_element(L.begin(), L.end()));
    const double hi = std::max(lo * 2.0, basis.modes.back().omega);
    std::vector<double> grid(10000);
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = lo + (hi - lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(grid.size());
    auto dio = diophantine_products(L, G.neumann_edges, grid, threads);
    auto cb = check_cos_lower_bound(L, basis.size(), eps);
    return {{"dtilde_fit", fit.dtilde_fit},
            {"exponent", fit.exponent},
            {"C_fit", fit.C_fit},
            {"worst_k", fit.worst_k},
            {"inf_scaled", inf},
            {"diophantine",
             {{"grid", {lo, hi, grid.size()}},
              {"sandwich_max_violation", dio.sandwich_max_violation},
              {"lemma_ratio_inf", dio.lemma_ratio_inf},
              {"products_positive", dio.products_positive},
              {"product_envelope", fit_json(dio.product_envelope)}}},
            {"cos_bound",
             {{"eps", eps},
              {"worst", cb.worst},
              {"worst_n", cb.worst_n},
              {"worst_l", cb.worst_l},
              {"raw_min_cos", cb.raw_min_cos},
              {"lengths_admissible", cb.lengths_admissible},
              {"holds", cb.holds}}}};
}

int cmd_lowerbounds(const Settings& s, ArtifactWriter& w, std::string& hash)
{
    auto [p, h] = load(s);
    hash = h;
    auto basis = solve_spectrum(p.graph, modes_of(s, p), p.scan_resolution());
    std::string csv;
    auto j = lowerbounds_json(p, basis, s.eps > 0.0 ? s.eps : 0.1, &csv, s.threads);
    w.write("lowerbounds.csv", csv);
    w.write_json("lowerbounds.json", j);
    return exit_ok;
}

// ---- moment-solve ----------------------------------------------------------

int cmd_moment(const Settings& s, ArtifactWriter& w, std::string& hash)
{
    if (s.freqs.empty()) throw InputError("--freqs is required");
    if (!(s.T > 0.0)) throw InputError("--T must be positive");
    auto rows = read_csv(s.freqs);
    std::vector<std::string> header;
    if (!rows.empty() && is_header(rows.front())) {
        header = rows.front();
        rows.erase(rows.begin());
    }
    const auto c_lambda = column(header, "lambda", 1);
    std::vector<double> lambda;
    std::vector<cplx> x;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto where = s.freqs + " row " + std::to_string(i + 1);
        if (rows[i].size() <= c_lambda) throw InputError(where + ": missing lambda column");
        lambda.push_back(to_double(rows[i][c_lambda], where));
    }
    auto read_targets = [&](const std::vector<std::vector<std::string>>& rs, const std::vector<std::string>& hd,
                            const std::string& src, std::size_t fallback) {
        const auto cr = column(hd, "re_x", fallback), ci = column(hd, "im_x", cr + 1);
        for (std::size_t i = 0; i < rs.size(); ++i) {
            const auto where = src + " row " + std::to_string(i + 1);
            if (rs[i].size() <= std::max(cr, ci)) throw InputError(where + ": missing re_x/im_x columns");
            x.emplace_back(to_double(rs[i][cr], where), to_double(rs[i][ci], where));
        }
    };
    std::string hashed = read_file(s.freqs);
    if (!s.target.empty()) {
        auto trows = read_csv(s.target);
        std::vector<std::string> th;
        if (!trows.empty() && is_header(trows.front())) {
            th = trows.front();
            trows.erase(trows.begin());
        }
        read_targets(trows, th, s.target, 1);
        hashed += read_file(s.target);
    } else {
        read_targets(rows, header, s.freqs, 2);
    }
    hash = hex(fnv1a(hashed));
    if (x.size() != lambda.size()) throw InputError("frequency and target counts differ");
    if (x.empty()) throw InputError("no frequencies");
    if (x[0].imag() != 0.0) throw InputError("the first target must be real");
    MomentMode mode;
    if (s.mode == "direct") mode = MomentMode::Direct;
    else if (s.mode == "dd") mode = MomentMode::DDPreconditioned;
    else throw InputError("--mode must be 'direct' or 'dd'");
    MomentOptions mo;
    mo.threads = s.threads;
    auto sol = solve_moment(lambda, x, s.T, mode, mo);

    const auto n = static_cast<std::size_t>(std::max(2.0, std::ceil(s.sample_rate * s.T))) + 1;
    std::string csv = "t,u\n";
    for (std::size_t i = 0; i < n; ++i) {
        const double t = s.T * static_cast<double>(i) / static_cast<double>(n - 1);
        csv += num(t) + "," + num(sol(t)) + "\n";
    }
    w.write("control.csv", csv);
    json res = json::array();
    for (const auto& r : sol.residuals) res.push_back({r.real(), r.imag()});
    json diag{{"T", sol.T},
              {"mode", s.mode},
              {"max_residual", sol.max_residual},
              {"residuals", res},
              {"gram_condition", sol.gram_condition},
              {"imaginary_defect", sol.imaginary_defect}};
    if (sol.partition) {
        diag["partition"] = {{"delta", sol.partition->delta}, {"M", sol.partition->M}, {"max_cluster", sol.partition->max_cluster_size()}};
        auto sys = build_dd_system(*sol.partition, s.T, s.threads);
        diag["frame_bounds"] = {sys.frame_bounds.first, sys.frame_bounds.second};
    }
    w.write_json("moment.json", diag);
    return exit_ok;
}

// ---- simulate --------------------------------------------------------------

ControlSignal read_control_csv(const std::string& path)
{
    auto rows = read_csv(path);
    if (!rows.empty() && is_header(rows.front())) rows.erase(rows.begin());
    if (rows.size() < 2) throw InputError(path + ": need at least two (t, u) rows");
    std::vector<double> t, u;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto where = path + " row " + std::to_string(i + 1);
        if (rows[i].size() < 2) throw InputError(where + ": expected t,u");
        t.push_back(to_double(rows[i][0], where));
        u.push_back(to_double(rows[i][1], where));
    }
    const double dt = t[1] - t[0];
    if (!(dt > 0.0)) throw InputError(path + ": times must increase");
    for (std::size_t i = 1; i < t.size(); ++i)
        if (std::abs(t[i] - t[i - 1] - dt) > 1e-9 * std::max(1.0, std::abs(t[i])))
            throw InputError(path + ": samples must be uniformly spaced");
    // Sample i holds on [t_i, t_i + dt); the trailing sample closes the horizon.
    u.pop_back();
    return ControlSignal::piecewise_constant(std::move(u), dt);
}

std::pair<std::size_t, std::size_t> parse_pair(const std::string& s)
{
    auto pos = s.find_first_of(":,");
    if (pos == std::string::npos) throw InputError("--resonant expects m:n");
    try {
        long a = std::stol(s.substr(0, pos)), b = std::stol(s.substr(pos + 1));
        if (a < 1 || b < 1) throw InputError("--resonant levels are 1-based");
        return {static_cast<std::size_t>(a - 1), static_cast<std::size_t>(b - 1)};
    } catch (const std::logic_error&) {
        throw InputError("--resonant expects m:n");
    }
}

int cmd_simulate(const Settings& s, ArtifactWriter& w, std::string& hash)
{
    auto [p, h] = load(s);
    auto basis = solve_spectrum(p.graph, modes_of(s, p), p.scan_resolution());
    auto sys = GalerkinSystem::from_basis(operator_of(p), basis, s.threads);
    const std::size_t K = sys.dimension();
    std::size_t from = s.initial - 1, to = s.fidelity_level > 0 ? s.fidelity_level - 1 : from;
    std::optional<ControlSignal> u;
    if (!s.control.empty()) {
        u = read_control_csv(s.control);
        h = hex(fnv1a(read_file(s.control), std::stoull(h, nullptr, 16)));
    } else if (!s.resonant.empty()) {
        auto [m, n] = parse_pair(s.resonant);
        if (m >= K || n >= K) throw InputError("--resonant level exceeds --modes");
        u = resonant_pulse(sys, m, n, s.eps > 0.0 ? s.eps : 0.01, s.tol_res);
        from = m;
        if (s.fidelity_level == 0) to = n;
    } else {
        throw InputError("simulate needs --control or --resonant");
    }
    hash = h;
    if (from >= K || to >= K) throw InputError("level index exceeds --modes");
    Eigen::VectorXcd psi0 = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(K));
    psi0(static_cast<Eigen::Index>(from)) = 1.0;
    PropagateOptions po;
    double boundary = 0.0;
    po.observer = [&](double, const Eigen::VectorXcd& psi) { boundary = std::max(boundary, std::norm(psi(psi.size() - 1))); };
    po.record_stride = s.stride;
    if (po.record_stride == 0) {
        const auto steps = detail::step_grid(sys, *u, po).size();
        po.record_stride = std::max<std::size_t>(1, steps / 2000);
    }
    auto tr = propagate(sys, psi0, *u, po);

    std::string csv = "t";
    for (std::size_t k = 1; k <= K; ++k) csv += ",re_" + std::to_string(k) + ",im_" + std::to_string(k);
    csv += ",norm";
    for (std::size_t k = 1; k <= K; ++k) csv += ",pop_" + std::to_string(k);
    csv += "\n";
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        const auto& psi = tr.states[i];
        csv += num(tr.times[i]);
        for (Eigen::Index k = 0; k < psi.size(); ++k) csv += "," + num(psi(k).real()) + "," + num(psi(k).imag());
        csv += "," + num(psi.norm());
        for (Eigen::Index k = 0; k < psi.size(); ++k) csv += "," + num(std::norm(psi(k)));
        csv += "\n";
    }
    w.write("trajectory.csv", csv);
    w.write_json("simulate.json", {{"T", u->horizon()},
                                   {"initial_level", from + 1},
                                   {"fidelity_level", to + 1},
                                   {"fidelity", std::abs(tr.final_state()(static_cast<Eigen::Index>(to)))},
                                   {"leakage", boundary},
                                   {"norm_drift", tr.norm_drift},
                                   {"steps", tr.steps()},
                                   {"total_variation", u->total_variation()}});
    return exit_ok;
}

// ---- liealg ----------------------------------------------------------------

json lie_json(const LieClosureReport& r)
{
    json pairs = json::array(), gens = json::array();
    for (const auto& [a, b] : r.admissible_pairs) pairs.push_back({a + 1, b + 1});
    for (const auto& g : r.generators) gens.push_back({{"j", g.j + 1}, {"k", g.k + 1}, {"theta", g.theta}});
    return {{"N1", r.N1},
            {"admissible_pairs", pairs},
            {"generators", gens},
            {"reached_dimension", r.reached_dimension},
            {"target_dimension", r.target_dimension},
            {"generated", r.generated},
            {"coupling_graph_connected", r.coupling_graph_connected},
            {"dimension_history", r.dimension_history}};
}

int cmd_liealg(const Settings& s, ArtifactWriter& w, std::string& hash)
{
    auto [p, h] = load(s);
    hash = h;
    const std::size_t n = s.modes > 0 ? s.modes : std::min<std::size_t>(p.solver.num_modes, 4);
    auto basis = solve_spectrum(p.graph, n, p.scan_resolution());
    auto sys = GalerkinSystem::from_basis(operator_of(p), basis, s.threads);
    w.write_json("liealg.json", lie_json(lie_closure(sys, s.tol_res > 0.0 ? s.tol_res : 1e-8)));
    return exit_ok;
}

// ---- report ----------------------------------------------------------------

int cmd_report(const Settings& s, ArtifactWriter& w, std::string& hash)
{
    auto [p, h] = load(s);
    hash = h;
    auto wanted = [&](const std::string& name) {
        return s.all || s.sections.empty() || std::find(s.sections.begin(), s.sections.end(), name) != s.sections.end();
    };
    auto basis = solve_spectrum(p.graph, modes_of(s, p), p.scan_resolution());
    json out{{"problem", s.problem}, {"input_hash", h}};
    // Each section is independent; a failure is recorded instead of aborting the report.
    auto section = [&](const std::string& name, auto&& fn) {
        if (!wanted(name)) return;
        try {
            out[name] = fn();
        } catch (const std::exception& e) {
            out[name] = {{"error", e.what()}};
        }
    };
    section("spectrum", [&] { return spectrum_summary(basis); });
    section("assumptions", [&] { return assumptions_json(p, basis, s); });
    section("lowerbounds", [&] { return lowerbounds_json(p, basis, 0.1, nullptr, s.threads); });
    section("transfer", [&] {
        std::vector<std::pair<std::size_t, std::size_t>> path{{0, 1}};
        auto small = solve_spectrum(p.graph, default_truncation(path), p.scan_resolution());
        auto sys = GalerkinSystem::from_basis(operator_of(p), small, s.threads);
        TransferOptions to;
        to.resonance_tol = s.tol_res;
        const double eps = s.eps > 0.0 ? s.eps : 0.01;
        auto r = resonant_transfer(sys, 0, 1, eps, to);
        return json{{"from", 1},
                    {"to", 2},
                    {"eps", eps},
                    {"truncation", sys.dimension()},
                    {"T", r.control.horizon()},
                    {"frequency", r.control.max_frequency()},
                    {"fidelity", r.fidelity},
                    {"norm_drift", r.norm_drift},
                    {"total_variation", r.total_variation}};
    });
    w.write_json("report.json", out);
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Spectral, moment and controllability toolkit for quantum graphs"};
    app.require_subcommand(1);
    Settings s;
    auto common = [&](CLI::App* c, bool problem = true) {
        if (problem) c->add_option("--problem", s.problem, "problem JSON file");
        c->add_option("--modes", s.modes, "number of modes (defaults to the problem setting)");
        c->add_option("--T", s.T, "time horizon");
        c->add_option("--eps", s.eps, "pulse amplitude (simulate, report) or bound exponent (lowerbounds)");
        c->add_option("--tol-res", s.tol_res, "resonance tolerance");
        c->add_option("--out-dir", s.out_dir, "output directory");
        c->add_option("--threads", s.threads, "worker threads (GRAPHCTRL_THREADS overrides)");
    };
    auto* spectrum = app.add_subcommand("spectrum", "eigenvalues and eigenfunction amplitudes");
    common(spectrum);
    auto* check = app.add_subcommand("check-assumptions", "coupling decay, resonances and domain preservation");
    common(check);
    auto* lower = app.add_subcommand("lowerbounds", "secular-derivative and diophantine lower bounds");
    common(lower);
    auto* moment = app.add_subcommand("moment-solve", "solve a truncated moment problem");
    common(moment, false);
    moment->add_option("--freqs", s.freqs, "CSV with columns k, lambda[, re_x, im_x]");
    moment->add_option("--target", s.target, "CSV with columns k, re_x, im_x");
    moment->add_option("--mode", s.mode, "direct or dd");
    moment->add_option("--sample-rate", s.sample_rate, "control samples per unit time");
    auto* simulate = app.add_subcommand("simulate", "propagate the truncated dynamics");
    common(simulate);
    simulate->add_option("--control", s.control, "CSV of (t, u) samples");
    simulate->add_option("--resonant", s.resonant, "synthesize a resonant pulse m:n (1-based)");
    simulate->add_option("--initial", s.initial, "initial level (1-based)");
    simulate->add_option("--fidelity-level", s.fidelity_level, "level used for the fidelity (1-based)");
    simulate->add_option("--stride", s.stride, "record every n-th step");
    auto* lie = app.add_subcommand("liealg", "Lie-algebra rank of the truncated system");
    common(lie);
    auto* report = app.add_subcommand("report", "combined JSON report");
    common(report);
    report->add_flag("--all", s.all, "include every section");
    report->add_option("--section", s.sections, "spectrum, assumptions, lowerbounds or transfer");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_usage;
    }
    if (const char* env = std::getenv("GRAPHCTRL_THREADS")) {
        try {
            s.threads = static_cast<unsigned>(std::stoul(env));
        } catch (const std::exception&) {
            std::cerr << "error: GRAPHCTRL_THREADS must be a non-negative integer\n";
            return exit_invalid;
        }
    }
    s.threads = std::max(1u, s.threads);

    auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    const auto start = std::chrono::steady_clock::now();
    try {
        ArtifactWriter w(s.out_dir);
        std::string hash;
        int rc = exit_ok;
        if (name == "spectrum") rc = cmd_spectrum(s, w, hash);
        else if (name == "check-assumptions") rc = cmd_check(s, w, hash);
        else if (name == "lowerbounds") rc = cmd_lowerbounds(s, w, hash);
        else if (name == "moment-solve") rc = cmd_moment(s, w, hash);
        else if (name == "simulate") rc = cmd_simulate(s, w, hash);
        else if (name == "liealg") rc = cmd_liealg(s, w, hash);
        else if (name == "report") rc = cmd_report(s, w, hash);
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        w.manifest(name, hash, settings_json(s), wall);
        return rc;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_invalid;
    } catch (const ProblemError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_invalid;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_invalid;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return exit_numerical;
    }
}
