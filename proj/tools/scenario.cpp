#include "scenario.hpp"

#include "phaselab/wavefront.hpp"

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace phaselab::cli {

namespace {

std::string at_line(const YAML::Node& n) {
    const YAML::Mark m = n.Mark();
    return m.is_null() ? std::string() : " (line " + std::to_string(m.line + 1) + ")";
}

template <typename T>
T scalar(const YAML::Node& n, const std::string& field, const char* what) {
    if (!n.IsScalar()) throw ConfigError(field, std::string("expected ") + what + at_line(n));
    try {
        return n.as<T>();
    } catch (const YAML::BadConversion&) {
        throw ConfigError(field, std::string("expected ") + what + ", got '" + n.Scalar() + "'" + at_line(n));
    }
}

double real(const YAML::Node& n, const std::string& field) {
    const double v = scalar<double>(n, field, "a number");
    if (!std::isfinite(v)) throw ConfigError(field, "must be finite" + at_line(n));
    return v;
}

int integer(const YAML::Node& n, const std::string& field) { return scalar<int>(n, field, "an integer"); }

std::string text(const YAML::Node& n, const std::string& field) { return scalar<std::string>(n, field, "a name"); }

void only_keys(const YAML::Node& n, const std::string& field, std::set<std::string> allowed) {
    if (!n.IsMap()) throw ConfigError(field, "expected a mapping" + at_line(n));
    for (const auto& kv : n) {
        const std::string k = kv.first.as<std::string>();
        if (!allowed.count(k)) {
            std::string list;
            for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
            throw ConfigError(field.empty() ? k : field + "." + k, "unknown key" + at_line(kv.first) + "; expected one of " + list);
        }
    }
}

// A named variant written either as a bare name or as a one-entry mapping {name: arguments}.
std::pair<std::string, YAML::Node> variant(const YAML::Node& n, const std::string& field) {
    if (n.IsScalar()) return {n.Scalar(), YAML::Node()};
    if (n.IsMap() && n.size() == 1) {
        const auto it = n.begin();
        return {it->first.as<std::string>(), it->second};
    }
    throw ConfigError(field, "expected a name or a single-entry mapping" + at_line(n));
}

void parse_grid(const YAML::Node& g, Scenario& s) {
    only_keys(g, "grid", {"d", "n", "L"});
    if (g["d"]) s.d = integer(g["d"], "grid.d");
    if (g["n"]) s.n = integer(g["n"], "grid.n");
    if (g["L"]) s.L = real(g["L"], "grid.L");
    if (s.d != 1) throw ConfigError("grid.d", "only d = 1 is supported by the propagator and transforms");
    if (s.n < 16 || (s.n & (s.n - 1)) != 0) throw ConfigError("grid.n", "must be a power of two >= 16");
    if (!(s.L > 0)) throw ConfigError("grid.L", "must be positive");
}

void parse_hamiltonian(const YAML::Node& h, Scenario& s) {
    const auto [name, arg] = variant(h, "hamiltonian");
    s.hamiltonian = name;
    if (name == "harmonic") s.Q = harmonic_oscillator(s.d).Q;
    else if (name == "free") s.Q = free_particle(s.d).Q;
    else if (name == "anisotropic") {
        if (!arg.IsSequence()) throw ConfigError("hamiltonian.anisotropic", "expected a list of weights" + at_line(h));
        for (std::size_t i = 0; i < arg.size(); ++i) s.lambda.push_back(real(arg[i], "hamiltonian.anisotropic"));
        if (static_cast<int>(s.lambda.size()) != s.d)
            throw ConfigError("hamiltonian.anisotropic", "needs d = " + std::to_string(s.d) + " weights");
        s.Q = anisotropic_oscillator(Eigen::Map<const VecR>(s.lambda.data(), s.lambda.size())).Q;
    } else if (name == "matrix") {
        const int m = 2 * s.d;
        if (!arg.IsSequence() || static_cast<int>(arg.size()) != m)
            throw ConfigError("hamiltonian.matrix", "expected a " + std::to_string(m) + "x" + std::to_string(m) + " list of rows" + at_line(h));
        s.Q.resize(m, m);
        for (int i = 0; i < m; ++i) {
            if (!arg[i].IsSequence() || static_cast<int>(arg[i].size()) != m)
                throw ConfigError("hamiltonian.matrix", "row " + std::to_string(i + 1) + " must have " + std::to_string(m) + " entries");
            for (int j = 0; j < m; ++j) s.Q(i, j) = real(arg[i][j], "hamiltonian.matrix");
        }
        if ((s.Q - s.Q.transpose()).cwiseAbs().maxCoeff() > 1e-14)
            throw ConfigError("hamiltonian.matrix", "Q must be symmetric");
    } else {
        throw ConfigError("hamiltonian", "unknown preset '" + name + "'; expected harmonic, free, anisotropic or matrix");
    }
}

void parse_perturbation(const YAML::Node& p, Scenario& s) {
    if (p.IsMap() && p["expr"]) {
        only_keys(p, "perturbation", {"expr", "delta"});
        s.perturbation = "expr";
        const std::string src = text(p["expr"], "perturbation.expr");
        try {
            s.expr = parse_symbol_expr(src);
        } catch (const ParseError& e) {
            throw ParseError("perturbation.expr (column within the expression): " +
                                 std::string(e.what()).substr(std::string(e.what()).find(": ") + 2),
                             p["expr"].Mark().line + 1, e.column());
        }
        if (p["delta"]) s.delta = real(p["delta"], "perturbation.delta");
        return;
    }
    const auto [name, arg] = variant(p, "perturbation");
    s.perturbation = name;
    if (name == "none") return;
    if (name == "inverse-bracket") {
        only_keys(arg, "perturbation.inverse-bracket", {"eps", "delta"});
        s.eps = arg["eps"] ? real(arg["eps"], "perturbation.inverse-bracket.eps") : 0.2;
        s.delta = arg["delta"] ? real(arg["delta"], "perturbation.inverse-bracket.delta") : 1.0;
    } else if (name == "gaussian-bump") {
        only_keys(arg, "perturbation.gaussian-bump", {"eps", "width"});
        s.eps = arg["eps"] ? real(arg["eps"], "perturbation.gaussian-bump.eps") : 0.2;
        s.width = arg["width"] ? real(arg["width"], "perturbation.gaussian-bump.width") : 1.0;
        if (!(s.width > 0)) throw ConfigError("perturbation.gaussian-bump.width", "must be positive");
    } else {
        throw ConfigError("perturbation", "unknown family '" + name + "'; expected none, inverse-bracket, gaussian-bump or {expr: ...}");
    }
    if (!(s.delta > 0)) throw ConfigError("perturbation.delta", "decay order must be positive");
}

void parse_initial(const YAML::Node& u, Scenario& s) {
    const auto [name, arg] = variant(u, "initial");
    s.initial = name;
    if (name == "gaussian" || name == "delta") return;
    if (name == "hermite") {
        s.hermite_k = integer(arg, "initial.hermite");
        if (s.hermite_k < 0 || s.hermite_k > 60) throw ConfigError("initial.hermite", "order must be in 0..60");
    } else if (name == "chirp") {
        s.chirp_a = real(arg, "initial.chirp");
    } else if (name == "lagrangian") {
        only_keys(arg, "initial.lagrangian", {"A", "symbol"});
        s.lagrangian_A = arg["A"] ? real(arg["A"], "initial.lagrangian.A") : 0.0;
        s.lagrangian_symbol = arg["symbol"] ? text(arg["symbol"], "initial.lagrangian.symbol") : "one";
        if (s.lagrangian_symbol != "one" && s.lagrangian_symbol != "gaussian")
            throw ConfigError("initial.lagrangian.symbol", "unknown symbol '" + s.lagrangian_symbol + "'; expected one or gaussian");
    } else {
        throw ConfigError("initial", "unknown datum '" + name + "'; expected gaussian, hermite, delta, chirp or lagrangian");
    }
}

Scenario from_yaml(const YAML::Node& root) {
    Scenario s;
    if (!root.IsMap()) throw ConfigError("scenario", "top level must be a mapping");
    only_keys(root, "", {"name", "grid", "hamiltonian", "perturbation", "trusted_radius", "initial", "times", "dyson",
                         "thresholds", "kernel"});
    if (root["name"]) s.name = text(root["name"], "name");
    if (root["grid"]) parse_grid(root["grid"], s);
    else parse_grid(YAML::Node(YAML::NodeType::Map), s);
    parse_hamiltonian(root["hamiltonian"] ? root["hamiltonian"] : YAML::Node("harmonic"), s);
    if (root["perturbation"]) parse_perturbation(root["perturbation"], s);
    if (root["trusted_radius"]) s.trusted_radius = real(root["trusted_radius"], "trusted_radius");
    if (s.trusted_radius < 0) throw ConfigError("trusted_radius", "must be non-negative");
    if (root["initial"]) parse_initial(root["initial"], s);
    if (root["times"]) {
        const YAML::Node t = root["times"];
        if (!t.IsSequence() || t.size() == 0) throw ConfigError("times", "expected a non-empty list" + at_line(t));
        s.times.clear();
        for (std::size_t i = 0; i < t.size(); ++i) s.times.push_back(real(t[i], "times"));
    }
    if (const YAML::Node dn = root["dyson"]) {
        only_keys(dn, "dyson", {"N", "quad_nodes", "panels"});
        if (dn["N"]) s.dyson_N = integer(dn["N"], "dyson.N");
        if (dn["quad_nodes"]) s.quad_nodes = integer(dn["quad_nodes"], "dyson.quad_nodes");
        if (dn["panels"]) s.panels = integer(dn["panels"], "dyson.panels");
        if (s.dyson_N < 0) throw ConfigError("dyson.N", "must be non-negative");
        if (s.quad_nodes < 1) throw ConfigError("dyson.quad_nodes", "must be positive");
        if (s.panels < 1) throw ConfigError("dyson.panels", "must be positive");
    }
    if (const YAML::Node th = root["thresholds"]) {
        only_keys(th, "thresholds", {"N_threshold", "tau_ang"});
        if (th["N_threshold"]) s.N_threshold = real(th["N_threshold"], "thresholds.N_threshold");
        if (th["tau_ang"]) s.tau_ang = real(th["tau_ang"], "thresholds.tau_ang");
        if (!(s.N_threshold > 0)) throw ConfigError("thresholds.N_threshold", "must be positive");
        if (!(s.tau_ang >= 0)) throw ConfigError("thresholds.tau_ang", "must be non-negative");
    }
    if (const YAML::Node k = root["kernel"]) {
        only_keys(k, "kernel", {"k_max"});
        if (k["k_max"]) s.k_max = integer(k["k_max"], "kernel.k_max");
    }
    return s;
}

SampledState hermite_function(const PhaseGrid& g, int k) {
    VecC prev = VecC::Zero(g.n), cur(g.n);
    for (int j = 0; j < g.n; ++j) cur(j) = std::pow(pi, -0.25) * std::exp(-0.5 * g.x(j) * g.x(j));
    for (int m = 0; m < k; ++m) {
        VecC nxt(g.n);
        for (int j = 0; j < g.n; ++j)
            nxt(j) = std::sqrt(2.0 / (m + 1)) * g.x(j) * cur(j) - std::sqrt(double(m) / (m + 1)) * prev(j);
        prev = cur;
        cur = nxt;
    }
    return {g, cur, Lattice::position};
}

}  // namespace

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string Scenario::canonical() const {
    nlohmann::json j;
    j["name"] = name;
    j["grid"] = {{"d", d}, {"n", n}, {"L", L}};
    std::vector<std::vector<double>> q(Q.rows(), std::vector<double>(Q.cols()));
    for (Eigen::Index i = 0; i < Q.rows(); ++i)
        for (Eigen::Index k = 0; k < Q.cols(); ++k) q[i][k] = Q(i, k);
    j["hamiltonian"] = {{"preset", hamiltonian}, {"Q", q}};
    j["perturbation"] = {{"family", perturbation}, {"eps", eps}, {"delta", delta}, {"width", width},
                         {"expr", expr ? expr->text() : ""}};
    j["trusted_radius"] = trusted_radius;
    j["initial"] = {{"kind", initial}, {"hermite", hermite_k}, {"chirp", chirp_a}, {"A", lagrangian_A},
                    {"symbol", lagrangian_symbol}};
    j["times"] = times;
    j["dyson"] = {{"N", dyson_N}, {"quad_nodes", quad_nodes}, {"panels", panels}};
    j["thresholds"] = {{"N_threshold", N_threshold}, {"tau_ang", tau_ang}};
    j["kernel"] = {{"k_max", k_max}};
    return j.dump();
}

std::uint64_t Scenario::hash() const { return fnv1a(canonical()); }

std::string Scenario::hash_hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
    return buf;
}

Scenario parse_scenario(const std::string& src) {
    YAML::Node root;
    try {
        root = YAML::Load(src);
    } catch (const YAML::ParserException& e) {
        throw ParseError(e.msg, e.mark.line + 1, e.mark.column + 1);
    }
    return from_yaml(root);
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("scenario", "cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

EvolutionProblem build_problem(const Scenario& s) {
    const PhaseGrid grid = make_grid(s.d, s.n, s.L);
    const QuadraticHamiltonian H = make_hamiltonian(s.Q);
    // inverse-bracket is tapered by ½erfc(|z| − (L − 5)) so it vanishes at the box edge
    const double cut = s.L - 5.0;
    SymbolFn p;
    if (s.perturbation == "none") {
        p = [](double, double) { return cplx(0.0); };
    } else if (s.perturbation == "inverse-bracket") {
        const double eps = s.eps, delta = s.delta;
        p = [=](double x, double xi) {
            const double r = std::hypot(x, xi);
            return cplx(eps * std::pow(bracket(x, xi), -delta) * 0.5 * std::erfc(r - cut));
        };
    } else if (s.perturbation == "gaussian-bump") {
        const double eps = s.eps, w = s.width;
        p = [=](double x, double xi) { return cplx(eps * std::exp(-0.5 * (x * x + xi * xi) / (w * w))); };
    } else {
        const SymbolExpr e = *s.expr;
        p = [e](double x, double xi) { return cplx(e(x, xi)); };
    }
    const double trusted = s.trusted_radius > 0 ? s.trusted_radius : std::max(0.0, cut);
    return make_problem(grid, H, p, s.delta, trusted);
}

SampledState build_initial(const Scenario& s, const PhaseGrid& grid) {
    if (s.initial == "gaussian") return gaussian_state(grid);
    if (s.initial == "hermite") return hermite_function(grid, s.hermite_k);
    if (s.initial == "delta") return band_limited_delta(grid);
    if (s.initial == "chirp") return chirp_state(grid, s.chirp_a);
    MatR A(1, 1);
    A << s.lagrangian_A;
    const SampledState a = s.lagrangian_symbol == "gaussian" ? gaussian_state(grid) : chirp_state(grid, 0.0);
    return lagrangian_state(a, lagrangian_graph(A));
}

}  // namespace phaselab::cli
