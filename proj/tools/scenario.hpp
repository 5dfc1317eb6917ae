#pragma once

#include "expr.hpp"

#include "phaselab/propagator.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace phaselab::cli {

struct Scenario {
    std::string name;
    int d = 1;
    int n = 256;
    double L = 12.0;

    std::string hamiltonian = "harmonic";  // harmonic | free | anisotropic | matrix
    MatR Q;                                // resolved quadratic form
    std::vector<double> lambda;            // anisotropic weights

    std::string perturbation = "none";  // none | inverse-bracket | gaussian-bump | expr
    double eps = 0.0;
    double delta = 1.0;
    double width = 1.0;
    std::optional<SymbolExpr> expr;
    double trusted_radius = 0.0;

    std::string initial = "gaussian";  // gaussian | hermite | delta | chirp | lagrangian
    int hermite_k = 0;
    double chirp_a = 0.0;
    double lagrangian_A = 0.0;
    std::string lagrangian_symbol = "one";  // one | gaussian

    std::vector<double> times{0.5};
    int dyson_N = 4;
    int quad_nodes = 8;
    int panels = 2;
    double N_threshold = 4.0;
    double tau_ang = 5.0;
    int k_max = 1;

    // Sorted-key JSON of every resolved field; the basis of the scenario hash.
    std::string canonical() const;
    std::uint64_t hash() const;
    std::string hash_hex() const;
};

std::uint64_t fnv1a(const std::string& bytes);

// YAML scenario text; ParseError carries line and column, ConfigError names the field.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);

EvolutionProblem build_problem(const Scenario& s);
SampledState build_initial(const Scenario& s, const PhaseGrid& grid);

}  // namespace phaselab::cli
