#pragma once

#include "phaselab/phasespace.hpp"

#include <cmath>
#include <random>

namespace fixtures {

using namespace phaselab;

inline cplx psi0(double x) { return std::pow(pi, -0.25) * std::exp(-0.5 * x * x); }

// Gaussian wave packet centred at (x0, xi0) with width s.
inline SampledState packet(const PhaseGrid& g, double x0, double xi0, double s = 1.0) {
    return sample_state(g, [=](double x) {
        return std::pow(pi * s * s, -0.25) * std::exp(-0.5 * (x - x0) * (x - x0) / (s * s)) * std::polar(1.0, xi0 * x);
    });
}

// Random superposition of packets well inside the box and the frequency band.
inline SampledState random_state(const PhaseGrid& g, std::mt19937_64& rng, int terms = 4) {
    std::uniform_real_distribution<double> pos(-0.25 * g.L, 0.25 * g.L);
    std::uniform_real_distribution<double> freq(-0.2 * g.xi_max(), 0.2 * g.xi_max());
    std::uniform_real_distribution<double> width(0.7, 1.0);
    std::normal_distribution<double> coef;
    SampledState u{g, VecC::Zero(g.n), Lattice::position};
    for (int k = 0; k < terms; ++k) {
        const cplx c(coef(rng), coef(rng));
        u.values += c * packet(g, pos(rng), freq(rng), width(rng)).values;
    }
    return u;
}

// Smooth symbol concentrated near the origin of phase space.
inline SymbolFn random_symbol(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> c(-1.5, 1.5);
    std::uniform_real_distribution<double> w(0.8, 1.2);
    const double x0 = c(rng), xi0 = c(rng), s = w(rng), kx = c(rng), kxi = c(rng);
    const cplx amp(c(rng), c(rng));
    return [=](double x, double xi) {
        const double q = ((x - x0) * (x - x0) + (xi - xi0) * (xi - xi0)) / (2 * s * s);
        return amp * std::exp(-q) * std::polar(1.0, 0.5 * (kx * x + kxi * xi));
    };
}

}  // namespace fixtures
