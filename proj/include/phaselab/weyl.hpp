#pragma once

#include "phaselab/phasespace.hpp"

#include <vector>

namespace phaselab {

// Kernel samples K(x_j, x_k); (K u)·dx approximates the integral operator.
struct OperatorMatrix {
    PhaseGrid grid;
    MatC K;

    MatC matrix() const { return grid.dx * K; }
    static OperatorMatrix from_matrix(const PhaseGrid& grid, const MatC& M) { return {grid, M / grid.dx}; }
};

OperatorMatrix identity_operator(const PhaseGrid& grid);
SampledState apply(const OperatorMatrix& A, const SampledState& u);
OperatorMatrix compose(const OperatorMatrix& A, const OperatorMatrix& B);
double op_norm(const MatC& M);  // spectral norm
double op_norm(const OperatorMatrix& A);

// Values of a sampled symbol at x + dx/2 by spectral interpolation in x.
MatC half_shift(const MatC& values, int direction);

OperatorMatrix quantize(const PhaseFunction2D& a);
OperatorMatrix quantize(const PhaseGrid& grid, const SymbolFn& a);
PhaseFunction2D dequantize(const OperatorMatrix& K);

PhaseFunction2D weyl_product(const PhaseFunction2D& a, const PhaseFunction2D& b);

// W(g, f)(x, ξ) = (2π)^{-1/2} ∫ g(x + y/2) f̄(x − y/2) e^{-iyξ} dy on both midpoint sheets.
PhaseFunction2D wigner(const SampledState& g, const SampledState& f);

// (a, b) = ∫∫ a b̄ over the doubled midpoint lattice.
cplx phase_pairing(const PhaseFunction2D& a, const PhaseFunction2D& b);

struct ShubinFitOptions {
    double r_min = 0.0;  // 0 selects r_max / 8
    double r_max = 0.0;  // 0 selects 0.8 · min(L, ξ_max)
    double noise_floor = 1e-12;  // relative to max |a| over the fit region
    double tolerance = 0.25;
};

struct DerivativeFit {
    int ax = 0;  // order in x
    int axi = 0;  // order in ξ
    double slope = 0.0;
    double residual = 0.0;
    int shells = 0;
    bool below_floor = false;
    bool within_bound = false;  // slope ≤ m − |α| + tolerance
};

struct ShubinWitness {
    double order_estimate = 0.0;
    double m_hypothesis = 0.0;
    std::vector<double> shell_edges;
    std::vector<DerivativeFit> derivatives;  // α = 0 first
    double fit_residual = 0.0;
    bool consistent = false;  // every derivative within bound
};

ShubinWitness shubin_fit(const PhaseFunction2D& a, double m_hypothesis, const ShubinFitOptions& opt = {});

}  // namespace phaselab
