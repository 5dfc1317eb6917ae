#pragma once

#include "phaselab/core.hpp"

#include <functional>

namespace phaselab {

// Position box [-L, L)^d with n samples per axis and its centered dual lattice.
struct PhaseGrid {
    int d = 1;
    int n = 0;
    double L = 0.0;
    double dx = 0.0;
    double dxi = 0.0;

    double x(Eigen::Index j) const { return -L + static_cast<double>(j) * dx; }
    double xi(Eigen::Index m) const { return static_cast<double>(m - n / 2) * dxi; }
    double xi_max() const { return 0.5 * n * dxi; }
    Eigen::Index size() const { return d == 1 ? n : static_cast<Eigen::Index>(n) * n; }
    VecR positions() const;
    VecR frequencies() const;

    bool operator==(const PhaseGrid& o) const { return d == o.d && n == o.n && L == o.L; }
    bool operator!=(const PhaseGrid& o) const { return !(*this == o); }
};

PhaseGrid make_grid(int d, int n, double L);

enum class Lattice { position, frequency };

// Samples of a function of x (or of ξ after a Fourier transform).
// For d = 2 the flat index is j1 * n + j2.
struct SampledState {
    PhaseGrid grid;
    VecC values;
    Lattice lattice = Lattice::position;

    double weight() const;  // dx^d or dξ^d
    double norm() const;
};

cplx inner(const SampledState& f, const SampledState& g);  // ∫ f ḡ

SampledState sample_state(const PhaseGrid& grid, const std::function<cplx(double)>& f);
SampledState sample_state(const PhaseGrid& grid, const std::function<cplx(double, double)>& f);

// Samples over the (x, ξ) lattice, d = 1 only: values(j, m) at (x_j, ξ_m).
// `half` optionally holds the same symbol at (x_j + dx/2, ξ_m); together the two
// sheets form the doubled midpoint lattice used by quantization.
struct PhaseFunction2D {
    PhaseGrid grid;
    MatC values;
    MatC half;

    bool has_half() const { return half.size() != 0; }
};

using SymbolFn = std::function<cplx(double x, double xi)>;

PhaseFunction2D sample_phase(const PhaseGrid& grid, const SymbolFn& f, bool with_half = true);
PhaseFunction2D constant_phase(const PhaseGrid& grid, cplx c);

PhaseFunction2D operator+(const PhaseFunction2D& a, const PhaseFunction2D& b);
PhaseFunction2D operator-(const PhaseFunction2D& a, const PhaseFunction2D& b);
PhaseFunction2D operator*(cplx s, const PhaseFunction2D& a);

// Unitary DFT with continuum normalization (2π)^{-d/2} ∫ e^{∓i<x,ξ>}.
// sign = +1 maps position samples to frequency samples, sign = -1 inverts.
SampledState fourier(const SampledState& u, int sign);

enum class Domain { position, phase };

// Rectangle rule: Σ values · dx^d, or Σ values · (dx dξ)^d on the phase lattice.
cplx quadrature(const VecC& values, const PhaseGrid& grid, Domain domain);
cplx quadrature(const MatC& values, const PhaseGrid& grid);

void require_same_grid(const PhaseGrid& a, const PhaseGrid& b, const char* what);
void require_1d(const PhaseGrid& g, const char* what);

// Unnormalized DFT of length n: out_k = Σ_j in_j e^{sign·2πi jk/n}.
void dft(const cplx* in, cplx* out, int n, int sign);

// DFT along every column of M (contiguous axis).
void dft_columns(MatC& M, int sign);

}  // namespace phaselab
