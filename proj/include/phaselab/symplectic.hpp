#pragma once

#include "phaselab/core.hpp"

#include <utility>

namespace phaselab {

// 𝒥 = [[0, I], [-I, 0]] on ℝ^{2d}.
MatR symplectic_J(int d);

// σ(z, w) = <w_x, z_ξ> - <z_x, w_ξ>.
template <typename A, typename B>
double sigma(const Eigen::MatrixBase<A>& z, const Eigen::MatrixBase<B>& w) {
    const Eigen::Index d = z.size() / 2;
    return w.head(d).dot(z.tail(d)) - z.head(d).dot(w.tail(d));
}

// ‖Mᵀ𝒥M − 𝒥‖_max.
template <typename Derived>
double symplectic_defect(const Eigen::MatrixBase<Derived>& M) {
    const MatR J = symplectic_J(static_cast<int>(M.rows() / 2));
    return (M.transpose() * J * M - J).cwiseAbs().maxCoeff();
}

struct QuadraticHamiltonian {
    MatR Q;  // q(z) = <z, Qz>
    MatR F;  // 𝒥Q
    int d() const { return static_cast<int>(Q.rows() / 2); }
};

QuadraticHamiltonian make_hamiltonian(const MatR& Q);
QuadraticHamiltonian harmonic_oscillator(int d = 1);
QuadraticHamiltonian free_particle(int d = 1);
// Σ λ_j (x_j² + ξ_j²).
QuadraticHamiltonian anisotropic_oscillator(const VecR& lambda);

struct SymplecticMap {
    MatR M;
    double certified_error = 0.0;

    Eigen::Vector2d apply(double x, double xi) const { return M * Eigen::Vector2d(x, xi); }
};

inline constexpr double symplectic_tolerance = 1e-8;

// Certifies M; throws NumericalError when the defect exceeds 1e-8.
SymplecticMap make_symplectic(const MatR& M);

// χ_t = e^{2tF}.
SymplecticMap flow(const QuadraticHamiltonian& H, double t);

struct WilliamsonResult {
    SymplecticMap chi;
    VecR lambda;
};

// χᵀQχ = diag(λ, λ).
WilliamsonResult williamson(const MatR& Q);

// Lagrangian plane in ℝ^{2d}. `basis` (orthonormal, 2d × d) is authoritative;
// (Y, A) is derived from it with the canonical choice A = 0 on Y⊥.
struct LagrangianFrame {
    MatR basis;
    MatR Y_basis;  // d × dim Y, orthonormal columns
    MatR A;        // d × d symmetric, A·Y ⊆ Y
    bool has_graph_form = false;  // (Y, A) derivation succeeded
    bool vertical = false;        // not transversal to {0} × ℝ^d, i.e. Y ≠ ℝ^d

    int d() const { return static_cast<int>(basis.cols()); }
};

LagrangianFrame lagrangian_from_basis(const MatR& B);
LagrangianFrame lagrangian_from_graph(const MatR& Y_basis, const MatR& A);
// Λ = {(x, Ax)} with Y = ℝ^d.
LagrangianFrame lagrangian_graph(const MatR& A);
LagrangianFrame horizontal_lagrangian(int d);

LagrangianFrame lagrangian_map(const SymplecticMap& chi, const LagrangianFrame& frame);

// Max |σ(b_i, b_j)| over frame basis pairs.
double isotropy_defect(const MatR& basis);

// Orthonormal 4d × 2d basis of Λ'_χ = {(x, y, ξ, −η) : (x, ξ) = χ(y, η)}.
MatR twisted_graph_basis(const SymplecticMap& chi);

// Non-orthonormal parametrization (y, η) ↦ point of Λ'_χ, columns indexed like (y, η).
MatR twisted_graph_parametrization(const SymplecticMap& chi);

double dist_to_plane(const VecR& z, const MatR& orthonormal_basis);
double dist_to_plane(const VecR& z, const LagrangianFrame& frame);

// Subspace 𝒥Λ (orthogonal complement of a Lagrangian plane).
MatR complement_basis(const LagrangianFrame& frame);

}  // namespace phaselab
