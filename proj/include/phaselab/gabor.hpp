#pragma once

#include "phaselab/phasespace.hpp"
#include "phaselab/symplectic.hpp"
#include "phaselab/weyl.hpp"

#include <vector>

namespace phaselab {

struct WindowedTransformPlan {
    PhaseGrid grid;
    SampledState window;  // centred at x = 0, i.e. at index n/2
    double window_norm = 0.0;  // ‖g‖²
};

WindowedTransformPlan make_plan(const SampledState& window);
WindowedTransformPlan gaussian_plan(const PhaseGrid& grid);  // g = ψ₀
WindowedTransformPlan hermite1_plan(const PhaseGrid& grid);  // g = √2 x ψ₀

// 𝒯_g u(x_j, ξ_m) = (2π)^{-1/2} Σ_l u_l ḡ(y_l − x_j) e^{-i(y_l − x_j)ξ_m} dx, window translated periodically.
PhaseFunction2D fbi(const WindowedTransformPlan& plan, const SampledState& u);
// Same sum evaluated term by term; O(n³) reference path.
PhaseFunction2D fbi_direct(const WindowedTransformPlan& plan, const SampledState& u);

SampledState fbi_adjoint(const WindowedTransformPlan& plan, const PhaseFunction2D& U);

// 𝒯^Λ_g u = e^{-i(<π_{Y⊥}x, ξ> + <x, Ax>/2)} 𝒯_g u.
PhaseFunction2D fbi_lagrangian(const WindowedTransformPlan& plan, const SampledState& u, const LagrangianFrame& frame);

// ‖𝒯*_{ψ₀}(v_s 𝒯_{ψ₀} u)‖ with v_s = <z>^s; only the plan's grid is used.
double qs_norm(const WindowedTransformPlan& plan, const SampledState& u, double s);
// Same norm through the Weyl symbol b = π^{-1} e^{-|·|²} * v_s.
double qs_norm_weyl(const WindowedTransformPlan& plan, const SampledState& u, double s);
// b = π^{-1} e^{-|·|²} * v_s on both midpoint sheets (Gauss–Hermite quadrature).
PhaseFunction2D localization_symbol(const PhaseGrid& grid, double s);

// Samples of a phase-space transform over T*ℝ² for d = 1 kernels.
// Slab a holds z₁ = x_a; entry (m, b, q) ↦ (ζ₁, z₂, ζ₂) = (ξ_m, x_b, ξ_q).
class KernelTransform {
public:
    KernelTransform(const WindowedTransformPlan& plan, const OperatorMatrix& K, const SymplecticMap& chi);

    int n() const { return grid_.n; }
    const PhaseGrid& grid() const { return grid_; }
    // 𝒯^χ_{g⊗g} K restricted to z₁ = x_a, laid out as ((m · n) + b) · n + q.
    std::vector<cplx> slab(int a) const;
    // Same without the phase factor.
    std::vector<cplx> plain_slab(int a) const;

private:
    WindowedTransformPlan plan_;
    PhaseGrid grid_;
    SymplecticMap chi_;
    std::vector<MatC> first_;  // per column k: 𝒯_g K(·, y_k) as (a, m)
};

// Dense 𝒯^χ_{g⊗g} K as consecutive slabs, index ((a · n + m) · n + b) · n + q; guarded to n ≤ 128 and
// n⁴ samples within `max_bytes`.
std::vector<cplx> fbi_chi(const WindowedTransformPlan& plan, const OperatorMatrix& K, const SymplecticMap& chi,
                          std::size_t max_bytes = std::size_t(1) << 30);

// Value of the phase factor multiplying 𝒯_{g⊗g} at (z₁, z₂, ζ₁, ζ₂).
cplx chi_phase(const SymplecticMap& chi, double z1, double z2, double zeta1, double zeta2);

}  // namespace phaselab
