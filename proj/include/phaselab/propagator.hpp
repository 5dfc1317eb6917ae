#pragma once

#include "phaselab/phasespace.hpp"
#include "phaselab/symplectic.hpp"
#include "phaselab/weyl.hpp"

#include <optional>
#include <string>
#include <vector>

namespace phaselab {

enum class Interpolation { exact, bilinear, bicubic };

struct EvolutionProblem {
    PhaseGrid grid;
    QuadraticHamiltonian H;
    PhaseFunction2D p;     // samples on both midpoint sheets
    SymbolFn p_fn;         // empty when only samples are known
    double delta = 1.0;    // claimed order -δ of p
    double trusted_radius = 0.0;  // order fits stay inside |z| <= trusted_radius
    Interpolation interpolation = Interpolation::exact;
    std::vector<std::string> warnings;

    bool has_perturbation() const { return p.values.cwiseAbs().maxCoeff() > 0.0; }
};

// Validates δ > 0, d = 1 and p's decay at the box edge (< 1e-12); a failed order check is a warning.
EvolutionProblem make_problem(const PhaseGrid& grid, const QuadraticHamiltonian& H, const SymbolFn& p, double delta,
                              double trusted_radius = 0.0);
EvolutionProblem make_problem(const PhaseGrid& grid, const QuadraticHamiltonian& H, const PhaseFunction2D& p,
                              double delta, double trusted_radius = 0.0);
EvolutionProblem unperturbed(const PhaseGrid& grid, const QuadraticHamiltonian& H);
EvolutionProblem unperturbed(const EvolutionProblem& prob);

// ε <z>^{-1} ½erfc(|z| - 7), the taper keeping the edge value below 1e-12 on a box of half-width 12.
cplx default_perturbation(double x, double xi, double eps = 0.2);
// n = 256, L = 12, q = x² + ξ², p = default_perturbation, δ = 1, trusted radius 5.
EvolutionProblem default_problem(int n = 256, double L = 12.0);

// Grid matrix (kernel times dx) of q^w + p^w.
MatC generator_matrix(const EvolutionProblem& prob, bool include_p = true);

// e^{-itA} for a fixed Hermitian generator, through one eigendecomposition.
class SpectralPropagator {
public:
    explicit SpectralPropagator(const MatC& A);
    MatC at(double t) const;
    const VecR& eigenvalues() const { return lambda_; }

private:
    MatC V_;
    VecR lambda_;
};

inline constexpr int dense_size_limit = 512;

// e^{-it(q^w + p^w)}; exact eigensolve for real p, matrix exponential otherwise.
OperatorMatrix exact_propagator(const EvolutionProblem& prob, double t);

struct MetaplecticCertificate {
    double unitarity_defect = 0.0;
    double covariance_defect = 0.0;  // relative to ‖a^w‖_op
};

// Covariance is measured with a fixed smooth test symbol and χ_t = flow(H, t).
MetaplecticCertificate certify_metaplectic(const EvolutionProblem& prob, double t, const OperatorMatrix& mu);
// e^{-itq^w}; throws NumericalError when unitarity (1e-8) or covariance (5e-6) fails.
OperatorMatrix metaplectic(const EvolutionProblem& prob, double t);

// e^{-itA} v by a Chebyshev expansion; A Hermitian with spectrum inside [lo, hi].
VecC chebyshev_evolve(const MatC& A, const VecC& v, double t, double lo, double hi, double tol = 1e-12);
// U(t) u without forming U(t); requires real p.
SampledState evolve_state(const EvolutionProblem& prob, double t, const SampledState& u);

struct FlowedSymbol {
    PhaseFunction2D p;
    double lost_mass = 0.0;  // share of ‖p‖² at lattice points whose χ_t-preimage leaves the box
};

// p∘χ_t on both sheets; pullback points outside the box contribute 0. Warns above 1e-8 lost mass and
// throws DomainError above 1e-4.
FlowedSymbol p_flowed(const EvolutionProblem& prob, double t);

struct DysonOptions {
    int quad_nodes = 8;  // Gauss–Legendre nodes per panel
    int panels = 2;
    bool certify = true;
    double certificate_tolerance = 1e-8;
};

struct DysonTruncation {
    int N = 0;
    double t = 0.0;
    int quad_nodes = 0;
    int panels = 0;
    std::vector<PhaseFunction2D> terms;  // b_{t,n}, n = 0..N
    std::vector<OperatorMatrix> operators;  // b_{t,n}^w
    double mesh_halving_delta = 0.0;  // max over n of max |b_{t,n} - b_{t,n}'| with twice the panels
    bool certified = false;
};

// b_{t,n} through B_n(s) = -i ∫_0^s P_r B_{n-1}(r) dr on a composite Gauss–Legendre mesh; N <= 6.
DysonTruncation dyson_terms(const EvolutionProblem& prob, double t, int N, const DysonOptions& opt = {});

// μ_t (Σ_{n<=N} b_{t,n})^w; `mu` may be supplied to avoid recomputing μ_t.
OperatorMatrix parametrix(const EvolutionProblem& prob, double t, int N, const DysonOptions& opt = {});
OperatorMatrix parametrix(const OperatorMatrix& mu, const DysonTruncation& terms, int N);

struct ResidualResult {
    PhaseFunction2D r;  // i p_t # b_{t,N}
    double fd_defect = 0.0;  // max |r - (∂_t b^{(N)} + i p_t # b^{(N)})| with a 4th-order difference
    double fd_step = 0.0;
};

ResidualResult residual(const EvolutionProblem& prob, double t, int N, const DysonOptions& opt = {},
                        double fd_step = 0.01);

enum class CorrectorMethod { series, ode };

struct CorrectorResult {
    OperatorMatrix C;
    int steps = 0;
    int rejected = 0;
};

// C_t with C' = -i P_t C, C_0 = I. The ODE path uses Dormand–Prince 5(4) with tolerance `tol`.
CorrectorResult dyson_corrector(const EvolutionProblem& prob, double t, CorrectorMethod method, int N = 4,
                                const DysonOptions& opt = {}, double tol = 1e-10);

struct RegularizerDefect {
    double op_defect = 0.0;  // ‖𝒦_t − T_t‖_op
    double kernel_slope = 0.0;  // decay order of the Husimi diagonal of μ_{-t}(𝒦_t − T_t)
    double symbol_slope = 0.0;  // decay order of its Weyl symbol
    double kernel_peak = 0.0;
};

// The slope is fitted over dyadic shells inside the trusted radius.
RegularizerDefect regularizer_defect(const EvolutionProblem& prob, double t, int N, const DysonOptions& opt = {});

// (A φ_z, φ_z) for the Gaussian coherent states φ_z centred at every lattice point.
MatC husimi_diagonal(const OperatorMatrix& A);

}  // namespace phaselab
