#pragma once

#include "phaselab/gabor.hpp"
#include "phaselab/propagator.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace phaselab {

struct WavefrontOptions {
    int directions = 720;
    int shells = 3;            // dyadic shells [r_min 2^k, r_min 2^{k+1})
    int radii_per_shell = 8;   // geometric samples per shell
    double r_min = 0.0;        // 0 selects R_B / 10 with R_B = min(L, ξ_max)
    double N_threshold = 4.0;
    double residual_limit = 0.3;  // per-direction fit residual above this is inconclusive
    int smoothing = 3;            // angular window in mesh cells (odd)
};

// Per-direction decay fits of |𝒯_g u| along rays θ ↦ r(cos θ, sin θ) in the (x, ξ) plane.
struct ConeEstimate {
    VecR theta;     // direction angles in [0, 2π)
    VecR slope;     // fitted d log|𝒯_g u| / d log<r>
    VecR residual;  // RMS residual of the shell regression
    std::vector<bool> singular;      // slope > -N_threshold
    std::vector<bool> inconclusive;  // residual > residual_limit
    std::vector<double> shell_edges;
    double N_threshold = 0.0;

    int singular_count() const;
    double mesh_step_deg() const { return 360.0 / static_cast<double>(theta.size()); }
};

ConeEstimate estimate_wf(const WindowedTransformPlan& plan, const SampledState& u, const WavefrontOptions& opt = {});

// Largest angle (degrees) from an output singular direction to the nearest input singular direction mapped by
// chi. 0 when the output set is empty, +inf when only the input set is empty.
double cone_excess_deg(const ConeEstimate& in, const ConeEstimate& out, const SymplecticMap& chi);

struct PropagationReport {
    ConeEstimate input;
    ConeEstimate output;
    SymplecticMap chi;
    double excess_deg = 0.0;
    double tolerance_deg = 0.0;
    bool contained = false;
    double edge_ratio = 0.0;  // max |U(t)u0| on the outer 5% of the box over its peak
    std::vector<std::string> notes;
};

// Estimates WF(u0) and WF(U(t)u0) and checks that the output cone lies within flow(t)·WF(u0).
PropagationReport check_propagation(const EvolutionProblem& prob, const WindowedTransformPlan& plan,
                                    const SampledState& u0, double t, const WavefrontOptions& opt = {},
                                    double tolerance_deg = 5.0);

// Spectrum ½erfc((|ξ| − frac·R_B)/width): a band-limited stand-in for δ₀.
SampledState band_limited_delta(const PhaseGrid& grid, double frac = 0.7, double width = 0.7);
// e^{iax²/2} ½erfc((|x| − frac·R_B)/width).
SampledState chirp_state(const PhaseGrid& grid, double a, double frac = 0.54, double width = 0.7);
// ψ₀ = π^{-1/4} e^{-x²/2}.
SampledState gaussian_state(const PhaseGrid& grid);
// R_B = min(L, ξ_max), the largest radius on which rays stay in the box.
double ray_radius(const PhaseGrid& grid);

struct DecayOptions {
    double dist_max = 8.0;
    int bins = 24;
    double param_radius = 6.0;  // only points whose plane coordinate has norm <= this
    double near = 1.0;          // tangential fits use points within this distance of the plane
    double off_fit_lo = 1.0;
    double off_fit_hi = 6.0;
    double along_fit_lo = 0.0;
    double along_fit_hi = 8.0;
    double noise_floor = 1e-12;  // relative to the peak modulus
};

// Binned maxima of a phase-space transform against distance to a plane, with power-law fits in (1 + dist).
struct DecayProfile {
    std::vector<double> edges;
    std::vector<double> centers;
    double peak = 0.0;

    std::vector<double> off_max;  // max modulus per bin of dist to the plane
    std::vector<long long> off_count;
    std::vector<bool> nonempty;
    double off_slope = 0.0;

    // along_max[k]: max |L^k transform| over near-plane points, per bin of dist to the transversal plane.
    std::vector<std::vector<double>> along_max;
    std::vector<double> along_slope;
    std::vector<double> gain;  // along_slope[0] − along_slope[k]; +inf when L^k is below the noise floor

    // Principal axis of |transform|² against the expected plane (Lagrangian estimates only).
    double axis_deg = 0.0;
    double expected_axis_deg = 0.0;

    std::vector<std::string> notes;
};

// Slope of log(values) against log(1 + centers) over bins in [lo, hi] with values above `floor`.
// Returns -inf when no bin clears the floor; FitError when fewer than two bins do.
double fit_decay(const std::vector<double>& centers, const std::vector<double>& values, double lo, double hi,
                 double floor);

// 𝒯^{χ_t}_{g⊗g} of the exact propagator kernel, binned by dist to Λ'_{χ_t} and, near that plane, by dist to
// Λ'_{-χ_t}. Tangential derivatives are 4th-order differences along an orthonormal basis of Λ'_{χ_t}; d = 1,
// n <= 128, k_max <= 2.
DecayProfile kernel_estimates(const EvolutionProblem& prob, double t, const WindowedTransformPlan& plan, int k_max,
                              int N_max, const DecayOptions& opt = {});

// u0 = μa for the metaplectic μ taking ℝ × {0} to Λ = {(x, Ax)}, evolved to t, transformed with
// 𝒯^{Λ_t}_g and binned by dist to Λ_t and to V_t = 𝒥Λ_t.
DecayProfile lagrangian_solution_estimates(const EvolutionProblem& prob, const WindowedTransformPlan& plan,
                                           const SampledState& a, const LagrangianFrame& lambda, double t, int k_max,
                                           int N_max, const DecayOptions& opt = {});

// e^{iAx²/2} a(x); UnsupportedError unless Λ = {(x, Ax)}.
SampledState lagrangian_state(const SampledState& a, const LagrangianFrame& lambda);

void write_csv(std::ostream& os, const ConeEstimate& c);
void write_csv(std::ostream& os, const DecayProfile& p);

}  // namespace phaselab
