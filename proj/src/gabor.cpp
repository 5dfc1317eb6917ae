#include "phaselab/gabor.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace phaselab {

namespace {

inline int wrap_index(int r, int n) { return ((r + n / 2) % n + n) % n - n / 2; }

inline double parity(int r) { return (r & 1) ? -1.0 : 1.0; }

// conj(g(r dx)) for r in [-n/2, n/2), stored at r + n/2.
VecC conj_window(const WindowedTransformPlan& plan) { return plan.window.values.conjugate(); }

void check_window(const SampledState& g) {
    require_1d(g.grid, "window");
    if (g.lattice != Lattice::position) throw DimensionError("window must be sampled on the position lattice");
    const double peak = g.values.cwiseAbs().maxCoeff();
    if (!(peak > 0.0)) throw ConfigError("window", "window must not vanish");
    const double edge = std::max(std::abs(g.values(0)), std::abs(g.values(g.grid.n - 1)));
    if (edge > 1e-14 * peak)
        throw ConfigError("window", "window must decay below 1e-14 of its peak at the box edge (edge/peak = " +
                                        num(edge / peak) + "); increase L");
}

// Gauss–Hermite rule for ∫ e^{-t²} f(t) dt (Golub–Welsch).
void gauss_hermite(int k, VecR& nodes, VecR& weights) {
    MatR J = MatR::Zero(k, k);
    for (int i = 1; i < k; ++i) J(i, i - 1) = J(i - 1, i) = std::sqrt(i / 2.0);
    Eigen::SelfAdjointEigenSolver<MatR> es(J);
    nodes = es.eigenvalues();
    weights = std::sqrt(pi) * es.eigenvectors().row(0).transpose().array().square();
}

void check_order(double s) {
    if (!(std::abs(s) <= 20.0)) throw GuardError("s", "weight order must satisfy |s| <= 20", "choose a smaller order");
}

}  // namespace

WindowedTransformPlan make_plan(const SampledState& window) {
    check_window(window);
    return {window.grid, window, std::norm(window.norm())};
}

WindowedTransformPlan gaussian_plan(const PhaseGrid& grid) {
    return make_plan(sample_state(grid, [](double x) { return cplx(std::pow(pi, -0.25) * std::exp(-0.5 * x * x)); }));
}

WindowedTransformPlan hermite1_plan(const PhaseGrid& grid) {
    return make_plan(sample_state(
        grid, [](double x) { return cplx(std::sqrt(2.0) * x * std::pow(pi, -0.25) * std::exp(-0.5 * x * x)); }));
}

PhaseFunction2D fbi(const WindowedTransformPlan& plan, const SampledState& u) {
    require_same_grid(plan.grid, u.grid, "fbi");
    if (u.lattice != Lattice::position) throw DimensionError("fbi: state must be on the position lattice");
    const int n = plan.grid.n;
    const double c = plan.grid.dx / std::sqrt(2 * pi);
    const VecC gc = conj_window(plan);
    MatC T(n, n);
    VecC f(n), F(n);
    for (int j = 0; j < n; ++j) {
        for (int l = 0; l < n; ++l) f(l) = parity(l) * u.values(l) * gc(wrap_index(l - j, n) + n / 2);
        dft(f.data(), F.data(), n, -1);
        for (int m = 0; m < n; ++m) {
            // e^{i x_j ξ_m} = (-1)^j e^{2πi jm/n}
            const cplx ph = parity(j) * std::polar(1.0, 2 * pi * double((std::int64_t(j) * m) % n) / n);
            T(j, m) = c * F(m) * ph;
        }
    }
    return {plan.grid, T, MatC()};
}

PhaseFunction2D fbi_direct(const WindowedTransformPlan& plan, const SampledState& u) {
    require_same_grid(plan.grid, u.grid, "fbi_direct");
    const PhaseGrid& g = plan.grid;
    const int n = g.n;
    const double c = g.dx / std::sqrt(2 * pi);
    const VecC gc = conj_window(plan);
    MatC T = MatC::Zero(n, n);
    for (int j = 0; j < n; ++j)
        for (int l = 0; l < n; ++l) {
            // window argument y_l - x_j taken literally; outside the sampled box the window is zero
            const int r = l - j;
            if (r < -n / 2 || r >= n / 2) continue;
            const cplx w = u.values(l) * gc(r + n / 2);
            if (w == cplx(0.0)) continue;
            for (int m = 0; m < n; ++m) T(j, m) += w * std::polar(1.0, -r * g.dx * g.xi(m));
        }
    return {g, c * T, MatC()};
}

SampledState fbi_adjoint(const WindowedTransformPlan& plan, const PhaseFunction2D& U) {
    require_same_grid(plan.grid, U.grid, "fbi_adjoint");
    const int n = plan.grid.n;
    if (U.values.rows() != n || U.values.cols() != n) throw DimensionError("fbi_adjoint: field must be n x n");
    const double c = plan.grid.dx * plan.grid.dxi / std::sqrt(2 * pi);
    const VecC& g = plan.window.values;
    VecC out = VecC::Zero(n), v(n), V(n);
    for (int j = 0; j < n; ++j) {
        // Σ_m U(j,m) e^{i (y_l - x_j) ξ_m} = (-1)^{l-j} Σ_m U(j,m) e^{2πi (l-j) m / n}
        v = U.values.row(j).transpose();
        dft(v.data(), V.data(), n, +1);
        for (int l = 0; l < n; ++l) {
            const int r = wrap_index(l - j, n);
            out(l) += parity(r) * V((r + n) % n) * g(r + n / 2);
        }
    }
    return {plan.grid, c * out, Lattice::position};
}

PhaseFunction2D fbi_lagrangian(const WindowedTransformPlan& plan, const SampledState& u, const LagrangianFrame& frame) {
    if (frame.basis.rows() != 2) throw UnsupportedError("fbi_lagrangian: only d = 1 planes are supported");
    if (!frame.has_graph_form) throw UnsupportedError("fbi_lagrangian: plane has no (Y, A) parametrization");
    PhaseFunction2D T = fbi(plan, u);
    const PhaseGrid& g = plan.grid;
    // d = 1: either Y = ℝ (π_{Y⊥} = 0) or Y = {0} (π_{Y⊥} = id, A = 0)
    const bool full_y = frame.Y_basis.cols() == 1;
    const double A = full_y ? frame.A(0, 0) : 0.0;
    for (int j = 0; j < g.n; ++j)
        for (int m = 0; m < g.n; ++m) {
            const double x = g.x(j);
            const double phase = (full_y ? 0.0 : x * g.xi(m)) + 0.5 * A * x * x;
            T.values(j, m) *= std::polar(1.0, -phase);
        }
    return T;
}

double qs_norm(const WindowedTransformPlan& plan, const SampledState& u, double s) {
    check_order(s);
    const WindowedTransformPlan p = gaussian_plan(plan.grid);
    PhaseFunction2D T = fbi(p, u);
    const PhaseGrid& g = plan.grid;
    for (int j = 0; j < g.n; ++j)
        for (int m = 0; m < g.n; ++m) T.values(j, m) *= std::pow(bracket(g.x(j), g.xi(m)), s);
    return fbi_adjoint(p, T).norm();
}

PhaseFunction2D localization_symbol(const PhaseGrid& grid, double s) {
    check_order(s);
    require_1d(grid, "localization_symbol");
    VecR t, w;
    gauss_hermite(24, t, w);
    const int n = grid.n, k = static_cast<int>(t.size());
    auto conv = [&](double x0, double xi0) {
        double acc = 0.0;
        for (int a = 0; a < k; ++a) {
            const double x = x0 - t(a);
            double row = 0.0;
            for (int b = 0; b < k; ++b) {
                const double xi = xi0 - t(b);
                row += w(b) * std::pow(1.0 + x * x + xi * xi, 0.5 * s);
            }
            acc += w(a) * row;
        }
        return cplx(acc / pi);
    };
    PhaseFunction2D b{grid, MatC(n, n), MatC(n, n)};
    for (int j = 0; j < n; ++j)
        for (int m = 0; m < n; ++m) {
            b.values(j, m) = conv(grid.x(j), grid.xi(m));
            b.half(j, m) = conv(grid.x(j) + 0.5 * grid.dx, grid.xi(m));
        }
    return b;
}

double qs_norm_weyl(const WindowedTransformPlan& plan, const SampledState& u, double s) {
    require_same_grid(plan.grid, u.grid, "qs_norm_weyl");
    return apply(quantize(localization_symbol(plan.grid, s)), u).norm();
}

cplx chi_phase(const SymplecticMap& chi, double z1, double z2, double zeta1, double zeta2) {
    const double ax = chi.M(0, 0) * z2 - chi.M(0, 1) * zeta2;
    const double axi = chi.M(1, 0) * z2 - chi.M(1, 1) * zeta2;
    // σ(a, w) with w = (z₁, ζ₁): <w_x, a_ξ> - <a_x, w_ξ>
    const double sig = z1 * axi - ax * zeta1;
    return std::polar(1.0, -0.5 * (z1 * zeta1 + z2 * zeta2 + sig));
}

KernelTransform::KernelTransform(const WindowedTransformPlan& plan, const OperatorMatrix& K, const SymplecticMap& chi)
    : plan_(plan), grid_(plan.grid), chi_(chi) {
    require_same_grid(plan.grid, K.grid, "KernelTransform");
    require_1d(grid_, "KernelTransform");
    if (chi.M.rows() != 2) throw DimensionError("KernelTransform: χ must act on T*ℝ");
    const int n = grid_.n;
    first_.reserve(n);
    for (int k = 0; k < n; ++k) first_.push_back(fbi(plan_, {grid_, K.K.col(k), Lattice::position}).values);
}

std::vector<cplx> KernelTransform::plain_slab(int a) const {
    const int n = grid_.n;
    if (a < 0 || a >= n) throw DimensionError("KernelTransform: slab index out of range");
    std::vector<cplx> out(std::size_t(n) * n * n);
    SampledState w{grid_, VecC(n), Lattice::position};
    for (int m = 0; m < n; ++m) {
        for (int k = 0; k < n; ++k) w.values(k) = first_[k](a, m);
        const MatC T = fbi(plan_, w).values;
        cplx* dst = out.data() + std::size_t(m) * n * n;
        for (int b = 0; b < n; ++b)
            for (int q = 0; q < n; ++q) dst[std::size_t(b) * n + q] = T(b, q);
    }
    return out;
}

std::vector<cplx> KernelTransform::slab(int a) const {
    std::vector<cplx> out = plain_slab(a);
    const int n = grid_.n;
    const double z1 = grid_.x(a);
    for (int m = 0; m < n; ++m)
        for (int b = 0; b < n; ++b)
            for (int q = 0; q < n; ++q)
                out[(std::size_t(m) * n + b) * n + q] *= chi_phase(chi_, z1, grid_.x(b), grid_.xi(m), grid_.xi(q));
    return out;
}

std::vector<cplx> fbi_chi(const WindowedTransformPlan& plan, const OperatorMatrix& K, const SymplecticMap& chi,
                          std::size_t max_bytes) {
    const std::size_t n = static_cast<std::size_t>(plan.grid.n);
    if (plan.grid.n > 128 || n * n * n * n * sizeof(cplx) > max_bytes)
        throw GuardError("n", "dense kernel transform needs n^4 samples (" + std::to_string(n * n * n * n) + ")",
                         "stream z1 slabs through KernelTransform or lower n");
    const KernelTransform kt(plan, K, chi);
    std::vector<cplx> out;
    out.reserve(n * n * n * n);
    for (std::size_t a = 0; a < n; ++a) {
        const std::vector<cplx> s = kt.slab(static_cast<int>(a));
        out.insert(out.end(), s.begin(), s.end());
    }
    return out;
}

}  // namespace phaselab
