#include "phaselab/weyl.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace phaselab {

namespace {

inline int wrap_diff(int j, int k, int n) { return ((j - k + n / 2) % n + n) % n - n / 2; }

inline double parity(int r) { return (r & 1) ? -1.0 : 1.0; }

// h_s(m) = dx Σ_r K_s(r) e^{-i r dx ξ_m} over the differences r of parity s, for all 2n midpoints s.
// Rows of the returned 2n x n matrix are indexed by s.
MatC midpoint_transform(const MatC& K, double dx) {
    const int n = static_cast<int>(K.rows());
    MatC H(2 * n, n);
    VecC v(n), out(n);
    for (int s = 0; s < 2 * n; ++s) {
        v.setZero();
        for (int r = -n / 2 + (s & 1); r < n / 2; r += 2) {
            const int j = (((s + r) / 2) % n + n) % n;
            const int k = (((s - r) / 2) % n + n) % n;
            // At the Nyquist difference (j, k) and (k, j) share a midpoint class; quantize writes the same
            // value into both, so reading their mean keeps the map a left inverse and Hermitian K real.
            const cplx kv = r == -n / 2 ? 0.5 * (K(j, k) + K(k, j)) : K(j, k);
            v((r + n) % n) = parity(r) * kv;
        }
        dft(v.data(), out.data(), n, -1);
        H.row(s) = dx * out.transpose();
    }
    return H;
}

}  // namespace

OperatorMatrix identity_operator(const PhaseGrid& grid) {
    require_1d(grid, "identity_operator");
    return {grid, MatC::Identity(grid.n, grid.n) / grid.dx};
}

SampledState apply(const OperatorMatrix& A, const SampledState& u) {
    require_same_grid(A.grid, u.grid, "apply");
    if (u.lattice != Lattice::position) throw DimensionError("apply: state must be on the position lattice");
    return {u.grid, A.grid.dx * (A.K * u.values), Lattice::position};
}

OperatorMatrix compose(const OperatorMatrix& A, const OperatorMatrix& B) {
    require_same_grid(A.grid, B.grid, "compose");
    return {A.grid, A.grid.dx * (A.K * B.K)};
}

double op_norm(const MatC& M) {
    if (M.size() == 0) return 0.0;
    const MatC G = M.adjoint() * M;
    Eigen::SelfAdjointEigenSolver<MatC> es(G, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

double op_norm(const OperatorMatrix& A) { return op_norm(A.matrix()); }

MatC half_shift(const MatC& values, int direction) {
    const int n = static_cast<int>(values.rows());
    MatC F = values;
    dft_columns(F, -1);
    for (int k = 0; k < n; ++k) {
        const int kk = k < n / 2 ? k : k - n;
        // The Nyquist mode has no consistent half-step phase; dropping it keeps real data real.
        const cplx ph = kk == -n / 2 ? cplx(0.0) : std::polar(1.0, direction * pi * kk / n);
        F.row(k) *= ph;
    }
    dft_columns(F, +1);
    return F / static_cast<double>(n);
}

OperatorMatrix quantize(const PhaseFunction2D& a) {
    const PhaseGrid& g = a.grid;
    require_1d(g, "quantize");
    const int n = g.n;
    if (a.values.rows() != n || a.values.cols() != n) throw DimensionError("quantize: symbol must be n x n");
    const MatC odd = a.has_half() ? a.half : half_shift(a.values, +1);

    // Column s holds A(x̄_s, ·); after the inverse DFT it holds G_s(r mod n).
    MatC G(n, 2 * n);
    for (int j = 0; j < n; ++j) {
        G.col(2 * j) = a.values.row(j).transpose();
        G.col(2 * j + 1) = odd.row(j).transpose();
    }
    dft_columns(G, +1);
    const double scale = 1.0 / (n * g.dx);
    for (int r = 0; r < n; ++r) G.row(r) *= scale * parity(r < n / 2 ? r : r - n);

    OperatorMatrix K{g, MatC(n, n)};
    for (int k = 0; k < n; ++k) {
        for (int j = 0; j < n; ++j) {
            const int r = wrap_diff(j, k, n);
            const int s = ((2 * k + r) % (2 * n) + 2 * n) % (2 * n);
            if (r == -n / 2) {
                // Both midpoints are equally valid for the Nyquist difference; average them.
                K.K(j, k) = 0.5 * (G(n / 2, s) + G(n / 2, (s + n) % (2 * n)));
            } else {
                K.K(j, k) = G((r + n) % n, s);
            }
        }
    }
    return K;
}

OperatorMatrix quantize(const PhaseGrid& grid, const SymbolFn& a) { return quantize(sample_phase(grid, a)); }

PhaseFunction2D dequantize(const OperatorMatrix& K) {
    const PhaseGrid& g = K.grid;
    require_1d(g, "dequantize");
    const int n = g.n;
    if (K.K.rows() != n || K.K.cols() != n) throw DimensionError("dequantize: kernel must be n x n");
    const MatC H = midpoint_transform(K.K, g.dx);
    MatC he(n, n), ho(n, n);
    for (int j = 0; j < n; ++j) {
        he.row(j) = H.row(2 * j);
        ho.row(j) = H.row(2 * j + 1);
    }
    PhaseFunction2D a{g, he + half_shift(ho, -1), half_shift(he, +1) + ho};
    return a;
}

PhaseFunction2D weyl_product(const PhaseFunction2D& a, const PhaseFunction2D& b) {
    require_same_grid(a.grid, b.grid, "weyl_product");
    return dequantize(compose(quantize(a), quantize(b)));
}

PhaseFunction2D wigner(const SampledState& g, const SampledState& f) {
    require_same_grid(g.grid, f.grid, "wigner");
    require_1d(g.grid, "wigner");
    // The Weyl symbol of the kernel g(x) f̄(y) is (2π)^{1/2} W(g, f). Going through dequantize removes
    // the ξ-aliasing that a single parity class of differences would leave behind.
    PhaseFunction2D W = dequantize({g.grid, g.values * f.values.adjoint()});
    const double c = 1.0 / std::sqrt(2.0 * pi);
    W.values *= c;
    W.half *= c;
    return W;
}

cplx phase_pairing(const PhaseFunction2D& a, const PhaseFunction2D& b) {
    require_same_grid(a.grid, b.grid, "phase_pairing");
    const MatC ah = a.has_half() ? a.half : half_shift(a.values, +1);
    const MatC bh = b.has_half() ? b.half : half_shift(b.values, +1);
    const cplx s = (a.values.array() * b.values.array().conjugate()).sum() + (ah.array() * bh.array().conjugate()).sum();
    return 0.5 * a.grid.dx * a.grid.dxi * s;
}

namespace {

// Fourth-order centered difference of `v` along rows (axis 0) or columns (axis 1); border left at zero.
MatC diff4(const MatC& v, int axis, double h) {
    const Eigen::Index n0 = v.rows(), n1 = v.cols();
    MatC out = MatC::Zero(n0, n1);
    const double c = 1.0 / (12.0 * h);
    if (axis == 0) {
        for (Eigen::Index i = 2; i + 2 < n0; ++i)
            out.row(i) = c * (v.row(i - 2) - 8.0 * v.row(i - 1) + 8.0 * v.row(i + 1) - v.row(i + 2));
    } else {
        for (Eigen::Index i = 2; i + 2 < n1; ++i)
            out.col(i) = c * (v.col(i - 2) - 8.0 * v.col(i - 1) + 8.0 * v.col(i + 1) - v.col(i + 2));
    }
    return out;
}

struct LineFit {
    double slope = 0.0;
    double residual = 0.0;
};

LineFit least_squares(const std::vector<double>& X, const std::vector<double>& Y) {
    const double n = static_cast<double>(X.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        mx += X[i];
        my += Y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        sxx += (X[i] - mx) * (X[i] - mx);
        sxy += (X[i] - mx) * (Y[i] - my);
    }
    LineFit f;
    f.slope = sxx > 0 ? sxy / sxx : 0.0;
    double ss = 0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        const double e = Y[i] - (my + f.slope * (X[i] - mx));
        ss += e * e;
    }
    f.residual = std::sqrt(ss / n);
    return f;
}

}  // namespace

ShubinWitness shubin_fit(const PhaseFunction2D& a, double m_hypothesis, const ShubinFitOptions& opt) {
    const PhaseGrid& g = a.grid;
    require_1d(g, "shubin_fit");
    const int n = g.n;
    double r_max = opt.r_max > 0 ? opt.r_max : 0.8 * std::min(g.L, g.xi_max());
    double r_min = opt.r_min > 0 ? opt.r_min : r_max / 8.0;
    if (!(r_min < r_max)) throw FitError("shubin_fit: empty radius range");

    ShubinWitness w;
    w.m_hypothesis = m_hypothesis;
    for (double r = r_min; r <= r_max * (1 + 1e-12); r *= 2.0) w.shell_edges.push_back(r);
    const int nshell = static_cast<int>(w.shell_edges.size()) - 1;
    if (nshell < 3) throw FitError("shubin_fit: fewer than 3 dyadic shells fit between r_min and r_max");

    const double xlim = g.L - 2.5 * g.dx;
    const double xilim = g.xi_max() - 2.5 * g.dxi;
    auto shell_of = [&](int j, int m) -> int {
        const double x = g.x(j), xi = g.xi(m);
        if (std::abs(x) > xlim || std::abs(xi) > xilim) return -1;
        const double r = std::hypot(x, xi);
        for (int s = 0; s < nshell; ++s)
            if (r >= w.shell_edges[s] && r < w.shell_edges[s + 1]) return s;
        return -1;
    };

    const int orders[6][2] = {{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
    double scale = 0.0;
    w.consistent = true;
    for (const auto& o : orders) {
        MatC D = a.values;
        for (int k = 0; k < o[0]; ++k) D = diff4(D, 0, g.dx);
        for (int k = 0; k < o[1]; ++k) D = diff4(D, 1, g.dxi);
        std::vector<double> best(nshell, -1.0), at(nshell, 0.0);
        for (int m = 0; m < n; ++m)
            for (int j = 0; j < n; ++j) {
                const int s = shell_of(j, m);
                if (s < 0) continue;
                const double v = std::abs(D(j, m));
                if (v > best[s]) {
                    best[s] = v;
                    at[s] = bracket(g.x(j), g.xi(m));
                }
            }
        if (o[0] + o[1] == 0) scale = *std::max_element(best.begin(), best.end());
        const double floor = opt.noise_floor * scale;
        std::vector<double> X, Y;
        for (int s = 0; s < nshell; ++s)
            if (best[s] > floor && best[s] > 0) {
                X.push_back(std::log(at[s]));
                Y.push_back(std::log(best[s]));
            }
        DerivativeFit f;
        f.ax = o[0];
        f.axi = o[1];
        f.shells = static_cast<int>(X.size());
        const int order = o[0] + o[1];
        if (X.size() < 3) {
            if (order == 0) throw FitError("shubin_fit: fewer than 3 usable shells above the noise floor");
            f.below_floor = true;
            f.slope = -std::numeric_limits<double>::infinity();
            f.within_bound = true;
        } else {
            const LineFit lf = least_squares(X, Y);
            f.slope = lf.slope;
            f.residual = lf.residual;
            f.within_bound = f.slope <= m_hypothesis - order + opt.tolerance;
        }
        if (order == 0) {
            w.order_estimate = f.slope;
            w.fit_residual = f.residual;
        }
        w.consistent = w.consistent && f.within_bound;
        w.derivatives.push_back(f);
    }
    return w;
}

}  // namespace phaselab
