#include "phaselab/propagator.hpp"

#include "phaselab/gabor.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>

namespace phaselab {

namespace {

double sheet_max(const PhaseFunction2D& a) {
    double m = a.values.cwiseAbs().maxCoeff();
    if (a.has_half()) m = std::max(m, a.half.cwiseAbs().maxCoeff());
    return m;
}

double sheet_diff(const PhaseFunction2D& a, const PhaseFunction2D& b) {
    double m = (a.values - b.values).cwiseAbs().maxCoeff();
    if (a.has_half() && b.has_half()) m = std::max(m, (a.half - b.half).cwiseAbs().maxCoeff());
    return m;
}

double sheet_mass(const PhaseFunction2D& a) {
    double m = a.values.cwiseAbs2().sum();
    if (a.has_half()) m += a.half.cwiseAbs2().sum();
    return m;
}

bool is_real(const PhaseFunction2D& a) {
    const double scale = sheet_max(a);
    double im = a.values.imag().cwiseAbs().maxCoeff();
    if (a.has_half()) im = std::max(im, a.half.imag().cwiseAbs().maxCoeff());
    return im <= 1e-14 * scale;
}

void check_dense(const PhaseGrid& g, const char* what) {
    if (g.n > dense_size_limit)
        throw GuardError("n", std::string(what) + ": dense propagators are limited to n <= 512",
                         "use evolve_state for single states or lower n");
}

cplx quadratic_symbol(const QuadraticHamiltonian& H, double x, double xi) {
    return H.Q(0, 0) * x * x + 2 * H.Q(0, 1) * x * xi + H.Q(1, 1) * xi * xi;
}

// Gauss–Legendre rule on [-1, 1].
void gauss_legendre(int k, VecR& nodes, VecR& weights) {
    MatR J = MatR::Zero(k, k);
    for (int i = 1; i < k; ++i) J(i, i - 1) = J(i - 1, i) = i / std::sqrt(4.0 * i * i - 1.0);
    Eigen::SelfAdjointEigenSolver<MatR> es(J);
    nodes = es.eigenvalues();
    weights = 2.0 * es.eigenvectors().row(0).transpose().array().square();
}

// Legendre values P_0..P_{k} at τ.
VecR legendre(int k, double tau) {
    VecR P(k + 1);
    P(0) = 1.0;
    if (k >= 1) P(1) = tau;
    for (int i = 1; i < k; ++i) P(i + 1) = ((2 * i + 1) * tau * P(i) - i * P(i - 1)) / (i + 1);
    return P;
}

struct TimeMesh {
    VecR s;  // nodes in [0, t]
    VecR w;  // weights of ∫_0^t
    MatR S;  // S(i, j): weight of node j in ∫_0^{s_i}
};

TimeMesh time_mesh(double t, int nodes, int panels) {
    VecR tau, wt;
    gauss_legendre(nodes, tau, wt);
    // local indefinite integration: ∫_{-1}^{τ_i} ℓ_j = Σ_k ∫_{-1}^{τ_i} P_k · (V^{-1})_{kj}
    MatR V(nodes, nodes), IP(nodes, nodes);
    for (int i = 0; i < nodes; ++i) {
        const VecR P = legendre(nodes, tau(i));
        for (int k = 0; k < nodes; ++k) {
            V(i, k) = P(k);
            IP(i, k) = k == 0 ? tau(i) + 1.0 : (P(k + 1) - P(k - 1)) / (2 * k + 1);
        }
    }
    const MatR local = IP * V.fullPivLu().inverse();
    const int M = nodes * panels;
    const double h = t / panels;
    TimeMesh m{VecR(M), VecR(M), MatR::Zero(M, M)};
    for (int p = 0; p < panels; ++p)
        for (int i = 0; i < nodes; ++i) {
            const int a = p * nodes + i;
            m.s(a) = h * (p + 0.5 * (tau(i) + 1.0));
            m.w(a) = 0.5 * h * wt(i);
            for (int q = 0; q < p; ++q)
                for (int j = 0; j < nodes; ++j) m.S(a, q * nodes + j) = 0.5 * h * wt(j);
            for (int j = 0; j < nodes; ++j) m.S(a, p * nodes + j) = 0.5 * h * local(i, j);
        }
    return m;
}

MatC flowed_matrix(const EvolutionProblem& prob, double s) { return quantize(p_flowed(prob, s).p).matrix(); }

// B_n(t) for n = 0..N as grid matrices.
std::vector<MatC> dyson_operators(const EvolutionProblem& prob, double t, int N, int nodes, int panels) {
    const int n = prob.grid.n;
    std::vector<MatC> out(N + 1, MatC::Zero(n, n));
    out[0] = MatC::Identity(n, n);
    if (N == 0 || t == 0.0) return out;
    const TimeMesh mesh = time_mesh(t, nodes, panels);
    const int M = static_cast<int>(mesh.s.size());
    std::vector<MatC> P(M), B(M, MatC::Identity(n, n)), Y(M);
    for (int i = 0; i < M; ++i) P[i] = flowed_matrix(prob, mesh.s(i));
    const cplx mi(0.0, -1.0);
    for (int level = 1; level <= N; ++level) {
        for (int j = 0; j < M; ++j) Y[j].noalias() = P[j] * B[j];
        MatC total = MatC::Zero(n, n);
        for (int j = 0; j < M; ++j) total += mesh.w(j) * Y[j];
        out[level] = mi * total;
        if (level == N) break;
        for (int i = 0; i < M; ++i) {
            MatC acc = MatC::Zero(n, n);
            for (int j = 0; j < M; ++j)
                if (mesh.S(i, j) != 0.0) acc += mesh.S(i, j) * Y[j];
            B[i] = mi * acc;
        }
    }
    return out;
}

// J_0..J_K(z) by Miller's backward recurrence, normalized with J_0 + 2 Σ J_{2k} = 1.
std::vector<double> bessel_j(int K, double z) {
    std::vector<double> J(K + 1, 0.0);
    if (z == 0.0) {
        J[0] = 1.0;
        return J;
    }
    const int start = K + 30 + static_cast<int>(std::sqrt(40.0 * (K + 1)));
    double next = 0.0, cur = 1e-300, norm = 0.0;
    for (int k = start; k >= 1; --k) {
        const double prev = 2.0 * k / z * cur - next;
        next = cur;
        cur = prev;  // cur now holds J_{k-1}
        if (k - 1 <= K) J[k - 1] = cur;
        if ((k - 1) % 2 == 0) norm += (k - 1 == 0 ? 1.0 : 2.0) * cur;
        if (std::abs(cur) > 1e250) {
            const double s = 1e-250;
            cur *= s;
            next *= s;
            norm *= s;
            for (int i = k - 1; i <= K; ++i) J[i] *= s;
        }
    }
    for (double& v : J) v /= norm;
    return J;
}

}  // namespace

cplx default_perturbation(double x, double xi, double eps) {
    const double r = std::hypot(x, xi);
    return eps / bracket(x, xi) * 0.5 * std::erfc(r - 7.0);
}

EvolutionProblem make_problem(const PhaseGrid& grid, const QuadraticHamiltonian& H, const PhaseFunction2D& p,
                              double delta, double trusted_radius) {
    require_1d(grid, "make_problem");
    require_same_grid(grid, p.grid, "make_problem");
    if (H.d() != 1) throw UnsupportedError("make_problem: evolution problems are implemented for d = 1");
    if (!(delta > 0.0)) throw ConfigError("delta", "decay order must be positive");
    if (!(trusted_radius >= 0.0)) throw ConfigError("trusted_radius", "must be non-negative");
    if (p.values.rows() != grid.n || p.values.cols() != grid.n) throw DimensionError("make_problem: p must be n x n");
    EvolutionProblem prob{grid, H, p, {}, delta, trusted_radius, Interpolation::bilinear, {}};
    if (!prob.p.has_half()) prob.p.half = half_shift(prob.p.values, +1);

    const int n = grid.n;
    double edge = std::max({prob.p.values.row(0).cwiseAbs().maxCoeff(), prob.p.values.row(n - 1).cwiseAbs().maxCoeff(),
                            prob.p.half.row(n - 1).cwiseAbs().maxCoeff(), prob.p.values.col(0).cwiseAbs().maxCoeff(),
                            prob.p.half.col(0).cwiseAbs().maxCoeff()});
    if (edge > 1e-12)
        throw ConfigError("p", "perturbation must decay below 1e-12 at the phase-box edge (edge value " +
                                   num(edge) + "); taper p or increase L");
    if (prob.has_perturbation()) {
        ShubinFitOptions fo;
        if (trusted_radius > 0) {
            fo.r_max = trusted_radius;
            fo.r_min = trusted_radius / 8.0;
        }
        try {
            // Only the decay of p itself is checked; derivative slopes are biased on the inner shells.
            const ShubinWitness w = shubin_fit(prob.p, -delta, fo);
            if (w.order_estimate > -delta + fo.tolerance)
                prob.warnings.push_back("p: fitted order " + num(w.order_estimate) +
                                        " exceeds -delta + tolerance");
        } catch (const FitError& e) {
            prob.warnings.push_back(std::string("p: order check skipped (") + e.what() + ")");
        }
    }
    return prob;
}

EvolutionProblem make_problem(const PhaseGrid& grid, const QuadraticHamiltonian& H, const SymbolFn& p, double delta,
                              double trusted_radius) {
    EvolutionProblem prob = make_problem(grid, H, sample_phase(grid, p), delta, trusted_radius);
    prob.p_fn = p;
    prob.interpolation = Interpolation::exact;
    return prob;
}

EvolutionProblem unperturbed(const PhaseGrid& grid, const QuadraticHamiltonian& H) {
    return make_problem(grid, H, [](double, double) { return cplx(0.0); }, 1.0);
}

EvolutionProblem unperturbed(const EvolutionProblem& prob) {
    EvolutionProblem q = unperturbed(prob.grid, prob.H);
    q.trusted_radius = prob.trusted_radius;
    return q;
}

EvolutionProblem default_problem(int n, double L) {
    return make_problem(make_grid(1, n, L), harmonic_oscillator(1),
                        [](double x, double xi) { return default_perturbation(x, xi); }, 1.0, 5.0);
}

MatC generator_matrix(const EvolutionProblem& prob, bool include_p) {
    const QuadraticHamiltonian H = prob.H;
    MatC A = quantize(prob.grid, [&](double x, double xi) { return quadratic_symbol(H, x, xi); }).matrix();
    if (include_p && prob.has_perturbation()) A += quantize(prob.p).matrix();
    return A;
}

SpectralPropagator::SpectralPropagator(const MatC& A) {
    const MatC Ah = 0.5 * (A + A.adjoint());
    Eigen::SelfAdjointEigenSolver<MatC> es(Ah);
    if (es.info() != Eigen::Success) throw NumericalError("SpectralPropagator: eigensolver failed", 0.0);
    V_ = es.eigenvectors();
    lambda_ = es.eigenvalues();
}

MatC SpectralPropagator::at(double t) const {
    VecC ph(lambda_.size());
    for (Eigen::Index k = 0; k < lambda_.size(); ++k) ph(k) = std::polar(1.0, -t * lambda_(k));
    return V_ * ph.asDiagonal() * V_.adjoint();
}

OperatorMatrix exact_propagator(const EvolutionProblem& prob, double t) {
    check_dense(prob.grid, "exact_propagator");
    const int n = prob.grid.n;
    if (t == 0.0) return OperatorMatrix::from_matrix(prob.grid, MatC::Identity(n, n));
    const MatC A = generator_matrix(prob);
    if (is_real(prob.p)) return OperatorMatrix::from_matrix(prob.grid, SpectralPropagator(A).at(t));
    const MatC E = (cplx(0.0, -t) * A).exp();
    return OperatorMatrix::from_matrix(prob.grid, E);
}

MetaplecticCertificate certify_metaplectic(const EvolutionProblem& prob, double t, const OperatorMatrix& mu) {
    const PhaseGrid& g = prob.grid;
    const int n = g.n;
    const MatC U = mu.matrix();
    MetaplecticCertificate c;
    c.unitarity_defect = (U.adjoint() * U - MatC::Identity(n, n)).cwiseAbs().maxCoeff();
    auto a = [](double x, double xi) {
        // Anisotropic so that both its image under a unit-time free shear and that image's kernel stay
        // inside a box of half-width 12.
        const double u = (x - 0.5) / 1.4, v = (xi - 0.3) / 0.7;
        return cplx(std::exp(-0.5 * (u * u + v * v)) * (1.0 + 0.3 * x * xi));
    };
    const SymplecticMap chi = flow(prob.H, t);
    const MatC A = quantize(g, a).matrix();
    const MatC B = quantize(g, [&](double x, double xi) {
                       const Eigen::Vector2d w = chi.apply(x, xi);
                       return a(w(0), w(1));
                   }).matrix();
    c.covariance_defect = op_norm(MatC(U.adjoint() * A * U - B)) / op_norm(A);
    return c;
}

OperatorMatrix metaplectic(const EvolutionProblem& prob, double t) {
    const OperatorMatrix mu = exact_propagator(unperturbed(prob), t);
    const MetaplecticCertificate c = certify_metaplectic(prob, t, mu);
    if (c.unitarity_defect > 1e-8) throw NumericalError("metaplectic: unitarity certificate failed", c.unitarity_defect);
    if (c.covariance_defect > 5e-6)
        throw NumericalError("metaplectic: covariance certificate failed; the phase box is too small for this flow",
                             c.covariance_defect);
    return mu;
}

VecC chebyshev_evolve(const MatC& A, const VecC& v, double t, double lo, double hi, double tol) {
    if (!(hi >= lo)) throw ConfigError("spectrum", "upper bound below lower bound");
    const double c = 0.5 * (hi + lo), r = std::max(0.5 * (hi - lo), 1e-300);
    const double z = r * std::abs(t);
    const int K = static_cast<int>(z + 10.0 * std::cbrt(z) + 40.0);
    const std::vector<double> J = bessel_j(K, z);
    const double sgn = t < 0 ? -1.0 : 1.0;
    // e^{-iτx} = J_0(τ) + 2 Σ (-i)^k J_k(τ) T_k(x), applied with x = (A - c)/r
    auto Ht = [&](const VecC& w) -> VecC { return (A * w - c * w) / r; };
    VecC w0 = v, w1 = Ht(v);
    VecC acc = J[0] * w0;
    cplx ik(1.0, 0.0);
    const cplx step(0.0, -sgn);
    ik *= step;
    acc += 2.0 * ik * J[1] * w1;
    int small = 0;
    for (int k = 2; k <= K; ++k) {
        VecC w2 = 2.0 * Ht(w1) - w0;
        ik *= step;
        acc += 2.0 * ik * J[k] * w2;
        w0.swap(w1);
        w1.swap(w2);
        if (k > z && std::abs(J[k]) < tol) {
            if (++small >= 3) break;
        } else {
            small = 0;
        }
    }
    return std::polar(1.0, -c * t) * acc;
}

SampledState evolve_state(const EvolutionProblem& prob, double t, const SampledState& u) {
    require_same_grid(prob.grid, u.grid, "evolve_state");
    if (!is_real(prob.p)) throw UnsupportedError("evolve_state: Chebyshev propagation needs a real perturbation");
    const MatC A = generator_matrix(prob);
    // Gershgorin bounds of the Hermitian generator
    const VecR rad = A.cwiseAbs().rowwise().sum() - A.diagonal().cwiseAbs();
    const VecR d = A.diagonal().real();
    const double lo = (d - rad).minCoeff(), hi = (d + rad).maxCoeff();
    return {u.grid, chebyshev_evolve(A, u.values, t, lo, hi), Lattice::position};
}

FlowedSymbol p_flowed(const EvolutionProblem& prob, double t) {
    const PhaseGrid& g = prob.grid;
    const int n = g.n;
    FlowedSymbol out{{g, MatC::Zero(n, n), MatC::Zero(n, n)}, 0.0};
    if (!prob.has_perturbation()) return out;
    if (t == 0.0) {
        out.p = prob.p;
        return out;
    }
    const SymplecticMap chi = flow(prob.H, t);
    const double xlo = -g.L, xhi = g.L - 0.5 * g.dx, klo = g.xi(0), khi = g.xi(n - 1);

    // interleaved samples on the 2n x n midpoint lattice for interpolation
    auto lattice = [&](int s, int m) -> cplx {
        if (s < 0 || s >= 2 * n || m < 0 || m >= n) return 0.0;
        return (s & 1) ? prob.p.half(s / 2, m) : prob.p.values(s / 2, m);
    };
    auto cubic = [](double t0, cplx a, cplx b, cplx c, cplx d) {
        // Catmull–Rom on (a, b, c, d) at offset t0 from b
        return b + 0.5 * t0 * (c - a + t0 * (2.0 * a - 5.0 * b + 4.0 * c - d + t0 * (3.0 * (b - c) + d - a)));
    };
    auto eval = [&](double x, double xi) -> cplx {
        if (x < xlo || x > xhi || xi < klo || xi > khi) return 0.0;
        if (prob.interpolation == Interpolation::exact && prob.p_fn) return prob.p_fn(x, xi);
        const double fs = (x - xlo) / (0.5 * g.dx), fm = (xi - klo) / g.dxi;
        const int s0 = static_cast<int>(std::floor(fs)), m0 = static_cast<int>(std::floor(fm));
        const double ts = fs - s0, tm = fm - m0;
        if (prob.interpolation == Interpolation::bicubic) {
            cplx col[4];
            for (int a = 0; a < 4; ++a)
                col[a] = cubic(tm, lattice(s0 - 1 + a, m0 - 1), lattice(s0 - 1 + a, m0), lattice(s0 - 1 + a, m0 + 1),
                               lattice(s0 - 1 + a, m0 + 2));
            return cubic(ts, col[0], col[1], col[2], col[3]);
        }
        return (1 - ts) * ((1 - tm) * lattice(s0, m0) + tm * lattice(s0, m0 + 1)) +
               ts * ((1 - tm) * lattice(s0 + 1, m0) + tm * lattice(s0 + 1, m0 + 1));
    };
    for (int j = 0; j < n; ++j)
        for (int m = 0; m < n; ++m) {
            Eigen::Vector2d w = chi.apply(g.x(j), g.xi(m));
            out.p.values(j, m) = eval(w(0), w(1));
            w = chi.apply(g.x(j) + 0.5 * g.dx, g.xi(m));
            out.p.half(j, m) = eval(w(0), w(1));
        }
    // mass of p sitting where no pullback point lands: lattice points w with χ_t^{-1} w outside the box
    const MatR Minv = chi.M.inverse();
    double lost = 0.0;
    auto outside = [&](double x, double xi) {
        const Eigen::Vector2d z = Minv * Eigen::Vector2d(x, xi);
        return z(0) < xlo || z(0) > xhi || z(1) < klo || z(1) > khi;
    };
    for (int j = 0; j < n; ++j)
        for (int m = 0; m < n; ++m) {
            if (outside(g.x(j), g.xi(m))) lost += std::norm(prob.p.values(j, m));
            if (outside(g.x(j) + 0.5 * g.dx, g.xi(m))) lost += std::norm(prob.p.half(j, m));
        }
    const double m0 = sheet_mass(prob.p);
    out.lost_mass = m0 > 0 ? lost / m0 : 0.0;
    if (out.lost_mass > 1e-4)
        throw DomainError("p_flowed: " + num(out.lost_mass) +
                          " of the perturbation's mass leaves the phase box; enlarge L or n");
    return out;
}

DysonTruncation dyson_terms(const EvolutionProblem& prob, double t, int N, const DysonOptions& opt) {
    if (N < 0) throw ConfigError("N", "truncation order must be non-negative");
    if (N > 6) throw GuardError("N", "truncation order above 6", "use N <= 6");
    if (opt.quad_nodes < 8) throw ConfigError("quad_nodes", "at least 8 Gauss–Legendre nodes per panel are required");
    if (opt.panels < 1) throw ConfigError("panels", "at least one panel is required");
    check_dense(prob.grid, "dyson_terms");
    const PhaseGrid& g = prob.grid;
    DysonTruncation d{N, t, opt.quad_nodes, opt.panels, {}, {}, 0.0, false};
    const std::vector<MatC> B = dyson_operators(prob, t, N, opt.quad_nodes, opt.panels);
    for (int k = 0; k <= N; ++k) {
        d.operators.push_back(OperatorMatrix::from_matrix(g, B[k]));
        d.terms.push_back(k == 0 ? constant_phase(g, 1.0) : dequantize(d.operators.back()));
    }
    if (opt.certify && N > 0 && t != 0.0) {
        const std::vector<MatC> B2 = dyson_operators(prob, t, N, opt.quad_nodes, 2 * opt.panels);
        for (int k = 1; k <= N; ++k)
            d.mesh_halving_delta = std::max(
                d.mesh_halving_delta, sheet_diff(d.terms[k], dequantize(OperatorMatrix::from_matrix(g, B2[k]))));
        if (d.mesh_halving_delta > opt.certificate_tolerance)
            throw NumericalError("dyson_terms: mesh-halving certificate failed; increase panels or quad_nodes",
                                 d.mesh_halving_delta);
    }
    d.certified = opt.certify;
    return d;
}

OperatorMatrix parametrix(const OperatorMatrix& mu, const DysonTruncation& terms, int N) {
    if (N < 0 || N > terms.N) throw ConfigError("N", "requested order exceeds the computed Dyson terms");
    PhaseFunction2D b = terms.terms[0];
    for (int k = 1; k <= N; ++k) b = b + terms.terms[k];
    return OperatorMatrix::from_matrix(mu.grid, mu.matrix() * quantize(b).matrix());
}

OperatorMatrix parametrix(const EvolutionProblem& prob, double t, int N, const DysonOptions& opt) {
    return parametrix(exact_propagator(unperturbed(prob), t), dyson_terms(prob, t, N, opt), N);
}

ResidualResult residual(const EvolutionProblem& prob, double t, int N, const DysonOptions& opt, double fd_step) {
    if (!(fd_step > 0)) throw ConfigError("fd_step", "must be positive");
    const DysonTruncation d = dyson_terms(prob, t, N, opt);
    const PhaseFunction2D pt = p_flowed(prob, t).p;
    ResidualResult res;
    res.r = cplx(0.0, 1.0) * weyl_product(pt, d.terms[N]);
    res.fd_step = fd_step;

    DysonOptions quiet = opt;
    quiet.certify = false;
    auto partial = [&](double s) {
        const DysonTruncation e = dyson_terms(prob, s, N, quiet);
        PhaseFunction2D b = e.terms[0];
        for (int k = 1; k <= N; ++k) b = b + e.terms[k];
        return b;
    };
    const double h = fd_step;
    PhaseFunction2D db;
    if (t >= 2 * h) {
        db = (1.0 / (12 * h)) * (partial(t - 2 * h) - 8.0 * partial(t - h) + 8.0 * partial(t + h) - partial(t + 2 * h));
    } else {
        db = (1.0 / (12 * h)) * (-25.0 * partial(t) + 48.0 * partial(t + h) - 36.0 * partial(t + 2 * h) +
                                 16.0 * partial(t + 3 * h) - 3.0 * partial(t + 4 * h));
    }
    const PhaseFunction2D fd = db + cplx(0.0, 1.0) * weyl_product(pt, partial(t));
    res.fd_defect = sheet_diff(fd, res.r);
    return res;
}

CorrectorResult dyson_corrector(const EvolutionProblem& prob, double t, CorrectorMethod method, int N,
                                const DysonOptions& opt, double tol) {
    check_dense(prob.grid, "dyson_corrector");
    const PhaseGrid& g = prob.grid;
    const int n = g.n;
    if (method == CorrectorMethod::series) {
        const DysonTruncation d = dyson_terms(prob, t, N, opt);
        PhaseFunction2D b = d.terms[0];
        for (int k = 1; k <= N; ++k) b = b + d.terms[k];
        return {quantize(b), 0, 0};
    }
    if (!(tol > 0)) throw ConfigError("tol", "must be positive");
    CorrectorResult res{OperatorMatrix::from_matrix(g, MatC::Identity(n, n)), 0, 0};
    if (t == 0.0) return res;

    // Dormand–Prince 5(4) with FSAL
    static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static const double a21 = 1.0 / 5;
    static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
    static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                        e6 = 22.0 / 525, e7 = -1.0 / 40;
    const cplx mi(0.0, -1.0);
    auto f = [&](double s, const MatC& C) -> MatC { return mi * (flowed_matrix(prob, s) * C); };

    MatC C = MatC::Identity(n, n);
    double s = 0.0, h = t / 16.0;
    MatC k1 = f(0.0, C);
    while ((t > 0 && s < t) || (t < 0 && s > t)) {
        if ((t > 0 && s + h > t) || (t < 0 && s + h < t)) h = t - s;
        const MatC k2 = f(s + c2 * h, C + h * (a21 * k1));
        const MatC k3 = f(s + c3 * h, C + h * (a31 * k1 + a32 * k2));
        const MatC k4 = f(s + c4 * h, C + h * (a41 * k1 + a42 * k2 + a43 * k3));
        const MatC k5 = f(s + c5 * h, C + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        const MatC k6 = f(s + h, C + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        const MatC y = C + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        const MatC k7 = f(s + h, y);
        const MatC e = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        const double err = e.cwiseAbs().maxCoeff() / (tol * (1.0 + y.cwiseAbs().maxCoeff()));
        if (!std::isfinite(err)) throw NumericalError("dyson_corrector: non-finite step error", err);
        if (err <= 1.0) {
            s += h;
            C = y;
            k1 = k7;
            ++res.steps;
        } else {
            ++res.rejected;
        }
        const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        h *= factor;
        if (std::abs(h) < 1e-12 * std::abs(t))
            throw NumericalError("dyson_corrector: step size underflow; loosen the tolerance", std::abs(h));
    }
    res.C = OperatorMatrix::from_matrix(g, C);
    return res;
}

MatC husimi_diagonal(const OperatorMatrix& A) {
    const PhaseGrid& g = A.grid;
    const int n = g.n;
    const WindowedTransformPlan plan = gaussian_plan(g);
    const MatC M = A.matrix();
    const VecC& w = plan.window.values;
    // φ_{jm}(x_k) = g(r dx) e^{i r dx ξ_m} with r = wrap(k - j)
    MatC E(n, n);
    for (int r = 0; r < n; ++r)
        for (int m = 0; m < n; ++m) E(r, m) = std::polar(1.0, (r - n / 2) * g.dx * g.xi(m));
    MatC H = MatC::Zero(n, n);
    for (int k = 0; k < n; ++k) {
        const MatC T = fbi(plan, {g, M.col(k), Lattice::position}).values;
        for (int j = 0; j < n; ++j) {
            const int r = ((k - j + n / 2) % n + n) % n;  // wrapped difference, shifted by n/2
            const cplx gr = w(r);
            if (std::abs(gr) < 1e-18) continue;
            H.row(j) += gr * E.row(r).cwiseProduct(T.row(j));
        }
    }
    return std::sqrt(2 * pi) * H;
}

RegularizerDefect regularizer_defect(const EvolutionProblem& prob, double t, int N, const DysonOptions& opt) {
    const PhaseGrid& g = prob.grid;
    const OperatorMatrix U = exact_propagator(prob, t);
    const OperatorMatrix mu = exact_propagator(unperturbed(prob), t);
    const OperatorMatrix K = parametrix(mu, dyson_terms(prob, t, N, opt), N);
    const MatC D = K.matrix() - U.matrix();
    RegularizerDefect r;
    r.op_defect = op_norm(D);
    const MatC Hd = husimi_diagonal(OperatorMatrix::from_matrix(g, mu.matrix().adjoint() * D));
    r.kernel_peak = Hd.cwiseAbs().maxCoeff();
    if (r.op_defect <= 1e-12) {
        r.kernel_slope = r.symbol_slope = -std::numeric_limits<double>::infinity();
        return r;
    }
    ShubinFitOptions fo;
    if (prob.trusted_radius > 0) {
        fo.r_max = prob.trusted_radius;
        fo.r_min = prob.trusted_radius / 8.0;
    }
    fo.noise_floor = 1e-14;
    const PhaseFunction2D mag{g, Hd.cwiseAbs().cast<cplx>(), MatC()};
    r.kernel_slope = shubin_fit(mag, -(N + 1) * prob.delta, fo).order_estimate;
    r.symbol_slope = shubin_fit(dequantize(OperatorMatrix::from_matrix(g, mu.matrix().adjoint() * D)),
                                -(N + 1) * prob.delta, fo)
                         .order_estimate;
    return r;
}

}  // namespace phaselab
