#include "phaselab/wavefront.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <thread>

namespace phaselab {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

double wrap_angle(double a) { return std::abs(std::arg(std::polar(1.0, a))); }

// Bilinear interpolation of a lattice modulus at (px, pξ); indices are clamped to the box.
double interp_abs(const MatR& A, const PhaseGrid& g, double px, double pxi) {
    const double fx = (px + g.L) / g.dx, fm = pxi / g.dxi + g.n / 2;
    const int j0 = static_cast<int>(std::floor(fx)), m0 = static_cast<int>(std::floor(fm));
    const double a = fx - j0, b = fm - m0;
    auto at = [&](int j, int m) { return A(std::clamp(j, 0, g.n - 1), std::clamp(m, 0, g.n - 1)); };
    return (1 - a) * (1 - b) * at(j0, m0) + a * (1 - b) * at(j0 + 1, m0) + (1 - a) * b * at(j0, m0 + 1) +
           a * b * at(j0 + 1, m0 + 1);
}

std::vector<double> linspace(double a, double b, int k) {
    std::vector<double> v(k + 1);
    for (int i = 0; i <= k; ++i) v[i] = a + (b - a) * i / k;
    return v;
}

int bin_of(double v, const std::vector<double>& edges) {
    if (v < edges.front() || v >= edges.back()) return -1;
    const int k = static_cast<int>(edges.size()) - 1;
    return std::min(k - 1, static_cast<int>((v - edges.front()) / (edges.back() - edges.front()) * k));
}

void init_profile(DecayProfile& P, const DecayOptions& opt, int k_max) {
    if (opt.bins < 2 || !(opt.dist_max > 0)) throw ConfigError("bins", "need at least two bins on a positive range");
    P.edges = linspace(0.0, opt.dist_max, opt.bins);
    P.centers.resize(opt.bins);
    for (int b = 0; b < opt.bins; ++b) P.centers[b] = 0.5 * (P.edges[b] + P.edges[b + 1]);
    P.off_max.assign(opt.bins, 0.0);
    P.off_count.assign(opt.bins, 0);
    P.along_max.assign(k_max + 1, std::vector<double>(opt.bins, 0.0));
}

void finish_profile(DecayProfile& P, const DecayOptions& opt, int N_max) {
    P.nonempty.resize(P.off_count.size());
    for (std::size_t b = 0; b < P.off_count.size(); ++b) P.nonempty[b] = P.off_count[b] > 0;
    const double floor = opt.noise_floor * P.peak;
    P.off_slope = fit_decay(P.centers, P.off_max, opt.off_fit_lo, opt.off_fit_hi, floor);
    if (P.off_slope > -N_max) P.notes.push_back("off-plane slope " + num(P.off_slope) + " above -N = " + std::to_string(-N_max));
    for (int b = static_cast<int>(P.centers.size()) - 1; b >= 0; --b)
        if (P.centers[b] <= opt.off_fit_hi) {
            if (!P.nonempty[b]) P.notes.push_back("box truncates the far field: empty bins inside the fit range");
            break;
        }
    P.along_slope.clear();
    P.gain.clear();
    for (std::size_t k = 0; k < P.along_max.size(); ++k) {
        const double s = fit_decay(P.centers, P.along_max[k], opt.along_fit_lo, opt.along_fit_hi, floor);
        if (s == -inf) P.notes.push_back("k=" + std::to_string(k) + ": below noise floor");
        P.along_slope.push_back(s);
        P.gain.push_back(k == 0 ? 0.0 : P.along_slope[0] - s);
    }
}

// 4th-order central difference weights at offsets -2..2.
constexpr double d4[5] = {1.0 / 12, -8.0 / 12, 0.0, 8.0 / 12, -1.0 / 12};

}  // namespace

int ConeEstimate::singular_count() const { return static_cast<int>(std::count(singular.begin(), singular.end(), true)); }

double ray_radius(const PhaseGrid& grid) { return std::min(grid.L, grid.xi_max()); }

ConeEstimate estimate_wf(const WindowedTransformPlan& plan, const SampledState& u, const WavefrontOptions& opt) {
    require_1d(u.grid, "estimate_wf");
    require_same_grid(plan.grid, u.grid, "estimate_wf");
    if (opt.shells < 3) throw ConfigError("shells", "at least 3 dyadic shells are needed, got " + std::to_string(opt.shells));
    if (opt.directions < 8) throw ConfigError("directions", "angular mesh too coarse");
    if (opt.radii_per_shell < 1) throw ConfigError("radii_per_shell", "must be positive");
    if (opt.smoothing < 1 || opt.smoothing % 2 == 0) throw ConfigError("smoothing", "window must be a positive odd cell count");
    const PhaseGrid& g = u.grid;
    const double RB = ray_radius(g);
    const double r_min = opt.r_min > 0 ? opt.r_min : RB / 10;
    const double r_max = r_min * std::ldexp(1.0, opt.shells);
    if (r_max > RB * (1 + 1e-12))
        throw ConfigError("radii", "outer shell radius " + num(r_max) + " exceeds the box radius " + num(RB) +
                                       " (lower r_min or shells, or increase L and n)");

    const MatR A = fbi(plan, u).values.cwiseAbs();
    const int K = opt.directions, S = opt.shells, per = opt.radii_per_shell, R = S * per;
    ConeEstimate c;
    c.N_threshold = opt.N_threshold;
    for (int s = 0; s <= S; ++s) c.shell_edges.push_back(r_min * std::ldexp(1.0, s));
    VecR radii(R);
    for (int s = 0; s < S; ++s)
        for (int i = 0; i < per; ++i)
            radii(s * per + i) = c.shell_edges[s] * std::pow(2.0, static_cast<double>(i) / per);

    c.theta.resize(K);
    MatR logV(K, R);
    for (int k = 0; k < K; ++k) {
        const double th = 2 * pi * k / K;
        c.theta(k) = th;
        for (int i = 0; i < R; ++i)
            logV(k, i) = std::log(interp_abs(A, g, radii(i) * std::cos(th), radii(i) * std::sin(th)) + 1e-300);
    }
    // angular smoothing: mean of log moduli over the window
    MatR smooth = MatR::Zero(K, R);
    const int h = opt.smoothing / 2;
    for (int k = 0; k < K; ++k)
        for (int o = -h; o <= h; ++o) smooth.row(k) += logV.row(((k + o) % K + K) % K);
    smooth /= opt.smoothing;

    VecR X(S);
    for (int s = 0; s < S; ++s) {
        double acc = 0;
        for (int i = 0; i < per; ++i) acc += std::log(bracket(radii(s * per + i), 0.0));
        X(s) = acc / per;
    }
    const double xm = X.mean(), sxx = (X.array() - xm).square().sum();
    c.slope.resize(K);
    c.residual.resize(K);
    c.singular.resize(K);
    c.inconclusive.resize(K);
    for (int k = 0; k < K; ++k) {
        VecR Y(S);
        for (int s = 0; s < S; ++s) Y(s) = smooth.row(k).segment(s * per, per).mean();
        const double ym = Y.mean();
        const double slope = ((X.array() - xm) * (Y.array() - ym)).sum() / sxx;
        const VecR res = Y.array() - ym - slope * (X.array() - xm);
        c.slope(k) = slope;
        c.residual(k) = std::sqrt(res.squaredNorm() / S);
        c.singular[k] = slope > -opt.N_threshold;
        c.inconclusive[k] = c.residual(k) > opt.residual_limit;
    }
    return c;
}

double cone_excess_deg(const ConeEstimate& in, const ConeEstimate& out, const SymplecticMap& chi) {
    std::vector<double> mapped;
    for (Eigen::Index k = 0; k < in.theta.size(); ++k)
        if (in.singular[k]) {
            const Eigen::Vector2d w = chi.apply(std::cos(in.theta(k)), std::sin(in.theta(k)));
            mapped.push_back(std::atan2(w(1), w(0)));
        }
    double worst = 0.0;
    bool any_out = false;
    for (Eigen::Index k = 0; k < out.theta.size(); ++k) {
        if (!out.singular[k]) continue;
        any_out = true;
        double best = inf;
        for (double a : mapped) best = std::min(best, wrap_angle(out.theta(k) - a));
        worst = std::max(worst, best);
    }
    if (!any_out) return 0.0;
    return worst * 180.0 / pi;
}

PropagationReport check_propagation(const EvolutionProblem& prob, const WindowedTransformPlan& plan,
                                    const SampledState& u0, double t, const WavefrontOptions& opt,
                                    double tolerance_deg) {
    if (!(tolerance_deg >= 0)) throw ConfigError("tau_ang", "angular tolerance must be non-negative");
    PropagationReport r;
    r.chi = flow(prob.H, t);
    r.input = estimate_wf(plan, u0, opt);
    const SampledState ut = evolve_state(prob, t, u0);
    r.output = estimate_wf(plan, ut, opt);
    const PhaseGrid& g = prob.grid;
    double edge = 0.0;
    for (int j = 0; j < g.n; ++j)
        if (std::abs(g.x(j)) >= 0.95 * g.L) edge = std::max(edge, std::abs(ut.values(j)));
    r.edge_ratio = edge / ut.values.cwiseAbs().maxCoeff();
    if (r.edge_ratio > 1e-6)
        r.notes.push_back("evolved state reaches the box edge (ratio " + num(r.edge_ratio) + "); increase L");
    r.excess_deg = cone_excess_deg(r.input, r.output, r.chi);
    r.tolerance_deg = tolerance_deg;
    r.contained = r.excess_deg <= tolerance_deg;
    return r;
}

SampledState band_limited_delta(const PhaseGrid& grid, double frac, double width) {
    require_1d(grid, "band_limited_delta");
    const double xc = frac * ray_radius(grid);
    SampledState u{grid, VecC::Zero(grid.n), Lattice::position};
    for (int m = 0; m < grid.n; ++m) {
        const double xi = grid.xi(m);
        const double c = 0.5 * std::erfc((std::abs(xi) - xc) / width);
        for (int j = 0; j < grid.n; ++j) u.values(j) += c * std::polar(1.0, grid.x(j) * xi);
    }
    u.values *= grid.dxi / (2 * pi);
    return u;
}

SampledState chirp_state(const PhaseGrid& grid, double a, double frac, double width) {
    const double R = frac * ray_radius(grid);
    return sample_state(grid, [=](double x) {
        return std::polar(0.5 * std::erfc((std::abs(x) - R) / width), 0.5 * a * x * x);
    });
}

SampledState gaussian_state(const PhaseGrid& grid) {
    return sample_state(grid, [](double x) { return cplx(std::pow(pi, -0.25) * std::exp(-0.5 * x * x)); });
}

double fit_decay(const std::vector<double>& centers, const std::vector<double>& values, double lo, double hi,
                 double floor) {
    std::vector<double> X, Y;
    bool any = false;
    for (std::size_t b = 0; b < centers.size(); ++b) {
        if (values[b] > floor) any = true;
        if (centers[b] < lo || centers[b] > hi || !(values[b] > floor)) continue;
        X.push_back(std::log1p(centers[b]));
        Y.push_back(std::log(values[b]));
    }
    if (!any) return -inf;
    if (X.size() < 2) throw FitError("fit_decay: fewer than two bins above the noise floor in [" + num(lo) + ", " + num(hi) + "]");
    const Eigen::Map<const VecR> x(X.data(), X.size()), y(Y.data(), Y.size());
    const double xm = x.mean(), ym = y.mean();
    return ((x.array() - xm) * (y.array() - ym)).sum() / (x.array() - xm).square().sum();
}

DecayProfile kernel_estimates(const EvolutionProblem& prob, double t, const WindowedTransformPlan& plan, int k_max,
                              int N_max, const DecayOptions& opt) {
    const PhaseGrid& g = prob.grid;
    require_1d(g, "kernel_estimates");
    require_same_grid(plan.grid, g, "kernel_estimates");
    if (g.n > 128)
        throw GuardError("n", "kernel transform is n^4-sized, n = " + std::to_string(g.n), "use n <= 128");
    if (k_max < 0 || k_max > 2)
        throw GuardError("k_max", "tangential derivatives up to order 2 are supported", "use k_max in {0, 1, 2}");
    if (N_max < 0) throw ConfigError("N_max", "must be non-negative");

    const SymplecticMap chi = flow(prob.H, t);
    const SymplecticMap chim = make_symplectic(-chi.M);
    const MatR Bp = twisted_graph_parametrization(chi);
    const MatR Qp = twisted_graph_basis(chi), Qm = twisted_graph_basis(chim);
    const MatR Pinv = (Bp.transpose() * Bp).inverse() * Bp.transpose();  // plane coordinates (y, η)
    const KernelTransform kt(plan, exact_propagator(prob, t), chi);

    const int n = g.n;
    const std::size_t n3 = std::size_t(n) * n * n;
    DecayProfile P;
    init_profile(P, opt, k_max);
    auto idx = [n](int m, int b, int q) { return (std::size_t(m) * n + b) * n + q; };

    // Derivative slabs per stage s: one slab per word (j_1 .. j_s) of tangent directions.
    using Words = std::vector<std::vector<cplx>>;
    std::vector<std::map<int, Words>> ring(k_max + 1);
    const double steps[4] = {g.dx, g.dx, g.dxi, g.dxi};

    const unsigned hw = std::max(1u, std::min(16u, std::thread::hardware_concurrency()));
    struct Acc {
        std::vector<double> off;
        std::vector<long long> cnt;
        std::vector<std::vector<double>> along;
        double peak = 0;
    };
    std::vector<Acc> acc(hw);
    for (auto& a : acc) {
        a.off.assign(opt.bins, 0.0);
        a.cnt.assign(opt.bins, 0);
        a.along.assign(k_max + 1, std::vector<double>(opt.bins, 0.0));
    }

    auto parallel = [&](auto&& body) {
        std::vector<std::thread> th;
        for (unsigned w = 0; w < hw; ++w)
            th.emplace_back([&, w] {
                for (int m = static_cast<int>(w); m < n; m += static_cast<int>(hw)) body(w, m);
            });
        for (auto& x : th) x.join();
    };

    // Statistics of stage s at slab index c.
    auto record = [&](int s, int c, const Words& W) {
        const int lo = 2 * s, hi = n - 1 - 2 * s;
        if (c < lo || c > hi) return;
        parallel([&](unsigned w, int m) {
            Acc& A = acc[w];
            if (m < lo || m > hi) return;
            Eigen::Vector4d z;
            z(0) = g.x(c);
            z(2) = g.xi(m);
            for (int b = lo; b <= hi; ++b) {
                z(1) = g.x(b);
                for (int q = lo; q <= hi; ++q) {
                    z(3) = g.xi(q);
                    const double par = (Pinv * z).norm();
                    if (par > opt.param_radius) continue;
                    const double dist = (z - Qp * (Qp.transpose() * z)).norm();
                    const std::size_t i = idx(m, b, q);
                    double v = 0;
                    for (const auto& slab : W) v = std::max(v, std::abs(slab[i]));
                    if (s == 0) {
                        A.peak = std::max(A.peak, v);
                        const int bi = bin_of(dist, P.edges);
                        if (bi >= 0) {
                            A.off[bi] = std::max(A.off[bi], v);
                            ++A.cnt[bi];
                        }
                    }
                    if (dist > opt.near) continue;
                    const double distm = (z - Qm * (Qm.transpose() * z)).norm();
                    const int bj = bin_of(distm, P.edges);
                    if (bj >= 0) A.along[s][bj] = std::max(A.along[s][bj], v);
                }
            }
        });
    };

    // Stage s slab at c from stage s-1 slabs c-2..c+2.
    auto derive = [&](int s, int c) {
        const Words& mid = ring[s - 1].at(c);
        Words out;
        for (std::size_t wd = 0; wd < mid.size(); ++wd)
            for (int j = 0; j < 2; ++j) {
                std::vector<cplx> D(n3, cplx(0));
                const std::vector<cplx>& T = mid[wd];
                const std::vector<cplx>* nb[5];
                for (int o = -2; o <= 2; ++o) nb[o + 2] = &ring[s - 1].at(c + o)[wd];
                const double a0 = Qp(0, j) / steps[0], a1 = Qp(1, j) / steps[1], a2 = Qp(2, j) / steps[2],
                             a3 = Qp(3, j) / steps[3];
                parallel([&](unsigned, int m) {
                    if (m < 2 || m > n - 3) return;
                    for (int b = 2; b < n - 2; ++b)
                        for (int q = 2; q < n - 2; ++q) {
                            cplx dz1 = 0, dz2 = 0, de1 = 0, de2 = 0;
                            for (int o = 0; o < 5; ++o) {
                                if (o == 2) continue;
                                dz1 += d4[o] * (*nb[o])[idx(m, b, q)];
                                dz2 += d4[o] * T[idx(m, b + o - 2, q)];
                                de1 += d4[o] * T[idx(m + o - 2, b, q)];
                                de2 += d4[o] * T[idx(m, b, q + o - 2)];
                            }
                            D[idx(m, b, q)] = a0 * dz1 + a1 * dz2 + a2 * de1 + a3 * de2;
                        }
                });
                out.push_back(std::move(D));
            }
        return out;
    };

    for (int a = 0; a < n; ++a) {
        ring[0][a] = Words{kt.slab(a)};
        record(0, a, ring[0][a]);
        for (int s = 1; s <= k_max; ++s) {
            const int c = a - 2 * s;
            if (c < 2 * s || c > n - 1 - 2 * s) continue;
            Words W = derive(s, c);
            record(s, c, W);
            if (s < k_max) ring[s][c] = std::move(W);
        }
        for (int s = 0; s <= k_max; ++s)
            for (auto it = ring[s].begin(); it != ring[s].end();)
                it = it->first < a - 2 * s - 4 ? ring[s].erase(it) : std::next(it);
    }

    for (const Acc& A : acc) {
        P.peak = std::max(P.peak, A.peak);
        for (int b = 0; b < opt.bins; ++b) {
            P.off_max[b] = std::max(P.off_max[b], A.off[b]);
            P.off_count[b] += A.cnt[b];
            for (int k = 0; k <= k_max; ++k) P.along_max[k][b] = std::max(P.along_max[k][b], A.along[k][b]);
        }
    }
    finish_profile(P, opt, N_max);
    return P;
}

SampledState lagrangian_state(const SampledState& a, const LagrangianFrame& lambda) {
    require_1d(a.grid, "lagrangian_state");
    if (lambda.d() != 1) throw UnsupportedError("lagrangian_state: only d = 1 planes are supported");
    if (!lambda.has_graph_form || lambda.vertical || lambda.Y_basis.cols() != 1)
        throw UnsupportedError("lagrangian_state: plane is not a graph {(x, Ax)}");
    const double A = lambda.A(0, 0);
    SampledState u = a;
    for (int j = 0; j < a.grid.n; ++j) u.values(j) *= std::polar(1.0, 0.5 * A * a.grid.x(j) * a.grid.x(j));
    return u;
}

DecayProfile lagrangian_solution_estimates(const EvolutionProblem& prob, const WindowedTransformPlan& plan,
                                           const SampledState& a, const LagrangianFrame& lambda, double t, int k_max,
                                           int N_max, const DecayOptions& opt) {
    const PhaseGrid& g = prob.grid;
    require_same_grid(g, a.grid, "lagrangian_solution_estimates");
    if (k_max < 0 || k_max > 4) throw GuardError("k_max", "too many tangential derivatives", "use k_max <= 4");
    if (N_max < 0) throw ConfigError("N_max", "must be non-negative");
    const SymplecticMap chi = flow(prob.H, t);
    const LagrangianFrame lt = lagrangian_map(chi, lambda);
    if (lt.vertical) throw UnsupportedError("lagrangian_solution_estimates: Λ_t is vertical, no graph form");
    const SampledState ut = evolve_state(prob, t, lagrangian_state(a, lambda));
    const PhaseFunction2D T = fbi_lagrangian(plan, ut, lt);

    const Eigen::Vector2d e = lt.basis.col(0).normalized();
    const int n = g.n;
    DecayProfile P;
    init_profile(P, opt, k_max);

    std::vector<MatC> D{T.values};
    for (int k = 1; k <= k_max; ++k) {
        const MatC& F = D.back();
        MatC G = MatC::Zero(n, n);
        for (int j = 2; j < n - 2; ++j)
            for (int m = 2; m < n - 2; ++m) {
                cplx dx = 0, dxi = 0;
                for (int o = 0; o < 5; ++o) {
                    dx += d4[o] * F(j + o - 2, m);
                    dxi += d4[o] * F(j, m + o - 2);
                }
                G(j, m) = e(0) * dx / g.dx + e(1) * dxi / g.dxi;
            }
        D.push_back(std::move(G));
    }

    Eigen::Matrix2d M2 = Eigen::Matrix2d::Zero();
    double mass = 0;
    for (int j = 0; j < n; ++j)
        for (int m = 0; m < n; ++m) {
            const Eigen::Vector2d z(g.x(j), g.xi(m));
            const double v = std::abs(T.values(j, m));
            P.peak = std::max(P.peak, v);
            M2 += v * v * z * z.transpose();
            mass += v * v;
            const double s = e.dot(z);
            const double dist = (z - s * e).norm();
            if (std::abs(s) > opt.param_radius) continue;
            const int bi = bin_of(dist, P.edges);
            if (bi >= 0) {
                P.off_max[bi] = std::max(P.off_max[bi], v);
                ++P.off_count[bi];
            }
            if (dist > opt.near) continue;
            const int bj = bin_of(std::abs(s), P.edges);
            if (bj < 0) continue;
            for (int k = 0; k <= k_max; ++k) {
                if (j < 2 * k || j > n - 1 - 2 * k || m < 2 * k || m > n - 1 - 2 * k) continue;
                P.along_max[k][bj] = std::max(P.along_max[k][bj], std::abs(D[k](j, m)));
            }
        }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(M2 / mass);
    const Eigen::Vector2d ax = es.eigenvectors().col(1);
    auto line_angle = [](const Eigen::Vector2d& v) {
        double a = std::atan2(v(1), v(0)) * 180.0 / pi;
        a = std::fmod(a + 180.0, 180.0);
        return a;
    };
    P.axis_deg = line_angle(ax);
    P.expected_axis_deg = line_angle(e);
    finish_profile(P, opt, N_max);
    return P;
}

void write_csv(std::ostream& os, const ConeEstimate& c) {
    os << "theta,slope,residual,singular,inconclusive\n";
    char buf[160];
    for (Eigen::Index k = 0; k < c.theta.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%d,%d\n", c.theta(k), c.slope(k), c.residual(k),
                      int(c.singular[k]), int(c.inconclusive[k]));
        os << buf;
    }
}

void write_csv(std::ostream& os, const DecayProfile& p) {
    os << "bin_center,count,off_max";
    for (std::size_t k = 0; k < p.along_max.size(); ++k) os << ",along_max_k" << k;
    os << '\n';
    char buf[64];
    for (std::size_t b = 0; b < p.centers.size(); ++b) {
        std::snprintf(buf, sizeof buf, "%.17g,%lld,%.17g", p.centers[b], p.off_count[b], p.off_max[b]);
        os << buf;
        for (const auto& col : p.along_max) {
            std::snprintf(buf, sizeof buf, ",%.17g", col[b]);
            os << buf;
        }
        os << '\n';
    }
}

}  // namespace phaselab
