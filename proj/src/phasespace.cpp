#include "phaselab/phasespace.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <vector>

namespace phaselab {

namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

Eigen::FFT<double>& fft_engine() {
    // kissfft caches twiddles per size; one engine per thread keeps dft() reentrant.
    thread_local Eigen::FFT<double> engine(Eigen::FFT<double>::impl_type(), Eigen::FFT<double>::Unscaled);
    return engine;
}

// Centered 1-D transform of a contiguous line, in place.
void centered_line(cplx* data, int n, int sign, double scale, std::vector<cplx>& buf) {
    buf.resize(static_cast<std::size_t>(n));
    for (int j = 1; j < n; j += 2) data[j] = -data[j];
    dft(data, buf.data(), n, -sign);
    for (int m = 0; m < n; ++m) data[m] = ((m & 1) ? -scale : scale) * buf[static_cast<std::size_t>(m)];
}

}  // namespace

VecR PhaseGrid::positions() const {
    VecR v(n);
    for (int j = 0; j < n; ++j) v(j) = x(j);
    return v;
}

VecR PhaseGrid::frequencies() const {
    VecR v(n);
    for (int m = 0; m < n; ++m) v(m) = xi(m);
    return v;
}

PhaseGrid make_grid(int d, int n, double L) {
    if (d != 1 && d != 2) throw ConfigError("d", "dimension must be 1 or 2");
    if (!is_power_of_two(n)) throw ConfigError("n", "n must be a power of two");
    if (n < 16) throw ConfigError("n", "n must be at least 16");
    if (!(L > 0.0) || !std::isfinite(L)) throw ConfigError("L", "L must be positive and finite");
    PhaseGrid g;
    g.d = d;
    g.n = n;
    g.L = L;
    g.dx = 2.0 * L / n;
    g.dxi = pi / L;
    return g;
}

double SampledState::weight() const {
    const double w = lattice == Lattice::position ? grid.dx : grid.dxi;
    return grid.d == 1 ? w : w * w;
}

double SampledState::norm() const { return std::sqrt(weight() * values.squaredNorm()); }

cplx inner(const SampledState& f, const SampledState& g) {
    require_same_grid(f.grid, g.grid, "inner");
    if (f.lattice != g.lattice || f.values.size() != g.values.size())
        throw DimensionError("inner: states live on different lattices");
    // Eigen's dot conjugates its first argument.
    return f.weight() * g.values.dot(f.values);
}

SampledState sample_state(const PhaseGrid& grid, const std::function<cplx(double)>& f) {
    require_1d(grid, "sample_state");
    SampledState s{grid, VecC(grid.n), Lattice::position};
    for (int j = 0; j < grid.n; ++j) s.values(j) = f(grid.x(j));
    return s;
}

SampledState sample_state(const PhaseGrid& grid, const std::function<cplx(double, double)>& f) {
    if (grid.d != 2) throw DimensionError("sample_state: two-variable sampler needs d = 2");
    SampledState s{grid, VecC(grid.size()), Lattice::position};
    for (int j1 = 0; j1 < grid.n; ++j1)
        for (int j2 = 0; j2 < grid.n; ++j2) s.values(static_cast<Eigen::Index>(j1) * grid.n + j2) = f(grid.x(j1), grid.x(j2));
    return s;
}

PhaseFunction2D sample_phase(const PhaseGrid& grid, const SymbolFn& f, bool with_half) {
    require_1d(grid, "sample_phase");
    const int n = grid.n;
    PhaseFunction2D a{grid, MatC(n, n), MatC()};
    if (with_half) a.half.resize(n, n);
    for (int m = 0; m < n; ++m) {
        const double xi = grid.xi(m);
        for (int j = 0; j < n; ++j) {
            a.values(j, m) = f(grid.x(j), xi);
            if (with_half) a.half(j, m) = f(grid.x(j) + 0.5 * grid.dx, xi);
        }
    }
    return a;
}

PhaseFunction2D constant_phase(const PhaseGrid& grid, cplx c) {
    require_1d(grid, "constant_phase");
    return {grid, MatC::Constant(grid.n, grid.n, c), MatC::Constant(grid.n, grid.n, c)};
}

namespace {

PhaseFunction2D combine(const PhaseFunction2D& a, const PhaseFunction2D& b, cplx sa, cplx sb) {
    require_same_grid(a.grid, b.grid, "phase function arithmetic");
    PhaseFunction2D r{a.grid, sa * a.values + sb * b.values, MatC()};
    if (a.has_half() && b.has_half()) r.half = sa * a.half + sb * b.half;
    return r;
}

}  // namespace

PhaseFunction2D operator+(const PhaseFunction2D& a, const PhaseFunction2D& b) { return combine(a, b, 1.0, 1.0); }
PhaseFunction2D operator-(const PhaseFunction2D& a, const PhaseFunction2D& b) { return combine(a, b, 1.0, -1.0); }

PhaseFunction2D operator*(cplx s, const PhaseFunction2D& a) {
    PhaseFunction2D r{a.grid, s * a.values, MatC()};
    if (a.has_half()) r.half = s * a.half;
    return r;
}

SampledState fourier(const SampledState& u, int sign) {
    if (sign != 1 && sign != -1) throw ConfigError("sign", "sign must be +1 or -1");
    const Lattice from = sign == 1 ? Lattice::position : Lattice::frequency;
    if (u.lattice != from) throw DimensionError("fourier: input lives on the wrong lattice for this sign");
    if (u.values.size() != u.grid.size()) throw DimensionError("fourier: length does not match grid");
    const int n = u.grid.n;
    const double step = sign == 1 ? u.grid.dx : u.grid.dxi;
    const double scale = step / std::sqrt(2.0 * pi);
    SampledState out{u.grid, u.values, sign == 1 ? Lattice::frequency : Lattice::position};
    std::vector<cplx> buf;
    if (u.grid.d == 1) {
        centered_line(out.values.data(), n, sign, scale, buf);
        return out;
    }
    Eigen::Map<MatC> M(out.values.data(), n, n);  // column j1 holds the j2 axis
    for (int c = 0; c < n; ++c) centered_line(M.col(c).data(), n, sign, scale, buf);
    MatC T = M.transpose();
    for (int c = 0; c < n; ++c) centered_line(T.col(c).data(), n, sign, scale, buf);
    M = T.transpose();
    return out;
}

cplx quadrature(const VecC& values, const PhaseGrid& grid, Domain domain) {
    const Eigen::Index expect = domain == Domain::position ? grid.size() : grid.size() * grid.size();
    if (values.size() != expect)
        throw DimensionError("quadrature: expected " + std::to_string(expect) + " samples, got " +
                             std::to_string(values.size()));
    double w = domain == Domain::position ? grid.dx : grid.dx * grid.dxi;
    if (grid.d == 2) w *= w;
    return w * values.sum();
}

cplx quadrature(const MatC& values, const PhaseGrid& grid) {
    require_1d(grid, "quadrature");
    if (values.rows() != grid.n || values.cols() != grid.n) throw DimensionError("quadrature: phase samples must be n x n");
    return grid.dx * grid.dxi * values.sum();
}

void require_same_grid(const PhaseGrid& a, const PhaseGrid& b, const char* what) {
    if (a != b) throw DimensionError(std::string(what) + ": grid mismatch");
}

void require_1d(const PhaseGrid& g, const char* what) {
    if (g.d != 1) throw UnsupportedError(std::string(what) + ": only d = 1 is supported");
}

void dft(const cplx* in, cplx* out, int n, int sign) {
    auto& e = fft_engine();
    if (sign < 0)
        e.fwd(out, in, n);
    else
        e.inv(out, in, n);
}

void dft_columns(MatC& M, int sign) {
    std::vector<cplx> buf(static_cast<std::size_t>(M.rows()));
    for (Eigen::Index c = 0; c < M.cols(); ++c) {
        dft(M.col(c).data(), buf.data(), static_cast<int>(M.rows()), sign);
        std::copy(buf.begin(), buf.end(), M.col(c).data());
    }
}

}  // namespace phaselab
