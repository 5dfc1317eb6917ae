#include "doctest.h"
#include "fixtures.hpp"
#include "phaselab/weyl.hpp"

using namespace phaselab;

namespace {

double rel_max(const MatC& a, const MatC& b) { return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), 1e-300); }

double sheet_err(const PhaseFunction2D& a, const PhaseFunction2D& b) {
    double e = (a.values - b.values).cwiseAbs().maxCoeff();
    if (a.has_half() && b.has_half()) e = std::max(e, (a.half - b.half).cwiseAbs().maxCoeff());
    return e;
}

double sheet_max(const PhaseFunction2D& a) {
    double e = a.values.cwiseAbs().maxCoeff();
    if (a.has_half()) e = std::max(e, a.half.cwiseAbs().maxCoeff());
    return e;
}

}  // namespace

TEST_CASE("quantization of elementary symbols") {
    const PhaseGrid g = make_grid(1, 128, 10.0);
    const OperatorMatrix one = quantize(constant_phase(g, 1.0));
    CHECK(rel_max(one.K, identity_operator(g).K) < 1e-12);

    const OperatorMatrix X = quantize(g, [](double x, double) { return cplx(x); });
    MatC expect = MatC::Zero(g.n, g.n);
    for (int j = 0; j < g.n; ++j) expect(j, j) = g.x(j) / g.dx;
    CHECK((X.K - expect).cwiseAbs().maxCoeff() < 1e-10 * expect.cwiseAbs().maxCoeff());

    // ξ^w acts on lattice plane waves as multiplication by the frequency
    const OperatorMatrix D = quantize(g, [](double, double xi) { return cplx(xi); });
    for (int m : {40, 64, 70, 100}) {
        const double k = g.xi(m);
        const SampledState w = sample_state(g, [=](double x) { return std::polar(1.0, k * x); });
        const SampledState Dw = apply(D, w);
        CHECK((Dw.values - k * w.values).cwiseAbs().maxCoeff() < 1e-10 * std::abs(k) + 1e-12);
    }
}

TEST_CASE("real symbols give self-adjoint kernels") {
    std::mt19937_64 rng(11);
    const PhaseGrid g = make_grid(1, 128, 10.0);
    for (int t = 0; t < 5; ++t) {
        const SymbolFn f = fixtures::random_symbol(rng);
        const OperatorMatrix K = quantize(g, [&](double x, double xi) { return cplx(f(x, xi).real()); });
        CHECK((K.K - K.K.adjoint()).cwiseAbs().maxCoeff() <= 1e-10 * K.K.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("quantize and dequantize are inverse") {
    std::mt19937_64 rng(3);
    const PhaseGrid g = make_grid(1, 128, 10.0);
    for (int t = 0; t < 20; ++t) {
        const PhaseFunction2D a = sample_phase(g, fixtures::random_symbol(rng));
        const PhaseFunction2D b = dequantize(quantize(a));
        CHECK(sheet_err(a, b) <= 1e-9 * sheet_max(a));
    }
    const PhaseFunction2D one = dequantize(identity_operator(g));
    CHECK(sheet_err(one, constant_phase(g, 1.0)) < 1e-12);
    MatC diag = MatC::Zero(g.n, g.n);
    for (int j = 0; j < g.n; ++j) diag(j, j) = g.x(j) / g.dx;
    const PhaseFunction2D x = dequantize({g, diag});
    for (int j = 0; j < g.n; j += 7)
        for (int m = 0; m < g.n; m += 5) {
            CHECK(std::abs(x.values(j, m) - g.x(j)) < 1e-10);
        }
    // The half sheet of a diagonal kernel is interpolated from the whole sheet; x is not periodic, so only
    // the centre of the box is compared there.
    CHECK(std::abs(x.half(g.n / 2, 3) - g.dx / 2) < 0.05);
}

TEST_CASE("Weyl product") {
    std::mt19937_64 rng(5);
    const PhaseGrid g = make_grid(1, 128, 10.0);
    const PhaseFunction2D one = constant_phase(g, 1.0);
    for (int t = 0; t < 3; ++t) {
        const PhaseFunction2D a = sample_phase(g, fixtures::random_symbol(rng));
        const PhaseFunction2D b = sample_phase(g, fixtures::random_symbol(rng));
        const PhaseFunction2D c = sample_phase(g, fixtures::random_symbol(rng));
        CHECK(sheet_err(weyl_product(one, a), a) <= 1e-9 * sheet_max(a));
        CHECK(sheet_err(weyl_product(a, one), a) <= 1e-9 * sheet_max(a));
        const PhaseFunction2D l = weyl_product(weyl_product(a, b), c);
        const PhaseFunction2D r = weyl_product(a, weyl_product(b, c));
        CHECK(sheet_err(l, r) <= 1e-8 * sheet_max(l));
    }
    // real a: a # a quantizes to a self-adjoint operator, so its symbol is real
    const SymbolFn f = fixtures::random_symbol(rng);
    const PhaseFunction2D a = sample_phase(g, [&](double x, double xi) { return cplx(f(x, xi).real()); });
    const PhaseFunction2D aa = weyl_product(a, a);
    CHECK(std::abs(aa.values(g.n / 2, g.n / 2).imag()) < 1e-9);
    CHECK(aa.values.imag().cwiseAbs().maxCoeff() < 1e-9 * sheet_max(aa));
}

TEST_CASE("x # xi agrees weakly with x xi + i/2") {
    // The grid operators x and ξ cannot satisfy the relation pointwise (their commutator is traceless),
    // so the identity is checked on wave packets far from the box edge and the frequency cut-off.
    const PhaseGrid g = make_grid(1, 512, 24.0);
    const OperatorMatrix X = quantize(g, [](double x, double) { return cplx(x); });
    const OperatorMatrix D = quantize(g, [](double, double xi) { return cplx(xi); });
    const OperatorMatrix XD = quantize(weyl_product(dequantize(X), dequantize(D)));
    const OperatorMatrix ref = quantize(g, [](double x, double xi) { return cplx(x * xi, 0.5); });
    const double centres[][2] = {{0, 0}, {1.5, -2}, {-2, 1}, {3, 3}};
    for (auto& p : centres)
        for (auto& q : centres) {
            const SampledState f = fixtures::packet(g, p[0], p[1]);
            const SampledState h = fixtures::packet(g, q[0], q[1]);
            CHECK(std::abs(inner(apply(XD, f), h) - inner(apply(ref, f), h)) < 1e-9);
        }
}

TEST_CASE("Wigner distribution") {
    const PhaseGrid g = make_grid(1, 256, 12.0);
    const SampledState u = sample_state(g, fixtures::psi0);
    const PhaseFunction2D W = wigner(u, u);
    const double c = std::sqrt(2.0 / pi);
    double err = 0;
    for (int j = 0; j < g.n; ++j)
        for (int m = 0; m < g.n; ++m) {
            const double x = g.x(j), xh = x + g.dx / 2, xi = g.xi(m);
            err = std::max(err, std::abs(W.values(j, m) - c * std::exp(-x * x - xi * xi)));
            err = std::max(err, std::abs(W.half(j, m) - c * std::exp(-xh * xh - xi * xi)));
        }
    CHECK(err < 1e-8);

    std::mt19937_64 rng(9);
    const SampledState f = fixtures::random_state(g, rng);
    const PhaseFunction2D Wf = wigner(f, f);
    CHECK(Wf.values.imag().cwiseAbs().maxCoeff() < 1e-12 * Wf.values.cwiseAbs().maxCoeff());
    CHECK(Wf.half.imag().cwiseAbs().maxCoeff() < 1e-12 * Wf.half.cwiseAbs().maxCoeff());
    // marginal: ∫ W(f,f) dξ = (2π)^{1/2} |f(x)|²
    double merr = 0;
    for (int j = 0; j < g.n; ++j) {
        const cplx marg = Wf.values.row(j).sum() * g.dxi;
        merr = std::max(merr, std::abs(marg - std::sqrt(2 * pi) * std::norm(f.values(j))));
    }
    CHECK(merr < 1e-10 * f.values.cwiseAbs2().maxCoeff());
    // total mass (2π)^{-1/2} ∫∫ W(f,f) = ‖f‖²
    const cplx mass = phase_pairing(Wf, constant_phase(g, 1.0)) / std::sqrt(2 * pi);
    CHECK(std::abs(mass - std::norm(f.norm())) < 1e-10 * std::norm(f.norm()));
}

TEST_CASE("Wigner pairing identity") {
    std::mt19937_64 rng(21);
    const PhaseGrid g = make_grid(1, 128, 10.0);
    for (int t = 0; t < 5; ++t) {
        const PhaseFunction2D a = sample_phase(g, fixtures::random_symbol(rng));
        const SampledState f = fixtures::random_state(g, rng, 3);
        const SampledState h = fixtures::random_state(g, rng, 3);
        const cplx lhs = inner(apply(quantize(a), f), h);
        const cplx rhs = phase_pairing(a, wigner(h, f)) / std::sqrt(2 * pi);
        CHECK(std::abs(lhs - rhs) < 1e-8 * (1 + std::abs(lhs)));
    }
}

TEST_CASE("Shubin order fits") {
    const PhaseGrid g = make_grid(1, 512, 24.0);
    const PhaseFunction2D v = sample_phase(g, [](double x, double xi) { return cplx(1 / bracket(x, xi)); });
    const ShubinWitness w = shubin_fit(v, -1.0);
    CHECK(std::abs(w.order_estimate + 1) <= 0.25);
    CHECK(w.consistent);
    CHECK(w.derivatives.size() == 6);

    const ShubinWitness c = shubin_fit(constant_phase(g, 1.0), 0.0);
    CHECK(std::abs(c.order_estimate) < 1e-6);
    for (std::size_t k = 1; k < c.derivatives.size(); ++k) CHECK(c.derivatives[k].below_floor);

    const PhaseFunction2D z2 = sample_phase(g, [](double x, double xi) { return cplx(1 + x * x + xi * xi); });
    const ShubinWitness q = shubin_fit(z2, 2.0);
    CHECK(std::abs(q.order_estimate - 2) <= 0.25);

    ShubinFitOptions narrow;
    narrow.r_min = 4.0;
    narrow.r_max = 6.0;
    CHECK_THROWS_AS(shubin_fit(v, -1.0, narrow), FitError);
}
