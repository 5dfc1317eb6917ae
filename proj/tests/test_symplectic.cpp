#include "doctest.h"
#include "phaselab/symplectic.hpp"

#include <random>

using namespace phaselab;

namespace {

MatR random_spd(std::mt19937_64& rng, int d) {
    std::normal_distribution<double> nd;
    MatR B(2 * d, 2 * d);
    for (Eigen::Index i = 0; i < B.size(); ++i) B.data()[i] = nd(rng);
    MatR Q = B * B.transpose() + 0.5 * MatR::Identity(2 * d, 2 * d);
    return 0.5 * (Q + Q.transpose());
}

}  // namespace

TEST_CASE("harmonic flow is a rotation") {
    const auto H = harmonic_oscillator();
    for (double t : {0.0, 0.3, 1.1, -2.0}) {
        const SymplecticMap chi = flow(H, t);
        Eigen::Matrix2d R;
        R << std::cos(2 * t), std::sin(2 * t), -std::sin(2 * t), std::cos(2 * t);
        CHECK((chi.M - R).cwiseAbs().maxCoeff() < 1e-14);
        CHECK(chi.certified_error < 1e-14);
    }
}

TEST_CASE("free flow is a shear") {
    const auto H = free_particle();
    const SymplecticMap chi = flow(H, 0.7);
    Eigen::Matrix2d S;
    S << 1, 1.4, 0, 1;
    CHECK((chi.M - S).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((flow(H, 0.0).M - MatR::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("flow group law") {
    std::mt19937_64 rng(3);
    std::vector<QuadraticHamiltonian> hs = {harmonic_oscillator(), free_particle(), anisotropic_oscillator(VecR::LinSpaced(2, 1.0, 2.5)),
                                            make_hamiltonian(random_spd(rng, 1)), make_hamiltonian(random_spd(rng, 2))};
    MatR hyp(2, 2);
    hyp << 1, 0, 0, -1;  // q = x² − ξ², hyperbolic flow
    hs.push_back(make_hamiltonian(hyp));
    for (const auto& H : hs)
        for (double t : {-5.0, -0.4, 1.3, 5.0})
            for (double s : {-1.7, 0.25, 5.0}) {
                // the hyperbolic flow grows like e^{2|t|}; keep its entries O(10)
                if (H.Q.rows() == 2 && H.Q(0, 0) * H.Q(1, 1) < 0 && std::max(std::abs(t), std::abs(t + s)) > 1.5) continue;
                INFO("Q=", H.Q, " t=", t, " s=", s);
                const MatR lhs = flow(H, t).M * flow(H, s).M;
                const MatR rhs = flow(H, t + s).M;
                CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, rhs.cwiseAbs().maxCoeff()));
            }
}

TEST_CASE("non-symplectic matrices are rejected") {
    MatR M(2, 2);
    M << 2, 0, 0, 1;
    CHECK_THROWS_AS(make_symplectic(M), NumericalError);
}

TEST_CASE("williamson diagonalization") {
    {
        const auto w = williamson(MatR::Identity(2, 2));
        CHECK(w.lambda(0) == doctest::Approx(1.0));
        CHECK((w.chi.M.cwiseAbs() - MatR::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
    }
    {
        MatR Q(2, 2);
        Q << 4, 0, 0, 1;
        const auto w = williamson(Q);
        CHECK(w.lambda(0) == doctest::Approx(2.0).epsilon(1e-12));
        MatR D(2, 2);
        D << 2, 0, 0, 2;
        CHECK((w.chi.M.transpose() * Q * w.chi.M - D).cwiseAbs().maxCoeff() < 1e-8);
    }
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.1, 5.0);
    for (int k = 0; k < 10; ++k) {
        const double a = u(rng), b = u(rng);
        MatR Q(2, 2);
        Q << a, 0, 0, b;
        CHECK(williamson(Q).lambda(0) == doctest::Approx(std::sqrt(a * b)).epsilon(1e-10));
    }
    for (int d : {1, 2}) {
        const MatR Q = random_spd(rng, d);
        const auto w = williamson(Q);
        VecR diag(2 * d);
        diag << w.lambda, w.lambda;
        CHECK((w.chi.M.transpose() * Q * w.chi.M - MatR(diag.asDiagonal())).cwiseAbs().maxCoeff() < 1e-8);
        // ±iλ_j are the eigenvalues of F = 𝒥Q
        Eigen::EigenSolver<MatR> es(symplectic_J(d) * Q);
        for (int j = 0; j < d; ++j) {
            double best = 1e9;
            for (int k = 0; k < 2 * d; ++k) best = std::min(best, std::abs(es.eigenvalues()(k) - cplx(0, w.lambda(j))));
            CHECK(best < 1e-8);
        }
    }
    MatR bad(2, 2);
    bad << 1, 0, 0, -1;
    CHECK_THROWS_AS(williamson(bad), DomainError);
}

TEST_CASE("lagrangian frames") {
    const LagrangianFrame h = horizontal_lagrangian(1);
    CHECK(!h.vertical);
    CHECK(h.A(0, 0) == doctest::Approx(0.0));

    const SymplecticMap rot = flow(harmonic_oscillator(), pi / 4);  // rotation by π/2
    const LagrangianFrame v = lagrangian_map(rot, h);
    CHECK(v.vertical);
    CHECK(v.has_graph_form);
    CHECK(v.Y_basis.cols() == 0);

    const LagrangianFrame s = lagrangian_map(flow(free_particle(), 0.8), h);
    CHECK(!s.vertical);
    CHECK(std::abs(s.A(0, 0)) < 1e-12);

    const LagrangianFrame id = lagrangian_map(flow(harmonic_oscillator(), 0.0), lagrangian_graph(MatR::Constant(1, 1, 1.0)));
    CHECK(id.A(0, 0) == doctest::Approx(1.0));

    // chirp line ξ = x rotated by π/4 clockwise becomes horizontal
    const LagrangianFrame r = lagrangian_map(flow(harmonic_oscillator(), pi / 8), lagrangian_graph(MatR::Constant(1, 1, 1.0)));
    CHECK(std::abs(r.A(0, 0)) < 1e-12);
    CHECK(isotropy_defect(r.basis) < 1e-10);

    // d = 2 image under a random symplectic map keeps σ|Λ = 0
    std::mt19937_64 rng(5);
    const MatR Q = random_spd(rng, 2);
    MatR A(2, 2);
    A << 1, 0.5, 0.5, -2;
    const LagrangianFrame img = lagrangian_map(flow(make_hamiltonian(Q), 0.37), lagrangian_graph(A));
    CHECK(isotropy_defect(img.basis) < 1e-10);
    CHECK(img.has_graph_form);

    MatR notlag(4, 2);
    notlag << 1, 0, 0, 0, 0, 1, 0, 0;  // spans x₁ and ξ₁: σ ≠ 0
    CHECK_THROWS_AS(lagrangian_from_basis(notlag), DomainError);
}

TEST_CASE("distance to planes") {
    const LagrangianFrame h = horizontal_lagrangian(1);
    CHECK(dist_to_plane(VecR::LinSpaced(2, 3, 4), h) == doctest::Approx(4.0));
    CHECK(dist_to_plane((VecR(2) << 2.0, 0.0).finished(), h) == doctest::Approx(0.0));
    const MatR B = twisted_graph_basis(flow(harmonic_oscillator(), 0.0));
    VecR z(4);
    z << 1.5, 1.5, -0.7, 0.7;  // (x, y, ξ, −η) with (x, ξ) = (y, η)
    CHECK(dist_to_plane(z, B) < 1e-14);
    const SymplecticMap chi = flow(harmonic_oscillator(), 0.4);
    const MatR P = twisted_graph_parametrization(chi);
    CHECK(dist_to_plane(VecR(P * Eigen::Vector2d(0.3, -1.2)), twisted_graph_basis(chi)) < 1e-14);
    CHECK_THROWS_AS(dist_to_plane(VecR::Zero(3), h), DimensionError);
}
