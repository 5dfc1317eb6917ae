#include "phaselab/symplectic.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

namespace phaselab {

namespace {

MatR orthonormalize(const MatR& B) {
    Eigen::HouseholderQR<MatR> qr(B);
    return qr.householderQ() * MatR::Identity(B.rows(), B.cols());
}

// e^{A} through the eigenbasis when A is well diagonalizable, else Padé-13 scaling and squaring.
MatR expm_real(const MatR& A) {
    Eigen::EigenSolver<MatR> es(A);
    if (es.info() == Eigen::Success) {
        const MatC V = es.eigenvectors();
        Eigen::PartialPivLU<MatC> lu(V);
        const double cond = V.norm() * lu.inverse().norm();
        if (std::isfinite(cond) && cond < 1e8) {
            const MatC Vinv = lu.inverse();
            const MatC recon = V * es.eigenvalues().asDiagonal() * Vinv;
            const double defect = (recon.real() - A).cwiseAbs().maxCoeff();
            if (defect < 1e-8 * std::max(1.0, A.cwiseAbs().maxCoeff())) {
                const VecC ev = es.eigenvalues().array().exp();
                return (V * ev.asDiagonal() * Vinv).real();
            }
        }
    }
    return A.exp();
}

}  // namespace

MatR symplectic_J(int d) {
    MatR J = MatR::Zero(2 * d, 2 * d);
    J.topRightCorner(d, d).setIdentity();
    J.bottomLeftCorner(d, d) = -MatR::Identity(d, d);
    return J;
}

QuadraticHamiltonian make_hamiltonian(const MatR& Q) {
    if (Q.rows() != Q.cols() || Q.rows() % 2 != 0 || Q.rows() == 0)
        throw DimensionError("hamiltonian: Q must be square of even size 2d");
    if (!Q.allFinite()) throw ConfigError("Q", "entries must be finite");
    if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 0.0) throw ConfigError("Q", "matrix must be symmetric");
    const int d = static_cast<int>(Q.rows() / 2);
    return {Q, symplectic_J(d) * Q};
}

QuadraticHamiltonian harmonic_oscillator(int d) { return make_hamiltonian(MatR::Identity(2 * d, 2 * d)); }

QuadraticHamiltonian free_particle(int d) {
    MatR Q = MatR::Zero(2 * d, 2 * d);
    Q.bottomRightCorner(d, d).setIdentity();
    return make_hamiltonian(Q);
}

QuadraticHamiltonian anisotropic_oscillator(const VecR& lambda) {
    const Eigen::Index d = lambda.size();
    if (d == 0) throw ConfigError("lambda", "need at least one frequency");
    VecR diag(2 * d);
    diag << lambda, lambda;
    return make_hamiltonian(diag.asDiagonal().toDenseMatrix());
}

SymplecticMap make_symplectic(const MatR& M) {
    if (M.rows() != M.cols() || M.rows() % 2 != 0) throw DimensionError("symplectic map must be 2d x 2d");
    const double err = symplectic_defect(M);
    if (!(err <= symplectic_tolerance)) throw NumericalError("matrix is not symplectic", err);
    return {M, err};
}

SymplecticMap flow(const QuadraticHamiltonian& H, double t) {
    if (!std::isfinite(t)) throw ConfigError("t", "time must be finite");
    return make_symplectic(expm_real(2.0 * t * H.F));
}

WilliamsonResult williamson(const MatR& Q) {
    if (Q.rows() != Q.cols() || Q.rows() % 2 != 0) throw DimensionError("williamson: Q must be 2d x 2d");
    if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, Q.cwiseAbs().maxCoeff()))
        throw DomainError("williamson: Q must be symmetric");
    const int d = static_cast<int>(Q.rows() / 2);
    Eigen::SelfAdjointEigenSolver<MatR> spec(Q, Eigen::EigenvaluesOnly);
    const double lo = spec.eigenvalues()(0);
    const double hi = spec.eigenvalues()(2 * d - 1);
    if (!(lo > 1e-10)) throw DomainError("williamson: Q must be positive definite");
    if (hi / lo > 1e8) throw DomainError("williamson: condition number of Q exceeds 1e8");

    Eigen::LLT<MatR> llt(Q);
    const MatR R = llt.matrixU();  // Q = RᵀR
    const MatR K = R * symplectic_J(d) * R.transpose();
    Eigen::RealSchur<MatR> schur(K);
    const MatR& T = schur.matrixT();
    const MatR& U = schur.matrixU();

    // K is normal and antisymmetric, so T is block diagonal with 2x2 blocks [[0, b], [-b, 0]].
    MatR O(2 * d, 2 * d);
    VecR lambda(d);
    for (int k = 0; k < d; ++k) {
        const double b = T(2 * k, 2 * k + 1);
        VecR u = U.col(2 * k);
        VecR v = U.col(2 * k + 1);
        if (b < 0) std::swap(u, v);
        O.col(k) = u;
        O.col(d + k) = v;
        lambda(k) = std::abs(b);
    }
    VecR s(2 * d);
    s << lambda.cwiseSqrt(), lambda.cwiseSqrt();
    const MatR chi = R.triangularView<Eigen::Upper>().solve(O) * s.asDiagonal();
    return {make_symplectic(chi), lambda};
}

double isotropy_defect(const MatR& basis) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < basis.cols(); ++i)
        for (Eigen::Index j = i + 1; j < basis.cols(); ++j)
            worst = std::max(worst, std::abs(sigma(basis.col(i), basis.col(j))));
    return worst;
}

LagrangianFrame lagrangian_from_basis(const MatR& B) {
    if (B.rows() != 2 * B.cols()) throw DimensionError("lagrangian basis must be 2d x d");
    const int d = static_cast<int>(B.cols());
    LagrangianFrame f;
    f.basis = orthonormalize(B);
    if (isotropy_defect(f.basis) > 1e-10) throw DomainError("plane is not Lagrangian");

    // Y = x-projection of the plane; A X = P_Y ξ for (X, ξ) in the plane.
    const MatR Bx = f.basis.topRows(d);
    const MatR Bxi = f.basis.bottomRows(d);
    Eigen::JacobiSVD<MatR> svd(Bx, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const VecR& sv = svd.singularValues();
    int rank = 0;
    while (rank < d && sv(rank) > 1e-10) ++rank;
    f.Y_basis = svd.matrixU().leftCols(rank);
    f.vertical = rank < d;
    // Plane vectors over Y: B V_r Σ_r^{-1} has x-part U_r.
    const MatR W = Bxi * svd.matrixV().leftCols(rank) * sv.head(rank).cwiseInverse().asDiagonal();
    const MatR P = f.Y_basis * f.Y_basis.transpose();
    MatR AY = P * W;  // d × rank, images of the Y basis vectors
    f.A = AY * f.Y_basis.transpose();
    const double asym = (f.A - f.A.transpose()).cwiseAbs().maxCoeff();
    const double leak = rank ? ((MatR::Identity(d, d) - P) * f.A * f.Y_basis).cwiseAbs().maxCoeff() : 0.0;
    f.A = 0.5 * (f.A + f.A.transpose());
    f.has_graph_form = asym <= 1e-8 && leak <= 1e-10;
    return f;
}

LagrangianFrame lagrangian_from_graph(const MatR& Y_basis, const MatR& A) {
    const Eigen::Index d = A.rows();
    if (A.cols() != d || Y_basis.rows() != d) throw DimensionError("lagrangian frame: incompatible Y and A");
    if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw DomainError("lagrangian frame: A must be symmetric");
    const MatR Y = Y_basis.cols() ? orthonormalize(Y_basis) : MatR(d, 0);
    const MatR P = Y * Y.transpose();
    if (Y.cols() && ((MatR::Identity(d, d) - P) * A * Y).cwiseAbs().maxCoeff() > 1e-10)
        throw DomainError("lagrangian frame: A must leave Y invariant");
    // Complement Y⊥ from the full QR of Y.
    MatR full = MatR::Identity(d, d);
    if (Y.cols()) {
        Eigen::HouseholderQR<MatR> qr(Y);
        full = qr.householderQ();
    }
    const MatR Yp = full.rightCols(d - Y.cols());
    MatR B(2 * d, d);
    B.topLeftCorner(d, Y.cols()) = Y;
    B.bottomLeftCorner(d, Y.cols()) = A * Y;
    B.topRightCorner(d, Yp.cols()).setZero();
    B.bottomRightCorner(d, Yp.cols()) = Yp;
    LagrangianFrame f = lagrangian_from_basis(B);
    return f;
}

LagrangianFrame lagrangian_graph(const MatR& A) { return lagrangian_from_graph(MatR::Identity(A.rows(), A.rows()), A); }

LagrangianFrame horizontal_lagrangian(int d) { return lagrangian_graph(MatR::Zero(d, d)); }

LagrangianFrame lagrangian_map(const SymplecticMap& chi, const LagrangianFrame& frame) {
    if (chi.M.rows() != frame.basis.rows()) throw DimensionError("lagrangian_map: dimension mismatch");
    return lagrangian_from_basis(chi.M * frame.basis);
}

MatR twisted_graph_parametrization(const SymplecticMap& chi) {
    const Eigen::Index d = chi.M.rows() / 2;
    MatR P = MatR::Zero(4 * d, 2 * d);
    P.topRows(d) = chi.M.topRows(d);
    P.block(d, 0, d, d).setIdentity();
    P.block(2 * d, 0, d, 2 * d) = chi.M.bottomRows(d);
    P.block(3 * d, d, d, d) = -MatR::Identity(d, d);
    return P;
}

MatR twisted_graph_basis(const SymplecticMap& chi) { return orthonormalize(twisted_graph_parametrization(chi)); }

double dist_to_plane(const VecR& z, const MatR& basis) {
    if (z.size() != basis.rows()) throw DimensionError("dist_to_plane: dimension mismatch");
    return (z - basis * (basis.transpose() * z)).norm();
}

double dist_to_plane(const VecR& z, const LagrangianFrame& frame) { return dist_to_plane(z, frame.basis); }

MatR complement_basis(const LagrangianFrame& frame) {
    return symplectic_J(frame.d()) * frame.basis;
}

}  // namespace phaselab
