#include "armpc/errors.hpp"
#include "armpc/optimization.hpp"

#include <Eigen/Eigenvalues>

namespace armpc {

using Eigen::MatrixXd;

namespace {

    MatrixXd riccati_map(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q, const MatrixXd& R, const MatrixXd& P)
    {
        const MatrixXd BtPA = B.transpose() * P * A;
        const MatrixXd S = R + B.transpose() * P * B;
        MatrixXd next = Q + A.transpose() * P * A - BtPA.transpose() * S.ldlt().solve(BtPA);
        return 0.5 * (next + next.transpose());
    }

} // namespace

double riccati_residual(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q, const MatrixXd& R, const MatrixXd& P)
{
    return (P - riccati_map(A, B, Q, R, P)).lpNorm<Eigen::Infinity>();
}

double spectral_radius(const MatrixXd& M)
{
    require_dims(M.rows() == M.cols(), "spectral_radius: matrix must be square");
    if (M.size() == 0) {
        return 0.0;
    }
    Eigen::EigenSolver<MatrixXd> es(M, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

LqrSolution dlqr(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q, const MatrixXd& R, double tolerance,
    int max_iterations)
{
    const auto n = A.rows();
    const auto m = B.cols();
    require_dims(A.cols() == n && B.rows() == n, "dlqr: A must be n x n and B n x m");
    require_dims(Q.rows() == n && Q.cols() == n, "dlqr: Q must be n x n");
    require_dims(R.rows() == m && R.cols() == m, "dlqr: R must be m x m");
    if (R.llt().info() != Eigen::Success) {
        throw NumericalError("dlqr: R is not positive definite");
    }

    LqrSolution sol;
    MatrixXd P = Q;
    double residual = 0.0;
    for (int k = 0; k < max_iterations; ++k) {
        const MatrixXd next = riccati_map(A, B, Q, R, P);
        residual = (next - P).lpNorm<Eigen::Infinity>();
        P = next;
        sol.iterations = k + 1;
        if (!P.allFinite()) {
            break;
        }
        if (residual <= 0.1 * tolerance * std::max(1.0, P.lpNorm<Eigen::Infinity>())) {
            break;
        }
    }
    sol.P = P;
    sol.riccati_residual = riccati_residual(A, B, Q, R, P);
    if (!P.allFinite() || sol.riccati_residual > tolerance * std::max(1.0, P.lpNorm<Eigen::Infinity>())) {
        throw NumericalError("dlqr: Riccati iteration did not converge");
    }
    sol.K = (R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
    if (spectral_radius(A - B * sol.K) >= 1.0) {
        throw NumericalError("dlqr: closed loop is not Schur stable");
    }
    return sol;
}

} // namespace armpc
