#pragma once

#include <Eigen/Dense>

#include <string_view>

namespace armpc {

enum class SolveKind { Optimal, Infeasible, Unbounded, MaxIter };

std::string_view to_string(SolveKind kind);

/// Result of an LP or QP solve.
///
/// `dual` stacks the inequality multipliers (nonnegative) followed by the
/// equality multipliers, using the Lagrangian f(x) + dual' (A x - b).
struct SolveStatus {
    SolveKind kind = SolveKind::MaxIter;
    double objective = 0.0;
    Eigen::VectorXd primal;
    Eigen::VectorXd dual;
    double kkt_residual = 0.0;
    int iterations = 0;

    bool optimal() const { return kind == SolveKind::Optimal; }
};

struct LinearProgram {
    Eigen::VectorXd c;
    Eigen::MatrixXd A_ineq;
    Eigen::VectorXd b_ineq;
    Eigen::MatrixXd A_eq;
    Eigen::VectorXd b_eq;
};

struct LpOptions {
    int max_iterations = 10000;
    double pivot_tolerance = 1e-9;
    double feasibility_tolerance = 1e-8;
};

/// Dense two-phase simplex over free variables. Pivoting is deterministic
/// (Dantzig with lowest-index ties, Bland after a run of degenerate pivots).
SolveStatus solve_lp(const LinearProgram& lp, const LpOptions& options = {});

SolveStatus solve_lp(const Eigen::VectorXd& c, const Eigen::MatrixXd& A_ineq, const Eigen::VectorXd& b_ineq,
    const Eigen::MatrixXd& A_eq = Eigen::MatrixXd(), const Eigen::VectorXd& b_eq = Eigen::VectorXd());

/// min 0.5 x'Hx + g'x  s.t.  A_ineq x <= b_ineq,  A_eq x = b_eq.
struct QuadraticProgram {
    Eigen::MatrixXd H;
    Eigen::VectorXd g;
    Eigen::MatrixXd A_ineq;
    Eigen::VectorXd b_ineq;
    Eigen::MatrixXd A_eq;
    Eigen::VectorXd b_eq;

    Eigen::Index num_variables() const { return g.size(); }

    /// Throws DimensionError on shape mismatch and NumericalError when H is
    /// not symmetric (1e-10) or not PSD (Cholesky with 1e-10 diagonal shift).
    void validate() const;
};

struct QpOptions {
    int max_iterations = 100;
    double tolerance = 1e-9;
    /// Reported solutions must satisfy kkt_residual <= this.
    double kkt_tolerance = 1e-6;
};

/// Dense primal-dual interior point (Mehrotra predictor-corrector). When the
/// iteration fails, a phase-one simplex decides between Infeasible and MaxIter.
SolveStatus solve_qp(const QuadraticProgram& qp, const QpOptions& options = {});

/// Stationarity, primal feasibility and complementarity residual of (x, dual).
double kkt_residual(const QuadraticProgram& qp, const Eigen::VectorXd& x, const Eigen::VectorXd& dual);

struct LqrSolution {
    Eigen::MatrixXd K; ///< u = -K x
    Eigen::MatrixXd P; ///< V(x) = x' P x
    double riccati_residual = 0.0;
    int iterations = 0;
};

/// Discrete-time LQR by Riccati fixed-point iteration. Throws NumericalError
/// when the iteration does not reach the residual tolerance or the closed
/// loop A - BK is not Schur stable.
LqrSolution dlqr(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
    const Eigen::MatrixXd& R, double tolerance = 1e-10, int max_iterations = 1000000);

double riccati_residual(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
    const Eigen::MatrixXd& R, const Eigen::MatrixXd& P);

double spectral_radius(const Eigen::MatrixXd& M);

/// Quantile of the chi-square distribution: returns q with CDF(q; dof) = p.
double chi_square_quantile(int dof, double p);

/// CDF of the chi-square distribution.
double chi_square_cdf(int dof, double x);

} // namespace armpc
