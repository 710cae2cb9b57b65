#pragma once

#include "armpc/geometry.hpp"
#include "armpc/invariant.hpp"
#include "armpc/optimization.hpp"

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include <array>
#include <vector>

namespace armpc {

/// Horizon-N robust MPC with causal affine disturbance feedback
/// u_k = ubar_k + sum_{j<k} K_kj d_j and an identical disturbance box at
/// every step.
struct RobustMPCProblem {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    int N = 1;
    Eigen::MatrixXd Q;
    Eigen::MatrixXd R;
    Eigen::MatrixXd P;
    Eigen::MatrixXd K_term; ///< terminal law u = -K_term x
    Polytope X;
    Polytope U_eff;
    Box D_box;
    Polytope O;
    /// Freeze the feedback to K_kj = -K_term (A - B K_term)^{k-1-j}; the QP is
    /// then over the nominal inputs only.
    bool fixed_gain = false;
    double gain_regularization = 1e-9;

    Eigen::Index n() const { return A.rows(); }
    Eigen::Index m() const { return B.cols(); }
    /// Throws DimensionError / ValidationError.
    void validate() const;
};

/// One robustified constraint of the original problem.
struct RobustRow {
    enum class Kind { State, Input, Terminal };
    Kind kind = Kind::State;
    int step = 0;
    Eigen::Index set_row = 0;
    Eigen::Index qp_row = 0;
    double rhs = 0.0; ///< offset of the original set row
};

/// QP over z = (ubar, K, slacks) with b_ineq = b0 + E x0 and g = G x0.
struct CompiledMPC {
    QuadraticProgram qp;
    Eigen::VectorXd b0;
    Eigen::MatrixXd E;
    Eigen::MatrixXd G;
    /// Nominal cost = 0.5 z'Hz + g'z + x0' C x0 up to the gain and slack
    /// regularization.
    Eigen::MatrixXd cost_x0;
    std::vector<RobustRow> rows;
    /// (plus row, minus row, slack variable): slack >= +/- c(z).
    std::vector<std::array<Eigen::Index, 3>> slack_pairs;
    Eigen::Index num_u = 0;
    Eigen::Index num_gain = 0;
    Eigen::Index num_slack = 0;
    int N = 0;
    Eigen::Index n = 0;
    Eigen::Index m = 0;
    bool fixed_gain = false;

    /// Offset of K_kj (row-major m x n block) in z; -1 in fixed-gain mode.
    Eigen::Index gain_offset(int k, int j) const;
};

CompiledMPC compile(const RobustMPCProblem& problem, const Eigen::VectorXd& x0);

/// Sets every slack to the absolute value of its coefficient.
Eigen::VectorXd complete_slacks(const CompiledMPC& compiled, Eigen::VectorXd z);
/// Robustified left-hand side of each RobustRow at z (slacks completed), in
/// the units of the original constraint.
Eigen::VectorXd worst_case_lhs(const CompiledMPC& compiled, const Eigen::VectorXd& x0, const Eigen::VectorXd& z);

struct MPCSolution {
    SolveKind status = SolveKind::MaxIter;
    Eigen::VectorXd u0;
    std::vector<Eigen::VectorXd> x_nominal; ///< N + 1 states
    std::vector<Eigen::VectorXd> u_nominal; ///< N inputs
    /// gains[k][j] = K_kj for j < k.
    std::vector<std::vector<Eigen::MatrixXd>> gains;
    double objective = 0.0;
    double kkt_residual = 0.0;
    int iterations = 0;
    Eigen::VectorXd z;

    bool optimal() const { return status == SolveKind::Optimal; }
};

MPCSolution solve(const RobustMPCProblem& problem, const Eigen::VectorXd& x0, const QpOptions& options = {});
MPCSolution solve(const CompiledMPC& compiled, const Eigen::VectorXd& x0, const QpOptions& options = {});

/// Applies the affine policy to a disturbance sequence d_0..d_{N-1}; returns
/// states x_0..x_N and inputs u_0..u_{N-1}.
void simulate_policy(const RobustMPCProblem& problem, const Eigen::VectorXd& x0, const MPCSolution& solution,
    const std::vector<Eigen::VectorXd>& disturbances, std::vector<Eigen::VectorXd>& states,
    std::vector<Eigen::VectorXd>& inputs);

struct TerminalIngredients {
    Eigen::MatrixXd P;
    Eigen::MatrixXd K;
    RpiResult O;
};

TerminalIngredients terminal_ingredients(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
    const Eigen::MatrixXd& R, const Box& D_box, const Polytope& X, const Polytope& U_eff,
    const RpiOptions& options = {});

/// Same, reusing an LQR solution.
RpiResult terminal_set(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& K, const Box& D_box,
    const Polytope& X, const Polytope& U_eff, const RpiOptions& options = {});

nlohmann::json dump_qp(const QuadraticProgram& qp);

} // namespace armpc
