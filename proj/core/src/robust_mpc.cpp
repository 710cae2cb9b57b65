#include "armpc/robust_mpc.hpp"

#include "armpc/errors.hpp"
#include "armpc/json_io.hpp"

#include <nlohmann/json.hpp>

namespace armpc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void RobustMPCProblem::validate() const
{
    const Index nx = A.rows();
    const Index nu = B.cols();
    require_dims(A.cols() == nx && B.rows() == nx, "RobustMPCProblem: A must be n x n and B n x m");
    require_dims(Q.rows() == nx && Q.cols() == nx, "RobustMPCProblem: Q must be n x n");
    require_dims(R.rows() == nu && R.cols() == nu, "RobustMPCProblem: R must be m x m");
    require_dims(P.rows() == nx && P.cols() == nx, "RobustMPCProblem: P must be n x n");
    require_dims(K_term.rows() == nu && K_term.cols() == nx, "RobustMPCProblem: K_term must be m x n");
    require_dims(X.dim() == nx && O.dim() == nx && D_box.dim() == nx, "RobustMPCProblem: set dimensions");
    require_dims(U_eff.dim() == nu, "RobustMPCProblem: U_eff dimension");
    if (N < 1) {
        throw ValidationError("/N", "horizon must be at least 1");
    }
    if (Q.selfadjointView<Eigen::Lower>().ldlt().vectorD().minCoeff() < -1e-10
        || (Q - Q.transpose()).lpNorm<Eigen::Infinity>() > 1e-10) {
        throw ValidationError("/Q", "must be symmetric positive semidefinite");
    }
    if ((R - R.transpose()).lpNorm<Eigen::Infinity>() > 1e-10 || R.llt().info() != Eigen::Success) {
        throw ValidationError("/R", "must be symmetric positive definite");
    }
    if (!D_box.is_origin_symmetric()) {
        throw ValidationError("/D_box", "must be a nonempty origin-symmetric box");
    }
    const MatrixXd Acl = A - B * K_term;
    const MatrixXd lyap = Acl.transpose() * P * Acl - P + Q + K_term.transpose() * R * K_term;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (lyap + lyap.transpose()), Eigen::EigenvaluesOnly);
    if (es.eigenvalues().maxCoeff() > 1e-8 * std::max(1.0, P.lpNorm<Eigen::Infinity>())) {
        throw ValidationError("/P", "terminal cost does not satisfy the Lyapunov decrease for K_term");
    }
}

Index CompiledMPC::gain_offset(int k, int j) const
{
    if (fixed_gain || j >= k || j < 0 || k >= N) {
        return -1;
    }
    // K_kj for k = 1..N-1, j = 0..k-1, in that order.
    const Index before = static_cast<Index>(k) * (k - 1) / 2 + j;
    return num_u + before * m * n;
}

namespace {

    std::vector<MatrixXd> powers(const MatrixXd& M, int count)
    {
        std::vector<MatrixXd> out;
        out.push_back(MatrixXd::Identity(M.rows(), M.cols()));
        for (int p = 1; p <= count; ++p) {
            out.push_back(M * out.back());
        }
        return out;
    }

    // Sparse affine form: constant + coefficients over the (ubar, K) block.
    struct AffineCoef {
        double constant = 0.0;
        VectorXd grad;
        bool depends() const { return grad.size() > 0 && grad.lpNorm<Eigen::Infinity>() > 0.0; }
    };

    struct RowBuilder {
        VectorXd coef;   // over (ubar, K)
        VectorXd coef_x0; // multiplies x0 on the left-hand side
        double rhs = 0.0;
        double constant_tightening = 0.0;
        std::vector<std::pair<Index, double>> slack_terms; // (slack index, weight)
    };

} // namespace

CompiledMPC compile(const RobustMPCProblem& problem, const VectorXd& x0)
{
    problem.validate();
    const Index nx = problem.n();
    const Index nu = problem.m();
    const int N = problem.N;
    require_dims(x0.size() == nx, "compile: x0 dimension");

    CompiledMPC out;
    out.N = N;
    out.n = nx;
    out.m = nu;
    out.fixed_gain = problem.fixed_gain;
    out.num_u = N * nu;
    out.num_gain = problem.fixed_gain ? 0 : static_cast<Index>(N) * (N - 1) / 2 * nu * nx;
    const Index nbase = out.num_u + out.num_gain;

    const auto Ap = powers(problem.A, N);
    const MatrixXd Acl = problem.A - problem.B * problem.K_term;
    const auto Aclp = powers(Acl, N);
    const VectorXd r = problem.D_box.half_widths();

    std::vector<RowBuilder> rows;
    std::vector<AffineCoef> slack_coefs;

    // Adds sum_l r_l |c_l| for the disturbance coefficient vector c (affine in
    // the decision variables) to the row.
    auto robustify = [&](RowBuilder& row, const std::vector<AffineCoef>& c) {
        for (Index l = 0; l < nx; ++l) {
            if (r(l) == 0.0) {
                continue;
            }
            const AffineCoef& cl = c[static_cast<std::size_t>(l)];
            if (!cl.depends()) {
                row.constant_tightening += r(l) * std::abs(cl.constant);
                continue;
            }
            row.slack_terms.emplace_back(static_cast<Index>(slack_coefs.size()), r(l));
            slack_coefs.push_back(cl);
        }
    };

    // State-type row a' x_k <= b (k = 0..N).
    auto add_state_row = [&](const VectorXd& a, double b, int k, RobustRow::Kind kind, Index set_row) {
        RowBuilder row;
        row.coef = VectorXd::Zero(nbase);
        for (int i = 0; i < k; ++i) {
            row.coef.segment(i * nu, nu) = (a.transpose() * Ap[static_cast<std::size_t>(k - 1 - i)] * problem.B).transpose();
        }
        row.coef_x0 = (a.transpose() * Ap[static_cast<std::size_t>(k)]).transpose();
        row.rhs = b;
        for (int j = 0; j < k; ++j) {
            std::vector<AffineCoef> c(static_cast<std::size_t>(nx));
            if (problem.fixed_gain) {
                const VectorXd cv = Aclp[static_cast<std::size_t>(k - 1 - j)].transpose() * a;
                for (Index l = 0; l < nx; ++l) {
                    c[static_cast<std::size_t>(l)].constant = cv(l);
                }
            } else {
                const VectorXd cv = Ap[static_cast<std::size_t>(k - 1 - j)].transpose() * a;
                for (Index l = 0; l < nx; ++l) {
                    auto& cl = c[static_cast<std::size_t>(l)];
                    cl.constant = cv(l);
                    cl.grad = VectorXd::Zero(nbase);
                    for (int i = j + 1; i <= k - 1; ++i) {
                        const VectorXd bi = (a.transpose() * Ap[static_cast<std::size_t>(k - 1 - i)] * problem.B).transpose();
                        const Index off = out.gain_offset(i, j);
                        for (Index p = 0; p < nu; ++p) {
                            cl.grad(off + p * nx + l) += bi(p);
                        }
                    }
                }
            }
            robustify(row, c);
        }
        RobustRow meta;
        meta.kind = kind;
        meta.step = k;
        meta.set_row = set_row;
        meta.qp_row = static_cast<Index>(rows.size());
        meta.rhs = b;
        out.rows.push_back(meta);
        rows.push_back(std::move(row));
    };

    // Input row a' u_k <= b.
    auto add_input_row = [&](const VectorXd& a, double b, int k, Index set_row) {
        RowBuilder row;
        row.coef = VectorXd::Zero(nbase);
        row.coef.segment(k * nu, nu) = a;
        row.coef_x0 = VectorXd::Zero(nx);
        row.rhs = b;
        for (int j = 0; j < k; ++j) {
            std::vector<AffineCoef> c(static_cast<std::size_t>(nx));
            if (problem.fixed_gain) {
                const VectorXd cv = (-problem.K_term * Aclp[static_cast<std::size_t>(k - 1 - j)]).transpose() * a;
                for (Index l = 0; l < nx; ++l) {
                    c[static_cast<std::size_t>(l)].constant = cv(l);
                }
            } else {
                const Index off = out.gain_offset(k, j);
                for (Index l = 0; l < nx; ++l) {
                    auto& cl = c[static_cast<std::size_t>(l)];
                    cl.grad = VectorXd::Zero(nbase);
                    for (Index p = 0; p < nu; ++p) {
                        cl.grad(off + p * nx + l) = a(p);
                    }
                }
            }
            robustify(row, c);
        }
        RobustRow meta;
        meta.kind = RobustRow::Kind::Input;
        meta.step = k;
        meta.set_row = set_row;
        meta.qp_row = static_cast<Index>(rows.size());
        meta.rhs = b;
        out.rows.push_back(meta);
        rows.push_back(std::move(row));
    };

    for (int k = 0; k < N; ++k) {
        for (Index s = 0; s < problem.X.rows(); ++s) {
            add_state_row(problem.X.A().row(s).transpose(), problem.X.b()(s), k, RobustRow::Kind::State, s);
        }
        for (Index s = 0; s < problem.U_eff.rows(); ++s) {
            add_input_row(problem.U_eff.A().row(s).transpose(), problem.U_eff.b()(s), k, s);
        }
    }
    for (Index s = 0; s < problem.O.rows(); ++s) {
        add_state_row(problem.O.A().row(s).transpose(), problem.O.b()(s), N, RobustRow::Kind::Terminal, s);
    }

    out.num_slack = static_cast<Index>(slack_coefs.size());
    const Index nz = nbase + out.num_slack;
    const Index nrob = static_cast<Index>(rows.size());
    const Index nrows = nrob + 2 * out.num_slack;
    MatrixXd Ain = MatrixXd::Zero(nrows, nz);
    VectorXd b0(nrows);
    MatrixXd E = MatrixXd::Zero(nrows, nx);
    for (Index q = 0; q < nrob; ++q) {
        const RowBuilder& row = rows[static_cast<std::size_t>(q)];
        Ain.row(q).head(nbase) = row.coef.transpose();
        for (const auto& [s, w] : row.slack_terms) {
            Ain(q, nbase + s) += w;
        }
        b0(q) = row.rhs - row.constant_tightening;
        E.row(q) = -row.coef_x0.transpose();
    }
    for (Index s = 0; s < out.num_slack; ++s) {
        const AffineCoef& c = slack_coefs[static_cast<std::size_t>(s)];
        const Index plus = nrob + 2 * s;
        const Index minus = plus + 1;
        Ain.row(plus).head(nbase) = c.grad.transpose();
        Ain(plus, nbase + s) = -1.0;
        b0(plus) = -c.constant;
        Ain.row(minus).head(nbase) = -c.grad.transpose();
        Ain(minus, nbase + s) = -1.0;
        b0(minus) = c.constant;
        out.slack_pairs.push_back({ plus, minus, nbase + s });
    }

    // Nominal cost over ubar: xbar = Phi x0 + Gamma ubar.
    MatrixXd Phi((N + 1) * nx, nx);
    MatrixXd Gamma = MatrixXd::Zero((N + 1) * nx, N * nu);
    MatrixXd Qbar = MatrixXd::Zero((N + 1) * nx, (N + 1) * nx);
    MatrixXd Rbar = MatrixXd::Zero(N * nu, N * nu);
    for (int k = 0; k <= N; ++k) {
        Phi.middleRows(k * nx, nx) = Ap[static_cast<std::size_t>(k)];
        for (int i = 0; i < k; ++i) {
            Gamma.block(k * nx, i * nu, nx, nu) = Ap[static_cast<std::size_t>(k - 1 - i)] * problem.B;
        }
        Qbar.block(k * nx, k * nx, nx, nx) = k < N ? problem.Q : problem.P;
        if (k < N) {
            Rbar.block(k * nu, k * nu, nu, nu) = problem.R;
        }
    }
    MatrixXd H = MatrixXd::Zero(nz, nz);
    H.topLeftCorner(N * nu, N * nu) = 2.0 * (Gamma.transpose() * Qbar * Gamma + Rbar);
    H.topLeftCorner(N * nu, N * nu) = 0.5 * (H.topLeftCorner(N * nu, N * nu) + H.topLeftCorner(N * nu, N * nu).transpose()).eval();
    for (Index v = N * nu; v < nz; ++v) {
        H(v, v) = 2.0 * problem.gain_regularization;
    }
    MatrixXd G = MatrixXd::Zero(nz, nx);
    G.topRows(N * nu) = 2.0 * Gamma.transpose() * Qbar * Phi;
    out.G = G;
    out.cost_x0 = Phi.transpose() * Qbar * Phi;
    out.b0 = b0;
    out.E = E;

    out.qp.H = std::move(H);
    out.qp.g = G * x0;
    out.qp.A_ineq = std::move(Ain);
    out.qp.b_ineq = b0 + E * x0;
    out.qp.A_eq = MatrixXd(0, nz);
    out.qp.b_eq = VectorXd(0);
    return out;
}

VectorXd complete_slacks(const CompiledMPC& compiled, VectorXd z)
{
    for (const auto& [plus, minus, var] : compiled.slack_pairs) {
        z(var) = 0.0;
        const double c = compiled.qp.A_ineq.row(plus).dot(z) - compiled.qp.b_ineq(plus);
        z(var) = std::abs(c);
    }
    return z;
}

VectorXd worst_case_lhs(const CompiledMPC& compiled, const VectorXd& x0, const VectorXd& z)
{
    const VectorXd zc = complete_slacks(compiled, z);
    const VectorXd b = compiled.b0 + compiled.E * x0;
    VectorXd out(static_cast<Index>(compiled.rows.size()));
    for (std::size_t k = 0; k < compiled.rows.size(); ++k) {
        const RobustRow& row = compiled.rows[k];
        out(static_cast<Index>(k)) = compiled.qp.A_ineq.row(row.qp_row).dot(zc) + (row.rhs - b(row.qp_row));
    }
    return out;
}

MPCSolution solve(const CompiledMPC& compiled, const VectorXd& x0, const QpOptions& options)
{
    MPCSolution sol;
    const QuadraticProgram& qp = compiled.qp;
    // Rows without decision variables (constraints on x0 itself) are checked
    // directly and left out of the solve.
    std::vector<Index> keep;
    for (Index r = 0; r < qp.A_ineq.rows(); ++r) {
        if (qp.A_ineq.row(r).lpNorm<Eigen::Infinity>() > 0.0) {
            keep.push_back(r);
        } else if (qp.b_ineq(r) < -kSetTolerance) {
            sol.status = SolveKind::Infeasible;
            return sol;
        }
    }
    QuadraticProgram reduced;
    reduced.H = qp.H;
    reduced.g = qp.g;
    reduced.A_ineq.resize(static_cast<Index>(keep.size()), qp.A_ineq.cols());
    reduced.b_ineq.resize(static_cast<Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        reduced.A_ineq.row(static_cast<Index>(k)) = qp.A_ineq.row(keep[k]);
        reduced.b_ineq(static_cast<Index>(k)) = qp.b_ineq(keep[k]);
    }
    reduced.A_eq = qp.A_eq;
    reduced.b_eq = qp.b_eq;
    const SolveStatus s = solve_qp(reduced, options);
    sol.status = s.kind;
    sol.iterations = s.iterations;
    if (!s.optimal()) {
        return sol;
    }
    sol.kkt_residual = s.kkt_residual;
    sol.z = s.primal;
    const Index nx = compiled.n;
    const Index nu = compiled.m;
    const int N = compiled.N;
    const VectorXd ubar = s.primal.head(N * nu);
    sol.u0 = ubar.head(nu);
    sol.u_nominal.resize(static_cast<std::size_t>(N));
    for (int k = 0; k < N; ++k) {
        sol.u_nominal[static_cast<std::size_t>(k)] = ubar.segment(k * nu, nu);
    }
    const Index nz_u = N * nu;
    sol.objective = 0.5 * ubar.dot(qp.H.topLeftCorner(nz_u, nz_u) * ubar) + qp.g.head(nz_u).dot(ubar)
        + x0.dot(compiled.cost_x0 * x0);
    sol.gains.assign(static_cast<std::size_t>(N), {});
    if (!compiled.fixed_gain) {
        for (int k = 1; k < N; ++k) {
            for (int j = 0; j < k; ++j) {
                const Index off = compiled.gain_offset(k, j);
                MatrixXd K(nu, nx);
                for (Index p = 0; p < nu; ++p) {
                    K.row(p) = s.primal.segment(off + p * nx, nx).transpose();
                }
                sol.gains[static_cast<std::size_t>(k)].push_back(K);
            }
        }
    }
    return sol;
}

MPCSolution solve(const RobustMPCProblem& problem, const VectorXd& x0, const QpOptions& options)
{
    const CompiledMPC compiled = compile(problem, x0);
    MPCSolution sol = solve(compiled, x0, options);
    if (!sol.optimal()) {
        return sol;
    }
    if (problem.fixed_gain) {
        const MatrixXd Acl = problem.A - problem.B * problem.K_term;
        const auto Aclp = powers(Acl, problem.N);
        for (int k = 1; k < problem.N; ++k) {
            for (int j = 0; j < k; ++j) {
                sol.gains[static_cast<std::size_t>(k)].push_back(-problem.K_term * Aclp[static_cast<std::size_t>(k - 1 - j)]);
            }
        }
    }
    sol.x_nominal.assign(1, x0);
    for (int k = 0; k < problem.N; ++k) {
        sol.x_nominal.push_back(problem.A * sol.x_nominal.back() + problem.B * sol.u_nominal[static_cast<std::size_t>(k)]);
    }
    return sol;
}

void simulate_policy(const RobustMPCProblem& problem, const VectorXd& x0, const MPCSolution& solution,
    const std::vector<VectorXd>& disturbances, std::vector<VectorXd>& states, std::vector<VectorXd>& inputs)
{
    require_dims(static_cast<int>(disturbances.size()) == problem.N, "simulate_policy: need N disturbances");
    states.assign(1, x0);
    inputs.clear();
    for (int k = 0; k < problem.N; ++k) {
        VectorXd u = solution.u_nominal[static_cast<std::size_t>(k)];
        for (int j = 0; j < k; ++j) {
            u += solution.gains[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] * disturbances[static_cast<std::size_t>(j)];
        }
        inputs.push_back(u);
        states.push_back(problem.A * states.back() + problem.B * u + disturbances[static_cast<std::size_t>(k)]);
    }
}

RpiResult terminal_set(const MatrixXd& A, const MatrixXd& B, const MatrixXd& K, const Box& D_box, const Polytope& X,
    const Polytope& U_eff, const RpiOptions& options)
{
    return max_rpi(A - B * K, D_box, X, U_eff, K, options);
}

TerminalIngredients terminal_ingredients(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q, const MatrixXd& R,
    const Box& D_box, const Polytope& X, const Polytope& U_eff, const RpiOptions& options)
{
    const LqrSolution lqr = dlqr(A, B, Q, R);
    TerminalIngredients out;
    out.P = lqr.P;
    out.K = lqr.K;
    out.O = terminal_set(A, B, lqr.K, D_box, X, U_eff, options);
    return out;
}

nlohmann::json dump_qp(const QuadraticProgram& qp)
{
    return nlohmann::json {
        { "H", matrix_to_json(qp.H) },
        { "g", vector_to_json(qp.g) },
        { "A_ineq", matrix_to_json(qp.A_ineq) },
        { "b_ineq", vector_to_json(qp.b_ineq) },
        { "A_eq", matrix_to_json(qp.A_eq) },
        { "b_eq", vector_to_json(qp.b_eq) },
    };
}

} // namespace armpc
