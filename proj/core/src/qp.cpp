#include "armpc/errors.hpp"
#include "armpc/optimization.hpp"

#include <algorithm>
#include <cmath>

namespace armpc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void QuadraticProgram::validate() const
{
    const Index n = g.size();
    require_dims(H.rows() == n && H.cols() == n, "QuadraticProgram: H must be n x n with n = size(g)");
    require_dims(A_ineq.cols() == n || A_ineq.rows() == 0, "QuadraticProgram: A_ineq column count");
    require_dims(A_eq.cols() == n || A_eq.rows() == 0, "QuadraticProgram: A_eq column count");
    require_dims(A_ineq.rows() == b_ineq.size(), "QuadraticProgram: b_ineq size");
    require_dims(A_eq.rows() == b_eq.size(), "QuadraticProgram: b_eq size");
    if (!H.allFinite() || !g.allFinite() || !A_ineq.allFinite() || !b_ineq.allFinite() || !A_eq.allFinite()
        || !b_eq.allFinite()) {
        throw std::invalid_argument("QuadraticProgram: non-finite data");
    }
    if (n == 0) {
        return;
    }
    if ((H - H.transpose()).lpNorm<Eigen::Infinity>() > 1e-10) {
        throw NumericalError("QuadraticProgram: H is not symmetric");
    }
    Eigen::LLT<MatrixXd> llt(H + 1e-10 * MatrixXd::Identity(n, n));
    if (llt.info() != Eigen::Success) {
        throw NumericalError("QuadraticProgram: H is not positive semidefinite");
    }
}

double kkt_residual(const QuadraticProgram& qp, const VectorXd& x, const VectorXd& dual)
{
    const Index m = qp.A_ineq.rows();
    const Index p = qp.A_eq.rows();
    require_dims(dual.size() == m + p, "kkt_residual: dual size");
    VectorXd stat = qp.H * x + qp.g;
    if (m > 0) {
        stat += qp.A_ineq.transpose() * dual.head(m);
    }
    if (p > 0) {
        stat += qp.A_eq.transpose() * dual.tail(p);
    }
    double res = stat.size() > 0 ? stat.lpNorm<Eigen::Infinity>() : 0.0;
    if (m > 0) {
        const VectorXd slack = qp.b_ineq - qp.A_ineq * x;
        res = std::max(res, std::max(0.0, -slack.minCoeff()));
        res = std::max(res, (dual.head(m).array() * slack.array()).abs().maxCoeff());
        res = std::max(res, std::max(0.0, -dual.head(m).minCoeff()));
    }
    if (p > 0) {
        res = std::max(res, (qp.A_eq * x - qp.b_eq).lpNorm<Eigen::Infinity>());
    }
    return res;
}

namespace {

    // Factorization of M = H + A' W A (+ tiny shift) with the equality Schur
    // complement E M^-1 E'. Solves are refined against the unshifted M.
    class NewtonSystem {
    public:
        NewtonSystem(const QuadraticProgram& qp, const VectorXd& w)
            : qp_(qp)
        {
            M_ = qp.H;
            if (qp.A_ineq.rows() > 0) {
                M_.noalias() += qp.A_ineq.transpose() * w.asDiagonal() * qp.A_ineq;
            }
            const Index n = M_.rows();
            const double h_scale = n > 0 ? std::max(1.0, qp.H.diagonal().cwiseAbs().maxCoeff()) : 1.0;
            for (const double shift : { 1e-12 * h_scale, 1e-8 * h_scale, 1e-8 * std::max(h_scale, M_.diagonal().maxCoeff()) }) {
                llt_.compute(M_ + shift * MatrixXd::Identity(n, n));
                ok_ = llt_.info() == Eigen::Success;
                if (ok_) {
                    break;
                }
            }
            if (ok_ && qp.A_eq.rows() > 0) {
                MinvEt_ = llt_.solve(qp.A_eq.transpose());
                schur_.compute(qp.A_eq * MinvEt_);
                ok_ = schur_.info() == Eigen::Success;
            }
        }

        bool ok() const { return ok_; }

        // Solves [M E'; E 0][dx; dnu] = [r1; r2].
        void solve(const VectorXd& r1, const VectorXd& r2, VectorXd& dx, VectorXd& dnu) const
        {
            solve_shifted(r1, r2, dx, dnu);
            for (int refine = 0; refine < 2; ++refine) {
                VectorXd e1 = r1 - M_ * dx;
                VectorXd e2 = r2;
                if (qp_.A_eq.rows() > 0) {
                    e1.noalias() -= qp_.A_eq.transpose() * dnu;
                    e2.noalias() -= qp_.A_eq * dx;
                }
                VectorXd cx;
                VectorXd cn;
                solve_shifted(e1, e2, cx, cn);
                dx += cx;
                if (cn.size() > 0) {
                    dnu += cn;
                }
            }
        }

    private:
        void solve_shifted(const VectorXd& r1, const VectorXd& r2, VectorXd& dx, VectorXd& dnu) const
        {
            const VectorXd Minv_r1 = llt_.solve(r1);
            if (qp_.A_eq.rows() > 0) {
                dnu = schur_.solve(qp_.A_eq * Minv_r1 - r2);
                dx = Minv_r1 - MinvEt_ * dnu;
            } else {
                dnu.resize(0);
                dx = Minv_r1;
            }
        }

        const QuadraticProgram& qp_;
        MatrixXd M_;
        Eigen::LLT<MatrixXd> llt_;
        MatrixXd MinvEt_;
        Eigen::LDLT<MatrixXd> schur_;
        bool ok_ = false;
    };

    double max_step(const VectorXd& v, const VectorXd& dv)
    {
        double alpha = 1.0;
        for (Index i = 0; i < v.size(); ++i) {
            if (dv(i) < 0.0) {
                alpha = std::min(alpha, -v(i) / dv(i));
            }
        }
        return alpha;
    }

    SolveKind classify_failure(const QuadraticProgram& qp)
    {
        LinearProgram lp;
        lp.c = VectorXd::Zero(qp.num_variables());
        lp.A_ineq = qp.A_ineq;
        lp.b_ineq = qp.b_ineq;
        lp.A_eq = qp.A_eq;
        lp.b_eq = qp.b_eq;
        const SolveStatus s = solve_lp(lp);
        return s.kind == SolveKind::Infeasible ? SolveKind::Infeasible : SolveKind::MaxIter;
    }

    SolveStatus unconstrained(const QuadraticProgram& qp)
    {
        SolveStatus out;
        const Index n = qp.num_variables();
        Eigen::LDLT<MatrixXd> ldlt(qp.H);
        VectorXd x = ldlt.solve(-qp.g);
        out.primal = x;
        out.dual = VectorXd(0);
        out.kkt_residual = kkt_residual(qp, x, out.dual);
        if (!x.allFinite() || out.kkt_residual > 1e-6 * std::max(1.0, qp.g.lpNorm<Eigen::Infinity>())) {
            out.kind = n > 0 ? SolveKind::Unbounded : SolveKind::Optimal;
            return out;
        }
        out.kind = SolveKind::Optimal;
        out.objective = 0.5 * x.dot(qp.H * x) + qp.g.dot(x);
        return out;
    }

} // namespace

SolveStatus solve_qp(const QuadraticProgram& qp, const QpOptions& options)
{
    qp.validate();
    const Index n = qp.num_variables();
    const Index m = qp.A_ineq.rows();
    const Index p = qp.A_eq.rows();
    if (m == 0 && p == 0) {
        return unconstrained(qp);
    }
    // Only used behind m > 0 / p > 0 guards.
    const MatrixXd& A = qp.A_ineq;
    const MatrixXd& E = qp.A_eq;

    const double data_scale = std::max({ 1.0, qp.g.size() > 0 ? qp.g.lpNorm<Eigen::Infinity>() : 0.0,
        m > 0 ? qp.b_ineq.lpNorm<Eigen::Infinity>() : 0.0, p > 0 ? qp.b_eq.lpNorm<Eigen::Infinity>() : 0.0 });

    VectorXd x = VectorXd::Zero(n);
    VectorXd s = VectorXd::Ones(m);
    VectorXd lambda = VectorXd::Ones(m);
    VectorXd nu = VectorXd::Zero(p);

    // Starting point: minimize the regularized objective subject to the
    // equalities, then push slacks and multipliers into the interior.
    {
        NewtonSystem sys(qp, VectorXd::Ones(m));
        if (sys.ok()) {
            VectorXd dnu;
            VectorXd rhs = -qp.g;
            if (m > 0) {
                rhs += A.transpose() * qp.b_ineq;
            }
            sys.solve(rhs, p > 0 ? qp.b_eq : VectorXd(0), x, dnu);
            if (!x.allFinite()) {
                x.setZero();
            }
        }
        if (m > 0) {
            const VectorXd r = qp.b_ineq - A * x;
            for (Index i = 0; i < m; ++i) {
                s(i) = std::max(std::abs(r(i)), 1.0);
            }
        }
    }

    SolveStatus out;
    const int max_iter = std::max(options.max_iterations, 1);
    for (int iter = 0; iter < max_iter; ++iter) {
        VectorXd r_d = qp.H * x + qp.g;
        if (m > 0) {
            r_d.noalias() += A.transpose() * lambda;
        }
        if (p > 0) {
            r_d.noalias() += E.transpose() * nu;
        }
        const VectorXd r_p = m > 0 ? VectorXd(A * x + s - qp.b_ineq) : VectorXd(0);
        const VectorXd r_e = p > 0 ? VectorXd(E * x - qp.b_eq) : VectorXd(0);
        const double mu = m > 0 ? s.dot(lambda) / static_cast<double>(m) : 0.0;

        const double res_d = r_d.size() > 0 ? r_d.lpNorm<Eigen::Infinity>() : 0.0;
        const double res_p = std::max(r_p.size() > 0 ? r_p.lpNorm<Eigen::Infinity>() : 0.0,
            r_e.size() > 0 ? r_e.lpNorm<Eigen::Infinity>() : 0.0);
        out.iterations = iter;
        if (res_d <= options.tolerance * data_scale && res_p <= options.tolerance * data_scale
            && mu <= options.tolerance * 1e-2 * data_scale) {
            VectorXd dual(m + p);
            dual << lambda, nu;
            const double kkt = kkt_residual(qp, x, dual);
            if (kkt <= options.kkt_tolerance) {
                out.kind = SolveKind::Optimal;
                out.primal = x;
                out.dual = dual;
                out.kkt_residual = kkt;
                out.objective = 0.5 * x.dot(qp.H * x) + qp.g.dot(x);
                return out;
            }
        }
        if (!x.allFinite() || (m > 0 && lambda.maxCoeff() > 1e14)) {
            break;
        }

        const VectorXd w = m > 0 ? VectorXd(lambda.cwiseQuotient(s)) : VectorXd(0);
        NewtonSystem sys(qp, w);
        if (!sys.ok()) {
            break;
        }

        auto direction = [&](const VectorXd& r_c, VectorXd& dx, VectorXd& ds, VectorXd& dl, VectorXd& dn) {
            VectorXd rhs = -r_d;
            if (m > 0) {
                const VectorXd t = (-r_c + lambda.cwiseProduct(r_p)).cwiseQuotient(s);
                rhs.noalias() -= A.transpose() * t;
            }
            sys.solve(rhs, -r_e, dx, dn);
            if (m > 0) {
                ds = -r_p - A * dx;
                dl = (-r_c - lambda.cwiseProduct(ds)).cwiseQuotient(s);
            } else {
                ds.resize(0);
                dl.resize(0);
            }
        };

        VectorXd dx;
        VectorXd ds;
        VectorXd dl;
        VectorXd dn;
        const VectorXd r_c_aff = s.cwiseProduct(lambda);
        direction(r_c_aff, dx, ds, dl, dn);
        double alpha = 1.0;
        if (m > 0) {
            const double a_aff = std::min(max_step(s, ds), max_step(lambda, dl));
            const double mu_aff = (s + a_aff * ds).dot(lambda + a_aff * dl) / static_cast<double>(m);
            const double sigma = std::pow(std::clamp(mu_aff / std::max(mu, 1e-300), 0.0, 1.0), 3);
            const VectorXd r_c = r_c_aff + ds.cwiseProduct(dl) - VectorXd::Constant(m, sigma * mu);
            direction(r_c, dx, ds, dl, dn);
            alpha = std::min(1.0, 0.995 * std::min(max_step(s, ds), max_step(lambda, dl)));
        }
        x += alpha * dx;
        nu += alpha * dn;
        if (m > 0) {
            s += alpha * ds;
            lambda += alpha * dl;
            s = s.cwiseMax(1e-300);
            lambda = lambda.cwiseMax(1e-300);
        }
        out.iterations = iter + 1;
    }

    out.kind = classify_failure(qp);
    return out;
}

} // namespace armpc
