#include "armpc/errors.hpp"
#include "armpc/optimization.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace armpc {

std::string_view to_string(SolveKind kind)
{
    switch (kind) {
    case SolveKind::Optimal:
        return "Optimal";
    case SolveKind::Infeasible:
        return "Infeasible";
    case SolveKind::Unbounded:
        return "Unbounded";
    case SolveKind::MaxIter:
        return "MaxIter";
    }
    return "Unknown";
}

namespace {

    using Eigen::MatrixXd;
    using Eigen::VectorXd;

    // Dense simplex tableau. Rows 0..m-1 are constraints, row m holds reduced
    // costs with the negated objective value in the last column.
    class Tableau {
    public:
        Tableau(MatrixXd body, std::vector<int> basis, int num_columns)
            : T_(std::move(body))
            , basis_(std::move(basis))
            , num_columns_(num_columns)
            , allowed_(static_cast<std::size_t>(num_columns), true)
        {
        }

        Eigen::Index rows() const { return T_.rows() - 1; }
        int columns() const { return num_columns_; }
        double rhs(Eigen::Index i) const { return T_(i, num_columns_); }
        double objective() const { return -T_(rows(), num_columns_); }
        const std::vector<int>& basis() const { return basis_; }
        void forbid(int column) { allowed_[static_cast<std::size_t>(column)] = false; }

        void set_costs(const VectorXd& cost)
        {
            const Eigen::Index m = rows();
            T_.row(m).setZero();
            T_.row(m).head(num_columns_) = cost.transpose();
            for (Eigen::Index i = 0; i < m; ++i) {
                const double cb = cost(basis_[static_cast<std::size_t>(i)]);
                if (cb != 0.0) {
                    T_.row(m) -= cb * T_.row(i);
                }
            }
        }

        void pivot(Eigen::Index row, int col)
        {
            const double p = T_(row, col);
            T_.row(row) /= p;
            Eigen::VectorXd factor = T_.col(col);
            factor(row) = 0.0;
            const Eigen::RowVectorXd prow = T_.row(row);
            T_.noalias() -= factor * prow;
            T_(row, col) = 1.0;
            basis_[static_cast<std::size_t>(row)] = col;
        }

        void drop_row(Eigen::Index row)
        {
            const Eigen::Index last = T_.rows() - 1;
            MatrixXd next(T_.rows() - 1, T_.cols());
            next.topRows(row) = T_.topRows(row);
            next.bottomRows(last - row) = T_.bottomRows(last - row);
            T_ = std::move(next);
            basis_.erase(basis_.begin() + row);
            dropped_.push_back(static_cast<int>(row + static_cast<Eigen::Index>(dropped_.size())));
        }

        const std::vector<int>& dropped_rows() const { return dropped_; }

        double at(Eigen::Index i, int j) const { return T_(i, j); }

        // Runs simplex pivots on the current cost row. Returns the terminal kind.
        SolveKind iterate(const LpOptions& options, int& iterations)
        {
            const Eigen::Index m = rows();
            int degenerate_run = 0;
            const double cost_tol = 1e-10;
            while (true) {
                if (iterations >= options.max_iterations) {
                    return SolveKind::MaxIter;
                }
                const bool bland = degenerate_run > 50;
                int entering = -1;
                double best = -cost_tol;
                for (int j = 0; j < num_columns_; ++j) {
                    if (!allowed_[static_cast<std::size_t>(j)]) {
                        continue;
                    }
                    const double d = T_(m, j);
                    if (d < best) {
                        entering = j;
                        if (bland) {
                            break;
                        }
                        best = d;
                    }
                }
                if (entering < 0) {
                    return SolveKind::Optimal;
                }
                Eigen::Index leaving = -1;
                double best_ratio = std::numeric_limits<double>::infinity();
                for (Eigen::Index i = 0; i < m; ++i) {
                    const double a = T_(i, entering);
                    if (a > options.pivot_tolerance) {
                        const double ratio = std::max(T_(i, num_columns_), 0.0) / a;
                        if (ratio < best_ratio - 1e-12
                            || (std::abs(ratio - best_ratio) <= 1e-12 && leaving >= 0
                                && basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leaving)])) {
                            best_ratio = ratio;
                            leaving = i;
                        }
                    }
                }
                if (leaving < 0) {
                    return SolveKind::Unbounded;
                }
                degenerate_run = best_ratio <= 1e-12 ? degenerate_run + 1 : 0;
                pivot(leaving, entering);
                ++iterations;
            }
        }

    private:
        MatrixXd T_;
        std::vector<int> basis_;
        int num_columns_;
        std::vector<bool> allowed_;
        std::vector<int> dropped_;
    };

    double lp_kkt(const LinearProgram& lp, const VectorXd& x, const VectorXd& dual)
    {
        const Eigen::Index mi = lp.A_ineq.rows();
        const Eigen::Index me = lp.A_eq.rows();
        VectorXd stat = lp.c;
        if (mi > 0) {
            stat += lp.A_ineq.transpose() * dual.head(mi);
        }
        if (me > 0) {
            stat += lp.A_eq.transpose() * dual.tail(me);
        }
        double res = stat.size() > 0 ? stat.lpNorm<Eigen::Infinity>() : 0.0;
        if (mi > 0) {
            const VectorXd slack = lp.b_ineq - lp.A_ineq * x;
            res = std::max(res, std::max(0.0, -slack.minCoeff()));
            res = std::max(res, (dual.head(mi).array() * slack.array()).abs().maxCoeff());
            res = std::max(res, std::max(0.0, -dual.head(mi).minCoeff()));
        }
        if (me > 0) {
            res = std::max(res, (lp.A_eq * x - lp.b_eq).lpNorm<Eigen::Infinity>());
        }
        return res;
    }

} // namespace

SolveStatus solve_lp(const LinearProgram& lp, const LpOptions& options)
{
    const Eigen::Index n = lp.c.size();
    const Eigen::Index mi = lp.A_ineq.rows();
    const Eigen::Index me = lp.A_eq.rows();
    require_dims(mi == 0 || lp.A_ineq.cols() == n, "solve_lp: A_ineq column count");
    require_dims(me == 0 || lp.A_eq.cols() == n, "solve_lp: A_eq column count");
    require_dims(lp.b_ineq.size() == mi, "solve_lp: b_ineq size");
    require_dims(lp.b_eq.size() == me, "solve_lp: b_eq size");

    const Eigen::Index m = mi + me;
    std::vector<double> sign(static_cast<std::size_t>(m), 1.0);
    int num_art = 0;
    for (Eigen::Index r = 0; r < m; ++r) {
        const double br = r < mi ? lp.b_ineq(r) : lp.b_eq(r - mi);
        if (br < 0.0) {
            sign[static_cast<std::size_t>(r)] = -1.0;
        }
        if (r >= mi || br < 0.0) {
            ++num_art;
        }
    }
    const int slack0 = static_cast<int>(2 * n);
    const int art0 = static_cast<int>(2 * n + mi);
    const int ncols = art0 + num_art;

    // Standard-form constraint matrix without artificials, kept for the final
    // basis solve.
    MatrixXd A_std = MatrixXd::Zero(m, art0);
    VectorXd b_std(m);
    for (Eigen::Index r = 0; r < m; ++r) {
        const double s = sign[static_cast<std::size_t>(r)];
        const auto row = r < mi ? lp.A_ineq.row(r) : lp.A_eq.row(r - mi);
        A_std.block(r, 0, 1, n) = s * row;
        A_std.block(r, n, 1, n) = -s * row;
        if (r < mi) {
            A_std(r, slack0 + r) = s;
        }
        b_std(r) = s * (r < mi ? lp.b_ineq(r) : lp.b_eq(r - mi));
    }

    MatrixXd body = MatrixXd::Zero(m + 1, ncols + 1);
    body.topLeftCorner(m, art0) = A_std;
    body.col(ncols).head(m) = b_std;
    std::vector<int> basis(static_cast<std::size_t>(m));
    {
        int a = art0;
        for (Eigen::Index r = 0; r < m; ++r) {
            if (r < mi && sign[static_cast<std::size_t>(r)] > 0) {
                basis[static_cast<std::size_t>(r)] = slack0 + static_cast<int>(r);
            } else {
                body(r, a) = 1.0;
                basis[static_cast<std::size_t>(r)] = a++;
            }
        }
    }
    Tableau tab(std::move(body), std::move(basis), ncols);

    SolveStatus status;
    int iterations = 0;

    if (num_art > 0) {
        VectorXd phase1 = VectorXd::Zero(ncols);
        phase1.tail(num_art).setOnes();
        tab.set_costs(phase1);
        const SolveKind k1 = tab.iterate(options, iterations);
        if (k1 == SolveKind::MaxIter) {
            status.kind = SolveKind::MaxIter;
            status.iterations = iterations;
            return status;
        }
        const double scale = 1.0 + (m > 0 ? b_std.lpNorm<Eigen::Infinity>() : 0.0);
        if (tab.objective() > options.feasibility_tolerance * scale) {
            status.kind = SolveKind::Infeasible;
            status.iterations = iterations;
            return status;
        }
        // Drive zero-level artificials out of the basis; rows where that is
        // impossible are linearly dependent and are dropped.
        for (Eigen::Index i = tab.rows() - 1; i >= 0; --i) {
            if (tab.basis()[static_cast<std::size_t>(i)] < art0) {
                continue;
            }
            int col = -1;
            double best = options.pivot_tolerance;
            for (int j = 0; j < art0; ++j) {
                if (std::abs(tab.at(i, j)) > best) {
                    best = std::abs(tab.at(i, j));
                    col = j;
                }
            }
            if (col >= 0) {
                tab.pivot(i, col);
            } else {
                tab.drop_row(i);
            }
        }
        for (int j = art0; j < ncols; ++j) {
            tab.forbid(j);
        }
    }

    VectorXd cost = VectorXd::Zero(ncols);
    cost.head(n) = lp.c;
    cost.segment(n, n) = -lp.c;
    tab.set_costs(cost);
    const SolveKind k2 = tab.iterate(options, iterations);
    status.iterations = iterations;
    if (k2 != SolveKind::Optimal) {
        status.kind = k2;
        return status;
    }

    // Rows that survived phase one, in original numbering.
    std::vector<Eigen::Index> alive;
    {
        std::vector<bool> dead(static_cast<std::size_t>(m), false);
        for (int r : tab.dropped_rows()) {
            dead[static_cast<std::size_t>(r)] = true;
        }
        for (Eigen::Index r = 0; r < m; ++r) {
            if (!dead[static_cast<std::size_t>(r)]) {
                alive.push_back(r);
            }
        }
    }
    const auto mb = static_cast<Eigen::Index>(alive.size());
    VectorXd y = VectorXd::Zero(art0);
    VectorXd pi = VectorXd::Zero(m);
    if (mb > 0) {
        MatrixXd Bmat(mb, mb);
        VectorXd bb(mb);
        VectorXd cb(mb);
        for (Eigen::Index i = 0; i < mb; ++i) {
            bb(i) = b_std(alive[static_cast<std::size_t>(i)]);
        }
        for (Eigen::Index k = 0; k < mb; ++k) {
            const int col = tab.basis()[static_cast<std::size_t>(k)];
            for (Eigen::Index i = 0; i < mb; ++i) {
                Bmat(i, k) = A_std(alive[static_cast<std::size_t>(i)], col);
            }
            cb(k) = cost(col);
        }
        Eigen::PartialPivLU<MatrixXd> lu(Bmat);
        VectorXd yb = lu.solve(bb);
        VectorXd pib = lu.transpose().solve(cb);
        if (!yb.allFinite() || !pib.allFinite()) {
            for (Eigen::Index k = 0; k < mb; ++k) {
                yb(k) = tab.rhs(k);
            }
            pib.setZero();
        }
        for (Eigen::Index k = 0; k < mb; ++k) {
            y(tab.basis()[static_cast<std::size_t>(k)]) = std::max(yb(k), 0.0);
            pi(alive[static_cast<std::size_t>(k)]) = pib(k);
        }
    }

    status.kind = SolveKind::Optimal;
    status.primal = y.head(n) - y.segment(n, n);
    status.dual.resize(m);
    for (Eigen::Index r = 0; r < m; ++r) {
        double lambda = -sign[static_cast<std::size_t>(r)] * pi(r);
        if (r < mi) {
            lambda = std::max(lambda, 0.0);
        }
        status.dual(r) = lambda;
    }
    status.objective = lp.c.dot(status.primal);
    status.kkt_residual = lp_kkt(lp, status.primal, status.dual);
    return status;
}

SolveStatus solve_lp(const Eigen::VectorXd& c, const Eigen::MatrixXd& A_ineq, const Eigen::VectorXd& b_ineq,
    const Eigen::MatrixXd& A_eq, const Eigen::VectorXd& b_eq)
{
    LinearProgram lp;
    lp.c = c;
    lp.A_ineq = A_ineq.rows() > 0 ? A_ineq : Eigen::MatrixXd(0, c.size());
    lp.b_ineq = b_ineq;
    lp.A_eq = A_eq.rows() > 0 ? A_eq : Eigen::MatrixXd(0, c.size());
    lp.b_eq = b_eq;
    return solve_lp(lp);
}

} // namespace armpc
