#include "armpc/invariant.hpp"

#include "armpc/errors.hpp"
#include "armpc/optimization.hpp"

#include <functional>
#include <vector>

namespace armpc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

    using SupportFn = std::function<double(const VectorXd&)>;

    RpiResult max_rpi_impl(const MatrixXd& A_cl, const SupportFn& h_D, const Polytope& X, const Polytope& U_tight,
        const MatrixXd& K, const RpiOptions& options)
    {
        const Index n = A_cl.rows();
        require_dims(A_cl.cols() == n, "max_rpi: A_cl must be square");
        require_dims(X.dim() == n, "max_rpi: X dimension");
        require_dims(K.cols() == n && K.rows() == U_tight.dim(), "max_rpi: K must be m x n with m = dim(U_tight)");

        RpiResult result;
        if (U_tight.is_empty()) {
            result.set = Polytope::empty(n);
            result.empty = true;
            result.iterations = 0;
            return result;
        }
        const Polytope base = X.intersect(U_tight.preimage(-K)).remove_duplicate_rows();
        const Index nb = base.rows();

        std::vector<VectorXd> rows;
        std::vector<double> offsets;
        auto current = [&]() {
            MatrixXd A(static_cast<Index>(rows.size()), n);
            VectorXd b(static_cast<Index>(rows.size()));
            for (std::size_t k = 0; k < rows.size(); ++k) {
                A.row(static_cast<Index>(k)) = rows[k].transpose();
                b(static_cast<Index>(k)) = offsets[k];
            }
            return std::pair<MatrixXd, VectorXd>(std::move(A), std::move(b));
        };
        auto make_empty = [&](int iterations) {
            result.set = Polytope::empty(n);
            result.empty = true;
            result.iterations = iterations;
            return result;
        };

        // Level 0.
        for (Index r = 0; r < nb; ++r) {
            rows.push_back(base.A().row(r).transpose());
            offsets.push_back(base.b()(r));
        }
        {
            auto [A, b] = current();
            if (A.rows() > 0 && solve_lp(VectorXd::Zero(n), A, b).kind == SolveKind::Infeasible) {
                return make_empty(0);
            }
        }

        // G holds g A_cl^k for every base row; shrink accumulates the disturbance
        // supports sum_{i<k} h_D(A_cl^i' g').
        MatrixXd G = base.A();
        VectorXd shrink = VectorXd::Zero(nb);
        int level = 0;
        bool converged = false;
        while (level < options.max_iterations) {
            for (Index r = 0; r < nb; ++r) {
                shrink(r) += h_D(G.row(r).transpose());
            }
            G = G * A_cl;
            ++level;
            bool all_redundant = true;
            auto [A, b] = current();
            for (Index r = 0; r < nb; ++r) {
                const VectorXd g = G.row(r).transpose();
                const double h = base.b()(r) - shrink(r);
                if (g.lpNorm<Eigen::Infinity>() <= 1e-13) {
                    if (h < -options.redundancy_tolerance) {
                        return make_empty(level);
                    }
                    continue;
                }
                const SolveStatus s = solve_lp(-g, A, b);
                if (s.kind == SolveKind::Infeasible) {
                    return make_empty(level);
                }
                if (s.kind == SolveKind::Optimal && -s.objective <= h + options.redundancy_tolerance * (1.0 + std::abs(h))) {
                    continue;
                }
                if (s.kind == SolveKind::MaxIter) {
                    throw NumericalError("max_rpi: LP iteration limit");
                }
                all_redundant = false;
                rows.push_back(g);
                offsets.push_back(h);
            }
            if (all_redundant) {
                converged = true;
                break;
            }
            auto [A2, b2] = current();
            if (solve_lp(VectorXd::Zero(n), A2, b2).kind == SolveKind::Infeasible) {
                return make_empty(level);
            }
        }
        auto [A, b] = current();
        result.set = Polytope(std::move(A), std::move(b));
        result.converged = converged;
        result.iterations = level;
        return result;
    }

} // namespace

RpiResult max_rpi(const MatrixXd& A_cl, const Box& D, const Polytope& X, const Polytope& U_tight, const MatrixXd& K,
    const RpiOptions& options)
{
    require_dims(D.dim() == A_cl.rows(), "max_rpi: D dimension");
    if (D.is_empty()) {
        throw EmptySetError("max_rpi: disturbance set is empty");
    }
    return max_rpi_impl(A_cl, [&](const VectorXd& dir) { return support(D, dir); }, X, U_tight, K, options);
}

RpiResult max_rpi(const MatrixXd& A_cl, const Polytope& D, const Polytope& X, const Polytope& U_tight,
    const MatrixXd& K, const RpiOptions& options)
{
    require_dims(D.dim() == A_cl.rows(), "max_rpi: D dimension");
    return max_rpi_impl(A_cl, [&](const VectorXd& dir) { return support(D, dir); }, X, U_tight, K, options);
}

bool is_rpi(const Polytope& O, const MatrixXd& A_cl, const Box& D, const Polytope& X, const Polytope& U_tight,
    const MatrixXd& K, double tol)
{
    if (O.is_empty()) {
        return false;
    }
    if (!contains(X, O, tol)) {
        return false;
    }
    if (!contains(U_tight.preimage(-K), O, tol)) {
        return false;
    }
    // A_cl O + D in O  <=>  max_{x in O} o' A_cl x + h_D(o) <= b_o.
    for (Index r = 0; r < O.rows(); ++r) {
        const VectorXd o = O.A().row(r).transpose();
        const SolveStatus s = solve_lp(-(A_cl.transpose() * o), O.A(), O.b());
        if (s.kind != SolveKind::Optimal) {
            return false;
        }
        if (-s.objective + support(D, o) > O.b()(r) + tol) {
            return false;
        }
    }
    return true;
}

} // namespace armpc
