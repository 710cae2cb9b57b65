#include "armpc/uncertainty_sets.hpp"

#include "armpc/errors.hpp"

#include <nlohmann/json.hpp>

namespace armpc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd left_pseudo_inverse(const MatrixXd& B)
{
    const MatrixXd BtB = B.transpose() * B;
    Eigen::LLT<MatrixXd> llt(BtB);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("left_pseudo_inverse: B does not have full column rank");
    }
    return llt.solve(B.transpose());
}

Box support_box_F(const LinearParamModel& model)
{
    const Index n = model.rows();
    VectorXd hw(n);
    for (Index i = 0; i < n; ++i) {
        hw(i) = model.W_hat.row(i).norm() + 2.0 * model.max_norm(i);
    }
    return Box::symmetric(hw);
}

Box recursive_F_hat(const std::optional<Box>& prev, const Box& F_now)
{
    if (!prev) {
        return F_now;
    }
    require_dims(prev->dim() == F_now.dim(), "recursive_F_hat: dimension mismatch");
    return Box::symmetric(prev->half_widths().cwiseMin(F_now.half_widths()));
}

Box error_box_D(const LinearParamModel& model) { return Box::symmetric(model.max_norm); }

Box compound_D_hat(const MatrixXd& proj_perp, const Box& F_hat, const MatrixXd& proj_range, const Box& D, const Box& V)
{
    return minkowski_sum(minkowski_sum(linear_map(proj_perp, F_hat), linear_map(proj_range, D)), V);
}

Box benchmark_D_prime(const Box& F_hat, const Box& V) { return minkowski_sum(F_hat, V); }

Polytope input_tightening(const Polytope& U, const MatrixXd& B_pinv, const Box& F_hat)
{
    return pontryagin_diff(U, linear_map(B_pinv, F_hat));
}

Box symmetrize(const Box& V)
{
    if (V.is_empty()) {
        return V;
    }
    return Box::symmetric(V.upper().cwiseAbs().cwiseMax(V.lower().cwiseAbs()));
}

UncertaintyBudget make_budget(const std::optional<UncertaintyBudget>& prev, const LinearParamModel& model,
    const MatrixXd& B, const Box& V, const std::optional<Box>& range)
{
    const Index n = B.rows();
    require_dims(model.rows() == n && V.dim() == n, "make_budget: dimension mismatch");
    if (!V.is_origin_symmetric()) {
        throw std::invalid_argument("make_budget: V must be origin-symmetric (see symmetrize)");
    }
    UncertaintyBudget b;
    b.V = V;
    b.B_pinv = left_pseudo_inverse(B);
    b.proj_range = B * b.B_pinv;
    b.proj_perp = MatrixXd::Identity(n, n) - b.proj_range;
    Box F_now = support_box_F(model);
    if (range) {
        F_now = Box::symmetric(F_now.half_widths().cwiseMin(symmetrize(*range).half_widths()));
    }
    b.F_hat = recursive_F_hat(prev ? std::optional<Box>(prev->F_hat) : std::nullopt, F_now);
    b.D_err = error_box_D(model);
    if (prev) {
        // The published bounds are already non-increasing; the minimum only
        // absorbs rounding.
        b.D_err = Box::symmetric(b.D_err.half_widths().cwiseMin(prev->D_err.half_widths()));
    }
    b.D_hat = compound_D_hat(b.proj_perp, b.F_hat, b.proj_range, b.D_err, V);
    b.D_bench = benchmark_D_prime(b.F_hat, V);
    return b;
}

bool budget_nested(const UncertaintyBudget& next, const UncertaintyBudget& prev, double tol)
{
    return contains(prev.F_hat, next.F_hat, tol) && contains(prev.D_err, next.D_err, tol)
        && contains(prev.D_hat, next.D_hat, tol) && contains(prev.D_bench, next.D_bench, tol);
}

void to_json(nlohmann::json& j, const UncertaintyBudget& budget)
{
    j = nlohmann::json {
        { "F_hat", budget.F_hat },
        { "D_err", budget.D_err },
        { "D_hat", budget.D_hat },
        { "D_bench", budget.D_bench },
        { "V", budget.V },
    };
}

} // namespace armpc
