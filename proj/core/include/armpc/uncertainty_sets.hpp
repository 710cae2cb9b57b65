#pragma once

#include "armpc/estimation.hpp"
#include "armpc/geometry.hpp"

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include <optional>

namespace armpc {

/// Adaptive disturbance sets of one budget refresh. All boxes are centered
/// at the origin.
struct UncertaintyBudget {
    Box F_hat;   ///< running intersection of the support estimates of f
    Box D_err;   ///< model error support
    Box D_hat;   ///< compound disturbance support under cancellation
    Box D_bench; ///< F_hat + V, the disturbance set of the benchmark
    Box V;
    Eigen::MatrixXd B_pinv;
    Eigen::MatrixXd proj_range; ///< B B^+
    Eigen::MatrixXd proj_perp;  ///< I - B B^+
};

/// (B'B)^-1 B'. Requires B to have full column rank.
Eigen::MatrixXd left_pseudo_inverse(const Eigen::MatrixXd& B);

/// Half-widths ||w_hat_i|| + 2 max_norm_i.
Box support_box_F(const LinearParamModel& model);
/// Componentwise minimum of half-widths; `prev` absent returns F_now.
Box recursive_F_hat(const std::optional<Box>& prev, const Box& F_now);
/// Half-widths equal the published max-norm bounds.
Box error_box_D(const LinearParamModel& model);
/// Box hull of (I - BB^+) F_hat + BB^+ D + V.
Box compound_D_hat(const Eigen::MatrixXd& proj_perp, const Box& F_hat, const Eigen::MatrixXd& proj_range, const Box& D,
    const Box& V);
Box benchmark_D_prime(const Box& F_hat, const Box& V);
/// U minus the box hull of B^+ F_hat.
Polytope input_tightening(const Polytope& U, const Eigen::MatrixXd& B_pinv, const Box& F_hat);

/// Builds the next budget from the published model. `range`, when given, is
/// an a-priori box known to contain f; F is intersected with it.
UncertaintyBudget make_budget(const std::optional<UncertaintyBudget>& prev, const LinearParamModel& model,
    const Eigen::MatrixXd& B, const Box& V, const std::optional<Box>& range = std::nullopt);

/// next is nested in prev set by set (F_hat, D_err, D_hat, D_bench).
bool budget_nested(const UncertaintyBudget& next, const UncertaintyBudget& prev, double tol = 1e-7);

/// Symmetrizes a noise box about the origin by taking the larger one-sided bound.
Box symmetrize(const Box& V);

void to_json(nlohmann::json& j, const UncertaintyBudget& budget);

} // namespace armpc
