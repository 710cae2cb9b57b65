#pragma once

#include "armpc/errors.hpp"
#include "armpc/features.hpp"
#include "armpc/geometry.hpp"

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include <memory>
#include <vector>

namespace armpc {

/// Raised when the set-membership feasible parameter set becomes empty, i.e.
/// no parameter explains the data within the noise bound.
class EmptyFeasibleSetError : public EmptySetError {
public:
    using EmptySetError::EmptySetError;
};

/// Per-row feature selection. Row i of W may only be nonzero on masks[i]; an
/// empty mask marks a row that is known to be zero.
using RowMasks = std::vector<std::vector<Eigen::Index>>;

RowMasks full_masks(Eigen::Index n, Eigen::Index d);

enum class ConfidenceShape { Ball, Ellipsoid };

/// Point estimate W_hat with per-row confidence sets W_i.
///
/// Ball:      {w : ||w|| <= level_i}
/// Ellipsoid: {w : w' Lambda_i w <= level_i^2}
struct LinearParamModel {
    Eigen::MatrixXd W_hat;
    /// max over W_i of ||w||, the quantity every set bound is built from.
    Eigen::VectorXd max_norm;
    ConfidenceShape shape = ConfidenceShape::Ball;
    Eigen::VectorXd level;
    std::vector<Eigen::MatrixXd> precision;
    RowMasks masks;
    FeatureMapPtr features;

    Eigen::Index rows() const { return W_hat.rows(); }
    Eigen::VectorXd predict(const Eigen::VectorXd& x, const Eigen::VectorXd& z = Eigen::VectorXd()) const;
    /// True when W_true - W_hat lies in every row's confidence set.
    bool covers(const Eigen::MatrixXd& W_true, double rel_tol = 1e-9) const;
};

/// The candidate is published only if no row's max-norm bound grew.
LinearParamModel publish_gate(const LinearParamModel& candidate, const LinearParamModel& current);

/// y = x_next - A x - B u.
Eigen::VectorXd residual(const Eigen::VectorXd& x_next, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
    const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

// ---------------------------------------------------------------- set membership

struct SetMembershipState {
    RowMasks masks;
    std::vector<Polytope> theta; ///< feasible set of row i in R^{|mask_i|}
    std::vector<Ball> balls;     ///< current enclosing balls (non-increasing radii)
    Eigen::Index d = 0;
    int updates = 0;
};

/// Theta_i(0) = {w : ||w - W0_i||_inf <= half_width_i}.
SetMembershipState sm_init(const RowMasks& masks, const Eigen::MatrixXd& W0, const Eigen::VectorXd& half_width);

/// Intersects Theta_i with {w : |y_i - w' phi_i| <= V_i}. V must be an
/// origin-symmetric box. Throws EmptyFeasibleSetError when a row empties.
SetMembershipState sm_update(const SetMembershipState& state, const Eigen::VectorXd& phi, const Eigen::VectorXd& y,
    const Box& V);

/// Row-wise enclosing-ball centers and radii.
LinearParamModel sm_point_estimate(const SetMembershipState& state, FeatureMapPtr features = nullptr);

// ---------------------------------------------------------------- Bayesian linear regression

struct BlrRow {
    Eigen::VectorXd mean;
    Eigen::MatrixXd precision;
    Eigen::MatrixXd covariance; ///< inverse precision, updated recursively
    Eigen::MatrixXd precision0;
    double sigma = 1.0;
};

struct BLRState {
    RowMasks masks;
    std::vector<BlrRow> rows;
    Eigen::Index d = 0;
    double delta = 0.05;
    /// Degrees of freedom of the chi-square term; 0 means the row's feature
    /// count.
    int chi2_dof = 0;
    int t = 0;
};

/// Prior w_i ~ N(mean_i, sigma_i^2 precision_i^-1).
BLRState blr_init(const RowMasks& masks, const Eigen::MatrixXd& W0, const std::vector<Eigen::MatrixXd>& precision0,
    const Eigen::VectorXd& sigma, double delta);

/// Flat prior: least-squares estimate from warm-up data (rows of Phi and Y are
/// samples). Lambda_i(0) = sum phi phi' + ridge I.
BLRState blr_from_data(const RowMasks& masks, const Eigen::MatrixXd& Phi, const Eigen::MatrixXd& Y,
    const Eigen::VectorXd& sigma, double delta, double ridge = 0.0);

/// Rank-one mean and inverse-precision update for every row.
BLRState blr_update(const BLRState& state, const Eigen::VectorXd& phi, const Eigen::VectorXd& y);

using BlrUpdateFn = BLRState (*)(const BLRState&, const Eigen::VectorXd&, const Eigen::VectorXd&);

/// beta_t(delta / n) per row.
Eigen::VectorXd blr_beta(const BLRState& state);
/// Max-norm element of each row's confidence ellipsoid, sigma_i beta / sqrt(lambda_min(Lambda_i)).
Eigen::VectorXd blr_confidence(const BLRState& state);
LinearParamModel blr_model(const BLRState& state, FeatureMapPtr features = nullptr);

/// Prior file: {"delta", "sigma": [..], "rows": [{"mean": [..], "precision": [[..]]}], "masks": [[..]]}.
BLRState blr_prior_from_json(const nlohmann::json& j, Eigen::Index d);
nlohmann::json blr_prior_to_json(const BLRState& state);

// ---------------------------------------------------------------- estimator objects

/// Common interface used by the controller.
class Estimator {
public:
    virtual ~Estimator() = default;
    virtual void observe(const Eigen::VectorXd& phi, const Eigen::VectorXd& y) = 0;
    virtual LinearParamModel model() const = 0;
    virtual std::unique_ptr<Estimator> clone() const = 0;
};

class SetMembershipEstimator final : public Estimator {
public:
    SetMembershipEstimator(SetMembershipState state, Box V, FeatureMapPtr features);
    void observe(const Eigen::VectorXd& phi, const Eigen::VectorXd& y) override;
    LinearParamModel model() const override;
    std::unique_ptr<Estimator> clone() const override;
    const SetMembershipState& state() const { return state_; }

private:
    SetMembershipState state_;
    Box V_;
    FeatureMapPtr features_;
};

class BlrEstimator final : public Estimator {
public:
    BlrEstimator(BLRState state, FeatureMapPtr features);
    void observe(const Eigen::VectorXd& phi, const Eigen::VectorXd& y) override;
    LinearParamModel model() const override;
    std::unique_ptr<Estimator> clone() const override;
    const BLRState& state() const { return state_; }

private:
    BLRState state_;
    FeatureMapPtr features_;
};

} // namespace armpc
