#pragma once

#include "armpc/estimation.hpp"
#include "armpc/geometry.hpp"
#include "armpc/invariant.hpp"
#include "armpc/optimization.hpp"
#include "armpc/robust_mpc.hpp"
#include "armpc/uncertainty_sets.hpp"

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace armpc {

enum class Variant { AdaptiveCE_A, AdaptiveCE_B, AdaptiveCE_C, BenchmarkARMPC, NaiveTube };

std::string_view to_string(Variant v);
/// Accepts "A", "B", "C", "benchmark", "naive" and the enum spellings.
Variant variant_from_string(std::string_view s);

struct ControllerConfig {
    Variant variant = Variant::AdaptiveCE_A;
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    Eigen::MatrixXd Q;
    Eigen::MatrixXd R;
    int N = 3;
    Polytope X;
    Polytope U;
    Box V;
    /// A-priori box known to contain f.
    std::optional<Box> f_range;
    bool fixed_gain = false;
    RpiOptions rpi;
    QpOptions qp;
};

/// Budget-dependent MPC ingredients. `id` changes whenever any set changes.
struct ControlSets {
    UncertaintyBudget budget;
    Box D_box;
    Polytope U_eff;
    RpiResult O;
    int id = 0;
};

struct StepDiagnostics {
    Eigen::VectorXd u;
    Eigen::VectorXd u0;
    /// The cancelled term f_hat(x) after clipping to F_hat; zero for policies
    /// without cancellation.
    Eigen::VectorXd f_hat;
    SolveKind status = SolveKind::Infeasible;
    double objective = 0.0;
    double kkt_residual = 0.0;
    int sets_id = 0;
    bool model_frozen = false;
};

/// Certainty-equivalent input u0 - B^+ f_hat.
Eigen::VectorXd ce_policy(const Eigen::VectorXd& u0, const Eigen::MatrixXd& B_pinv, const Eigen::VectorXd& f_hat);

/// One closed-loop policy. act() solves the MPC with the current sets;
/// observe() feeds the transition to the estimator and refreshes the sets as
/// the variant allows; end_episode() performs the between-episode refresh.
class Controller {
public:
    /// `estimator` may be null only for NaiveTube.
    Controller(ControllerConfig config, std::unique_ptr<Estimator> estimator);

    StepDiagnostics act(const Eigen::VectorXd& x, int t, const Eigen::VectorXd& z = Eigen::VectorXd());
    void observe(const Eigen::VectorXd& x, const Eigen::VectorXd& u, const Eigen::VectorXd& x_next,
        const Eigen::VectorXd& z = Eigen::VectorXd());
    void end_episode();

    const ControllerConfig& config() const { return config_; }
    const ControlSets& sets() const { return sets_; }
    /// Latest published model (the one the sets are built from may be older
    /// for variants B and C).
    const LinearParamModel& model() const { return published_; }
    const LinearParamModel& model_in_use() const { return in_use_; }
    const Estimator* estimator() const { return estimator_.get(); }
    const Eigen::MatrixXd& K_term() const { return K_; }
    const Eigen::MatrixXd& P_term() const { return P_; }
    /// Set when the estimator reported an empty feasible set; the model is
    /// frozen from then on and the guarantees no longer apply.
    bool model_frozen() const { return frozen_; }
    bool cancels() const;

    RobustMPCProblem problem() const;

private:
    void refresh(bool budget, bool terminal);
    Box disturbance_box(const UncertaintyBudget& b) const;
    Polytope effective_inputs(const UncertaintyBudget& b) const;

    ControllerConfig config_;
    std::unique_ptr<Estimator> estimator_;
    LinearParamModel published_;
    LinearParamModel in_use_;
    ControlSets sets_;
    // Budget that generated sets_.O; O is only recomputed when it changes.
    Box O_D_;
    Polytope O_U_;
    Eigen::MatrixXd K_;
    Eigen::MatrixXd P_;
    bool frozen_ = false;
};

} // namespace armpc
