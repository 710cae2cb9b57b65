#include "armpc/controller.hpp"

#include "armpc/errors.hpp"

namespace armpc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string_view to_string(Variant v)
{
    switch (v) {
    case Variant::AdaptiveCE_A:
        return "AdaptiveCE_A";
    case Variant::AdaptiveCE_B:
        return "AdaptiveCE_B";
    case Variant::AdaptiveCE_C:
        return "AdaptiveCE_C";
    case Variant::BenchmarkARMPC:
        return "BenchmarkARMPC";
    case Variant::NaiveTube:
        return "NaiveTube";
    }
    return "unknown";
}

Variant variant_from_string(std::string_view s)
{
    if (s == "A" || s == "AdaptiveCE_A") {
        return Variant::AdaptiveCE_A;
    }
    if (s == "B" || s == "AdaptiveCE_B") {
        return Variant::AdaptiveCE_B;
    }
    if (s == "C" || s == "AdaptiveCE_C") {
        return Variant::AdaptiveCE_C;
    }
    if (s == "benchmark" || s == "BenchmarkARMPC") {
        return Variant::BenchmarkARMPC;
    }
    if (s == "naive" || s == "NaiveTube") {
        return Variant::NaiveTube;
    }
    throw ValidationError("/controller/variant", "unknown variant '" + std::string(s) + "'");
}

VectorXd ce_policy(const VectorXd& u0, const MatrixXd& B_pinv, const VectorXd& f_hat)
{
    require_dims(B_pinv.rows() == u0.size() && B_pinv.cols() == f_hat.size(), "ce_policy: dimension mismatch");
    return u0 - B_pinv * f_hat;
}

namespace {

    bool same_box(const Box& a, const Box& b)
    {
        return a.dim() == b.dim() && a.is_empty() == b.is_empty() && a.center() == b.center()
            && a.half_widths() == b.half_widths();
    }

    bool same_polytope(const Polytope& a, const Polytope& b)
    {
        return a.dim() == b.dim() && a.rows() == b.rows() && a.A() == b.A() && a.b() == b.b();
    }

    LinearParamModel zero_model(Index n)
    {
        LinearParamModel m;
        m.W_hat = MatrixXd::Zero(n, 0);
        m.max_norm = VectorXd::Zero(n);
        m.level = VectorXd::Zero(n);
        m.masks.assign(static_cast<std::size_t>(n), {});
        return m;
    }

} // namespace

Controller::Controller(ControllerConfig config, std::unique_ptr<Estimator> estimator)
    : config_(std::move(config))
    , estimator_(std::move(estimator))
{
    const Index n = config_.A.rows();
    const Index m = config_.B.cols();
    require_dims(config_.A.cols() == n && config_.B.rows() == n, "Controller: A must be n x n and B n x m");
    require_dims(config_.X.dim() == n && config_.V.dim() == n && config_.U.dim() == m, "Controller: set dimensions");
    if (!estimator_ && config_.variant != Variant::NaiveTube) {
        throw std::invalid_argument("Controller: an estimator is required for this variant");
    }
    if (config_.f_range) {
        require_dims(config_.f_range->dim() == n, "Controller: f_range dimension");
    }
    const LqrSolution lqr = dlqr(config_.A, config_.B, config_.Q, config_.R);
    K_ = lqr.K;
    P_ = lqr.P;
    published_ = estimator_ ? estimator_->model() : zero_model(n);
    in_use_ = published_;
    refresh(true, true);
}

bool Controller::cancels() const
{
    return config_.variant == Variant::AdaptiveCE_A || config_.variant == Variant::AdaptiveCE_B
        || config_.variant == Variant::AdaptiveCE_C;
}

Box Controller::disturbance_box(const UncertaintyBudget& b) const
{
    switch (config_.variant) {
    case Variant::BenchmarkARMPC:
        return b.D_bench;
    case Variant::NaiveTube:
        return symmetrize(config_.V);
    default:
        return b.D_hat;
    }
}

Polytope Controller::effective_inputs(const UncertaintyBudget& b) const
{
    if (!cancels()) {
        return config_.U;
    }
    return input_tightening(config_.U, b.B_pinv, b.F_hat);
}

void Controller::refresh(bool budget, bool terminal)
{
    bool changed = false;
    if (budget) {
        const bool first = sets_.D_box.dim() == 0;
        const UncertaintyBudget next = make_budget(first ? std::nullopt : std::optional<UncertaintyBudget>(sets_.budget),
            in_use_, config_.B, symmetrize(config_.V), config_.f_range);
        const Box D = disturbance_box(next);
        const Polytope U_eff = effective_inputs(next);
        changed = first || !same_box(D, sets_.D_box) || !same_polytope(U_eff, sets_.U_eff);
        sets_.budget = next;
        sets_.D_box = D;
        sets_.U_eff = U_eff;
    }
    if (terminal && (O_D_.dim() == 0 || !same_box(O_D_, sets_.D_box) || !same_polytope(O_U_, sets_.U_eff))) {
        const MatrixXd A_cl = config_.A - config_.B * K_;
        if (sets_.U_eff.is_empty()) {
            sets_.O = RpiResult { Polytope::empty(config_.A.rows()), true, true, 0 };
        } else {
            sets_.O = max_rpi(A_cl, sets_.D_box, config_.X, sets_.U_eff, K_, config_.rpi);
        }
        O_D_ = sets_.D_box;
        O_U_ = sets_.U_eff;
        changed = true;
    }
    if (changed) {
        ++sets_.id;
    }
}

RobustMPCProblem Controller::problem() const
{
    RobustMPCProblem p;
    p.A = config_.A;
    p.B = config_.B;
    p.N = config_.N;
    p.Q = config_.Q;
    p.R = config_.R;
    p.P = P_;
    p.K_term = K_;
    p.X = config_.X;
    p.U_eff = sets_.U_eff;
    p.D_box = sets_.D_box;
    p.O = sets_.O.set;
    p.fixed_gain = config_.fixed_gain;
    return p;
}

StepDiagnostics Controller::act(const VectorXd& x, int /*t*/, const VectorXd& z)
{
    StepDiagnostics diag;
    const Index n = config_.A.rows();
    const Index m = config_.B.cols();
    diag.sets_id = sets_.id;
    diag.model_frozen = frozen_;
    diag.u = VectorXd::Zero(m);
    diag.u0 = VectorXd::Zero(m);
    diag.f_hat = VectorXd::Zero(n);
    if (sets_.O.empty || sets_.U_eff.is_empty()) {
        diag.status = SolveKind::Infeasible;
        return diag;
    }
    const MPCSolution sol = solve(problem(), x, config_.qp);
    diag.status = sol.status;
    if (!sol.optimal()) {
        return diag;
    }
    diag.objective = sol.objective;
    diag.kkt_residual = sol.kkt_residual;
    diag.u0 = sol.u0;
    diag.u = sol.u0;
    if (cancels() && in_use_.W_hat.cols() > 0) {
        // Clipping to F_hat keeps B^+ f_hat inside the input tightening; it
        // never moves f_hat away from any f in F_hat.
        const VectorXd hw = sets_.budget.F_hat.half_widths();
        diag.f_hat = in_use_.predict(x, z).cwiseMax(-hw).cwiseMin(hw);
        diag.u = ce_policy(sol.u0, sets_.budget.B_pinv, diag.f_hat);
    }
    return diag;
}

void Controller::observe(const VectorXd& x, const VectorXd& u, const VectorXd& x_next, const VectorXd& z)
{
    if (!estimator_ || frozen_) {
        return;
    }
    const VectorXd y = residual(x_next, x, u, config_.A, config_.B);
    if (!published_.features) {
        throw std::logic_error("Controller: the estimator model carries no feature map");
    }
    try {
        estimator_->observe((*published_.features)(x, z), y);
    } catch (const EmptyFeasibleSetError&) {
        frozen_ = true;
        return;
    }
    published_ = publish_gate(estimator_->model(), published_);
    switch (config_.variant) {
    case Variant::AdaptiveCE_A:
    case Variant::BenchmarkARMPC:
        in_use_ = published_;
        refresh(true, true);
        break;
    case Variant::AdaptiveCE_B:
        in_use_ = published_;
        refresh(true, false);
        break;
    default:
        break;
    }
}

void Controller::end_episode()
{
    switch (config_.variant) {
    case Variant::AdaptiveCE_B:
        refresh(false, true);
        break;
    case Variant::AdaptiveCE_C:
        in_use_ = published_;
        refresh(true, true);
        break;
    default:
        break;
    }
}

} // namespace armpc
