#include "armpc/estimation.hpp"

#include "armpc/json_io.hpp"
#include "armpc/optimization.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <nlohmann/json.hpp>

namespace armpc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

    VectorXd select(const VectorXd& v, const std::vector<Index>& idx)
    {
        VectorXd out(static_cast<Index>(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k) {
            out(static_cast<Index>(k)) = v(idx[k]);
        }
        return out;
    }

    void scatter(MatrixXd& W, Index row, const std::vector<Index>& idx, const VectorXd& w)
    {
        for (std::size_t k = 0; k < idx.size(); ++k) {
            W(row, idx[k]) = w(static_cast<Index>(k));
        }
    }

    void check_masks(const RowMasks& masks, Index d)
    {
        for (const auto& mask : masks) {
            for (Index k : mask) {
                require_dims(k >= 0 && k < d, "row mask index out of range");
            }
        }
    }

    double log_det_spd(const MatrixXd& M)
    {
        Eigen::LLT<MatrixXd> llt(M);
        if (llt.info() != Eigen::Success) {
            throw NumericalError("log_det_spd: matrix is not positive definite");
        }
        return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    }

} // namespace

RowMasks full_masks(Index n, Index d)
{
    RowMasks masks(static_cast<std::size_t>(n));
    for (auto& mask : masks) {
        for (Index k = 0; k < d; ++k) {
            mask.push_back(k);
        }
    }
    return masks;
}

VectorXd LinearParamModel::predict(const VectorXd& x, const VectorXd& z) const
{
    if (!features) {
        throw std::logic_error("LinearParamModel::predict: no feature map attached");
    }
    return W_hat * (*features)(x, z);
}

bool LinearParamModel::covers(const MatrixXd& W_true, double rel_tol) const
{
    require_dims(W_true.rows() == W_hat.rows() && W_true.cols() == W_hat.cols(), "covers: W shape");
    for (Index i = 0; i < rows(); ++i) {
        const auto& mask = masks[static_cast<std::size_t>(i)];
        // Coordinates outside the mask are known; they must match exactly.
        VectorXd full = (W_true.row(i) - W_hat.row(i)).transpose();
        VectorXd err = select(full, mask);
        for (Index k : mask) {
            full(k) = 0.0;
        }
        if (full.size() > 0 && full.lpNorm<Eigen::Infinity>() > 1e-12) {
            return false;
        }
        if (mask.empty()) {
            continue;
        }
        const double lv = level(i);
        if (shape == ConfidenceShape::Ball) {
            if (err.norm() > lv * (1.0 + rel_tol) + 1e-15) {
                return false;
            }
        } else {
            const double q = err.dot(precision[static_cast<std::size_t>(i)] * err);
            if (q > lv * lv * (1.0 + rel_tol) + 1e-15) {
                return false;
            }
        }
    }
    return true;
}

LinearParamModel publish_gate(const LinearParamModel& candidate, const LinearParamModel& current)
{
    require_dims(candidate.max_norm.size() == current.max_norm.size(), "publish_gate: row count");
    for (Index i = 0; i < candidate.max_norm.size(); ++i) {
        if (candidate.max_norm(i) > current.max_norm(i)) {
            return current;
        }
    }
    return candidate;
}

VectorXd residual(const VectorXd& x_next, const VectorXd& x, const VectorXd& u, const MatrixXd& A, const MatrixXd& B)
{
    require_dims(A.rows() == x_next.size() && A.cols() == x.size(), "residual: A shape");
    require_dims(B.rows() == x_next.size() && B.cols() == u.size(), "residual: B shape");
    return x_next - A * x - B * u;
}

// ---------------------------------------------------------------- set membership

SetMembershipState sm_init(const RowMasks& masks, const MatrixXd& W0, const VectorXd& half_width)
{
    const Index n = W0.rows();
    require_dims(static_cast<Index>(masks.size()) == n, "sm_init: one mask per row");
    require_dims(half_width.size() == n, "sm_init: one half-width per row");
    check_masks(masks, W0.cols());
    SetMembershipState s;
    s.masks = masks;
    s.d = W0.cols();
    for (Index i = 0; i < n; ++i) {
        const auto& mask = masks[static_cast<std::size_t>(i)];
        const auto di = static_cast<Index>(mask.size());
        const VectorXd c = select(W0.row(i).transpose(), mask);
        if (di == 0) {
            s.theta.push_back(Polytope::universe(0));
            s.balls.push_back(Ball { VectorXd(0), 0.0 });
            continue;
        }
        s.theta.push_back(Box(c, VectorXd::Constant(di, half_width(i))).to_polytope());
        s.balls.push_back(Ball { c, half_width(i) * std::sqrt(static_cast<double>(di)) });
    }
    return s;
}

SetMembershipState sm_update(const SetMembershipState& state, const VectorXd& phi, const VectorXd& y, const Box& V)
{
    const auto n = static_cast<Index>(state.theta.size());
    require_dims(phi.size() == state.d, "sm_update: feature dimension");
    require_dims(y.size() == n && V.dim() == n, "sm_update: measurement dimension");
    if (!V.is_origin_symmetric()) {
        throw std::invalid_argument("sm_update: V must be an origin-symmetric box");
    }
    SetMembershipState next = state;
    ++next.updates;
    for (Index i = 0; i < n; ++i) {
        const auto& mask = state.masks[static_cast<std::size_t>(i)];
        if (mask.empty()) {
            continue;
        }
        const VectorXd p = select(phi, mask);
        const double s = V.half_widths()(i);
        Polytope& theta = next.theta[static_cast<std::size_t>(i)];
        if (p.lpNorm<Eigen::Infinity>() == 0.0) {
            if (std::abs(y(i)) > s) {
                throw EmptyFeasibleSetError("sm_update: row " + std::to_string(i) + " has no consistent parameter");
            }
            continue;
        }
        MatrixXd A(2, p.size());
        VectorXd b(2);
        A.row(0) = p.transpose();
        A.row(1) = -p.transpose();
        b << y(i) + s, s - y(i);
        // Skip the cut when it is implied by the current set.
        const bool implied = support(theta, p) <= b(0) && support(theta, VectorXd(-p)) <= b(1);
        if (!implied) {
            theta = theta.intersect(Polytope(A, b));
            if (next.updates % 10 == 0) {
                theta = theta.remove_duplicate_rows();
            }
            if (theta.is_empty()) {
                throw EmptyFeasibleSetError("sm_update: row " + std::to_string(i) + " has no consistent parameter");
            }
            Ball ball = enclosing_ball(theta);
            if (ball.radius < next.balls[static_cast<std::size_t>(i)].radius) {
                next.balls[static_cast<std::size_t>(i)] = std::move(ball);
            }
        }
    }
    return next;
}

LinearParamModel sm_point_estimate(const SetMembershipState& state, FeatureMapPtr features)
{
    const auto n = static_cast<Index>(state.theta.size());
    LinearParamModel m;
    m.W_hat = MatrixXd::Zero(n, state.d);
    m.max_norm = VectorXd::Zero(n);
    m.level = VectorXd::Zero(n);
    m.shape = ConfidenceShape::Ball;
    m.masks = state.masks;
    m.features = std::move(features);
    for (Index i = 0; i < n; ++i) {
        const auto& ball = state.balls[static_cast<std::size_t>(i)];
        scatter(m.W_hat, i, state.masks[static_cast<std::size_t>(i)], ball.center);
        m.max_norm(i) = ball.radius;
        m.level(i) = ball.radius;
    }
    return m;
}

// ---------------------------------------------------------------- Bayesian linear regression

BLRState blr_init(const RowMasks& masks, const MatrixXd& W0, const std::vector<MatrixXd>& precision0,
    const VectorXd& sigma, double delta)
{
    const Index n = W0.rows();
    require_dims(static_cast<Index>(masks.size()) == n, "blr_init: one mask per row");
    require_dims(static_cast<Index>(precision0.size()) == n, "blr_init: one precision matrix per row");
    require_dims(sigma.size() == n, "blr_init: one sigma per row");
    check_masks(masks, W0.cols());
    if (!(delta > 0.0 && delta < 1.0)) {
        throw std::invalid_argument("blr_init: delta must lie in (0, 1)");
    }
    BLRState s;
    s.masks = masks;
    s.d = W0.cols();
    s.delta = delta;
    for (Index i = 0; i < n; ++i) {
        const auto& mask = masks[static_cast<std::size_t>(i)];
        const auto di = static_cast<Index>(mask.size());
        const MatrixXd& L0 = precision0[static_cast<std::size_t>(i)];
        require_dims(L0.rows() == di && L0.cols() == di, "blr_init: precision matrix size must equal the mask size");
        BlrRow row;
        row.mean = select(W0.row(i).transpose(), mask);
        row.precision = 0.5 * (L0 + L0.transpose());
        row.precision0 = row.precision;
        if (di > 0) {
            Eigen::LLT<MatrixXd> llt(row.precision);
            if (llt.info() != Eigen::Success) {
                throw NumericalError("blr_init: prior precision of row " + std::to_string(i) + " is not positive definite");
            }
            row.covariance = llt.solve(MatrixXd::Identity(di, di));
        } else {
            row.covariance = MatrixXd(0, 0);
        }
        if (!(sigma(i) > 0.0)) {
            throw std::invalid_argument("blr_init: sigma must be positive");
        }
        row.sigma = sigma(i);
        s.rows.push_back(std::move(row));
    }
    return s;
}

BLRState blr_from_data(const RowMasks& masks, const MatrixXd& Phi, const MatrixXd& Y, const VectorXd& sigma,
    double delta, double ridge)
{
    const Index n = Y.cols();
    const Index d = Phi.cols();
    require_dims(Phi.rows() == Y.rows(), "blr_from_data: sample counts differ");
    require_dims(static_cast<Index>(masks.size()) == n, "blr_from_data: one mask per row");
    check_masks(masks, d);
    MatrixXd W0 = MatrixXd::Zero(n, d);
    std::vector<MatrixXd> L0;
    for (Index i = 0; i < n; ++i) {
        const auto& mask = masks[static_cast<std::size_t>(i)];
        const auto di = static_cast<Index>(mask.size());
        MatrixXd P(Phi.rows(), di);
        for (Index k = 0; k < di; ++k) {
            P.col(k) = Phi.col(mask[static_cast<std::size_t>(k)]);
        }
        MatrixXd L = P.transpose() * P + ridge * MatrixXd::Identity(di, di);
        if (di > 0) {
            Eigen::LLT<MatrixXd> llt(L);
            if (llt.info() != Eigen::Success) {
                throw NumericalError("blr_from_data: warm-up data do not excite row " + std::to_string(i));
            }
            const VectorXd w = llt.solve(P.transpose() * Y.col(i));
            scatter(W0, i, mask, w);
        }
        L0.push_back(std::move(L));
    }
    return blr_init(masks, W0, L0, sigma, delta);
}

BLRState blr_update(const BLRState& state, const VectorXd& phi, const VectorXd& y)
{
    require_dims(phi.size() == state.d, "blr_update: feature dimension");
    require_dims(y.size() == static_cast<Index>(state.rows.size()), "blr_update: measurement dimension");
    BLRState next = state;
    ++next.t;
    for (std::size_t i = 0; i < next.rows.size(); ++i) {
        const auto& mask = next.masks[i];
        if (mask.empty()) {
            continue;
        }
        BlrRow& row = next.rows[i];
        const VectorXd p = select(phi, mask);
        const VectorXd Sp = row.covariance * p;
        const double denom = 1.0 + p.dot(Sp);
        const double y_hat = row.mean.dot(p);
        row.mean -= (y_hat - y(static_cast<Index>(i))) * Sp / denom;
        row.covariance -= Sp * Sp.transpose() / denom;
        row.covariance = 0.5 * (row.covariance + row.covariance.transpose());
        row.precision += p * p.transpose();
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(row.covariance, Eigen::EigenvaluesOnly);
        const double lo = es.eigenvalues().minCoeff();
        const double hi = es.eigenvalues().maxCoeff();
        if (!(lo > 0.0) || lo < 1e-12 * hi) {
            throw NumericalError("blr_update: inverse precision lost definiteness");
        }
    }
    return next;
}

VectorXd blr_beta(const BLRState& state)
{
    const auto n = static_cast<Index>(state.rows.size());
    const double delta_row = state.delta / static_cast<double>(n);
    VectorXd beta = VectorXd::Zero(n);
    for (Index i = 0; i < n; ++i) {
        const BlrRow& row = state.rows[static_cast<std::size_t>(i)];
        const auto di = static_cast<int>(row.mean.size());
        if (di == 0) {
            continue;
        }
        const int dof = state.chi2_dof > 0 ? state.chi2_dof : di;
        const double log_ratio = log_det_spd(row.precision) - log_det_spd(row.precision0);
        const double first = std::sqrt(std::max(0.0, log_ratio - 2.0 * std::log(delta_row)));
        Eigen::SelfAdjointEigenSolver<MatrixXd> e0(row.precision0, Eigen::EigenvaluesOnly);
        Eigen::SelfAdjointEigenSolver<MatrixXd> et(row.precision, Eigen::EigenvaluesOnly);
        const double ratio = e0.eigenvalues().maxCoeff() / et.eigenvalues().minCoeff();
        const double second = std::sqrt(ratio * chi_square_quantile(dof, 1.0 - delta_row));
        beta(i) = first + second;
    }
    return beta;
}

VectorXd blr_confidence(const BLRState& state)
{
    const VectorXd beta = blr_beta(state);
    VectorXd radius = VectorXd::Zero(beta.size());
    for (Index i = 0; i < beta.size(); ++i) {
        const BlrRow& row = state.rows[static_cast<std::size_t>(i)];
        if (row.mean.size() == 0) {
            continue;
        }
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(row.precision, Eigen::EigenvaluesOnly);
        radius(i) = row.sigma * beta(i) / std::sqrt(es.eigenvalues().minCoeff());
    }
    return radius;
}

LinearParamModel blr_model(const BLRState& state, FeatureMapPtr features)
{
    const auto n = static_cast<Index>(state.rows.size());
    LinearParamModel m;
    m.W_hat = MatrixXd::Zero(n, state.d);
    m.shape = ConfidenceShape::Ellipsoid;
    m.masks = state.masks;
    m.features = std::move(features);
    const VectorXd beta = blr_beta(state);
    m.level = VectorXd::Zero(n);
    m.max_norm = blr_confidence(state);
    for (Index i = 0; i < n; ++i) {
        const BlrRow& row = state.rows[static_cast<std::size_t>(i)];
        scatter(m.W_hat, i, state.masks[static_cast<std::size_t>(i)], row.mean);
        m.level(i) = row.sigma * beta(i);
        m.precision.push_back(row.precision);
    }
    return m;
}

BLRState blr_prior_from_json(const nlohmann::json& j, Index d)
{
    if (!j.is_object()) {
        throw ValidationError("", "prior must be a JSON object");
    }
    for (const char* key : { "delta", "sigma", "rows" }) {
        if (!j.contains(key)) {
            throw ValidationError(std::string("/") + key, "missing");
        }
    }
    const VectorXd sigma = json_to_vector(j.at("sigma"), "/sigma");
    const auto n = sigma.size();
    const auto& jr = j.at("rows");
    if (!jr.is_array() || static_cast<Index>(jr.size()) != n) {
        throw ValidationError("/rows", "expected one entry per sigma");
    }
    RowMasks masks = j.contains("masks") ? RowMasks {} : full_masks(n, d);
    if (j.contains("masks")) {
        for (std::size_t i = 0; i < j.at("masks").size(); ++i) {
            std::vector<Index> mask;
            for (const auto& v : j.at("masks")[i]) {
                mask.push_back(v.get<Index>());
            }
            masks.push_back(std::move(mask));
        }
        if (static_cast<Index>(masks.size()) != n) {
            throw ValidationError("/masks", "expected one mask per row");
        }
    }
    MatrixXd W0 = MatrixXd::Zero(n, d);
    std::vector<MatrixXd> L0;
    for (Index i = 0; i < n; ++i) {
        const std::string path = "/rows/" + std::to_string(i);
        const VectorXd mean = json_to_vector(jr[static_cast<std::size_t>(i)].at("mean"), path + "/mean");
        const auto& mask = masks[static_cast<std::size_t>(i)];
        if (mean.size() != static_cast<Index>(mask.size())) {
            throw ValidationError(path + "/mean", "length must equal the row's feature count");
        }
        scatter(W0, i, mask, mean);
        MatrixXd L = mask.empty() ? MatrixXd(0, 0)
                                  : json_to_matrix(jr[static_cast<std::size_t>(i)].at("precision"), path + "/precision");
        if (L.rows() != mean.size() || L.cols() != mean.size()) {
            throw ValidationError(path + "/precision", "must be square with the row's feature count");
        }
        L0.push_back(std::move(L));
    }
    const double delta = j.at("delta").get<double>();
    if (!(delta > 0.0 && delta < 1.0)) {
        throw ValidationError("/delta", "must lie in (0, 1)");
    }
    BLRState s = blr_init(masks, W0, L0, sigma, delta);
    s.chi2_dof = j.value("chi2_dof", 0);
    return s;
}

nlohmann::json blr_prior_to_json(const BLRState& state)
{
    nlohmann::json j;
    j["delta"] = state.delta;
    j["chi2_dof"] = state.chi2_dof;
    nlohmann::json sigma = nlohmann::json::array();
    nlohmann::json rows = nlohmann::json::array();
    nlohmann::json masks = nlohmann::json::array();
    for (std::size_t i = 0; i < state.rows.size(); ++i) {
        sigma.push_back(state.rows[i].sigma);
        rows.push_back({ { "mean", vector_to_json(state.rows[i].mean) }, { "precision", matrix_to_json(state.rows[i].precision) } });
        masks.push_back(state.masks[i]);
    }
    j["sigma"] = sigma;
    j["rows"] = rows;
    j["masks"] = masks;
    return j;
}

// ---------------------------------------------------------------- estimator objects

SetMembershipEstimator::SetMembershipEstimator(SetMembershipState state, Box V, FeatureMapPtr features)
    : state_(std::move(state))
    , V_(std::move(V))
    , features_(std::move(features))
{
}

void SetMembershipEstimator::observe(const VectorXd& phi, const VectorXd& y) { state_ = sm_update(state_, phi, y, V_); }

LinearParamModel SetMembershipEstimator::model() const { return sm_point_estimate(state_, features_); }

std::unique_ptr<Estimator> SetMembershipEstimator::clone() const { return std::make_unique<SetMembershipEstimator>(*this); }

BlrEstimator::BlrEstimator(BLRState state, FeatureMapPtr features)
    : state_(std::move(state))
    , features_(std::move(features))
{
}

void BlrEstimator::observe(const VectorXd& phi, const VectorXd& y) { state_ = blr_update(state_, phi, y); }

LinearParamModel BlrEstimator::model() const { return blr_model(state_, features_); }

std::unique_ptr<Estimator> BlrEstimator::clone() const { return std::make_unique<BlrEstimator>(*this); }

} // namespace armpc
