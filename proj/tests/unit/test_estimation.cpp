#include "armpc/estimation.hpp"
#include "armpc/experiments.hpp"
#include "armpc/features.hpp"
#include "armpc/optimization.hpp"
#include "armpc/simulation.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <random>

using namespace armpc;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

namespace {

VectorXd vone(double v) { return VectorXd::Constant(1, v); }
MatrixXd one(double v) { return MatrixXd::Constant(1, 1, v); }

BLRState scalar_blr(double mean, double precision)
{
    return blr_init(full_masks(1, 1), one(mean), { one(precision) }, vone(1.0), 0.05);
}

double interval_hi(const Polytope& P) { return support(P, vone(1.0)); }
double interval_lo(const Polytope& P) { return -support(P, vone(-1.0)); }

} // namespace

TEST(Residual, Examples)
{
    MatrixXd A(2, 2);
    A << 1, 0.2, 0, 1;
    const MatrixXd B = Vector2d(0, 1);
    const Vector2d x(0.3, -0.7);
    const VectorXd u = vone(0.4);
    EXPECT_TRUE(residual(A * x + B * u, x, u, A, B).isZero(1e-15));
    const Vector2d f(0, 0.5 * std::tanh(-0.7));
    EXPECT_TRUE(residual(A * x + B * u + f, x, u, A, B).isApprox(f));
}

TEST(Residual, MatchesSimulatorStep)
{
    const Plant plant = make_double_integrator(true, 0.5);
    Rng rng(1);
    Rng noise_rng(1);
    for (int k = 0; k < 100; ++k) {
        const Vector2d x = Vector2d::Random() * 2.0;
        const VectorXd u = vone(0.3 * k / 100.0);
        const VectorXd x_next = plant.step(x, u, VectorXd(), rng);
        const VectorXd v = plant.noise.sample(noise_rng);
        const VectorXd y = residual(x_next, x, u, plant.A, plant.B);
        EXPECT_TRUE((y - plant.f_true(x, VectorXd()) - v).isZero(1e-12));
    }
}

TEST(SetMembership, IntervalUpdate)
{
    SetMembershipState s = sm_init(full_masks(1, 1), one(0.0), vone(1.0));
    s = sm_update(s, vone(1.0), vone(0.6), Box::symmetric(vone(0.4)));
    EXPECT_NEAR(interval_lo(s.theta[0]), 0.2, 1e-12);
    EXPECT_NEAR(interval_hi(s.theta[0]), 1.0, 1e-12);
    const LinearParamModel m = sm_point_estimate(s);
    EXPECT_NEAR(m.W_hat(0, 0), 0.6, 1e-9);
    EXPECT_NEAR(m.max_norm(0), 0.4, 1e-9);
}

TEST(SetMembership, ImpliedObservationLeavesSetUnchanged)
{
    SetMembershipState s = sm_init(full_masks(1, 1), one(0.0), vone(1.0));
    s = sm_update(s, vone(1.0), vone(0.6), Box::symmetric(vone(0.4)));
    const SetMembershipState t = sm_update(s, vone(0.1), vone(0.05), Box::symmetric(vone(0.4)));
    EXPECT_NEAR(interval_lo(t.theta[0]), 0.2, 1e-12);
    EXPECT_NEAR(interval_hi(t.theta[0]), 1.0, 1e-12);
}

TEST(SetMembership, SymmetricBoxCenter)
{
    const SetMembershipState s = sm_init(full_masks(1, 2), MatrixXd::Zero(1, 2), vone(0.7));
    const LinearParamModel m = sm_point_estimate(s);
    EXPECT_TRUE(m.W_hat.isZero(1e-9));
}

TEST(SetMembership, ContradictionEmpties)
{
    SetMembershipState s = sm_init(full_masks(1, 1), one(0.0), vone(1.0));
    EXPECT_THROW(sm_update(s, vone(1.0), vone(2.0), Box::symmetric(vone(0.4))), EmptyFeasibleSetError);
}

TEST(SetMembershipProperty, WellSpecifiedToyIsConsistent)
{
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const ToyTrace tr = run_toy(ToyOptions {}, seed);
        EXPECT_EQ(tr.sm_empty_at, -1) << seed;
        EXPECT_TRUE(tr.sm_radii_monotone) << seed;
        EXPECT_TRUE(tr.sm_sets_nested) << seed;
        EXPECT_TRUE(tr.sm_final_within) << seed;
        EXPECT_TRUE(tr.blr_completed) << seed;
        EXPECT_LT(tr.sm_final_radius, tr.sm_radius.front()) << seed;
    }
}

TEST(SetMembershipProperty, TruthStaysInsideUnderBoundedNoise)
{
    const FeatureMapPtr phi = make_toy_features();
    Rng rng(12);
    std::uniform_real_distribution<double> ux(-1.0, 1.0);
    std::uniform_real_distribution<double> uv(-0.4, 0.4);
    const Vector2d w(0.5, 0.5);
    SetMembershipState s = sm_init(full_masks(1, 2), MatrixXd::Zero(1, 2), vone(1.0));
    for (int t = 0; t < 200; ++t) {
        const VectorXd f = (*phi)(Vector2d(ux(rng), ux(rng)));
        s = sm_update(s, f, vone(w.dot(f) + uv(rng)), Box::symmetric(vone(0.4)));
        ASSERT_TRUE(contains_point(s.theta[0], w));
    }
}

TEST(Blr, ScalarUpdate)
{
    const BLRState s = blr_update(scalar_blr(0.0, 1.0), vone(1.0), vone(1.0));
    EXPECT_NEAR(s.rows[0].mean(0), 0.5, 1e-15);
    EXPECT_NEAR(s.rows[0].covariance(0, 0), 0.5, 1e-15);
    EXPECT_NEAR(s.rows[0].precision(0, 0), 2.0, 1e-15);
}

TEST(Blr, ZeroFeatureLeavesStateUnchanged)
{
    const BLRState s0 = scalar_blr(0.3, 2.0);
    const BLRState s = blr_update(s0, vone(0.0), vone(5.0));
    EXPECT_DOUBLE_EQ(s.rows[0].mean(0), 0.3);
    EXPECT_DOUBLE_EQ(s.rows[0].covariance(0, 0), s0.rows[0].covariance(0, 0));
}

TEST(BlrProperty, SequentialEqualsBatch)
{
    Rng rng(2024);
    std::uniform_int_distribution<int> ud(1, 8);
    std::uniform_int_distribution<int> ut(1, 200);
    std::normal_distribution<double> g;
    for (int k = 0; k < 30; ++k) {
        const int d = ud(rng);
        const int T = ut(rng);
        MatrixXd L0 = MatrixXd::Identity(d, d);
        for (int i = 0; i < d; ++i) {
            L0(i, i) = 0.5 + std::abs(g(rng));
        }
        VectorXd m0(d);
        for (int i = 0; i < d; ++i) {
            m0(i) = g(rng);
        }
        BLRState s = blr_init(full_masks(1, d), m0.transpose(), { L0 }, vone(0.3), 0.05);
        MatrixXd Lam = L0;
        VectorXd rhs = L0 * m0;
        for (int t = 0; t < T; ++t) {
            VectorXd phi(d);
            for (int i = 0; i < d; ++i) {
                phi(i) = g(rng) / std::sqrt(d);
            }
            const double y = g(rng);
            s = blr_update(s, phi, vone(y));
            Lam += phi * phi.transpose();
            rhs += phi * y;
        }
        // Independent normal-equations solve.
        const VectorXd mean = Lam.ldlt().solve(rhs);
        const MatrixXd cov = Lam.ldlt().solve(MatrixXd::Identity(d, d));
        EXPECT_LE((s.rows[0].mean - mean).norm() / (1 + mean.norm()), 1e-8);
        EXPECT_LE((s.rows[0].covariance - cov).norm() / (1 + cov.norm()), 1e-8);
        EXPECT_LE((s.rows[0].precision - Lam).norm() / (1 + Lam.norm()), 1e-8);
    }
}

TEST(BlrProperty, PrecisionOnlyGrows)
{
    Rng rng(5);
    std::normal_distribution<double> g;
    BLRState s = blr_init(full_masks(1, 3), MatrixXd::Zero(1, 3), { MatrixXd::Identity(3, 3) }, vone(0.1), 0.05);
    for (int t = 0; t < 50; ++t) {
        s = blr_update(s, Eigen::Vector3d(g(rng), g(rng), g(rng)) / 3.0, vone(g(rng)));
        const MatrixXd diff = s.rows[0].precision - s.rows[0].precision0;
        EXPECT_GE(Eigen::SelfAdjointEigenSolver<MatrixXd>(diff).eigenvalues().minCoeff(), -1e-10);
    }
}

TEST(BlrConfidence, AtPriorMatchesFormula)
{
    const int d = 3;
    const double delta = 0.05;
    const double sigma = 0.2;
    const double lambda = 4.0;
    const BLRState s
        = blr_init(full_masks(2, d), MatrixXd::Zero(2, d), { lambda * MatrixXd::Identity(d, d), MatrixXd::Identity(d, d) },
            Vector2d(sigma, sigma), delta);
    const double dp = delta / 2.0;
    const double beta = std::sqrt(2.0 * std::log(1.0 / dp)) + std::sqrt(chi_square_quantile(d, 1.0 - dp));
    const VectorXd b = blr_beta(s);
    EXPECT_NEAR(b(0), beta, 1e-12);
    EXPECT_NEAR(b(1), beta, 1e-12);
    const VectorXd r = blr_confidence(s);
    EXPECT_NEAR(r(0), sigma * beta / std::sqrt(lambda), 1e-12);
    EXPECT_NEAR(r(1), sigma * beta, 1e-12);
}

TEST(BlrConfidence, MaxNormMatchesEigenDecomposition)
{
    Rng rng(31);
    std::normal_distribution<double> g;
    for (int k = 0; k < 20; ++k) {
        MatrixXd M(3, 3);
        for (int i = 0; i < 9; ++i) {
            M(i) = g(rng);
        }
        const MatrixXd L = M * M.transpose() + 0.1 * MatrixXd::Identity(3, 3);
        BLRState s = blr_init(full_masks(1, 3), MatrixXd::Zero(1, 3), { L }, vone(0.5), 0.05);
        const double beta = blr_beta(s)(0);
        // Largest ||w|| with w' L w <= (sigma beta)^2 lies along the smallest
        // eigenvector.
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(L);
        const VectorXd v = es.eigenvectors().col(0);
        const double scale = 0.5 * beta / std::sqrt(v.dot(L * v));
        EXPECT_NEAR(blr_confidence(s)(0), scale * v.norm(), 1e-10);
    }
}

TEST(BlrConfidence, ShrinksAsPrecisionGrows)
{
    double prev = 1e300;
    for (double lam : { 1.0, 10.0, 100.0, 1e3, 1e4, 1e6 }) {
        const BLRState s0 = blr_init(full_masks(1, 2), MatrixXd::Zero(1, 2), { MatrixXd::Identity(2, 2) }, vone(0.1), 0.05);
        BLRState s = s0;
        s.rows[0].precision = lam * MatrixXd::Identity(2, 2);
        s.rows[0].covariance = MatrixXd::Identity(2, 2) / lam;
        const double r = blr_confidence(s)(0);
        EXPECT_LT(r, prev);
        prev = r;
    }
}

TEST(BlrProperty, ToyCoverage)
{
    int covered = 0;
    const int runs = 100;
    for (int seed = 0; seed < runs; ++seed) {
        ToyOptions o;
        o.samples = 50;
        covered += run_toy(o, 20000 + seed).blr_covered ? 1 : 0;
    }
    EXPECT_GE(covered, 95);
}

TEST(PublishGate, Examples)
{
    LinearParamModel cur;
    cur.max_norm = Vector2d(0.5, 0.5);
    cur.W_hat = MatrixXd::Zero(2, 1);
    LinearParamModel cand = cur;
    cand.max_norm = Vector2d(0.4, 0.3);
    cand.W_hat = MatrixXd::Ones(2, 1);
    EXPECT_TRUE(publish_gate(cand, cur).W_hat.isApprox(cand.W_hat));
    cand.max_norm = Vector2d(0.4, 0.6);
    EXPECT_TRUE(publish_gate(cand, cur).W_hat.isApprox(cur.W_hat));
}

TEST(PublishGate, SetMembershipAlwaysPublishes)
{
    const FeatureMapPtr phi = make_toy_features();
    Rng rng(77);
    std::uniform_real_distribution<double> ux(-1.0, 1.0);
    std::uniform_real_distribution<double> uv(-0.4, 0.4);
    SetMembershipEstimator est(sm_init(full_masks(1, 2), MatrixXd::Zero(1, 2), vone(1.0)), Box::symmetric(vone(0.4)), phi);
    LinearParamModel prev = est.model();
    for (int t = 0; t < 40; ++t) {
        const VectorXd f = (*phi)(Vector2d(ux(rng), ux(rng)));
        est.observe(f, vone(0.5 * f.sum() + uv(rng)));
        const LinearParamModel m = est.model();
        EXPECT_LE(m.max_norm(0), prev.max_norm(0) + 1e-12);
        EXPECT_TRUE(publish_gate(m, prev).W_hat.isApprox(m.W_hat));
        prev = m;
    }
}

TEST(LinearParamModel, CoversUsesEllipsoid)
{
    const BLRState s = blr_init(full_masks(1, 1), one(0.0), { one(1.0) }, vone(0.1), 0.05);
    const LinearParamModel m = blr_model(s);
    EXPECT_TRUE(m.covers(one(0.9 * m.max_norm(0))));
    EXPECT_FALSE(m.covers(one(1.1 * m.max_norm(0))));
}

TEST(Features, NormBoundedOnX)
{
    const VectorXd lo = Vector2d(-4, -3);
    const VectorXd hi = Vector2d(4, 3);
    for (const FeatureMapPtr& phi : { make_tanh_velocity_features(), make_sin_tanh_features() }) {
        EXPECT_LE(sampled_feature_norm_sup(*phi, lo, hi, VectorXd(), VectorXd(), 100000, 3), 1.0 + 1e-9);
    }
    const RbfFeatures rbf(6, { 0, 1 }, MatrixXd::Random(4, 2), 1.5, RbfFeatures::Scaling::UnitSup);
    VectorXd qlo = VectorXd::Constant(6, -2.0);
    VectorXd qhi = VectorXd::Constant(6, 2.0);
    EXPECT_LE(sampled_feature_norm_sup(rbf, qlo, qhi, VectorXd(), VectorXd(), 100000, 4), 1.0 + 1e-9);
    const FeatureMapPtr seg = make_segment_features(1, { { 100, 200 }, { 260, 360 } });
    EXPECT_LE(sampled_feature_norm_sup(*seg, VectorXd::Constant(1, -5), VectorXd::Constant(1, 5), VectorXd::Constant(1, -100),
                  VectorXd::Constant(1, 700), 100000, 5),
        1.0 + 1e-9);
}

TEST(Features, LoadedNetworkValidatesScale)
{
    nlohmann::json j = {
        { "state_dim", 2 },
        { "input_indices", { 0, 1 } },
        { "output_scale", 1.0 / std::sqrt(2.0) },
        { "layers",
            { { { "W", { { 1.0, 0.0 }, { 0.0, 1.0 }, { 1.0, 1.0 } } }, { "b", { 0.0, 0.0, 0.0 } }, { "activation", "relu" } },
                { { "W", { { 1.0, -1.0, 0.5 }, { 0.2, 0.3, 0.1 } } }, { "b", { 0.0, 0.1 } }, { "activation", "sigmoid" } } } },
    };
    const auto net = LoadedNetwork::from_json(j);
    EXPECT_EQ(net->output_dim(), 2);
    EXPECT_LE(sampled_feature_norm_sup(*net, Vector2d(-5, -5), Vector2d(5, 5), VectorXd(), VectorXd(), 10000, 1), 1.0);
    j["output_scale"] = 1.0;
    try {
        LoadedNetwork::from_json(j);
        FAIL() << "expected a validation error";
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.field(), "/output_scale");
    }
}

TEST(BlrPrior, JsonRoundTrip)
{
    const BLRState s = blr_init(full_masks(2, 2), MatrixXd::Ones(2, 2), { MatrixXd::Identity(2, 2), 2 * MatrixXd::Identity(2, 2) },
        Vector2d(0.1, 0.2), 0.05);
    const BLRState back = blr_prior_from_json(blr_prior_to_json(s), 2);
    ASSERT_EQ(back.rows.size(), 2u);
    EXPECT_TRUE(back.rows[1].precision.isApprox(s.rows[1].precision));
    EXPECT_TRUE(back.rows[0].mean.isApprox(s.rows[0].mean));
    EXPECT_DOUBLE_EQ(back.rows[1].sigma, 0.2);
}
