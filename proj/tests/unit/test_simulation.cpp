#include "armpc/config.hpp"
#include "armpc/experiments.hpp"
#include "armpc/run_log.hpp"
#include "armpc/simulation.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace armpc;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

TEST(Plant, LinearStepExamples)
{
    Plant p = make_double_integrator(true, 0.0, 0.0, NoiseModel::zero(2));
    Rng rng(1);
    EXPECT_TRUE(p.step(Vector2d(0, 1), VectorXd::Zero(1), VectorXd(0), rng).isApprox(Vector2d(0.2, 1.0)));
    EXPECT_TRUE(p.step(Vector2d::Zero(), VectorXd::Zero(1), VectorXd(0), rng).isZero());

    Plant id = p;
    id.A = MatrixXd::Identity(2, 2);
    EXPECT_TRUE(id.mean_step(Vector2d(0.3, -0.7), VectorXd::Zero(1), VectorXd(0)).isApprox(Vector2d(0.3, -0.7)));
}

TEST(Plant, DoubleIntegratorTerms)
{
    const Plant m = make_double_integrator(true, 0.5);
    EXPECT_NEAR(m.f_true(Vector2d(1.0, 2.0), VectorXd(0))(1), 0.5 * std::tanh(2.0), 1e-15);
    EXPECT_EQ(m.f_true(Vector2d(1.0, 2.0), VectorXd(0))(0), 0.0);

    const Plant u = make_double_integrator(false, 0.2, 0.3);
    const VectorXd f = u.f_true(Vector2d(std::numbers::pi / 8, 0.0), VectorXd(0));
    EXPECT_NEAR(f(0), 0.2 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(f(0), 0.1414, 5e-5);
    EXPECT_NEAR(f(1), 0.0, 1e-15);
}

TEST(Plant, QuadrotorWind)
{
    const QuadrotorParams q;
    // c l V^2 = 0.5 * 0.4 * 16 on the wind axis.
    EXPECT_NEAR(quadrotor_wind_force(q, 0.0, 0.0).norm(), 3.2, 1e-12);
    EXPECT_NEAR(quadrotor_wind_force(q, 0.0, 0.0)(1), -3.2, 1e-12);
    // Three length units off the axis the speed drops to V e^{-4.5}.
    EXPECT_NEAR(quadrotor_wind_force(q, 0.0, 3.0).norm(), 3.2 * std::exp(-9.0), 1e-15);

    QuadrotorParams angled = q;
    angled.wind_angle_deg = 90.0;
    const Vector2d F = quadrotor_wind_force(angled, 0.0, 0.0);
    EXPECT_NEAR(F(0), -3.2, 1e-12);
    EXPECT_NEAR(F(1), 0.0, 1e-12);

    QuadrotorParams calm = q;
    calm.wind_speed = 0.0;
    const Plant p = make_quadrotor(calm);
    EXPECT_TRUE(p.mean_step(VectorXd::Zero(6), VectorXd::Zero(2), VectorXd(0)).isZero());
}

TEST(Plant, CruiseGrade)
{
    const CruiseParams c;
    const Plant p = make_cruise(c);
    const VectorXd x = VectorXd::Zero(1);
    const double g3 = c.dt * c.gravity * std::sin(3.0 * std::numbers::pi / 180.0);
    EXPECT_NEAR(p.f_true(x, VectorXd::Constant(1, 150.0))(0), g3, 1e-12);
    EXPECT_NEAR(p.f_true(x, VectorXd::Constant(1, 230.0))(0), 0.0, 1e-12);
    EXPECT_NEAR(p.f_true(x, VectorXd::Constant(1, -1000.0))(0), 0.0, 1e-12);
    EXPECT_NEAR(p.f_true(x, VectorXd::Constant(1, 310.0))(0),
        c.dt * c.gravity * std::sin(-2.0 * std::numbers::pi / 180.0), 1e-12);
    ASSERT_TRUE(p.f_range.has_value());
    EXPECT_GE(p.f_range->half_widths()(0), g3);
}

TEST(Plant, TrueWeightsSpanTheDrift)
{
    Rng rng(17);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::uniform_real_distribution<double> road(0.0, 600.0);
    const std::vector<Plant> plants { make_double_integrator(true, 0.5), make_double_integrator(false, 0.2, 0.3),
        make_cruise(CruiseParams {}) };
    for (const Plant& p : plants) {
        ASSERT_TRUE(p.W_true.has_value()) << p.name;
        for (int k = 0; k < 200; ++k) {
            VectorXd x(p.n());
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                x(i) = u(rng);
            }
            const VectorXd z = p.z0.size() > 0 ? VectorXd::Constant(1, road(rng)) : VectorXd(0);
            const VectorXd phi = (*p.features)(x, z);
            EXPECT_LE((p.f_true(x, z) - *p.W_true * phi).norm(), 1e-12) << p.name;
        }
    }
}

TEST(Noise, SamplesStayInSupport)
{
    const NoiseModel n = double_integrator_noise();
    const Box V = n.support();
    EXPECT_NEAR(V.half_widths()(0), 1.96 * std::sqrt(5e-3), 1e-15);
    Rng rng(2);
    for (int k = 0; k < 1000000; ++k) {
        ASSERT_TRUE(contains_point(V, n.sample(rng)));
    }
    const NoiseModel b = NoiseModel::uniform_box(Vector2d(0.1, 0.3));
    for (int k = 0; k < 10000; ++k) {
        ASSERT_TRUE(contains_point(b.support(), b.sample(rng)));
    }
    EXPECT_TRUE(NoiseModel::zero(3).sample(rng).isZero());
}

namespace {

RunLog matched_run(std::uint64_t seed, int steps)
{
    const Config cfg = matched_di_config(0.5, 45, Variant::AdaptiveCE_A);
    const Plant plant = build_plant(cfg);
    Controller ctl(build_controller_config(cfg, plant, Variant::AdaptiveCE_A),
        build_estimator(cfg, plant, Variant::AdaptiveCE_A, seed));
    RunOptions o;
    o.steps = steps;
    o.seed = seed;
    return run_episodes(plant, ctl, o);
}

} // namespace

TEST(RunEpisodes, ZeroStepsGivesTerminalRecordOnly)
{
    const RunLog log = matched_run(0, 0);
    ASSERT_EQ(log.records.size(), 1u);
    EXPECT_TRUE(log.records[0].terminal);
    EXPECT_TRUE(log.records[0].x.isApprox(Vector2d(2, 2)));
    // Only the terminal state cost x'Qx.
    EXPECT_DOUBLE_EQ(log.metrics.cost, 8.0);
}

TEST(RunEpisodes, DeterministicGivenSeed)
{
    const RunLog a = matched_run(5, 20);
    const RunLog b = matched_run(5, 20);
    const RunLog c = matched_run(6, 20);
    EXPECT_EQ(run_hash(a), run_hash(b));
    EXPECT_EQ(run_csv(a), run_csv(b));
    EXPECT_NE(run_hash(a), run_hash(c));
}

TEST(RunEpisodes, RecordedDisturbanceMatchesDynamics)
{
    const RunLog log = matched_run(3, 30);
    const Plant plant = build_plant(matched_di_config(0.5, 45, Variant::AdaptiveCE_A));
    for (std::size_t k = 0; k + 1 < log.records.size(); ++k) {
        const StepRecord& r = log.records[k];
        const VectorXd d = log.records[k + 1].x - plant.A * r.x - plant.B * r.u0;
        EXPECT_LE((d - r.d).norm(), 1e-12);
    }
}

TEST(RunCampaign, OrderIndependentOfThreads)
{
    auto fn = [](int i) { return matched_run(static_cast<std::uint64_t>(i), 10); };
    const std::vector<RunLog> one = run_campaign(4, 1, fn);
    const std::vector<RunLog> many = run_campaign(4, 4, fn);
    ASSERT_EQ(one.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(run_hash(one[i]), run_hash(many[i]));
    }
}

TEST(FeasibleEnvelope, AgreesWithPointwiseLps)
{
    const Config cfg = matched_di_config(0.5, 45, Variant::AdaptiveCE_A);
    const Plant plant = build_plant(cfg);
    for (Variant v : { Variant::AdaptiveCE_A, Variant::BenchmarkARMPC }) {
        Controller ctl(build_controller_config(cfg, plant, v), build_estimator(cfg, plant, v, 0));
        const EnvelopeResult fast = feasible_envelope(ctl.problem(), 21);
        const EnvelopeResult slow = feasible_envelope_bruteforce(ctl.problem(), 21);
        EXPECT_EQ(fast.feasible_points, slow.feasible_points) << to_string(v);
        EXPECT_NEAR(fast.fraction, slow.fraction, 1e-9) << to_string(v);
        EXPECT_GT(fast.fraction, 0.0);
        EXPECT_LE(fast.fraction, 1.0);
    }
}

TEST(FeasibleEnvelope, EmptyTerminalSetGivesZero)
{
    const Config cfg = matched_di_config(0.5, 45, Variant::AdaptiveCE_A);
    const Plant plant = build_plant(cfg);
    Controller ctl(build_controller_config(cfg, plant, Variant::AdaptiveCE_A),
        build_estimator(cfg, plant, Variant::AdaptiveCE_A, 0));
    RobustMPCProblem p = ctl.problem();
    p.O = Polytope::empty(2);
    EXPECT_EQ(feasible_envelope(p, 11).fraction, 0.0);
    EXPECT_EQ(feasible_envelope(p, 11).feasible_points, 0);
}
