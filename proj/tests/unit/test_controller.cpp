#include "armpc/config.hpp"
#include "armpc/controller.hpp"
#include "armpc/experiments.hpp"
#include "armpc/simulation.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace armpc;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

namespace {

// Posterior concentrated on the true weights.
std::unique_ptr<Estimator> exact_estimator(const Plant& plant)
{
    const BLRState st = blr_init(plant.masks, *plant.W_true, { MatrixXd(), 1e12 * MatrixXd::Identity(1, 1) },
        Vector2d(1e-6, 1e-6), 0.05);
    return std::make_unique<BlrEstimator>(st, plant.features);
}

Config noise_free_matched(double w1)
{
    nlohmann::json j = matched_di_config(w1, 45, Variant::AdaptiveCE_A).document;
    j["plant"]["noise"] = "zero";
    return parse_config(j);
}

RunLog run_variant(const Config& cfg, Variant v, std::uint64_t seed, int steps, int episodes = 1)
{
    const Plant plant = build_plant(cfg);
    Controller ctl(build_controller_config(cfg, plant, v), build_estimator(cfg, plant, v, seed));
    RunOptions o;
    o.steps = steps;
    o.episodes = episodes;
    o.seed = seed;
    return run_episodes(plant, ctl, o);
}

} // namespace

TEST(Variant, Parsing)
{
    EXPECT_EQ(variant_from_string("A"), Variant::AdaptiveCE_A);
    EXPECT_EQ(variant_from_string("benchmark"), Variant::BenchmarkARMPC);
    EXPECT_EQ(variant_from_string("NaiveTube"), Variant::NaiveTube);
    EXPECT_THROW(variant_from_string("D"), ValidationError);
}

TEST(Controller, VariantCHoldsSetsWithinEpisode)
{
    const Config cfg = matched_di_config(0.5, 45, Variant::AdaptiveCE_C);
    const RunLog log = run_variant(cfg, Variant::AdaptiveCE_C, 3, 30, 3);
    ASSERT_LT(log.metrics.infeasible_step, 0);
    for (int ep = 0; ep < 3; ++ep) {
        int id = -1;
        for (const auto& r : log.records) {
            if (r.episode != ep || r.terminal) {
                continue;
            }
            if (id < 0) {
                id = r.sets_id;
            }
            EXPECT_EQ(r.sets_id, id) << "episode " << ep << " t " << r.t;
        }
    }
    // Sets are refreshed between episodes.
    EXPECT_GE(log.snapshots.size(), 2u);
}

TEST(Controller, VariantsStayFeasibleOnMatchedInstance)
{
    for (Variant v : { Variant::AdaptiveCE_A, Variant::AdaptiveCE_B, Variant::AdaptiveCE_C }) {
        const Config cfg = matched_di_config(0.5, 45, v);
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const RunLog log = run_variant(cfg, v, seed, 50);
            if (!log.metrics.confidence_event) {
                continue;
            }
            EXPECT_TRUE(log.metrics.started_feasible) << to_string(v) << " seed " << seed;
            EXPECT_LT(log.metrics.infeasible_step, 0) << to_string(v) << " seed " << seed;
            EXPECT_EQ(log.metrics.state_violations, 0);
            EXPECT_EQ(log.metrics.input_violations, 0);
            EXPECT_EQ(log.metrics.containment_violations, 0);
        }
    }
}

TEST(Controller, ZeroInformationUpdatesMakeAEqualC)
{
    // A set-membership estimator whose noise bound never cuts the parameter
    // box: variant A then never changes its sets.
    const Config cfg = matched_di_config(0.5, 45, Variant::AdaptiveCE_A);
    const Plant plant = build_plant(cfg);
    auto make = [&](Variant v) {
        auto est = std::make_unique<SetMembershipEstimator>(
            sm_init(plant.masks, MatrixXd::Zero(2, 1), Vector2d(1.0, 1.0)), Box::symmetric(Vector2d(100, 100)),
            plant.features);
        return Controller(build_controller_config(cfg, plant, v), std::move(est));
    };
    Controller a = make(Variant::AdaptiveCE_A);
    Controller c = make(Variant::AdaptiveCE_C);
    RunOptions o;
    o.steps = 30;
    o.seed = 4;
    o.abort_on_infeasible = false;
    const RunLog la = run_episodes(plant, a, o);
    const RunLog lc = run_episodes(plant, c, o);
    ASSERT_EQ(la.records.size(), lc.records.size());
    EXPECT_EQ(la.snapshots.size(), 1u);
    for (std::size_t k = 0; k < la.records.size(); ++k) {
        EXPECT_EQ(la.records[k].x, lc.records[k].x);
    }
}

TEST(Controller, BenchmarkEqualsCeWhenModelIsZeroAndKnown)
{
    const Config cfg = matched_di_config(0.0, 45, Variant::AdaptiveCE_A);
    const Plant plant = build_plant(cfg);
    Controller ce(build_controller_config(cfg, plant, Variant::AdaptiveCE_A), exact_estimator(plant));
    Controller be(build_controller_config(cfg, plant, Variant::BenchmarkARMPC), exact_estimator(plant));
    RunOptions o;
    o.steps = 40;
    o.seed = 9;
    const RunLog lc = run_episodes(plant, ce, o);
    const RunLog lb = run_episodes(plant, be, o);
    ASSERT_LT(lc.metrics.infeasible_step, 0);
    ASSERT_LT(lb.metrics.infeasible_step, 0);
    for (std::size_t k = 0; k < lc.records.size(); ++k) {
        EXPECT_LE((lc.records[k].x - lb.records[k].x).norm(), 1e-5) << k;
    }
}

TEST(Controller, ExactMatchedCancellationGivesNominalMpc)
{
    // f = B g with the exact model and no noise: the CE closed loop follows
    // the nominal MPC of the linear system with the same tightened inputs.
    const Config cfg = noise_free_matched(0.5);
    const Plant plant = build_plant(cfg);
    Controller ce(build_controller_config(cfg, plant, Variant::AdaptiveCE_A), exact_estimator(plant));
    RunOptions o;
    o.steps = 30;
    const RunLog log = run_episodes(plant, ce, o);
    ASSERT_LT(log.metrics.infeasible_step, 0);

    RobustMPCProblem nominal = ce.problem();
    nominal.D_box = Box::zero(2);
    VectorXd x = plant.x0;
    for (int t = 0; t < o.steps; ++t) {
        EXPECT_LE((log.records[static_cast<std::size_t>(t)].x - x).norm(), 1e-4) << "t " << t;
        const MPCSolution s = solve(nominal, x);
        ASSERT_TRUE(s.optimal());
        x = plant.A * x + plant.B * s.u0;
    }
}

TEST(Controller, AppliedInputsAreAdmissible)
{
    const Config cfg = matched_di_config(0.5, 45, Variant::AdaptiveCE_A);
    const Plant plant = build_plant(cfg);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const RunLog log = run_variant(cfg, Variant::AdaptiveCE_A, seed, 50);
        for (const auto& r : log.records) {
            EXPECT_TRUE(contains_point(plant.X, r.x, 1e-7));
            if (!r.terminal) {
                EXPECT_TRUE(contains_point(plant.U, r.u, 1e-7));
            }
        }
    }
}

TEST(Controller, EmptiedSetMembershipFreezesModel)
{
    // Noise bound far below the actual noise: the feasible set empties.
    const Config cfg = matched_di_config(0.5, 45, Variant::AdaptiveCE_A);
    const Plant plant = build_plant(cfg);
    auto est = std::make_unique<SetMembershipEstimator>(
        sm_init(plant.masks, MatrixXd::Zero(2, 1), Vector2d(1.0, 1.0)), Box::symmetric(Vector2d(1e-4, 1e-4)),
        plant.features);
    Controller ctl(build_controller_config(cfg, plant, Variant::AdaptiveCE_A), std::move(est));
    RunOptions o;
    o.steps = 40;
    o.abort_on_infeasible = false;
    const RunLog log = run_episodes(plant, ctl, o);
    EXPECT_TRUE(ctl.model_frozen());
    EXPECT_TRUE(log.metrics.model_frozen);
    EXPECT_EQ(log.records.size(), 41u);
}

TEST(Controller, IssProxy)
{
    const IssMeasurement m = measure_iss(3, 3);
    EXPECT_TRUE(m.exact_feasible);
    ASSERT_GE(m.exact_settle_step, 0);
    EXPECT_LE(m.exact_settle_step, 100);
    EXPECT_EQ(m.noisy_infeasible, 0);
    EXPECT_GT(m.ratio, 0.0);
    EXPECT_LE(m.ratio, kIssConstant * (1.0 + kIssConstantBand));
}

TEST(Controller, NaiveTubeNeedsNoEstimator)
{
    const Config cfg = matched_di_config(0.5, 45, Variant::NaiveTube);
    const Plant plant = build_plant(cfg);
    EXPECT_NO_THROW(Controller(build_controller_config(cfg, plant, Variant::NaiveTube), nullptr));
    EXPECT_THROW(Controller(build_controller_config(cfg, plant, Variant::AdaptiveCE_A), nullptr), std::invalid_argument);
}
