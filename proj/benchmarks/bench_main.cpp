#include "armpc/config.hpp"
#include "armpc/estimation.hpp"
#include "armpc/experiments.hpp"
#include "armpc/invariant.hpp"
#include "armpc/optimization.hpp"
#include "armpc/robust_mpc.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace armpc;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

namespace {

struct MatchedSetup {
    Config cfg = matched_di_config(0.5, 45, Variant::AdaptiveCE_A);
    Plant plant = build_plant(cfg);
    Controller ctl { build_controller_config(cfg, plant, Variant::AdaptiveCE_A),
        build_estimator(cfg, plant, Variant::AdaptiveCE_A, 0) };
};

MatchedSetup& matched()
{
    static MatchedSetup s;
    return s;
}

} // namespace

static void BM_SolveQp(benchmark::State& state)
{
    const auto n = static_cast<Eigen::Index>(state.range(0));
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    MatrixXd M(n, n);
    for (Eigen::Index i = 0; i < M.size(); ++i) {
        M(i) = g(rng);
    }
    QuadraticProgram qp;
    qp.H = M.transpose() * M + MatrixXd::Identity(n, n);
    qp.g = VectorXd::NullaryExpr(n, [&] { return g(rng); });
    qp.A_ineq.resize(2 * n, n);
    qp.A_ineq << MatrixXd::Identity(n, n), -MatrixXd::Identity(n, n);
    qp.b_ineq = VectorXd::Constant(2 * n, 0.5);
    qp.A_eq.resize(0, n);
    qp.b_eq.resize(0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_qp(qp));
    }
}
BENCHMARK(BM_SolveQp)->Arg(5)->Arg(20)->Arg(60);

static void BM_MaxRpi(benchmark::State& state)
{
    MatrixXd A(2, 2);
    A << 1, 0.2, 0, 1;
    const MatrixXd B = Vector2d(0, 1);
    const MatrixXd K = dlqr(A, B, MatrixXd::Identity(2, 2), MatrixXd::Identity(1, 1)).K;
    const Polytope X = Box::from_bounds(Vector2d(-4, -3), Vector2d(4, 3)).to_polytope();
    const Polytope U = Box::symmetric(VectorXd::Constant(1, 2.0)).to_polytope();
    const Box D = Box::symmetric(Vector2d(0.14, 0.3));
    for (auto _ : state) {
        benchmark::DoNotOptimize(max_rpi(A - B * K, D, X, U, K));
    }
}
BENCHMARK(BM_MaxRpi);

static void BM_BlrUpdate(benchmark::State& state)
{
    const auto d = static_cast<Eigen::Index>(state.range(0));
    const BLRState s0 = blr_init(full_masks(2, d), MatrixXd::Zero(2, d),
        { MatrixXd::Identity(d, d), MatrixXd::Identity(d, d) }, Vector2d(0.07, 0.07), 0.05);
    const VectorXd phi = VectorXd::Constant(d, 1.0 / std::sqrt(static_cast<double>(d)));
    const Vector2d y(0.1, -0.2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(blr_update(s0, phi, y));
    }
}
BENCHMARK(BM_BlrUpdate)->Arg(1)->Arg(4)->Arg(16);

static void BM_MpcStep(benchmark::State& state)
{
    MatchedSetup& s = matched();
    const RobustMPCProblem p = s.ctl.problem();
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve(p, Vector2d(2, 2)));
    }
}
BENCHMARK(BM_MpcStep);
BENCHMARK_MAIN();
