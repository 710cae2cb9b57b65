#include "armpc/invariant.hpp"
#include "armpc/optimization.hpp"
#include "armpc/robust_mpc.hpp"
#include "armpc/simulation.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace armpc;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

namespace {

MatrixXd one(double v) { return MatrixXd::Constant(1, 1, v); }
Polytope interval(double r) { return Box::symmetric(VectorXd::Constant(1, r)).to_polytope(); }

// Symmetric scalar maximal RPI by interval iteration; -1 when empty.
double interval_rpi(double a, double w, double x_bound, double k, double u_bound)
{
    double r = x_bound;
    if (k != 0.0) {
        r = std::min(r, u_bound / std::abs(k));
    }
    for (int it = 0; it < 100000; ++it) {
        const double next = std::min(r, (r - w) / std::abs(a));
        if (next < 0.0) {
            return -1.0;
        }
        if (next == r) {
            return r;
        }
        r = next;
    }
    return r;
}

double upper(const Polytope& P) { return support(P, VectorXd::Constant(1, 1.0)); }

struct DiSetup {
    MatrixXd A;
    MatrixXd B;
    MatrixXd K;
    Polytope X;
    Polytope U;
};

DiSetup double_integrator()
{
    DiSetup s;
    s.A = MatrixXd(2, 2);
    s.A << 1, 0.2, 0, 1;
    s.B = Vector2d(0, 1);
    s.K = dlqr(s.A, s.B, MatrixXd::Identity(2, 2), one(1)).K;
    s.X = Box::from_bounds(Vector2d(-4, -3), Vector2d(4, 3)).to_polytope();
    s.U = interval(2.0);
    return s;
}

} // namespace

TEST(MaxRpi, ScalarWithoutInputs)
{
    // x+ = 0.5 x + d, |d| <= 0.25 on [-1, 1]: the whole interval is invariant
    // because 0.5 + 0.25 <= 1.
    const RpiResult r = max_rpi(one(0.5), Box::symmetric(VectorXd::Constant(1, 0.25)), interval(1.0),
        Polytope::universe(0), MatrixXd::Zero(0, 1));
    ASSERT_FALSE(r.empty);
    EXPECT_NEAR(upper(r.set), interval_rpi(0.5, 0.25, 1.0, 0.0, 0.0), 1e-9);
    EXPECT_NEAR(upper(r.set), 1.0, 1e-9);
}

TEST(MaxRpi, ScalarRandomizedAgainstIntervalIteration)
{
    Rng rng(8);
    std::uniform_real_distribution<double> ua(-0.95, 0.95);
    std::uniform_real_distribution<double> uw(0.0, 0.6);
    std::uniform_real_distribution<double> uk(-1.0, 1.0);
    std::uniform_real_distribution<double> uu(0.2, 1.0);
    int nonempty = 0;
    for (int k = 0; k < 200; ++k) {
        const double a = ua(rng);
        const double w = uw(rng);
        const double gain = uk(rng);
        const double ub = uu(rng);
        if (std::abs(a - gain) >= 1.0) {
            continue;
        }
        const double expected = interval_rpi(a - gain, w, 1.0, gain, ub);
        const RpiResult r = max_rpi(one(a - gain), Box::symmetric(VectorXd::Constant(1, w)), interval(1.0),
            interval(ub), one(gain));
        if (expected < 0.0) {
            EXPECT_TRUE(r.empty) << "instance " << k;
            continue;
        }
        ASSERT_FALSE(r.empty) << "instance " << k;
        ++nonempty;
        EXPECT_NEAR(upper(r.set), expected, 1e-7) << "instance " << k;
    }
    EXPECT_GT(nonempty, 30);
}

TEST(MaxRpi, NoDisturbanceKeepsInitialSet)
{
    // A diagonal contraction maps the box into itself: no constraint is
    // active and the first iterate is already invariant.
    const MatrixXd A = Vector2d(0.5, -0.3).asDiagonal();
    const Polytope X = Box::symmetric(Vector2d(100, 3)).to_polytope();
    const RpiResult r = max_rpi(A, Box::zero(2), X, Polytope::universe(0), MatrixXd::Zero(0, 2));
    ASSERT_FALSE(r.empty);
    EXPECT_TRUE(contains(r.set, X));
    EXPECT_TRUE(contains(X, r.set));

    // The double integrator loop is not contractive in the max norm, so its
    // maximal invariant set is a strict subset of the box but still RPI.
    const DiSetup s = double_integrator();
    const Polytope big = Box::symmetric(Vector2d(100, 100)).to_polytope();
    const RpiResult di = max_rpi(s.A - s.B * s.K, Box::zero(2), big, Polytope::universe(1), s.K);
    ASSERT_FALSE(di.empty);
    EXPECT_TRUE(contains(big, di.set));
    EXPECT_TRUE(is_rpi(di.set, s.A - s.B * s.K, Box::zero(2), big, Polytope::universe(1), s.K));
}

TEST(MaxRpi, OverErosionIsEmpty)
{
    const DiSetup s = double_integrator();
    const RpiResult r = max_rpi(s.A - s.B * s.K, Box::symmetric(Vector2d(5, 5)), s.X, s.U, s.K);
    EXPECT_TRUE(r.empty);
}

TEST(MaxRpi, DoubleIntegratorResultIsRpi)
{
    const DiSetup s = double_integrator();
    const Box D = Box::symmetric(Vector2d(0.14, 0.3));
    const RpiResult r = max_rpi(s.A - s.B * s.K, D, s.X, s.U, s.K);
    ASSERT_FALSE(r.empty);
    EXPECT_TRUE(r.converged);
    EXPECT_TRUE(is_rpi(r.set, s.A - s.B * s.K, D, s.X, s.U, s.K));
}

TEST(MaxRpiProperty, MonotoneInDisturbance)
{
    const DiSetup s = double_integrator();
    Rng rng(4);
    std::uniform_real_distribution<double> u(0.0, 0.3);
    for (int k = 0; k < 20; ++k) {
        const Vector2d small(u(rng), u(rng));
        const Vector2d large = small + Vector2d(u(rng), u(rng));
        const RpiResult a = max_rpi(s.A - s.B * s.K, Box::symmetric(small), s.X, s.U, s.K);
        const RpiResult b = max_rpi(s.A - s.B * s.K, Box::symmetric(large), s.X, s.U, s.K);
        if (b.empty) {
            continue;
        }
        ASSERT_FALSE(a.empty);
        EXPECT_TRUE(contains(a.set, b.set, 1e-7));
        EXPECT_TRUE(is_rpi(a.set, s.A - s.B * s.K, Box::symmetric(small), s.X, s.U, s.K));
        EXPECT_TRUE(is_rpi(b.set, s.A - s.B * s.K, Box::symmetric(large), s.X, s.U, s.K));
    }
}

TEST(MaxRpiProperty, GrowsWhenInputsAreTightenedLess)
{
    const DiSetup s = double_integrator();
    const Box D = Box::symmetric(Vector2d(0.1, 0.2));
    const RpiResult tight = max_rpi(s.A - s.B * s.K, D, s.X, interval(1.0), s.K);
    const RpiResult loose = max_rpi(s.A - s.B * s.K, D, s.X, interval(1.5), s.K);
    ASSERT_FALSE(tight.empty);
    EXPECT_TRUE(contains(loose.set, tight.set, 1e-7));
}

TEST(IsRpi, Examples)
{
    // Destabilizing dynamics leave X.
    const Polytope X = Box::symmetric(Vector2d(1, 1)).to_polytope();
    const MatrixXd unstable = 1.5 * MatrixXd::Identity(2, 2);
    EXPECT_FALSE(is_rpi(X, unstable, Box::zero(2), X, Polytope::universe(0), MatrixXd::Zero(0, 2)));
    // One step from the vertex (1, 1) indeed leaves the box.
    EXPECT_FALSE(contains_point(X, unstable * Vector2d(1, 1)));

    const Polytope origin = Box::zero(2).to_polytope();
    EXPECT_TRUE(is_rpi(origin, 0.5 * MatrixXd::Identity(2, 2), Box::zero(2), X, Polytope::universe(0),
        MatrixXd::Zero(0, 2)));
}

TEST(TerminalIngredients, ShrinkWithDisturbance)
{
    const DiSetup s = double_integrator();
    Polytope prev = s.X;
    for (double w : { 0.0, 0.05, 0.1, 0.2, 0.3 }) {
        const TerminalIngredients t
            = terminal_ingredients(s.A, s.B, MatrixXd::Identity(2, 2), one(1), Box::symmetric(Vector2d(w, w)), s.X, s.U);
        ASSERT_FALSE(t.O.empty) << w;
        EXPECT_TRUE(contains(prev, t.O.set, 1e-7)) << w;
        EXPECT_TRUE(contains_point(t.O.set, Vector2d::Zero()));
        prev = t.O.set;
    }
}
