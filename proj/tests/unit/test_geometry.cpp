#include "armpc/errors.hpp"
#include "armpc/geometry.hpp"
#include "armpc/simulation.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace armpc;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

namespace {

Box sym(std::initializer_list<double> hw)
{
    VectorXd v(static_cast<Eigen::Index>(hw.size()));
    Eigen::Index i = 0;
    for (double h : hw) {
        v(i++) = h;
    }
    return Box::symmetric(v);
}

Box random_box(Rng& rng, Eigen::Index n)
{
    std::uniform_real_distribution<double> c(-3.0, 3.0);
    std::uniform_real_distribution<double> w(0.0, 2.0);
    VectorXd center(n);
    VectorXd hw(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        center(i) = c(rng);
        hw(i) = w(rng);
    }
    return Box(center, hw);
}

Polytope unit_simplex()
{
    MatrixXd A(3, 2);
    A << -1, 0, 0, -1, 1, 1;
    return Polytope(A, Eigen::Vector3d(0, 0, 1));
}

} // namespace

TEST(Box, RejectsNegativeWidths)
{
    EXPECT_THROW(Box(VectorXd::Zero(2), Vector2d(1.0, -0.1)), std::invalid_argument);
    EXPECT_TRUE(Box::empty(2).is_empty());
    EXPECT_FALSE(Box::zero(2).is_empty());
}

TEST(Polytope, RejectsZeroRows)
{
    MatrixXd A(2, 2);
    A << 1, 0, 0, 0;
    EXPECT_THROW(Polytope(A, Vector2d(1, 1)), std::invalid_argument);
}

TEST(Polytope, EmptinessIsDetected)
{
    EXPECT_TRUE(Polytope::empty(2).is_empty());
    EXPECT_FALSE(Polytope::universe(2).is_empty());
    EXPECT_FALSE(unit_simplex().is_empty());
}

TEST(MinkowskiSum, BoxesAddHalfWidths)
{
    const Box s = minkowski_sum(sym({ 1, 1 }), sym({ 0.5, 0.5 }));
    EXPECT_TRUE(s.half_widths().isApprox(Vector2d(1.5, 1.5)));
    EXPECT_TRUE(s.center().isZero());
}

TEST(MinkowskiSum, ZeroBoxIsIdentity)
{
    const Polytope P = unit_simplex();
    const Polytope S = minkowski_sum(P, Box::zero(2));
    EXPECT_TRUE(S.A().isApprox(P.A()));
    EXPECT_TRUE(S.b().isApprox(P.b()));
}

TEST(MinkowskiSum, SlabGrowsBySupport)
{
    MatrixXd A(2, 2);
    A << 1, 0, -1, 0;
    const Polytope slab(A, Vector2d(1, 1));
    const Polytope S = minkowski_sum(slab, Box::symmetric(Vector2d(0.2, 0.0)));
    EXPECT_NEAR(support(S, Vector2d(1, 0)), 1.2, 1e-9);
    EXPECT_NEAR(support(S, Vector2d(-1, 0)), 1.2, 1e-9);
}

TEST(MinkowskiSum, DimensionMismatchThrows)
{
    EXPECT_THROW(minkowski_sum(sym({ 1, 1 }), sym({ 1 })), DimensionError);
}

TEST(PontryaginDiff, ShrinksBox)
{
    const Box d = pontryagin_diff(sym({ 2 }), sym({ 0.7 }));
    EXPECT_FALSE(d.is_empty());
    EXPECT_NEAR(d.half_widths()(0), 1.3, 1e-15);
}

TEST(PontryaginDiff, PointIsIdentity)
{
    const Polytope P = unit_simplex();
    const Polytope D = pontryagin_diff(P, Box::zero(2));
    EXPECT_TRUE(D.b().isApprox(P.b()));
}

TEST(PontryaginDiff, OverErosionIsEmpty)
{
    EXPECT_TRUE(pontryagin_diff(sym({ 1 }), sym({ 1.5 })).is_empty());
    EXPECT_TRUE(pontryagin_diff(sym({ 1 }).to_polytope(), sym({ 1.5 })).is_empty());
}

TEST(LinearMap, Examples)
{
    const Box P = sym({ 1, 1 });
    const Box id = linear_map(MatrixXd::Identity(2, 2), P);
    EXPECT_TRUE(id.half_widths().isApprox(P.half_widths()));

    const Box proj = linear_map(Vector2d(1, 0).asDiagonal().toDenseMatrix(), P);
    EXPECT_DOUBLE_EQ(proj.half_widths()(0), 1.0);
    EXPECT_DOUBLE_EQ(proj.half_widths()(1), 0.0);

    MatrixXd row(1, 2);
    row << 1, 1;
    EXPECT_DOUBLE_EQ(linear_map(row, P).half_widths()(0), 2.0);
    EXPECT_THROW(linear_map(MatrixXd::Identity(3, 3), P), DimensionError);
}

TEST(Support, Examples)
{
    const Box P = sym({ 1, 1 });
    EXPECT_DOUBLE_EQ(support(P, Vector2d(1, 0)), 1.0);
    EXPECT_DOUBLE_EQ(support(P, Vector2d(1, 1)), 2.0);
}

TEST(Support, SimplexMatchesVertexEnumeration)
{
    const Polytope S = unit_simplex();
    const std::vector<Vector2d> verts { { 0, 0 }, { 1, 0 }, { 0, 1 } };
    Rng rng(3);
    std::normal_distribution<double> g;
    for (int k = 0; k < 100; ++k) {
        const Vector2d dir(g(rng), g(rng));
        double best = -1e300;
        for (const auto& v : verts) {
            best = std::max(best, dir.dot(v));
        }
        EXPECT_NEAR(support(S, dir), best, 1e-9);
    }
    EXPECT_NEAR(support(S, Vector2d(1, 1)), 1.0, 1e-12);
}

TEST(Support, ErrorsOnEmptyAndUnbounded)
{
    EXPECT_THROW(support(Polytope::empty(2), Vector2d(1, 0)), EmptySetError);
    MatrixXd A(1, 2);
    A << 1, 0;
    EXPECT_THROW(support(Polytope(A, VectorXd::Ones(1)), Vector2d(-1, 0)), UnboundedError);
}

TEST(Chebyshev, Examples)
{
    const Ball interval = chebyshev_center(Box(VectorXd::Constant(1, 0.6), VectorXd::Constant(1, 0.4)).to_polytope());
    EXPECT_NEAR(interval.center(0), 0.6, 1e-9);
    EXPECT_NEAR(interval.radius, 0.4, 1e-9);

    const Ball square = chebyshev_center(sym({ 1, 1 }).to_polytope());
    EXPECT_NEAR(square.center.norm(), 0.0, 1e-9);
    EXPECT_NEAR(square.radius, 1.0, 1e-9);

    // Incircle of the right triangle with unit legs: r = (a + b - c) / 2.
    const double legs = 1.0;
    const double r = (legs + legs - std::sqrt(2.0)) / 2.0;
    const Ball tri = chebyshev_center(unit_simplex());
    EXPECT_NEAR(tri.radius, r, 1e-9);
    EXPECT_NEAR(tri.radius, 1.0 / (2.0 + std::sqrt(2.0)), 1e-12);
}

TEST(Chebyshev, EmptyThrows)
{
    EXPECT_THROW(chebyshev_center(Polytope::empty(2)), EmptySetError);
}

TEST(Chebyshev, BallIsInscribedAndMaximal)
{
    Rng rng(5);
    std::normal_distribution<double> g;
    for (int k = 0; k < 50; ++k) {
        const int m = 6;
        MatrixXd A(m, 2);
        VectorXd b(m);
        for (int i = 0; i < m; ++i) {
            const double th = 2.0 * std::numbers::pi * i / m + 0.3 * g(rng);
            A.row(i) << std::cos(th), std::sin(th);
            b(i) = 1.0 + 0.3 * std::abs(g(rng));
        }
        const Polytope P(A, b);
        const Ball ball = chebyshev_center(P);
        EXPECT_TRUE(contains_point(P, ball.center));
        // Every facet is at least radius away; the inflated ball escapes one.
        const VectorXd slack = (b - A * ball.center).cwiseQuotient(A.rowwise().norm());
        EXPECT_GE(slack.minCoeff(), ball.radius - 1e-9);
        EXPECT_LT(slack.minCoeff(), ball.radius * (1.0 + 1e-9) + 1e-12);
    }
}

TEST(EnclosingBall, IntervalAndSquare)
{
    const Ball b = enclosing_ball(Box(VectorXd::Constant(1, 0.6), VectorXd::Constant(1, 0.4)).to_polytope());
    EXPECT_NEAR(b.center(0), 0.6, 1e-9);
    EXPECT_NEAR(b.radius, 0.4, 1e-9);
    const Ball s = enclosing_ball(sym({ 1, 1 }).to_polytope());
    EXPECT_NEAR(s.radius, std::sqrt(2.0), 1e-9);
}

TEST(Contains, Examples)
{
    EXPECT_TRUE(contains(sym({ 1, 1 }), sym({ 0.5, 0.5 })));
    EXPECT_TRUE(contains_point(sym({ 0.3, 2 }), Vector2d::Zero()));
    EXPECT_FALSE(contains(sym({ 1 }), sym({ 1.1 })));
    EXPECT_TRUE(contains(sym({ 1, 1 }).to_polytope(), sym({ 0.5, 0.5 })));
    EXPECT_TRUE(contains(sym({ 1, 1 }).to_polytope(), unit_simplex()));
    EXPECT_FALSE(contains(sym({ 0.5, 0.5 }).to_polytope(), unit_simplex()));
}

TEST(GeometryProperty, BoxSumDifferenceRoundTrip)
{
    Rng rng(17);
    for (int k = 0; k < 500; ++k) {
        const Box P = random_box(rng, 3);
        const Box Q = random_box(rng, 3);
        const Box back = pontryagin_diff(minkowski_sum(P, Q), Q);
        ASSERT_FALSE(back.is_empty());
        EXPECT_TRUE((back.center() - P.center()).isZero(1e-12));
        EXPECT_LE((back.half_widths() - P.half_widths()).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(GeometryProperty, SupportIsAdditive)
{
    Rng rng(19);
    std::normal_distribution<double> g;
    for (int k = 0; k < 200; ++k) {
        const Box P = random_box(rng, 2);
        const Box Q = random_box(rng, 2);
        const Vector2d d(g(rng), g(rng));
        EXPECT_NEAR(support(minkowski_sum(P, Q), d), support(P, d) + support(Q, d), 1e-12);
        // General polytope plus box is an outer approximation, exact along
        // the facet normals of the polytope.
        const Polytope T = unit_simplex();
        const Polytope S = minkowski_sum(T, Q);
        EXPECT_GE(support(S, d), support(T, d) + support(Q, d) - 1e-8);
        for (Eigen::Index r = 0; r < T.rows(); ++r) {
            const VectorXd a = T.A().row(r).transpose();
            EXPECT_NEAR(support(S, a), support(T, a) + support(Q, a), 1e-8);
        }
    }
}

TEST(GeometryProperty, LinearMapOverApproximates)
{
    Rng rng(23);
    std::normal_distribution<double> g;
    MatrixXd M(3, 2);
    for (int i = 0; i < M.size(); ++i) {
        M(i) = g(rng);
    }
    const Box P = random_box(rng, 2);
    const Box image = linear_map(M, P);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < 10000; ++k) {
        const Vector2d x = P.center() + P.half_widths().cwiseProduct(Vector2d(u(rng), u(rng)));
        ASSERT_TRUE(contains_point(image, M * x));
    }
}

TEST(Vertices, SquareHasFour)
{
    const auto v = vertices(sym({ 1, 2 }).to_polytope());
    EXPECT_EQ(v.size(), 4u);
    EXPECT_THROW(vertices(Polytope::universe(4)), DimensionError);
}

TEST(ConvexHull, AreaOfSquare)
{
    std::vector<Vector2d> pts { { 0, 0 }, { 1, 0 }, { 1, 1 }, { 0, 1 }, { 0.5, 0.5 } };
    const auto hull = convex_hull_2d(pts);
    EXPECT_EQ(hull.size(), 4u);
    EXPECT_NEAR(polygon_area(hull), 1.0, 1e-15);
}

TEST(GeometryJson, RoundTrip)
{
    const Box b(Vector2d(0.1, -0.2), Vector2d(1, 2));
    nlohmann::json j = b;
    EXPECT_TRUE(j.contains("center"));
    EXPECT_TRUE(j.contains("half_widths"));
    const Box back = j.get<Box>();
    EXPECT_TRUE(back.center().isApprox(b.center()));
    const Polytope P = unit_simplex();
    nlohmann::json jp = P;
    EXPECT_TRUE(jp.contains("A"));
    const Polytope Q = jp.get<Polytope>();
    EXPECT_TRUE(Q.A().isApprox(P.A()));
    EXPECT_TRUE(Q.b().isApprox(P.b()));
}
