#include "armpc/errors.hpp"
#include "armpc/optimization.hpp"
#include "armpc/simulation.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace armpc;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd one(double v) { return MatrixXd::Constant(1, 1, v); }
VectorXd vone(double v) { return VectorXd::Constant(1, v); }

MatrixXd random_spd(Rng& rng, int n)
{
    std::normal_distribution<double> g;
    MatrixXd M(n, n);
    for (int i = 0; i < M.size(); ++i) {
        M(i) = g(rng);
    }
    return M * M.transpose() + 0.5 * MatrixXd::Identity(n, n);
}

// Brute-force oracle: every active set of at most n rows, solved as an
// equality-constrained QP, kept when primal and dual feasible.
double active_set_oracle(const QuadraticProgram& qp, bool& found)
{
    const int n = static_cast<int>(qp.g.size());
    const int m = static_cast<int>(qp.A_ineq.rows());
    double best = 1e300;
    found = false;
    for (int mask = 0; mask < (1 << m); ++mask) {
        std::vector<int> act;
        for (int i = 0; i < m; ++i) {
            if (mask & (1 << i)) {
                act.push_back(i);
            }
        }
        const int k = static_cast<int>(act.size());
        if (k > n) {
            continue;
        }
        MatrixXd K = MatrixXd::Zero(n + k, n + k);
        VectorXd rhs(n + k);
        K.topLeftCorner(n, n) = qp.H;
        rhs.head(n) = -qp.g;
        for (int a = 0; a < k; ++a) {
            K.block(0, n + a, n, 1) = qp.A_ineq.row(act[a]).transpose();
            K.block(n + a, 0, 1, n) = qp.A_ineq.row(act[a]);
            rhs(n + a) = qp.b_ineq(act[a]);
        }
        Eigen::FullPivLU<MatrixXd> lu(K);
        if (lu.rank() < n + k) {
            continue;
        }
        const VectorXd sol = lu.solve(rhs);
        const VectorXd x = sol.head(n);
        if (k > 0 && sol.tail(k).minCoeff() < -1e-9) {
            continue;
        }
        if ((qp.A_ineq * x - qp.b_ineq).maxCoeff() > 1e-9) {
            continue;
        }
        const double obj = 0.5 * x.dot(qp.H * x) + qp.g.dot(x);
        best = std::min(best, obj);
        found = true;
    }
    return best;
}

} // namespace

TEST(Lp, LowerBound)
{
    const SolveStatus s = solve_lp(vone(1), one(-1), vone(-1));
    ASSERT_TRUE(s.optimal());
    EXPECT_NEAR(s.primal(0), 1.0, 1e-9);
}

TEST(Lp, Infeasible)
{
    MatrixXd A(2, 1);
    A << 1, -1;
    const SolveStatus s = solve_lp(vone(1), A, Eigen::Vector2d(0, -1));
    EXPECT_EQ(s.kind, SolveKind::Infeasible);
}

TEST(Lp, Unbounded)
{
    const SolveStatus s = solve_lp(vone(-1), one(-1), vone(0));
    EXPECT_EQ(s.kind, SolveKind::Unbounded);
}

TEST(Lp, SimplexObjectiveMatchesVertices)
{
    MatrixXd A(3, 2);
    A << -1, 0, 0, -1, 1, 1;
    const SolveStatus s = solve_lp(Eigen::Vector2d(-1, -1), A, Eigen::Vector3d(0, 0, 1));
    ASSERT_TRUE(s.optimal());
    double best = 1e300;
    for (const Eigen::Vector2d& v : { Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1) }) {
        best = std::min(best, -v.sum());
    }
    EXPECT_NEAR(s.objective, best, 1e-12);
}

TEST(LpProperty, StrongDuality)
{
    Rng rng(41);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(0.5, 2.0);
    int solved = 0;
    for (int k = 0; k < 100; ++k) {
        const int n = 3;
        const int m = 8;
        MatrixXd A(m, n);
        for (int i = 0; i < A.size(); ++i) {
            A(i) = g(rng);
        }
        VectorXd b(m);
        for (int i = 0; i < m; ++i) {
            b(i) = u(rng);
        }
        VectorXd c(n);
        for (int i = 0; i < n; ++i) {
            c(i) = g(rng);
        }
        const SolveStatus s = solve_lp(c, A, b);
        if (!s.optimal()) {
            EXPECT_EQ(s.kind, SolveKind::Unbounded);
            continue;
        }
        ++solved;
        // Lagrangian c'x + y'(Ax - b): dual objective -b'y.
        EXPECT_NEAR(c.dot(s.primal), -b.dot(s.dual), 1e-7);
        EXPECT_GE(s.dual.minCoeff(), -1e-12);
        EXPECT_LE((A * s.primal - b).maxCoeff(), 1e-8);
    }
    EXPECT_GT(solved, 20);
}

TEST(Lp, EqualityConstraints)
{
    MatrixXd Aeq(1, 2);
    Aeq << 1, 1;
    MatrixXd A(2, 2);
    A << -1, 0, 0, -1;
    const SolveStatus s = solve_lp(Eigen::Vector2d(1, 2), A, Eigen::Vector2d::Zero(), Aeq, vone(3));
    ASSERT_TRUE(s.optimal());
    EXPECT_NEAR(s.primal(0), 3.0, 1e-9);
    EXPECT_NEAR(s.objective, 3.0, 1e-9);
}

TEST(Qp, ScalarLowerBound)
{
    QuadraticProgram qp { one(1), vone(0), one(-1), vone(-1), MatrixXd(0, 1), VectorXd(0) };
    const SolveStatus s = solve_qp(qp);
    ASSERT_TRUE(s.optimal());
    EXPECT_NEAR(s.primal(0), 1.0, 1e-7);
    EXPECT_NEAR(s.objective, 0.5, 1e-7);
    EXPECT_LE(s.kkt_residual, 1e-6);
}

TEST(Qp, UnconstrainedMatchesLinearSolve)
{
    Rng rng(2);
    std::normal_distribution<double> g;
    for (int k = 0; k < 20; ++k) {
        const MatrixXd H = random_spd(rng, 4);
        VectorXd gv(4);
        for (int i = 0; i < 4; ++i) {
            gv(i) = g(rng);
        }
        QuadraticProgram qp { H, gv, MatrixXd(0, 4), VectorXd(0), MatrixXd(0, 4), VectorXd(0) };
        const SolveStatus s = solve_qp(qp);
        ASSERT_TRUE(s.optimal());
        const VectorXd x = H.llt().solve(-gv);
        EXPECT_LE((s.primal - x).norm(), 1e-9 * (1 + x.norm()));
    }
}

TEST(Qp, EqualityBySymmetry)
{
    MatrixXd Aeq(1, 2);
    Aeq << 1, 1;
    QuadraticProgram qp { MatrixXd::Identity(2, 2), VectorXd::Zero(2), MatrixXd(0, 2), VectorXd(0), Aeq, vone(2) };
    const SolveStatus s = solve_qp(qp);
    ASSERT_TRUE(s.optimal());
    EXPECT_NEAR(s.primal(0), 1.0, 1e-7);
    EXPECT_NEAR(s.primal(1), 1.0, 1e-7);
}

TEST(Qp, InfeasibleIsReported)
{
    MatrixXd A(2, 1);
    A << 1, -1;
    QuadraticProgram qp { one(1), vone(0), A, Eigen::Vector2d(0, -1), MatrixXd(0, 1), VectorXd(0) };
    EXPECT_EQ(solve_qp(qp).kind, SolveKind::Infeasible);
}

TEST(Qp, ValidationRejectsBadHessian)
{
    QuadraticProgram asym { MatrixXd::Identity(2, 2), VectorXd::Zero(2), MatrixXd(0, 2), VectorXd(0), MatrixXd(0, 2),
        VectorXd(0) };
    asym.H(0, 1) = 0.5;
    EXPECT_THROW(asym.validate(), NumericalError);
    QuadraticProgram indef = asym;
    indef.H << 1, 0, 0, -1;
    EXPECT_THROW(indef.validate(), NumericalError);
    QuadraticProgram shape = asym;
    shape.H = MatrixXd::Identity(3, 3);
    EXPECT_THROW(shape.validate(), DimensionError);
}

TEST(QpProperty, MatchesActiveSetOracle)
{
    Rng rng(99);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(-0.5, 1.5);
    int compared = 0;
    for (int k = 0; k < 100; ++k) {
        const int n = 3;
        const int m = 6;
        QuadraticProgram qp;
        qp.H = random_spd(rng, n);
        qp.g = VectorXd(n);
        for (int i = 0; i < n; ++i) {
            qp.g(i) = 3.0 * g(rng);
        }
        qp.A_ineq = MatrixXd(m, n);
        for (int i = 0; i < qp.A_ineq.size(); ++i) {
            qp.A_ineq(i) = g(rng);
        }
        qp.b_ineq = VectorXd(m);
        for (int i = 0; i < m; ++i) {
            qp.b_ineq(i) = u(rng);
        }
        qp.A_eq = MatrixXd(0, n);
        qp.b_eq = VectorXd(0);
        bool found = false;
        const double oracle = active_set_oracle(qp, found);
        const SolveStatus s = solve_qp(qp);
        if (!found) {
            EXPECT_EQ(s.kind, SolveKind::Infeasible);
            continue;
        }
        ASSERT_TRUE(s.optimal()) << "instance " << k;
        EXPECT_NEAR(s.objective, oracle, 1e-5 * (1 + std::abs(oracle)));
        EXPECT_LE(s.kkt_residual, 1e-6);
        ++compared;
    }
    EXPECT_GT(compared, 50);
}

TEST(Dlqr, DeadbeatScalar)
{
    const LqrSolution s = dlqr(one(0), one(1), one(1), one(1));
    EXPECT_NEAR(s.P(0, 0), 1.0, 1e-10);
    EXPECT_NEAR(s.K(0, 0), 0.0, 1e-10);
}

TEST(Dlqr, GoldenRatioScalar)
{
    const LqrSolution s = dlqr(one(1), one(1), one(1), one(1));
    // P = 1 + P - P^2 / (1 + P) gives P^2 - P - 1 = 0.
    EXPECT_NEAR(s.P(0, 0), (1.0 + std::sqrt(5.0)) / 2.0, 1e-9);
    EXPECT_LE(riccati_residual(one(1), one(1), one(1), one(1), s.P), 1e-10);
}

TEST(Dlqr, DoubleIntegrator)
{
    MatrixXd A(2, 2);
    A << 1, 0.2, 0, 1;
    MatrixXd B(2, 1);
    B << 0, 1;
    const LqrSolution s = dlqr(A, B, MatrixXd::Identity(2, 2), one(1));
    EXPECT_LE(riccati_residual(A, B, MatrixXd::Identity(2, 2), one(1), s.P), 1e-10);
    EXPECT_LT(spectral_radius(A - B * s.K), 1.0);
    // Lyapunov decrease of the terminal cost.
    const MatrixXd Acl = A - B * s.K;
    const MatrixXd L = Acl.transpose() * s.P * Acl - s.P + MatrixXd::Identity(2, 2) + s.K.transpose() * s.K;
    EXPECT_LE(Eigen::SelfAdjointEigenSolver<MatrixXd>(L).eigenvalues().maxCoeff(), 1e-8);
}

TEST(Dlqr, UnstabilizableThrows)
{
    EXPECT_THROW(dlqr(one(2), one(0), one(1), one(1), 1e-10, 10000), NumericalError);
}

namespace {

// Composite Simpson integral of the chi-square density, independent of the
// incomplete-gamma route used by the library. With t = s^2 the integrand
// 2 c s^(k-1) exp(-s^2/2) is smooth at the origin for every k.
double chi2_cdf_simpson(int k, double x)
{
    const double half = 0.5 * k;
    const double logc = -half * std::log(2.0) - std::lgamma(half);
    const int n = 20000;
    const double hi = std::sqrt(x);
    const double h = hi / n;
    double sum = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double s = i * h;
        const double f = 2.0 * std::exp(logc - s * s / 2) * std::pow(s, k - 1);
        sum += f * ((i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2));
    }
    return sum * h / 3;
}

} // namespace

TEST(ChiSquare, Examples)
{
    EXPECT_NEAR(chi_square_quantile(2, 0.95), 5.9915, 5e-5);
    EXPECT_NEAR(chi_square_quantile(1, 0.5), 0.4549, 5e-5);
    EXPECT_LT(chi_square_quantile(3, 1e-12), 1e-6);
}

TEST(ChiSquare, QuantileInvertsIntegratedDensity)
{
    for (int k : { 1, 2, 3, 5, 8 }) {
        for (double p : { 0.05, 0.5, 0.95, 0.99 }) {
            const double q = chi_square_quantile(k, p);
            EXPECT_NEAR(chi2_cdf_simpson(k, q), p, 1e-8) << "dof " << k << " p " << p;
            EXPECT_NEAR(chi_square_cdf(k, q), p, 1e-9);
        }
    }
}
