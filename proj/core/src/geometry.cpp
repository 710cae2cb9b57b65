#include "armpc/geometry.hpp"

#include "armpc/errors.hpp"
#include "armpc/json_io.hpp"
#include "armpc/optimization.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

namespace armpc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------- Box

Box::Box(VectorXd center, VectorXd half_widths)
    : center_(std::move(center))
    , half_widths_(std::move(half_widths))
{
    require_dims(center_.size() == half_widths_.size(), "Box: center and half_widths differ in size");
    if (!center_.allFinite() || !half_widths_.allFinite()) {
        throw std::invalid_argument("Box: non-finite data");
    }
    if (half_widths_.size() > 0 && half_widths_.minCoeff() < 0.0) {
        throw std::invalid_argument("Box: negative half-width (use Box::empty)");
    }
}

Box Box::symmetric(const VectorXd& half_widths) { return Box(VectorXd::Zero(half_widths.size()), half_widths); }

Box Box::from_bounds(const VectorXd& lower, const VectorXd& upper)
{
    require_dims(lower.size() == upper.size(), "Box::from_bounds: size mismatch");
    if ((upper - lower).minCoeff() < 0.0) {
        return empty(lower.size());
    }
    return Box(0.5 * (lower + upper), 0.5 * (upper - lower));
}

Box Box::point(const VectorXd& x) { return Box(x, VectorXd::Zero(x.size())); }

Box Box::zero(Index n) { return Box(VectorXd::Zero(n), VectorXd::Zero(n)); }

Box Box::empty(Index n)
{
    Box box = zero(n);
    box.empty_ = true;
    return box;
}

bool Box::is_origin_symmetric(double tol) const
{
    return !empty_ && (center_.size() == 0 || center_.cwiseAbs().maxCoeff() <= tol);
}

Polytope Box::to_polytope() const
{
    if (empty_) {
        return Polytope::empty(dim());
    }
    const Index n = dim();
    MatrixXd A(2 * n, n);
    VectorXd b(2 * n);
    A.topRows(n) = MatrixXd::Identity(n, n);
    A.bottomRows(n) = -MatrixXd::Identity(n, n);
    b.head(n) = upper();
    b.tail(n) = -lower();
    return Polytope(std::move(A), std::move(b));
}

// ---------------------------------------------------------------- Polytope

Polytope::Polytope(MatrixXd A, VectorXd b)
    : A_(std::move(A))
    , b_(std::move(b))
{
    require_dims(A_.rows() == b_.size(), "Polytope: A and b row counts differ");
    if (!A_.allFinite() || !b_.allFinite()) {
        throw std::invalid_argument("Polytope: non-finite data");
    }
    for (Index r = 0; r < A_.rows(); ++r) {
        if (A_.row(r).squaredNorm() == 0.0) {
            throw std::invalid_argument("Polytope: row " + std::to_string(r) + " has zero norm");
        }
    }
}

Polytope Polytope::universe(Index n) { return Polytope(MatrixXd(0, n), VectorXd(0)); }

Polytope Polytope::empty(Index n)
{
    MatrixXd A = MatrixXd::Zero(2, n);
    VectorXd b(2);
    if (n > 0) {
        A(0, 0) = 1.0;
        A(1, 0) = -1.0;
    }
    b << -1.0, -1.0;
    Polytope P(std::move(A), std::move(b));
    P.empty_state_.store(1);
    return P;
}

Polytope::Polytope(const Polytope& other)
    : A_(other.A_)
    , b_(other.b_)
    , empty_state_(other.empty_state_.load())
{
}

Polytope& Polytope::operator=(const Polytope& other)
{
    if (this != &other) {
        A_ = other.A_;
        b_ = other.b_;
        empty_state_.store(other.empty_state_.load());
    }
    return *this;
}

Polytope::Polytope(Polytope&& other) noexcept
    : A_(std::move(other.A_))
    , b_(std::move(other.b_))
    , empty_state_(other.empty_state_.load())
{
}

Polytope& Polytope::operator=(Polytope&& other) noexcept
{
    A_ = std::move(other.A_);
    b_ = std::move(other.b_);
    empty_state_.store(other.empty_state_.load());
    return *this;
}

bool Polytope::is_empty() const
{
    const int cached = empty_state_.load();
    if (cached >= 0) {
        return cached == 1;
    }
    bool empty = false;
    if (rows() > 0) {
        const SolveStatus s = solve_lp(VectorXd::Zero(dim()), A_, b_);
        empty = s.kind == SolveKind::Infeasible;
    }
    empty_state_.store(empty ? 1 : 0);
    return empty;
}

Polytope Polytope::intersect(const Polytope& other) const
{
    require_dims(dim() == other.dim(), "Polytope::intersect: dimension mismatch");
    MatrixXd A(rows() + other.rows(), dim());
    VectorXd b(rows() + other.rows());
    A << A_, other.A_;
    b << b_, other.b_;
    return Polytope(std::move(A), std::move(b));
}

Polytope Polytope::preimage(const MatrixXd& M) const
{
    require_dims(M.rows() == dim(), "Polytope::preimage: M row count must equal dim");
    MatrixXd A = A_ * M;
    std::vector<Index> keep;
    for (Index r = 0; r < A.rows(); ++r) {
        if (A.row(r).lpNorm<Eigen::Infinity>() > 1e-14) {
            keep.push_back(r);
        } else if (b_(r) < 0.0) {
            return Polytope::empty(M.cols());
        }
    }
    MatrixXd Ak(static_cast<Index>(keep.size()), M.cols());
    VectorXd bk(static_cast<Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        Ak.row(static_cast<Index>(k)) = A.row(keep[k]);
        bk(static_cast<Index>(k)) = b_(keep[k]);
    }
    return Polytope(std::move(Ak), std::move(bk));
}

Polytope Polytope::remove_duplicate_rows(double tol) const
{
    const Index m = rows();
    MatrixXd N(m, dim());
    VectorXd c(m);
    for (Index r = 0; r < m; ++r) {
        const double norm = A_.row(r).norm();
        N.row(r) = A_.row(r) / norm;
        c(r) = b_(r) / norm;
    }
    std::vector<Index> keep;
    for (Index r = 0; r < m; ++r) {
        bool merged = false;
        for (Index& k : keep) {
            if ((N.row(k) - N.row(r)).lpNorm<Eigen::Infinity>() <= tol) {
                if (c(r) < c(k)) {
                    k = r;
                }
                merged = true;
                break;
            }
        }
        if (!merged) {
            keep.push_back(r);
        }
    }
    std::sort(keep.begin(), keep.end());
    MatrixXd A(static_cast<Index>(keep.size()), dim());
    VectorXd b(static_cast<Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        A.row(static_cast<Index>(k)) = A_.row(keep[k]);
        b(static_cast<Index>(k)) = b_(keep[k]);
    }
    Polytope out(std::move(A), std::move(b));
    out.empty_state_.store(empty_state_.load());
    return out;
}

// ---------------------------------------------------------------- set algebra

Box minkowski_sum(const Box& P, const Box& Q)
{
    require_dims(P.dim() == Q.dim(), "minkowski_sum: dimension mismatch");
    if (P.is_empty() || Q.is_empty()) {
        return Box::empty(P.dim());
    }
    return Box(P.center() + Q.center(), P.half_widths() + Q.half_widths());
}

Polytope minkowski_sum(const Polytope& P, const Box& Q)
{
    require_dims(P.dim() == Q.dim(), "minkowski_sum: dimension mismatch");
    if (Q.is_empty()) {
        return Polytope::empty(P.dim());
    }
    VectorXd b = P.b();
    for (Index r = 0; r < P.rows(); ++r) {
        b(r) += support(Q, P.A().row(r).transpose());
    }
    return Polytope(P.A(), std::move(b));
}

Box pontryagin_diff(const Box& P, const Box& Q)
{
    require_dims(P.dim() == Q.dim(), "pontryagin_diff: dimension mismatch");
    if (P.is_empty()) {
        return Box::empty(P.dim());
    }
    if (Q.is_empty()) {
        throw EmptySetError("pontryagin_diff: subtrahend is empty");
    }
    const VectorXd hw = P.half_widths() - Q.half_widths();
    if (hw.size() > 0 && hw.minCoeff() < 0.0) {
        return Box::empty(P.dim());
    }
    return Box(P.center() - Q.center(), hw);
}

Polytope pontryagin_diff(const Polytope& P, const Box& Q)
{
    require_dims(P.dim() == Q.dim(), "pontryagin_diff: dimension mismatch");
    if (Q.is_empty()) {
        throw EmptySetError("pontryagin_diff: subtrahend is empty");
    }
    VectorXd b = P.b();
    for (Index r = 0; r < P.rows(); ++r) {
        b(r) -= support(Q, P.A().row(r).transpose());
    }
    return Polytope(P.A(), std::move(b));
}

Polytope pontryagin_diff(const Polytope& P, const Polytope& Q)
{
    require_dims(P.dim() == Q.dim(), "pontryagin_diff: dimension mismatch");
    VectorXd b = P.b();
    for (Index r = 0; r < P.rows(); ++r) {
        b(r) -= support(Q, P.A().row(r).transpose());
    }
    return Polytope(P.A(), std::move(b));
}

Box linear_map(const MatrixXd& M, const Box& P)
{
    require_dims(M.cols() == P.dim(), "linear_map: column count must equal box dimension");
    if (P.is_empty()) {
        return Box::empty(M.rows());
    }
    return Box(M * P.center(), M.cwiseAbs() * P.half_widths());
}

double support(const Box& P, const VectorXd& dir)
{
    require_dims(dir.size() == P.dim(), "support: direction dimension mismatch");
    if (P.is_empty()) {
        throw EmptySetError("support: empty box");
    }
    return dir.dot(P.center()) + dir.cwiseAbs().dot(P.half_widths());
}

double support(const Polytope& P, const VectorXd& dir)
{
    require_dims(dir.size() == P.dim(), "support: direction dimension mismatch");
    const SolveStatus s = solve_lp(-dir, P.A(), P.b());
    switch (s.kind) {
    case SolveKind::Optimal:
        return -s.objective;
    case SolveKind::Infeasible:
        throw EmptySetError("support: empty polytope");
    case SolveKind::Unbounded:
        throw UnboundedError("support: polytope unbounded in the given direction");
    case SolveKind::MaxIter:
        break;
    }
    throw NumericalError("support: LP iteration limit");
}

Ball chebyshev_center(const Polytope& P)
{
    const Index n = P.dim();
    const Index m = P.rows();
    // Variables (c, r): maximize r s.t. A c + r ||a_i|| <= b, r >= 0.
    MatrixXd A(m + 1, n + 1);
    VectorXd b(m + 1);
    A.topLeftCorner(m, n) = P.A();
    A.topRightCorner(m, 1) = P.A().rowwise().norm();
    b.head(m) = P.b();
    A.row(m).setZero();
    A(m, n) = -1.0;
    b(m) = 0.0;
    VectorXd c = VectorXd::Zero(n + 1);
    c(n) = -1.0;
    const SolveStatus s = solve_lp(c, A, b);
    switch (s.kind) {
    case SolveKind::Optimal:
        return Ball { s.primal.head(n), std::max(s.primal(n), 0.0) };
    case SolveKind::Infeasible:
        throw EmptySetError("chebyshev_center: empty polytope");
    case SolveKind::Unbounded:
        throw UnboundedError("chebyshev_center: unbounded polytope");
    case SolveKind::MaxIter:
        break;
    }
    throw NumericalError("chebyshev_center: LP iteration limit");
}

Ball enclosing_ball(const std::vector<VectorXd>& points)
{
    if (points.empty()) {
        throw EmptySetError("enclosing_ball: no points");
    }
    const Index n = points.front().size();
    const auto k = static_cast<Index>(points.size());
    Ball ball;
    if (k == 1) {
        ball.center = points.front();
        return ball;
    }
    if (n == 1) {
        double lo = points.front()(0);
        double hi = lo;
        for (const auto& p : points) {
            lo = std::min(lo, p(0));
            hi = std::max(hi, p(0));
        }
        ball.center = VectorXd::Constant(1, 0.5 * (lo + hi));
        ball.radius = 0.5 * (hi - lo);
        return ball;
    }
    // Shift to the centroid for conditioning, then
    // min |c|^2 + s  s.t.  |v_k|^2 - 2 v_k' c <= s.
    VectorXd mean = VectorXd::Zero(n);
    for (const auto& p : points) {
        mean += p;
    }
    mean /= static_cast<double>(k);
    QuadraticProgram qp;
    qp.H = MatrixXd::Zero(n + 1, n + 1);
    qp.H.topLeftCorner(n, n) = 2.0 * MatrixXd::Identity(n, n);
    qp.g = VectorXd::Zero(n + 1);
    qp.g(n) = 1.0;
    qp.A_ineq.resize(k, n + 1);
    qp.b_ineq.resize(k);
    for (Index i = 0; i < k; ++i) {
        const VectorXd v = points[static_cast<std::size_t>(i)] - mean;
        qp.A_ineq.block(i, 0, 1, n) = -2.0 * v.transpose();
        qp.A_ineq(i, n) = -1.0;
        qp.b_ineq(i) = -v.squaredNorm();
    }
    qp.A_eq.resize(0, n + 1);
    qp.b_eq.resize(0);
    const SolveStatus s = solve_qp(qp);
    VectorXd c = mean;
    if (s.optimal()) {
        c += s.primal.head(n);
    }
    ball.center = c;
    for (const auto& p : points) {
        ball.radius = std::max(ball.radius, (p - c).norm());
    }
    return ball;
}

Ball enclosing_ball(const Polytope& P)
{
    const auto verts = vertices(P);
    if (verts.empty()) {
        throw EmptySetError("enclosing_ball: empty or unbounded polytope");
    }
    return enclosing_ball(verts);
}

bool contains_point(const Polytope& P, const VectorXd& x, double tol)
{
    require_dims(x.size() == P.dim(), "contains_point: dimension mismatch");
    if (P.rows() == 0) {
        return true;
    }
    return ((P.A() * x - P.b()).array() <= tol).all();
}

bool contains_point(const Box& P, const VectorXd& x, double tol)
{
    require_dims(x.size() == P.dim(), "contains_point: dimension mismatch");
    if (P.is_empty()) {
        return false;
    }
    return ((x - P.center()).cwiseAbs() - P.half_widths()).maxCoeff() <= tol;
}

bool contains(const Box& outer, const Box& inner, double tol)
{
    require_dims(outer.dim() == inner.dim(), "contains: dimension mismatch");
    if (inner.is_empty()) {
        return true;
    }
    if (outer.is_empty()) {
        return false;
    }
    return (inner.upper() - outer.upper()).maxCoeff() <= tol && (outer.lower() - inner.lower()).maxCoeff() <= tol;
}

bool contains(const Polytope& outer, const Box& inner, double tol)
{
    require_dims(outer.dim() == inner.dim(), "contains: dimension mismatch");
    if (inner.is_empty()) {
        return true;
    }
    for (Index r = 0; r < outer.rows(); ++r) {
        if (support(inner, outer.A().row(r).transpose()) > outer.b()(r) + tol) {
            return false;
        }
    }
    return true;
}

bool contains(const Polytope& outer, const Polytope& inner, double tol)
{
    require_dims(outer.dim() == inner.dim(), "contains: dimension mismatch");
    if (inner.is_empty()) {
        return true;
    }
    if (outer.is_empty()) {
        return false;
    }
    for (Index r = 0; r < outer.rows(); ++r) {
        const SolveStatus s = solve_lp(-outer.A().row(r).transpose(), inner.A(), inner.b());
        if (s.kind == SolveKind::Unbounded) {
            return false;
        }
        if (s.kind != SolveKind::Optimal) {
            throw NumericalError("contains: facet LP failed");
        }
        if (-s.objective > outer.b()(r) + tol) {
            return false;
        }
    }
    return true;
}

std::vector<VectorXd> vertices(const Polytope& P, double tol)
{
    const Index n = P.dim();
    if (n > 3) {
        throw DimensionError("vertices: only dimensions <= 3 are supported");
    }
    const Index m = P.rows();
    std::vector<VectorXd> out;
    if (n == 0 || m < n) {
        return out;
    }
    std::vector<Index> idx(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        idx[static_cast<std::size_t>(i)] = i;
    }
    MatrixXd S(n, n);
    VectorXd rhs(n);
    while (true) {
        for (Index i = 0; i < n; ++i) {
            S.row(i) = P.A().row(idx[static_cast<std::size_t>(i)]);
            rhs(i) = P.b()(idx[static_cast<std::size_t>(i)]);
        }
        Eigen::FullPivLU<MatrixXd> lu(S);
        if (lu.rank() == n) {
            const VectorXd x = lu.solve(rhs);
            const double scale = 1.0 + x.lpNorm<Eigen::Infinity>();
            if (((P.A() * x - P.b()).array() <= tol * scale).all()) {
                const bool dup = std::any_of(out.begin(), out.end(),
                    [&](const VectorXd& v) { return (v - x).lpNorm<Eigen::Infinity>() <= tol * scale; });
                if (!dup) {
                    out.push_back(x);
                }
            }
        }
        // Next combination of n indices from m.
        Index pos = n - 1;
        while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == m - n + pos) {
            --pos;
        }
        if (pos < 0) {
            break;
        }
        ++idx[static_cast<std::size_t>(pos)];
        for (Index i = pos + 1; i < n; ++i) {
            idx[static_cast<std::size_t>(i)] = idx[static_cast<std::size_t>(i - 1)] + 1;
        }
    }
    return out;
}

std::vector<Eigen::Vector2d> convex_hull_2d(std::vector<Eigen::Vector2d> points)
{
    std::sort(points.begin(), points.end(), [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
        return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    points.erase(std::unique(points.begin(), points.end()), points.end());
    if (points.size() < 3) {
        return points;
    }
    auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
        return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
    };
    std::vector<Eigen::Vector2d> hull(2 * points.size());
    std::size_t k = 0;
    for (const auto& p : points) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) {
            --k;
        }
        hull[k++] = p;
    }
    const std::size_t lower = k + 1;
    for (auto it = points.rbegin() + 1; it != points.rend(); ++it) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], *it) <= 0.0) {
            --k;
        }
        hull[k++] = *it;
    }
    hull.resize(k - 1);
    return hull;
}

double polygon_area(const std::vector<Eigen::Vector2d>& polygon)
{
    if (polygon.size() < 3) {
        return 0.0;
    }
    double twice = 0.0;
    for (std::size_t i = 0; i < polygon.size(); ++i) {
        const auto& a = polygon[i];
        const auto& b = polygon[(i + 1) % polygon.size()];
        twice += a.x() * b.y() - b.x() * a.y();
    }
    return 0.5 * std::abs(twice);
}

// ---------------------------------------------------------------- JSON

void to_json(nlohmann::json& j, const Box& box)
{
    j = nlohmann::json { { "center", vector_to_json(box.center()) }, { "half_widths", vector_to_json(box.half_widths()) } };
    if (box.is_empty()) {
        j["empty"] = true;
    }
}

void from_json(const nlohmann::json& j, Box& box)
{
    if (j.value("empty", false)) {
        box = Box::empty(static_cast<Index>(j.at("center").size()));
        return;
    }
    box = Box(json_to_vector(j.at("center"), "/center"), json_to_vector(j.at("half_widths"), "/half_widths"));
}

void to_json(nlohmann::json& j, const Polytope& P)
{
    j = nlohmann::json { { "A", matrix_to_json(P.A()) }, { "b", vector_to_json(P.b()) } };
    if (P.rows() == 0) {
        j["dim"] = P.dim();
    }
}

void from_json(const nlohmann::json& j, Polytope& P)
{
    MatrixXd A = json_to_matrix(j.at("A"), "/A");
    VectorXd b = json_to_vector(j.at("b"), "/b");
    if (A.rows() == 0) {
        A.resize(0, j.value("dim", Index { 0 }));
    }
    P = Polytope(std::move(A), std::move(b));
}

} // namespace armpc
