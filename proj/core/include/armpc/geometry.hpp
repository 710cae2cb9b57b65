#pragma once

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include <atomic>
#include <vector>

namespace armpc {

/// Absolute tolerance on facet residuals for membership and inclusion tests.
inline constexpr double kSetTolerance = 1e-8;

class Polytope;

/// Axis-aligned box. Emptiness is an explicit flag; half-widths are never
/// negative.
class Box {
public:
    Box() = default;
    Box(Eigen::VectorXd center, Eigen::VectorXd half_widths);

    static Box symmetric(const Eigen::VectorXd& half_widths);
    static Box from_bounds(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);
    static Box point(const Eigen::VectorXd& x);
    static Box zero(Eigen::Index n);
    static Box empty(Eigen::Index n);

    Eigen::Index dim() const { return center_.size(); }
    bool is_empty() const { return empty_; }
    const Eigen::VectorXd& center() const { return center_; }
    const Eigen::VectorXd& half_widths() const { return half_widths_; }
    Eigen::VectorXd lower() const { return center_ - half_widths_; }
    Eigen::VectorXd upper() const { return center_ + half_widths_; }
    bool is_origin_symmetric(double tol = 0.0) const;

    Polytope to_polytope() const;

private:
    Eigen::VectorXd center_;
    Eigen::VectorXd half_widths_;
    bool empty_ = false;
};

/// {x : A x <= b}. Rows must be finite and nonzero. A polytope with zero rows
/// is the whole space of dimension `dim`.
class Polytope {
public:
    Polytope() = default;
    Polytope(Eigen::MatrixXd A, Eigen::VectorXd b);
    static Polytope universe(Eigen::Index n);
    /// A polytope known to be empty (0'x <= -1 is not representable, so an
    /// infeasible pair of rows is used).
    static Polytope empty(Eigen::Index n);

    Polytope(const Polytope& other);
    Polytope& operator=(const Polytope& other);
    Polytope(Polytope&&) noexcept;
    Polytope& operator=(Polytope&&) noexcept;
    ~Polytope() = default;

    Eigen::Index dim() const { return A_.cols(); }
    Eigen::Index rows() const { return A_.rows(); }
    const Eigen::MatrixXd& A() const { return A_; }
    const Eigen::VectorXd& b() const { return b_; }

    /// LP feasibility check; the answer is cached.
    bool is_empty() const;

    Polytope intersect(const Polytope& other) const;
    /// {x : M x in P}.
    Polytope preimage(const Eigen::MatrixXd& M) const;
    /// Drops rows whose normalized (a, b) duplicate an earlier row; among rows
    /// with the same normal the smallest offset is kept.
    Polytope remove_duplicate_rows(double tol = 1e-12) const;

private:
    Eigen::MatrixXd A_;
    Eigen::VectorXd b_;
    // -1 unknown, 0 nonempty, 1 empty.
    mutable std::atomic<int> empty_state_ { -1 };
};

Box minkowski_sum(const Box& P, const Box& Q);
/// Facet offsets grow by the support of Q. This is the exact sum when P is a
/// box; for general P it is an outer approximation.
Polytope minkowski_sum(const Polytope& P, const Box& Q);

Box pontryagin_diff(const Box& P, const Box& Q);
Polytope pontryagin_diff(const Polytope& P, const Box& Q);
Polytope pontryagin_diff(const Polytope& P, const Polytope& Q);

/// Tightest box containing M P (interval arithmetic).
Box linear_map(const Eigen::MatrixXd& M, const Box& P);

double support(const Box& P, const Eigen::VectorXd& dir);
/// Throws UnboundedError or EmptySetError.
double support(const Polytope& P, const Eigen::VectorXd& dir);

struct Ball {
    Eigen::VectorXd center;
    double radius = 0.0;
};

/// Largest inscribed Euclidean ball. Throws EmptySetError when P is empty and
/// UnboundedError when the ball is unbounded.
Ball chebyshev_center(const Polytope& P);

/// Smallest enclosing Euclidean ball of P (d <= 3, via vertex enumeration).
/// The returned radius is the exact maximum distance from the center to a
/// vertex.
Ball enclosing_ball(const Polytope& P);
Ball enclosing_ball(const std::vector<Eigen::VectorXd>& points);

bool contains_point(const Polytope& P, const Eigen::VectorXd& x, double tol = kSetTolerance);
bool contains_point(const Box& P, const Eigen::VectorXd& x, double tol = kSetTolerance);
bool contains(const Box& outer, const Box& inner, double tol = kSetTolerance);
bool contains(const Polytope& outer, const Box& inner, double tol = kSetTolerance);
bool contains(const Polytope& outer, const Polytope& inner, double tol = kSetTolerance);

/// Vertices of a bounded polytope in dimension <= 3 by enumerating row
/// subsets. Throws DimensionError for higher dimensions.
std::vector<Eigen::VectorXd> vertices(const Polytope& P, double tol = 1e-9);

/// Counter-clockwise convex hull (Andrew's monotone chain).
std::vector<Eigen::Vector2d> convex_hull_2d(std::vector<Eigen::Vector2d> points);
double polygon_area(const std::vector<Eigen::Vector2d>& polygon);

void to_json(nlohmann::json& j, const Box& box);
void from_json(const nlohmann::json& j, Box& box);
void to_json(nlohmann::json& j, const Polytope& P);
void from_json(const nlohmann::json& j, Polytope& P);

} // namespace armpc
