#pragma once

#include "armpc/geometry.hpp"

#include <Eigen/Dense>

namespace armpc {

struct RpiOptions {
    int max_iterations = 200;
    /// A candidate row is redundant when its maximum over the current set
    /// exceeds its offset by at most this amount (scaled by 1 + |offset|).
    double redundancy_tolerance = 1e-9;
};

struct RpiResult {
    Polytope set;
    bool empty = false;
    /// False when the iteration cap was reached; `set` is then the last
    /// iterate, which contains the maximal RPI set but need not be invariant.
    bool converged = true;
    int iterations = 0;
};

/// Maximal robust positive invariant set of x+ = A_cl x + d, d in D, inside
/// X intersected with {x : -K x in U_tight}.
///
/// Rows of the k-step set are generated directly as
/// g A_cl^k x <= h - sum_{i<k} h_D(A_cl^i' g') for every base row (g, h), and
/// a row is kept only if it is not implied by the rows kept so far. The
/// iteration stops at the first step where every new row is implied.
RpiResult max_rpi(const Eigen::MatrixXd& A_cl, const Box& D, const Polytope& X, const Polytope& U_tight,
    const Eigen::MatrixXd& K, const RpiOptions& options = {});
RpiResult max_rpi(const Eigen::MatrixXd& A_cl, const Polytope& D, const Polytope& X, const Polytope& U_tight,
    const Eigen::MatrixXd& K, const RpiOptions& options = {});

/// A_cl O + D in O, O in X and -K O in U_tight, each checked facet-wise.
bool is_rpi(const Polytope& O, const Eigen::MatrixXd& A_cl, const Box& D, const Polytope& X, const Polytope& U_tight,
    const Eigen::MatrixXd& K, double tol = 1e-7);

} // namespace armpc
