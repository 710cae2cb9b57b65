#pragma once

#include "armpc/controller.hpp"
#include "armpc/estimation.hpp"
#include "armpc/features.hpp"
#include "armpc/geometry.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace armpc {

using Rng = std::mt19937_64;

/// Additive process noise v(t). Every sample lies in support().
struct NoiseModel {
    enum class Kind { Zero, TruncatedGaussian, UniformBox };
    Kind kind = Kind::Zero;
    /// Per-component standard deviation (TruncatedGaussian). A zero entry
    /// gives a noise-free component.
    Eigen::VectorXd sigma;
    /// Truncation at +-truncation * sigma.
    double truncation = 1.96;
    /// Half-widths (UniformBox).
    Eigen::VectorXd half_width;
    Eigen::Index dim = 0;

    static NoiseModel zero(Eigen::Index n);
    static NoiseModel truncated_gaussian(const Eigen::VectorXd& sigma, double truncation = 1.96);
    static NoiseModel uniform_box(const Eigen::VectorXd& half_width);

    Eigen::VectorXd sample(Rng& rng) const;
    Box support() const;
};

/// x(t+1) = A x + B u + f(x, z) + v. The exogenous signal z evolves by
/// z_next(z, x) and is noise-free unless the plant adds its own noise there.
struct Plant {
    using Term = std::function<Eigen::VectorXd(const Eigen::VectorXd& x, const Eigen::VectorXd& z)>;
    using ExogenousStep = std::function<Eigen::VectorXd(const Eigen::VectorXd& z, const Eigen::VectorXd& x, Rng& rng)>;

    std::string name;
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    Term f;
    NoiseModel noise;
    Polytope X;
    Polytope U;
    /// Regression model used by the estimators. When f lies in its span,
    /// W_true holds the exact weights.
    FeatureMapPtr features;
    RowMasks masks;
    std::optional<Eigen::MatrixXd> W_true;
    /// A-priori box containing f over X, when known.
    std::optional<Box> f_range;

    Eigen::VectorXd x0;
    Eigen::VectorXd z0;
    ExogenousStep z_next;

    // Task defaults.
    Eigen::MatrixXd Q;
    Eigen::MatrixXd R;
    int N = 3;
    bool fixed_gain = false;
    double dt = 0.1;
    /// State coordinates reported as the position error.
    std::vector<Eigen::Index> position_indices;

    Eigen::Index n() const { return A.rows(); }
    Eigen::Index m() const { return B.cols(); }
    Eigen::VectorXd f_true(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const;
    /// Noise-free successor A x + B u + f(x, z).
    Eigen::VectorXd mean_step(const Eigen::VectorXd& x, const Eigen::VectorXd& u, const Eigen::VectorXd& z) const;
    Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u, const Eigen::VectorXd& z, Rng& rng) const;
    Eigen::VectorXd next_exogenous(const Eigen::VectorXd& z, const Eigen::VectorXd& x, Rng& rng) const;
};

/// Truncated Gaussian with sigma^2 = 5e-3 per component.
NoiseModel double_integrator_noise();

/// Matched: f = [0, w1 tanh(x2)]. Unmatched: f = (1/sqrt 2)[w1 sin(4 x1), w2 tanh(x2)].
Plant make_double_integrator(bool matched, double w1, double w2 = 0.0, std::optional<NoiseModel> noise = std::nullopt);

struct QuadrotorParams {
    double wind_speed = 4.0;    ///< V_w [m/s]
    double wind_angle_deg = 0.0; ///< theta_w
    double mass = 1.0;
    double inertia = 0.01;
    double arm = 0.2;
    double drag_coefficient = 0.5; ///< c
    double drag_length = 0.4;      ///< l
    double gravity = 9.81;
    double dt = 0.1;
    double position_bound = 2.0;
    double angle_bound = 0.5;
    double noise_sigma = 0.003;
    int horizon = 8;
    /// RBF grid over (p_x, p_y): grid x grid centers on [-extent, extent]^2,
    /// scaled to a certified unit norm bound.
    int rbf_grid = 2;
    double rbf_extent = 1.5;
    double rbf_length = 1.5;
    Eigen::VectorXd x0;
};

/// Wind force (F_x, F_y) in newtons at position (p_x, p_y).
Eigen::Vector2d quadrotor_wind_force(const QuadrotorParams& p, double px, double py);
/// Euler-discretized hover linearization with the wind force entering the
/// velocity rows. State [p_x, p_y, theta, v_x, v_y, omega], input thrust
/// deviations [du_f, du_r].
Plant make_quadrotor(const QuadrotorParams& params, FeatureMapPtr features = nullptr);

struct CruiseParams {
    double mass = 1000.0;
    double friction = 20.0; ///< k [N s / m]
    double gravity = 9.81;
    double dt = 0.1;
    double v_ref = 25.0;     ///< 90 km/h
    double v_initial = 85.0 / 3.6;
    std::vector<std::pair<double, double>> segments { { 100.0, 200.0 }, { 260.0, 360.0 }, { 420.0, 520.0 } };
    std::vector<double> angles_deg { 3.0, -2.0, 4.0 };
    double noise_variance = 1e-3;
    double speed_bound = 5.0; ///< |v_ref - v|
    double input_bound = 4.0; ///< pseudo-acceleration
    /// A-priori bound on the road grade; gives the known range of f. Zero
    /// disables it.
    double max_grade_deg = 6.0;
    int horizon = 5;
    double q = 1.0;
    double r = 1.0;
};

/// Scalar velocity-tracking error x = v_ref - v with the position as the
/// exogenous signal.
Plant make_cruise(const CruiseParams& params);
/// Route length covered at v_ref, in steps.
int cruise_route_steps(const CruiseParams& params, double route_length = 600.0);

// ---------------------------------------------------------------- warm-up data

struct WarmupData {
    Eigen::MatrixXd Phi; ///< one feature row per sample
    Eigen::MatrixXd Y;   ///< one residual row per sample
};

/// States sampled uniformly in [lo, hi] with u = 0 (the exogenous signal is
/// held at z0).
WarmupData warmup_uniform(const Plant& plant, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int samples,
    std::uint64_t seed);
/// One closed-loop trajectory from x0 under u = -K x plus Gaussian excitation.
WarmupData warmup_trajectory(const Plant& plant, const Eigen::MatrixXd& K, double excitation_sigma, int samples,
    std::uint64_t seed);

/// Flat-prior BLR estimator fitted to warm-up data, sigma taken from the
/// plant's noise model.
BLRState blr_prior_from_warmup(const Plant& plant, const WarmupData& data, double delta, double ridge = 1e-6);

// ---------------------------------------------------------------- runs

struct StepRecord {
    int episode = 0;
    int t = 0;
    Eigen::VectorXd x;
    Eigen::VectorXd z;
    Eigen::VectorXd u;
    Eigen::VectorXd u0;
    Eigen::VectorXd f_hat;
    Eigen::VectorXd f_true;
    /// x_next - A x - B u0 (empty on the terminal record).
    Eigen::VectorXd d;
    SolveKind status = SolveKind::Optimal;
    double objective = 0.0;
    double kkt_residual = 0.0;
    int sets_id = 0;
    bool model_frozen = false;
    bool state_ok = true;
    bool input_ok = true;
    bool d_contained = true;
    bool confidence_ok = true;
    bool terminal = false;
};

/// Sets in force while a given sets id was current.
struct SetSnapshot {
    int id = 0;
    Box F_hat;
    Box D_err;
    Box D_hat;
    Box D_bench;
    Box D_box;
    Polytope U_eff;
    Polytope O;
    bool O_empty = false;
    bool O_converged = true;
};

struct RunMetrics {
    double cost = 0.0;
    int steps = 0;
    int state_violations = 0;
    int input_violations = 0;
    /// Global step index of the first non-optimal solve, -1 when none.
    int infeasible_step = -1;
    bool started_feasible = false;
    bool confidence_event = true;
    int containment_violations = 0;
    double sq_acceleration = 0.0;
    double mean_position_error = 0.0;
    bool model_frozen = false;
    double max_kkt = 0.0;
};

struct RunLog {
    std::string run_id;
    std::uint64_t seed = 0;
    std::string controller;
    std::vector<StepRecord> records;
    std::vector<SetSnapshot> snapshots;
    RunMetrics metrics;
};

struct RunOptions {
    int steps = 50;
    int episodes = 1;
    std::uint64_t seed = 0;
    /// Abort the whole run on the first non-optimal solve.
    bool abort_on_infeasible = true;
    double tol = 1e-7;
};

SetSnapshot snapshot(const Controller& controller);

/// Runs `episodes` episodes of `steps` steps each from plant.x0. Between
/// episodes controller.end_episode() is called. Deterministic given the seed.
RunLog run_episodes(const Plant& plant, Controller& controller, const RunOptions& options);

/// Runs fn(0..count-1) on up to `jobs` threads and returns results in index
/// order.
std::vector<RunLog> run_campaign(int count, int jobs, const std::function<RunLog(int)>& fn);

// ---------------------------------------------------------------- feasible envelope

struct EnvelopeResult {
    double fraction = 0.0;
    int feasible_points = 0;
    std::vector<Eigen::Vector2d> hull;
};

/// Convex hull of the grid initial conditions for which the MPC is feasible,
/// as a fraction of the area of the box X. `problem.X` must be a 2-D box.
/// Uses one pair of LPs per grid line.
EnvelopeResult feasible_envelope(const RobustMPCProblem& problem, int grid = 41);
/// Same quantity by one feasibility LP per grid point.
EnvelopeResult feasible_envelope_bruteforce(const RobustMPCProblem& problem, int grid = 41);

} // namespace armpc
