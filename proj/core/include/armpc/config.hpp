#pragma once

#include "armpc/controller.hpp"
#include "armpc/simulation.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace armpc {

struct PlantSection {
    /// double_integrator, quadrotor, cruise or toy.
    std::string type = "double_integrator";
    bool matched = true;
    double w1 = 0.5;
    double w2 = 0.0;
    /// "default" keeps the plant's noise model; "zero" disables it.
    std::string noise = "default";
    std::optional<Eigen::VectorXd> x0;
    QuadrotorParams quadrotor;
    /// "rbf" or a path to a network file (relative paths resolve against the
    /// config file).
    std::string quadrotor_features = "rbf";
    CruiseParams cruise;
    // Estimation toy problem.
    Eigen::VectorXd toy_w = Eigen::Vector2d(0.5, 0.5);
    double toy_noise = 0.4;
    double toy_bias = 0.0;
};

struct ControllerSection {
    std::vector<Variant> variants { Variant::AdaptiveCE_A };
    std::optional<int> N;
    std::optional<Eigen::MatrixXd> Q;
    std::optional<Eigen::MatrixXd> R;
    std::optional<bool> fixed_gain;
    /// Intersect F with the plant's a-priori range when it has one.
    bool use_f_range = true;
};

struct WarmupSection {
    /// "uniform" (states in [lo, hi], u = 0) or "trajectory" (LQR plus
    /// Gaussian excitation from x0).
    std::string kind = "uniform";
    int samples = 45;
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
    double excitation = 0.5;
    /// Warm-up seed = seed_offset + run seed.
    std::uint64_t seed_offset = 1000;
};

struct EstimatorSection {
    /// "blr" or "set_membership".
    std::string type = "blr";
    double delta = 0.05;
    int chi2_dof = 0;
    double ridge = 1e-6;
    /// Optional prior file; replaces the warm-up fit.
    std::string prior_file;
    WarmupSection warmup;
    /// Initial half-width of the set-membership parameter box around zero.
    double sm_half_width = 1.0;
};

struct ExperimentSection {
    /// "closed_loop" or "estimation".
    std::string kind = "closed_loop";
    int steps = 50;
    int episodes = 1;
    int seeds = 10;
    std::uint64_t seed = 0;
    bool abort_on_infeasible = true;
    /// Feasible-envelope grid at t = 0 for 2-D plants; 0 disables it.
    int envelope_grid = 0;
};

struct Config {
    PlantSection plant;
    ControllerSection controller;
    EstimatorSection estimator;
    ExperimentSection experiment;
    /// The document the config was parsed from.
    nlohmann::json document;
    std::string base_dir;
};

/// Throws ValidationError naming the offending field (e.g. "/controller/R").
Config parse_config(const nlohmann::json& j, const std::string& base_dir = ".");
Config load_config(const std::string& path);

/// Sets a numeric entry addressed by a dotted path such as "plant.w1".
void set_config_value(nlohmann::json& j, const std::string& dotted_path, double value);

Plant build_plant(const Config& config);
ControllerConfig build_controller_config(const Config& config, const Plant& plant, Variant variant);
/// Warm-up fit or prior file, seeded by the run seed. Null for NaiveTube.
std::unique_ptr<Estimator> build_estimator(const Config& config, const Plant& plant, Variant variant,
    std::uint64_t seed);

} // namespace armpc
