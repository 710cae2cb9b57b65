#include "armpc/errors.hpp"
#include "armpc/simulation.hpp"

#include <cmath>
#include <numbers>

namespace armpc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

NoiseModel NoiseModel::zero(Index n)
{
    NoiseModel m;
    m.kind = Kind::Zero;
    m.dim = n;
    return m;
}

NoiseModel NoiseModel::truncated_gaussian(const VectorXd& sigma, double truncation)
{
    if ((sigma.array() < 0.0).any() || !(truncation > 0.0)) {
        throw std::invalid_argument("NoiseModel: sigma must be nonnegative and truncation positive");
    }
    NoiseModel m;
    m.kind = Kind::TruncatedGaussian;
    m.sigma = sigma;
    m.truncation = truncation;
    m.dim = sigma.size();
    return m;
}

NoiseModel NoiseModel::uniform_box(const VectorXd& half_width)
{
    if ((half_width.array() < 0.0).any()) {
        throw std::invalid_argument("NoiseModel: half-widths must be nonnegative");
    }
    NoiseModel m;
    m.kind = Kind::UniformBox;
    m.half_width = half_width;
    m.dim = half_width.size();
    return m;
}

VectorXd NoiseModel::sample(Rng& rng) const
{
    VectorXd v = VectorXd::Zero(dim);
    switch (kind) {
    case Kind::Zero:
        break;
    case Kind::TruncatedGaussian: {
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Index i = 0; i < dim; ++i) {
            if (sigma(i) == 0.0) {
                continue;
            }
            double e = normal(rng);
            while (std::abs(e) > truncation) {
                e = normal(rng);
            }
            v(i) = sigma(i) * e;
        }
        break;
    }
    case Kind::UniformBox: {
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        for (Index i = 0; i < dim; ++i) {
            v(i) = half_width(i) * unif(rng);
        }
        break;
    }
    }
    return v;
}

Box NoiseModel::support() const
{
    switch (kind) {
    case Kind::TruncatedGaussian:
        return Box::symmetric(truncation * sigma);
    case Kind::UniformBox:
        return Box::symmetric(half_width);
    case Kind::Zero:
        break;
    }
    return Box::zero(dim);
}

VectorXd Plant::f_true(const VectorXd& x, const VectorXd& z) const { return f ? f(x, z) : VectorXd::Zero(n()); }

VectorXd Plant::mean_step(const VectorXd& x, const VectorXd& u, const VectorXd& z) const
{
    require_dims(x.size() == n() && u.size() == m(), name + ": state or input dimension");
    return A * x + B * u + f_true(x, z);
}

VectorXd Plant::step(const VectorXd& x, const VectorXd& u, const VectorXd& z, Rng& rng) const
{
    return mean_step(x, u, z) + noise.sample(rng);
}

VectorXd Plant::next_exogenous(const VectorXd& z, const VectorXd& x, Rng& rng) const
{
    return z_next ? z_next(z, x, rng) : z;
}

NoiseModel double_integrator_noise() { return NoiseModel::truncated_gaussian(VectorXd::Constant(2, std::sqrt(5e-3))); }

Plant make_double_integrator(bool matched, double w1, double w2, std::optional<NoiseModel> noise)
{
    Plant p;
    p.name = matched ? "double_integrator_matched" : "double_integrator_unmatched";
    p.A.resize(2, 2);
    p.A << 1.0, 0.2, 0.0, 1.0;
    p.B.resize(2, 1);
    p.B << 0.0, 1.0;
    p.noise = noise ? *noise : double_integrator_noise();
    require_dims(p.noise.dim == 2, "make_double_integrator: noise dimension");
    p.X = Box::from_bounds(Eigen::Vector2d(-4.0, -3.0), Eigen::Vector2d(4.0, 3.0)).to_polytope();
    p.U = Box::symmetric(VectorXd::Constant(1, 2.0)).to_polytope();
    if (matched) {
        p.features = make_tanh_velocity_features();
        p.masks = { {}, { 0 } };
        MatrixXd W(2, 1);
        W << 0.0, w1;
        p.W_true = W;
        p.f = [w1](const VectorXd& x, const VectorXd&) {
            VectorXd f(2);
            f << 0.0, w1 * std::tanh(x(1));
            return f;
        };
    } else {
        p.features = make_sin_tanh_features();
        p.masks = { { 0 }, { 1 } };
        MatrixXd W(2, 2);
        W << w1, 0.0, 0.0, w2;
        p.W_true = W;
        p.f = [w1, w2](const VectorXd& x, const VectorXd&) {
            VectorXd f(2);
            f << w1 * std::sin(4.0 * x(0)), w2 * std::tanh(x(1));
            return VectorXd(f / std::sqrt(2.0));
        };
    }
    p.x0 = Eigen::Vector2d(2.0, 2.0);
    p.z0 = VectorXd(0);
    p.Q = MatrixXd::Identity(2, 2);
    p.R = MatrixXd::Identity(1, 1);
    p.N = 3;
    p.dt = 0.2;
    p.position_indices = { 0 };
    return p;
}

Eigen::Vector2d quadrotor_wind_force(const QuadrotorParams& p, double px, double py)
{
    const double th = p.wind_angle_deg * std::numbers::pi / 180.0;
    const double s = py * std::cos(th) - px * std::sin(th);
    const double vw = p.wind_speed * std::exp(-0.5 * s * s);
    const double mag = p.drag_coefficient * p.drag_length * vw * vw;
    // Wind blows toward the origin side along its incidence angle, measured
    // from the negative y axis ("from above").
    return Eigen::Vector2d(-std::sin(th) * mag, -std::cos(th) * mag);
}

Plant make_quadrotor(const QuadrotorParams& params, FeatureMapPtr features)
{
    if (!(params.mass > 0.0 && params.inertia > 0.0 && params.dt > 0.0)) {
        throw std::invalid_argument("make_quadrotor: mass, inertia and dt must be positive");
    }
    const double dt = params.dt;
    const double g = params.gravity;
    Plant p;
    p.name = "quadrotor_wind";
    MatrixXd Ac = MatrixXd::Zero(6, 6);
    Ac(0, 3) = 1.0;
    Ac(1, 4) = 1.0;
    Ac(2, 5) = 1.0;
    Ac(3, 2) = -g;
    MatrixXd Bc = MatrixXd::Zero(6, 2);
    Bc(4, 0) = 1.0 / params.mass;
    Bc(4, 1) = 1.0 / params.mass;
    Bc(5, 0) = params.arm / params.inertia;
    Bc(5, 1) = -params.arm / params.inertia;
    p.A = MatrixXd::Identity(6, 6) + dt * Ac;
    p.B = dt * Bc;
    const double scale = dt / params.mass;
    p.f = [params, scale](const VectorXd& x, const VectorXd&) {
        const Eigen::Vector2d F = quadrotor_wind_force(params, x(0), x(1));
        VectorXd f = VectorXd::Zero(6);
        f(3) = scale * F(0);
        f(4) = scale * F(1);
        return f;
    };
    p.noise = NoiseModel::truncated_gaussian(VectorXd::Constant(6, params.noise_sigma));
    VectorXd lo(6);
    VectorXd hi(6);
    const double big = 1e3;
    lo << -params.position_bound, -params.position_bound, -params.angle_bound, -big, -big, -big;
    hi = -lo;
    // Velocities are unconstrained; only the pose rows are kept.
    MatrixXd Ax = MatrixXd::Zero(6, 6);
    VectorXd bx(6);
    for (Index i = 0; i < 3; ++i) {
        Ax(2 * i, i) = 1.0;
        Ax(2 * i + 1, i) = -1.0;
        bx(2 * i) = hi(i);
        bx(2 * i + 1) = -lo(i);
    }
    p.X = Polytope(Ax, bx);
    const double du = params.mass * g / 2.0;
    p.U = Box::symmetric(VectorXd::Constant(2, du)).to_polytope();
    if (!features) {
        const int G = std::max(params.rbf_grid, 1);
        MatrixXd centers(G * G, 2);
        for (int a = 0; a < G; ++a) {
            for (int b = 0; b < G; ++b) {
                const double ca = G == 1 ? 0.0 : -params.rbf_extent + 2.0 * params.rbf_extent * a / (G - 1);
                const double cb = G == 1 ? 0.0 : -params.rbf_extent + 2.0 * params.rbf_extent * b / (G - 1);
                centers(a * G + b, 0) = ca;
                centers(a * G + b, 1) = cb;
            }
        }
        features = std::make_shared<RbfFeatures>(
            6, std::vector<Index> { 0, 1 }, centers, params.rbf_length, RbfFeatures::Scaling::UnitSup);
    }
    require_dims(features->input_dim() == 6, "make_quadrotor: features must take the 6-dimensional state");
    const Index d = features->output_dim();
    std::vector<Index> all(static_cast<std::size_t>(d));
    for (Index k = 0; k < d; ++k) {
        all[static_cast<std::size_t>(k)] = k;
    }
    p.features = features;
    p.masks = { {}, {}, {}, all, all, {} };
    // The strongest wind of the training distribution (5 m/s) bounds f a priori.
    const double f_max = scale * params.drag_coefficient * params.drag_length * 25.0;
    VectorXd range = VectorXd::Zero(6);
    range(3) = f_max;
    range(4) = f_max;
    p.f_range = Box::symmetric(range);
    p.x0 = params.x0.size() == 6 ? params.x0 : VectorXd::Zero(6);
    if (params.x0.size() != 6) {
        p.x0(0) = 1.0;
        p.x0(1) = 1.5;
    }
    p.z0 = VectorXd(0);
    p.Q = MatrixXd::Identity(6, 6);
    p.R = MatrixXd::Identity(2, 2);
    p.N = params.horizon;
    p.fixed_gain = true;
    p.dt = dt;
    p.position_indices = { 0, 1 };
    return p;
}

Plant make_cruise(const CruiseParams& params)
{
    if (params.segments.size() != params.angles_deg.size() || params.segments.empty()) {
        throw ValidationError("/plant/angles_deg", "need one angle per road segment");
    }
    const double dt = params.dt;
    const auto K = static_cast<Index>(params.segments.size());
    Plant p;
    p.name = "cruise_control";
    p.A = MatrixXd::Constant(1, 1, 1.0 - dt * params.friction / params.mass);
    p.B = MatrixXd::Constant(1, 1, dt);
    p.features = make_segment_features(1, params.segments);
    p.masks = { std::vector<Index>() };
    MatrixXd W(1, K);
    for (Index k = 0; k < K; ++k) {
        p.masks[0].push_back(k);
        W(0, k) = dt * params.gravity * std::sqrt(static_cast<double>(K))
            * std::sin(params.angles_deg[static_cast<std::size_t>(k)] * std::numbers::pi / 180.0);
    }
    p.W_true = W;
    const FeatureMapPtr phi = p.features;
    p.f = [phi, W](const VectorXd& x, const VectorXd& z) { return VectorXd(W * (*phi)(x, z)); };
    const double sigma = std::sqrt(params.noise_variance);
    p.noise = NoiseModel::truncated_gaussian(VectorXd::Constant(1, sigma));
    if (params.max_grade_deg > 0.0) {
        p.f_range = Box::symmetric(
            VectorXd::Constant(1, dt * params.gravity * std::sin(params.max_grade_deg * std::numbers::pi / 180.0)));
    }
    p.X = Box::symmetric(VectorXd::Constant(1, params.speed_bound)).to_polytope();
    p.U = Box::symmetric(VectorXd::Constant(1, params.input_bound)).to_polytope();
    p.x0 = VectorXd::Constant(1, params.v_ref - params.v_initial);
    p.z0 = VectorXd::Zero(1);
    const NoiseModel position_noise = NoiseModel::truncated_gaussian(VectorXd::Constant(1, sigma));
    const double v_ref = params.v_ref;
    p.z_next = [dt, v_ref, position_noise](const VectorXd& z, const VectorXd& x, Rng& rng) {
        return VectorXd(z + VectorXd::Constant(1, dt * (v_ref - x(0))) + position_noise.sample(rng));
    };
    p.Q = MatrixXd::Constant(1, 1, params.q);
    p.R = MatrixXd::Constant(1, 1, params.r);
    p.N = params.horizon;
    p.dt = dt;
    p.position_indices = { 0 };
    return p;
}

int cruise_route_steps(const CruiseParams& params, double route_length)
{
    return static_cast<int>(std::ceil(route_length / (params.v_ref * params.dt)));
}

WarmupData warmup_uniform(const Plant& plant, const VectorXd& lo, const VectorXd& hi, int samples, std::uint64_t seed)
{
    require_dims(lo.size() == plant.n() && hi.size() == plant.n(), "warmup_uniform: bounds dimension");
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    WarmupData data;
    data.Phi.resize(samples, plant.features->output_dim());
    data.Y.resize(samples, plant.n());
    const VectorXd u = VectorXd::Zero(plant.m());
    for (int k = 0; k < samples; ++k) {
        VectorXd x(plant.n());
        for (Index i = 0; i < plant.n(); ++i) {
            x(i) = lo(i) + (hi(i) - lo(i)) * unif(rng);
        }
        const VectorXd x_next = plant.step(x, u, plant.z0, rng);
        data.Phi.row(k) = (*plant.features)(x, plant.z0).transpose();
        data.Y.row(k) = residual(x_next, x, u, plant.A, plant.B).transpose();
    }
    return data;
}

WarmupData warmup_trajectory(const Plant& plant, const MatrixXd& K, double excitation_sigma, int samples,
    std::uint64_t seed)
{
    require_dims(K.rows() == plant.m() && K.cols() == plant.n(), "warmup_trajectory: gain shape");
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, excitation_sigma > 0.0 ? excitation_sigma : 1.0);
    WarmupData data;
    data.Phi.resize(samples, plant.features->output_dim());
    data.Y.resize(samples, plant.n());
    VectorXd x = plant.x0;
    VectorXd z = plant.z0;
    for (int k = 0; k < samples; ++k) {
        VectorXd u = -K * x;
        if (excitation_sigma > 0.0) {
            for (Index j = 0; j < u.size(); ++j) {
                u(j) += normal(rng);
            }
        }
        const VectorXd x_next = plant.step(x, u, z, rng);
        data.Phi.row(k) = (*plant.features)(x, z).transpose();
        data.Y.row(k) = residual(x_next, x, u, plant.A, plant.B).transpose();
        z = plant.next_exogenous(z, x, rng);
        x = x_next;
    }
    return data;
}

BLRState blr_prior_from_warmup(const Plant& plant, const WarmupData& data, double delta, double ridge)
{
    VectorXd sigma(plant.n());
    for (Index i = 0; i < plant.n(); ++i) {
        switch (plant.noise.kind) {
        case NoiseModel::Kind::TruncatedGaussian:
            sigma(i) = plant.noise.sigma(i);
            break;
        case NoiseModel::Kind::UniformBox:
            // A variable bounded in [-a, a] is sub-Gaussian with parameter a.
            sigma(i) = plant.noise.half_width(i);
            break;
        case NoiseModel::Kind::Zero:
            sigma(i) = 1e-6;
            break;
        }
        if (sigma(i) == 0.0) {
            sigma(i) = 1e-6;
        }
    }
    return blr_from_data(plant.masks, data.Phi, data.Y, sigma, delta, ridge);
}

} // namespace armpc
