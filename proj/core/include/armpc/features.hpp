#pragma once

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace armpc {

/// phi : (x, z) -> R^d with x the state and z an optional exogenous signal.
class FeatureMap {
public:
    virtual ~FeatureMap() = default;
    virtual Eigen::Index input_dim() const = 0;
    virtual Eigen::Index exogenous_dim() const { return 0; }
    virtual Eigen::Index output_dim() const = 0;
    virtual Eigen::VectorXd evaluate(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const = 0;
    virtual std::string name() const = 0;

    Eigen::VectorXd operator()(const Eigen::VectorXd& x, const Eigen::VectorXd& z = Eigen::VectorXd()) const
    {
        return evaluate(x, z);
    }
};

using FeatureMapPtr = std::shared_ptr<const FeatureMap>;

/// Closed-form basis given as a callable.
class AnalyticFeatures final : public FeatureMap {
public:
    using Fn = std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>;
    AnalyticFeatures(std::string name, Eigen::Index n, Eigen::Index p, Eigen::Index d, Fn fn);

    Eigen::Index input_dim() const override { return n_; }
    Eigen::Index exogenous_dim() const override { return p_; }
    Eigen::Index output_dim() const override { return d_; }
    Eigen::VectorXd evaluate(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const override;
    std::string name() const override { return name_; }

private:
    std::string name_;
    Eigen::Index n_;
    Eigen::Index p_;
    Eigen::Index d_;
    Fn fn_;
};

/// Gaussian bumps exp(-|q - c_k|^2 / (2 l^2)) over selected state
/// coordinates q. InvSqrtD scales by 1/sqrt(d); UnitSup scales by a certified
/// upper bound of sup ||raw features||, so that ||phi|| <= 1 with less slack
/// (at most 3 selected coordinates).
class RbfFeatures final : public FeatureMap {
public:
    enum class Scaling { InvSqrtD, UnitSup };

    RbfFeatures(Eigen::Index n, std::vector<Eigen::Index> coords, Eigen::MatrixXd centers, double length_scale,
        Scaling scaling = Scaling::InvSqrtD);

    Eigen::Index input_dim() const override { return n_; }
    Eigen::Index output_dim() const override { return centers_.rows(); }
    Eigen::VectorXd evaluate(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const override;
    std::string name() const override { return "rbf"; }

    const Eigen::MatrixXd& centers() const { return centers_; }
    double scale() const { return scale_; }

private:
    Eigen::Index n_;
    std::vector<Eigen::Index> coords_;
    Eigen::MatrixXd centers_;
    double length_scale_;
    double scale_ = 1.0;
};

/// Feedforward network with rectified-linear hidden layers and a sigmoid
/// output layer scaled by 1/sqrt(d).
class LoadedNetwork final : public FeatureMap {
public:
    struct Layer {
        Eigen::MatrixXd W;
        Eigen::VectorXd b;
        std::string activation; ///< "relu" for hidden layers, "sigmoid" for the output
    };

    /// `input_indices` selects the state coordinates fed to the network.
    LoadedNetwork(Eigen::Index n, std::vector<Eigen::Index> input_indices, std::vector<Layer> layers);

    /// Schema: {"state_dim", "input_indices", "output_scale", "layers": [{"W", "b", "activation"}]}.
    /// Throws ValidationError with a field path on any schema violation,
    /// including an output_scale different from 1/sqrt(d).
    static std::shared_ptr<LoadedNetwork> from_json(const nlohmann::json& j);
    static std::shared_ptr<LoadedNetwork> load(const std::string& path);

    Eigen::Index input_dim() const override { return n_; }
    Eigen::Index output_dim() const override { return layers_.back().W.rows(); }
    Eigen::VectorXd evaluate(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const override;
    std::string name() const override { return "loaded_network"; }

private:
    Eigen::Index n_;
    std::vector<Eigen::Index> input_indices_;
    std::vector<Layer> layers_;
};

/// Road-segment features phi_k(p) = (tanh(p - a_k) + tanh(b_k - p)) / (2 sqrt(K))
/// with the position p supplied as the exogenous signal.
FeatureMapPtr make_segment_features(Eigen::Index n, const std::vector<std::pair<double, double>>& segments);

/// tanh(x_2) on a 2-state system.
FeatureMapPtr make_tanh_velocity_features();
/// (1/sqrt 2) [sin(4 x_1), tanh(x_2)].
FeatureMapPtr make_sin_tanh_features();
/// [sin(4 x_1), tanh(x_2)] without scaling, the regression basis of the
/// estimation toy problem.
FeatureMapPtr make_toy_features();

/// Largest ||phi(x, z)|| over random samples of x in [lo, hi] (and z in
/// [zlo, zhi] when the map has exogenous inputs).
double sampled_feature_norm_sup(const FeatureMap& phi, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
    const Eigen::VectorXd& zlo, const Eigen::VectorXd& zhi, int samples, unsigned seed);

} // namespace armpc
