#include "armpc/features.hpp"

#include "armpc/errors.hpp"
#include "armpc/json_io.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>

namespace armpc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

AnalyticFeatures::AnalyticFeatures(std::string name, Index n, Index p, Index d, Fn fn)
    : name_(std::move(name))
    , n_(n)
    , p_(p)
    , d_(d)
    , fn_(std::move(fn))
{
}

VectorXd AnalyticFeatures::evaluate(const VectorXd& x, const VectorXd& z) const
{
    require_dims(x.size() == n_, name_ + ": state dimension");
    require_dims(p_ == 0 || z.size() == p_, name_ + ": exogenous dimension");
    VectorXd out = fn_(x, z);
    require_dims(out.size() == d_, name_ + ": output dimension");
    return out;
}

namespace {

    // Upper bound on sup_q sum_k exp(-|q - c_k|^2 / l^2). Projecting q onto
    // the bounding box of the centers shortens every distance, so the sup is
    // attained in that box; a grid maximum plus a Lipschitz slack bounds it.
    double rbf_square_norm_bound(const MatrixXd& centers, double l)
    {
        const Index q = centers.cols();
        const Index K = centers.rows();
        const VectorXd lo = centers.colwise().minCoeff().transpose();
        const VectorXd hi = centers.colwise().maxCoeff().transpose();
        const int per_dim = q == 1 ? 2001 : (q == 2 ? 201 : 61);
        VectorXd h(q);
        for (Index i = 0; i < q; ++i) {
            h(i) = (hi(i) - lo(i)) / (per_dim - 1);
        }
        auto value = [&](const VectorXd& pt) {
            double s = 0.0;
            for (Index k = 0; k < K; ++k) {
                s += std::exp(-(centers.row(k).transpose() - pt).squaredNorm() / (l * l));
            }
            return s;
        };
        double best = 0.0;
        std::vector<int> idx(static_cast<std::size_t>(q), 0);
        for (;;) {
            VectorXd pt(q);
            for (Index i = 0; i < q; ++i) {
                pt(i) = lo(i) + h(i) * idx[static_cast<std::size_t>(i)];
            }
            best = std::max(best, value(pt));
            Index i = 0;
            while (i < q && ++idx[static_cast<std::size_t>(i)] == per_dim) {
                idx[static_cast<std::size_t>(i)] = 0;
                ++i;
            }
            if (i == q) {
                break;
            }
        }
        // Each term has gradient norm at most sqrt(2) / (l sqrt(e)).
        const double lipschitz = static_cast<double>(K) * std::sqrt(2.0) / (l * std::sqrt(std::exp(1.0)));
        return best + lipschitz * 0.5 * h.norm();
    }

} // namespace

RbfFeatures::RbfFeatures(Index n, std::vector<Index> coords, MatrixXd centers, double length_scale, Scaling scaling)
    : n_(n)
    , coords_(std::move(coords))
    , centers_(std::move(centers))
    , length_scale_(length_scale)
{
    require_dims(centers_.cols() == static_cast<Index>(coords_.size()), "RbfFeatures: centers must have one column per coordinate");
    require_dims(centers_.rows() > 0, "RbfFeatures: need at least one center");
    for (Index c : coords_) {
        require_dims(c >= 0 && c < n_, "RbfFeatures: coordinate index out of range");
    }
    if (!(length_scale_ > 0.0)) {
        throw std::invalid_argument("RbfFeatures: length scale must be positive");
    }
    if (scaling == Scaling::UnitSup) {
        require_dims(centers_.cols() <= 3, "RbfFeatures: UnitSup scaling supports at most 3 coordinates");
        scale_ = 1.0 / std::sqrt(rbf_square_norm_bound(centers_, length_scale_));
    } else {
        scale_ = 1.0 / std::sqrt(static_cast<double>(centers_.rows()));
    }
}

VectorXd RbfFeatures::evaluate(const VectorXd& x, const VectorXd&) const
{
    require_dims(x.size() == n_, "RbfFeatures: state dimension");
    VectorXd q(static_cast<Index>(coords_.size()));
    for (std::size_t k = 0; k < coords_.size(); ++k) {
        q(static_cast<Index>(k)) = x(coords_[k]);
    }
    const Index d = centers_.rows();
    VectorXd out(d);
    for (Index k = 0; k < d; ++k) {
        const double r2 = (centers_.row(k).transpose() - q).squaredNorm();
        out(k) = scale_ * std::exp(-0.5 * r2 / (length_scale_ * length_scale_));
    }
    return out;
}

LoadedNetwork::LoadedNetwork(Index n, std::vector<Index> input_indices, std::vector<Layer> layers)
    : n_(n)
    , input_indices_(std::move(input_indices))
    , layers_(std::move(layers))
{
    if (layers_.empty()) {
        throw ValidationError("/layers", "at least one layer is required");
    }
    Index width = static_cast<Index>(input_indices_.size());
    for (Index idx : input_indices_) {
        if (idx < 0 || idx >= n_) {
            throw ValidationError("/input_indices", "index out of range");
        }
    }
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const std::string path = "/layers/" + std::to_string(l);
        const Layer& layer = layers_[l];
        if (layer.W.cols() != width) {
            throw ValidationError(path + "/W", "expected " + std::to_string(width) + " columns");
        }
        if (layer.b.size() != layer.W.rows()) {
            throw ValidationError(path + "/b", "length must equal the row count of W");
        }
        const bool last = l + 1 == layers_.size();
        if (last && layer.activation != "sigmoid") {
            throw ValidationError(path + "/activation", "output layer must be sigmoid");
        }
        if (!last && layer.activation != "relu") {
            throw ValidationError(path + "/activation", "hidden layers must be relu");
        }
        width = layer.W.rows();
    }
}

std::shared_ptr<LoadedNetwork> LoadedNetwork::from_json(const nlohmann::json& j)
{
    if (!j.is_object()) {
        throw ValidationError("", "feature network must be a JSON object");
    }
    for (const char* key : { "state_dim", "input_indices", "output_scale", "layers" }) {
        if (!j.contains(key)) {
            throw ValidationError(std::string("/") + key, "missing");
        }
    }
    const auto n = j.at("state_dim").get<Index>();
    std::vector<Index> idx;
    for (const auto& v : j.at("input_indices")) {
        idx.push_back(v.get<Index>());
    }
    std::vector<Layer> layers;
    const auto& jl = j.at("layers");
    if (!jl.is_array()) {
        throw ValidationError("/layers", "expected an array");
    }
    for (std::size_t l = 0; l < jl.size(); ++l) {
        const std::string path = "/layers/" + std::to_string(l);
        Layer layer;
        layer.W = json_to_matrix(jl[l].at("W"), path + "/W");
        layer.b = json_to_vector(jl[l].at("b"), path + "/b");
        layer.activation = jl[l].at("activation").get<std::string>();
        layers.push_back(std::move(layer));
    }
    auto net = std::make_shared<LoadedNetwork>(n, std::move(idx), std::move(layers));
    const double expected = 1.0 / std::sqrt(static_cast<double>(net->output_dim()));
    const double scale = j.at("output_scale").get<double>();
    if (std::abs(scale - expected) > 1e-12) {
        throw ValidationError("/output_scale", "must equal 1/sqrt(d) = " + std::to_string(expected));
    }
    return net;
}

std::shared_ptr<LoadedNetwork> LoadedNetwork::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ValidationError(path, "cannot open feature network file");
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path, e.what());
    }
    return from_json(j);
}

VectorXd LoadedNetwork::evaluate(const VectorXd& x, const VectorXd&) const
{
    require_dims(x.size() == n_, "LoadedNetwork: state dimension");
    VectorXd h(static_cast<Index>(input_indices_.size()));
    for (std::size_t k = 0; k < input_indices_.size(); ++k) {
        h(static_cast<Index>(k)) = x(input_indices_[k]);
    }
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        h = layers_[l].W * h + layers_[l].b;
        if (l + 1 < layers_.size()) {
            h = h.cwiseMax(0.0);
        } else {
            h = (1.0 / (1.0 + (-h.array()).exp())).matrix();
        }
    }
    return h / std::sqrt(static_cast<double>(h.size()));
}

FeatureMapPtr make_segment_features(Index n, const std::vector<std::pair<double, double>>& segments)
{
    const auto K = static_cast<Index>(segments.size());
    if (K == 0) {
        throw std::invalid_argument("make_segment_features: need at least one segment");
    }
    const double scale = 1.0 / (2.0 * std::sqrt(static_cast<double>(K)));
    return std::make_shared<AnalyticFeatures>("road_segments", n, 1, K, [segments, K, scale](const VectorXd&, const VectorXd& z) {
        VectorXd out(K);
        const double p = z(0);
        for (Index k = 0; k < K; ++k) {
            const auto& [a, b] = segments[static_cast<std::size_t>(k)];
            out(k) = scale * (std::tanh(p - a) + std::tanh(b - p));
        }
        return out;
    });
}

FeatureMapPtr make_tanh_velocity_features()
{
    return std::make_shared<AnalyticFeatures>("tanh_x2", 2, 0, 1, [](const VectorXd& x, const VectorXd&) {
        return VectorXd::Constant(1, std::tanh(x(1)));
    });
}

FeatureMapPtr make_sin_tanh_features()
{
    return std::make_shared<AnalyticFeatures>("sin_tanh", 2, 0, 2, [](const VectorXd& x, const VectorXd&) {
        VectorXd out(2);
        out << std::sin(4.0 * x(0)), std::tanh(x(1));
        return VectorXd(out / std::sqrt(2.0));
    });
}

FeatureMapPtr make_toy_features()
{
    return std::make_shared<AnalyticFeatures>("toy_sin_tanh", 2, 0, 2, [](const VectorXd& x, const VectorXd&) {
        VectorXd out(2);
        out << std::sin(4.0 * x(0)), std::tanh(x(1));
        return out;
    });
}

double sampled_feature_norm_sup(const FeatureMap& phi, const VectorXd& lo, const VectorXd& hi, const VectorXd& zlo,
    const VectorXd& zhi, int samples, unsigned seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto draw = [&](const VectorXd& a, const VectorXd& b) {
        VectorXd v(a.size());
        for (Index i = 0; i < a.size(); ++i) {
            v(i) = a(i) + (b(i) - a(i)) * unit(rng);
        }
        return v;
    };
    double sup = 0.0;
    for (int s = 0; s < samples; ++s) {
        const VectorXd x = draw(lo, hi);
        const VectorXd z = phi.exogenous_dim() > 0 ? draw(zlo, zhi) : VectorXd();
        sup = std::max(sup, phi(x, z).norm());
    }
    return sup;
}

} // namespace armpc
