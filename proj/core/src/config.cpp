#include "armpc/config.hpp"

#include "armpc/errors.hpp"
#include "armpc/json_io.hpp"
#include "armpc/optimization.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace armpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

    /// Reads typed fields out of one JSON object and rejects unknown keys.
    class Section {
    public:
        Section(const nlohmann::json& root, const std::string& name)
            : path_("/" + name)
        {
            if (!root.contains(name)) {
                obj_ = nlohmann::json::object();
                return;
            }
            obj_ = root.at(name);
            if (!obj_.is_object()) {
                throw ValidationError(path_, "expected an object");
            }
        }

        std::string at(const std::string& key) const { return path_ + "/" + key; }
        bool has(const std::string& key)
        {
            seen_.insert(key);
            return obj_.contains(key) && !obj_.at(key).is_null();
        }
        const nlohmann::json& raw(const std::string& key) const { return obj_.at(key); }

        template <typename T>
        void get(const std::string& key, T& out)
        {
            if (!has(key)) {
                return;
            }
            try {
                out = obj_.at(key).get<T>();
            } catch (const nlohmann::json::exception&) {
                throw ValidationError(at(key), "wrong type");
            }
        }

        void vector(const std::string& key, VectorXd& out)
        {
            if (has(key)) {
                out = json_to_vector(obj_.at(key), at(key));
            }
        }

        void reject_unknown() const
        {
            for (const auto& item : obj_.items()) {
                if (seen_.count(item.key()) == 0) {
                    throw ValidationError(at(item.key()), "unknown field");
                }
            }
        }

    private:
        nlohmann::json obj_;
        std::string path_;
        std::set<std::string> seen_;
    };

    void require(bool ok, const std::string& field, const std::string& what)
    {
        if (!ok) {
            throw ValidationError(field, what);
        }
    }

    bool symmetric_psd(const MatrixXd& M, bool strict)
    {
        if (M.rows() != M.cols() || M.rows() == 0 || !M.allFinite()) {
            return false;
        }
        if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, M.cwiseAbs().maxCoeff())) {
            return false;
        }
        const Eigen::SelfAdjointEigenSolver<MatrixXd> es(M);
        const double lo = es.eigenvalues().minCoeff();
        return strict ? lo > 1e-12 : lo >= -1e-10;
    }

    void parse_plant(const nlohmann::json& root, PlantSection& p)
    {
        Section s(root, "plant");
        s.get("type", p.type);
        require(p.type == "double_integrator" || p.type == "quadrotor" || p.type == "cruise" || p.type == "toy",
            s.at("type"), "expected double_integrator, quadrotor, cruise or toy");
        s.get("matched", p.matched);
        s.get("w1", p.w1);
        s.get("w2", p.w2);
        s.get("noise", p.noise);
        require(p.noise == "default" || p.noise == "zero", s.at("noise"), "expected \"default\" or \"zero\"");
        if (s.has("x0")) {
            p.x0 = json_to_vector(s.raw("x0"), s.at("x0"));
        }

        auto& q = p.quadrotor;
        s.get("wind_speed", q.wind_speed);
        s.get("wind_angle_deg", q.wind_angle_deg);
        s.get("mass", q.mass);
        s.get("inertia", q.inertia);
        s.get("arm", q.arm);
        s.get("drag_coefficient", q.drag_coefficient);
        s.get("drag_length", q.drag_length);
        s.get("position_bound", q.position_bound);
        s.get("angle_bound", q.angle_bound);
        s.get("noise_sigma", q.noise_sigma);
        s.get("rbf_grid", q.rbf_grid);
        s.get("rbf_extent", q.rbf_extent);
        s.get("rbf_length", q.rbf_length);
        s.get("features", p.quadrotor_features);

        auto& c = p.cruise;
        s.get("v_ref", c.v_ref);
        s.get("v_initial", c.v_initial);
        s.get("angles_deg", c.angles_deg);
        if (s.has("segments")) {
            c.segments.clear();
            const auto& segs = s.raw("segments");
            require(segs.is_array(), s.at("segments"), "expected a list of [start, end] pairs");
            for (std::size_t i = 0; i < segs.size(); ++i) {
                const VectorXd se = json_to_vector(segs[i], s.at("segments") + "/" + std::to_string(i));
                require(se.size() == 2 && se(0) < se(1), s.at("segments") + "/" + std::to_string(i),
                    "expected [start, end] with start < end");
                c.segments.emplace_back(se(0), se(1));
            }
        }
        s.get("noise_variance", c.noise_variance);
        s.get("speed_bound", c.speed_bound);
        s.get("input_bound", c.input_bound);
        s.get("max_grade_deg", c.max_grade_deg);

        s.vector("w", p.toy_w);
        s.get("noise_half_width", p.toy_noise);
        s.get("bias", p.toy_bias);

        // dt is shared by the quadrotor and cruise plants.
        if (s.has("dt")) {
            double dt = 0.0;
            s.get("dt", dt);
            require(dt > 0.0, s.at("dt"), "must be positive");
            q.dt = dt;
            c.dt = dt;
        }
        s.reject_unknown();

        if (p.type == "quadrotor") {
            require(q.wind_speed >= 0.0, s.at("wind_speed"), "must be nonnegative");
            require(q.mass > 0.0, s.at("mass"), "must be positive");
            require(q.inertia > 0.0, s.at("inertia"), "must be positive");
            require(q.rbf_grid >= 2, s.at("rbf_grid"), "must be at least 2");
            require(q.rbf_length > 0.0, s.at("rbf_length"), "must be positive");
            require(q.noise_sigma >= 0.0, s.at("noise_sigma"), "must be nonnegative");
        }
        if (p.type == "cruise") {
            require(c.angles_deg.size() == c.segments.size(), s.at("angles_deg"), "need one angle per road segment");
            require(c.noise_variance >= 0.0, s.at("noise_variance"), "must be nonnegative");
            require(c.input_bound > 0.0, s.at("input_bound"), "must be positive");
            require(c.speed_bound > 0.0, s.at("speed_bound"), "must be positive");
        }
        if (p.type == "toy") {
            require(p.toy_w.size() == 2, s.at("w"), "expected 2 weights");
            require(p.toy_noise > 0.0, s.at("noise_half_width"), "must be positive");
        }
    }

    void parse_controller(const nlohmann::json& root, ControllerSection& c)
    {
        Section s(root, "controller");
        if (s.has("variant")) {
            std::string v;
            s.get("variant", v);
            try {
                c.variants = { variant_from_string(v) };
            } catch (const ValidationError&) {
                throw ValidationError(s.at("variant"), "unknown variant '" + v + "'");
            }
        }
        if (s.has("variants")) {
            std::vector<std::string> names;
            s.get("variants", names);
            require(!names.empty(), s.at("variants"), "must not be empty");
            c.variants.clear();
            for (std::size_t i = 0; i < names.size(); ++i) {
                try {
                    c.variants.push_back(variant_from_string(names[i]));
                } catch (const ValidationError&) {
                    throw ValidationError(s.at("variants") + "/" + std::to_string(i), "unknown variant '" + names[i] + "'");
                }
            }
        }
        if (s.has("N")) {
            int N = 0;
            s.get("N", N);
            require(N >= 1, s.at("N"), "horizon must be at least 1");
            c.N = N;
        }
        if (s.has("Q")) {
            c.Q = json_to_matrix(s.raw("Q"), s.at("Q"));
            require(symmetric_psd(*c.Q, false), s.at("Q"), "must be symmetric positive semidefinite");
        }
        if (s.has("R")) {
            c.R = json_to_matrix(s.raw("R"), s.at("R"));
            require(symmetric_psd(*c.R, true), s.at("R"), "must be symmetric positive definite");
        }
        if (s.has("fixed_gain")) {
            bool f = false;
            s.get("fixed_gain", f);
            c.fixed_gain = f;
        }
        s.get("use_f_range", c.use_f_range);
        s.reject_unknown();
    }

    void parse_estimator(const nlohmann::json& root, EstimatorSection& e)
    {
        Section s(root, "estimator");
        s.get("type", e.type);
        require(e.type == "blr" || e.type == "set_membership", s.at("type"), "expected blr or set_membership");
        s.get("delta", e.delta);
        require(e.delta > 0.0 && e.delta < 1.0, s.at("delta"), "must lie in (0, 1)");
        s.get("chi2_dof", e.chi2_dof);
        require(e.chi2_dof >= 0, s.at("chi2_dof"), "must be nonnegative");
        s.get("ridge", e.ridge);
        require(e.ridge >= 0.0, s.at("ridge"), "must be nonnegative");
        s.get("prior_file", e.prior_file);
        s.get("sm_half_width", e.sm_half_width);
        require(e.sm_half_width > 0.0, s.at("sm_half_width"), "must be positive");
        if (s.has("warmup")) {
            nlohmann::json wrap { { "warmup", s.raw("warmup") } };
            Section w(wrap, "warmup");
            const std::string base = s.at("warmup");
            w.get("kind", e.warmup.kind);
            require(e.warmup.kind == "uniform" || e.warmup.kind == "trajectory", base + "/kind",
                "expected uniform or trajectory");
            w.get("samples", e.warmup.samples);
            require(e.warmup.samples >= 0, base + "/samples", "must be nonnegative");
            w.vector("lo", e.warmup.lo);
            w.vector("hi", e.warmup.hi);
            w.get("excitation", e.warmup.excitation);
            w.get("seed_offset", e.warmup.seed_offset);
            try {
                w.reject_unknown();
            } catch (const ValidationError& err) {
                throw ValidationError("/estimator" + err.field(), "unknown field");
            }
        }
        s.reject_unknown();
    }

    void parse_experiment(const nlohmann::json& root, ExperimentSection& x)
    {
        Section s(root, "experiment");
        s.get("kind", x.kind);
        require(x.kind == "closed_loop" || x.kind == "estimation", s.at("kind"), "expected closed_loop or estimation");
        s.get("steps", x.steps);
        require(x.steps >= 0, s.at("steps"), "must be nonnegative");
        s.get("episodes", x.episodes);
        require(x.episodes >= 1, s.at("episodes"), "must be at least 1");
        s.get("seeds", x.seeds);
        require(x.seeds >= 1, s.at("seeds"), "must be at least 1");
        s.get("seed", x.seed);
        s.get("abort_on_infeasible", x.abort_on_infeasible);
        s.get("envelope_grid", x.envelope_grid);
        require(x.envelope_grid == 0 || x.envelope_grid >= 2, s.at("envelope_grid"), "must be 0 or at least 2");
        s.reject_unknown();
    }

} // namespace

Config parse_config(const nlohmann::json& j, const std::string& base_dir)
{
    require(j.is_object(), "", "config must be a JSON object");
    for (const auto& item : j.items()) {
        const auto& k = item.key();
        require(k == "plant" || k == "controller" || k == "estimator" || k == "experiment" || k == "name"
                || k == "description",
            "/" + k, "unknown section");
    }
    Config c;
    c.document = j;
    c.base_dir = base_dir;
    parse_plant(j, c.plant);
    parse_controller(j, c.controller);
    parse_estimator(j, c.estimator);
    parse_experiment(j, c.experiment);

    if (c.plant.type == "toy") {
        require(c.experiment.kind == "estimation", "/experiment/kind", "the toy plant only supports estimation");
    } else {
        require(c.experiment.kind == "closed_loop", "/experiment/kind", "estimation runs need the toy plant");
        // Build once so that dimension errors surface at load time.
        const Plant p = build_plant(c);
        const Eigen::Index n = p.n();
        if (c.controller.Q) {
            require(c.controller.Q->rows() == n, "/controller/Q", "must be " + std::to_string(n) + " x " + std::to_string(n));
        }
        if (c.controller.R) {
            require(c.controller.R->rows() == p.m(), "/controller/R",
                "must be " + std::to_string(p.m()) + " x " + std::to_string(p.m()));
        }
        const auto& w = c.estimator.warmup;
        if (w.kind == "uniform" && c.estimator.prior_file.empty()) {
            require(w.lo.size() == n, "/estimator/warmup/lo", "must have " + std::to_string(n) + " entries");
            require(w.hi.size() == n, "/estimator/warmup/hi", "must have " + std::to_string(n) + " entries");
            require((w.hi - w.lo).minCoeff() >= 0.0, "/estimator/warmup/hi", "must not be below lo");
        }
    }
    return c;
}

Config load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ValidationError(path, "cannot open config file");
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path, std::string("JSON parse error: ") + e.what());
    }
    const auto dir = std::filesystem::path(path).parent_path();
    return parse_config(j, dir.empty() ? std::string(".") : dir.string());
}

void set_config_value(nlohmann::json& j, const std::string& dotted_path, double value)
{
    std::vector<std::string> parts;
    std::stringstream ss(dotted_path);
    for (std::string part; std::getline(ss, part, '.');) {
        if (part.empty()) {
            throw ValidationError(dotted_path, "empty path component");
        }
        parts.push_back(part);
    }
    if (parts.size() < 2) {
        throw ValidationError(dotted_path, "expected section.field");
    }
    nlohmann::json* node = &j;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->is_object()) {
            throw ValidationError(dotted_path, "'" + parts[i] + "' is not an object");
        }
        node = &(*node)[parts[i]];
        if (node->is_null()) {
            *node = nlohmann::json::object();
        }
    }
    if (!node->is_object()) {
        throw ValidationError(dotted_path, "parent is not an object");
    }
    const std::string& leaf = parts.back();
    const bool integral = node->contains(leaf) && (*node)[leaf].is_number_integer();
    if (integral) {
        (*node)[leaf] = static_cast<long long>(std::llround(value));
    } else {
        (*node)[leaf] = value;
    }
}

Plant build_plant(const Config& config)
{
    const auto& ps = config.plant;
    Plant p;
    if (ps.type == "double_integrator") {
        std::optional<NoiseModel> noise;
        if (ps.noise == "zero") {
            noise = NoiseModel::zero(2);
        }
        p = make_double_integrator(ps.matched, ps.w1, ps.w2, noise);
    } else if (ps.type == "quadrotor") {
        FeatureMapPtr features;
        if (ps.quadrotor_features != "rbf") {
            std::filesystem::path fp(ps.quadrotor_features);
            if (fp.is_relative()) {
                fp = std::filesystem::path(config.base_dir) / fp;
            }
            features = LoadedNetwork::load(fp.string());
        }
        p = make_quadrotor(ps.quadrotor, features);
        if (ps.noise == "zero") {
            p.noise = NoiseModel::zero(6);
        }
    } else if (ps.type == "cruise") {
        p = make_cruise(ps.cruise);
        if (ps.noise == "zero") {
            p.noise = NoiseModel::zero(1);
        }
    } else {
        throw ValidationError("/plant/type", "plant '" + ps.type + "' has no closed-loop model");
    }
    if (ps.x0) {
        require(ps.x0->size() == p.n(), "/plant/x0", "must have " + std::to_string(p.n()) + " entries");
        p.x0 = *ps.x0;
    }
    const auto& cs = config.controller;
    if (cs.N) {
        p.N = *cs.N;
    }
    if (cs.Q) {
        p.Q = *cs.Q;
    }
    if (cs.R) {
        p.R = *cs.R;
    }
    if (cs.fixed_gain) {
        p.fixed_gain = *cs.fixed_gain;
    }
    return p;
}

ControllerConfig build_controller_config(const Config& config, const Plant& plant, Variant variant)
{
    ControllerConfig cc;
    cc.variant = variant;
    cc.A = plant.A;
    cc.B = plant.B;
    cc.Q = plant.Q;
    cc.R = plant.R;
    cc.N = plant.N;
    cc.X = plant.X;
    cc.U = plant.U;
    cc.V = plant.noise.support();
    if (config.controller.use_f_range) {
        cc.f_range = plant.f_range;
    }
    cc.fixed_gain = plant.fixed_gain;
    return cc;
}

std::unique_ptr<Estimator> build_estimator(const Config& config, const Plant& plant, Variant variant,
    std::uint64_t seed)
{
    if (variant == Variant::NaiveTube) {
        return nullptr;
    }
    const auto& es = config.estimator;
    if (es.type == "set_membership") {
        const Eigen::Index d = plant.features->output_dim();
        const SetMembershipState st = sm_init(plant.masks, MatrixXd::Zero(plant.n(), d),
            VectorXd::Constant(plant.n(), es.sm_half_width));
        return std::make_unique<SetMembershipEstimator>(st, symmetrize(plant.noise.support()), plant.features);
    }
    BLRState state;
    if (!es.prior_file.empty()) {
        std::filesystem::path fp(es.prior_file);
        if (fp.is_relative()) {
            fp = std::filesystem::path(config.base_dir) / fp;
        }
        std::ifstream in(fp);
        if (!in) {
            throw ValidationError("/estimator/prior_file", "cannot open " + fp.string());
        }
        nlohmann::json j;
        in >> j;
        try {
            state = blr_prior_from_json(j, plant.features->output_dim());
        } catch (const ValidationError& e) {
            throw ValidationError("/estimator/prior_file" + e.field(), e.what());
        }
    } else {
        const auto& w = es.warmup;
        WarmupData data;
        if (w.kind == "uniform") {
            data = warmup_uniform(plant, w.lo, w.hi, w.samples, w.seed_offset + seed);
        } else {
            const LqrSolution lq = dlqr(plant.A, plant.B, plant.Q, plant.R);
            data = warmup_trajectory(plant, lq.K, w.excitation, w.samples, w.seed_offset + seed);
        }
        state = blr_prior_from_warmup(plant, data, es.delta, es.ridge);
    }
    state.delta = es.delta;
    state.chi2_dof = es.chi2_dof;
    return std::make_unique<BlrEstimator>(state, plant.features);
}

} // namespace armpc
