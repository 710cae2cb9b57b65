#include "armpc/experiments.hpp"

#include "armpc/errors.hpp"
#include "armpc/json_io.hpp"
#include "armpc/optimization.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace armpc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

    using Clock = std::chrono::steady_clock;

    double seconds_since(Clock::time_point t0)
    {
        return std::chrono::duration<double>(Clock::now() - t0).count();
    }

    double quantile(std::vector<double> v, double q)
    {
        if (v.empty()) {
            return std::numeric_limits<double>::quiet_NaN();
        }
        std::sort(v.begin(), v.end());
        const double pos = q * static_cast<double>(v.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, v.size() - 1);
        return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
    }

    std::string fmt(double v, int precision = 4)
    {
        std::ostringstream os;
        os << std::setprecision(precision) << v;
        return os.str();
    }

    nlohmann::json vec(std::initializer_list<double> v) { return nlohmann::json(std::vector<double>(v)); }

    RunLog run_one(const Config& config, Variant variant, std::uint64_t seed)
    {
        const Plant plant = build_plant(config);
        Controller controller(build_controller_config(config, plant, variant),
            build_estimator(config, plant, variant, seed));
        RunOptions opts;
        opts.steps = config.experiment.steps;
        opts.episodes = config.experiment.episodes;
        opts.seed = seed;
        opts.abort_on_infeasible = config.experiment.abort_on_infeasible;
        return run_episodes(plant, controller, opts);
    }

    struct EnvelopeProbe {
        double fraction = 0.0;
        bool O_empty = false;
    };

    EnvelopeProbe probe_envelope(const Config& config, Variant variant, std::uint64_t seed, int grid)
    {
        const Plant plant = build_plant(config);
        require_dims(plant.n() == 2, "feasible envelope needs a 2-state plant");
        const Controller controller(build_controller_config(config, plant, variant),
            build_estimator(config, plant, variant, seed));
        EnvelopeProbe p;
        p.O_empty = controller.sets().O.empty;
        p.fraction = feasible_envelope(controller.problem(), grid).fraction;
        return p;
    }

} // namespace

// ---------------------------------------------------------------- campaigns

CampaignResult run_closed_loop_campaign(const Config& config, int jobs, std::optional<std::uint64_t> seed_override)
{
    if (config.experiment.kind != "closed_loop") {
        throw ValidationError("/experiment/kind", "not a closed-loop experiment");
    }
    const std::uint64_t base = seed_override.value_or(config.experiment.seed);
    const auto& variants = config.controller.variants;
    const int V = static_cast<int>(variants.size());
    const int count = config.experiment.seeds * V;
    CampaignResult result;
    result.logs = run_campaign(count, jobs, [&](int i) {
        return run_one(config, variants[static_cast<std::size_t>(i % V)], base + static_cast<std::uint64_t>(i / V));
    });

    for (int v = 0; v < V; ++v) {
        VariantSummary s;
        s.controller = std::string(to_string(variants[static_cast<std::size_t>(v)]));
        std::vector<double> costs;
        for (int i = v; i < count; i += V) {
            const RunMetrics& m = result.logs[static_cast<std::size_t>(i)].metrics;
            ++s.runs;
            costs.push_back(m.cost);
            s.state_violations += m.state_violations;
            s.input_violations += m.input_violations;
            s.infeasible_runs += m.infeasible_step >= 0 ? 1 : 0;
            s.started_feasible += m.started_feasible ? 1 : 0;
            s.confidence_events += m.confidence_event ? 1 : 0;
            s.containment_violations += m.containment_violations;
            s.sq_acceleration_mean += m.sq_acceleration;
            s.position_error_mean += m.mean_position_error;
        }
        double sum = 0.0;
        for (double c : costs) {
            sum += c;
        }
        s.cost_mean = sum / static_cast<double>(s.runs);
        s.cost_p10 = quantile(costs, 0.1);
        s.cost_p50 = quantile(costs, 0.5);
        s.cost_p90 = quantile(costs, 0.9);
        s.sq_acceleration_mean /= static_cast<double>(s.runs);
        s.position_error_mean /= static_cast<double>(s.runs);
        if (config.experiment.envelope_grid > 0) {
            s.envelope_fraction
                = initial_envelope(config, variants[static_cast<std::size_t>(v)], base, config.experiment.envelope_grid)
                      .fraction;
        }
        result.summary.push_back(s);
    }
    return result;
}

EnvelopeResult initial_envelope(const Config& config, Variant variant, std::uint64_t seed, int grid)
{
    const Plant plant = build_plant(config);
    if (plant.n() != 2) {
        throw ValidationError("/experiment/envelope_grid", "the feasible envelope needs a 2-state plant");
    }
    const Controller controller(build_controller_config(config, plant, variant),
        build_estimator(config, plant, variant, seed));
    return feasible_envelope(controller.problem(), grid);
}

nlohmann::json summary_json(const std::vector<VariantSummary>& summary)
{
    nlohmann::json out = nlohmann::json::array();
    for (const auto& s : summary) {
        nlohmann::json j {
            { "controller", s.controller },
            { "runs", s.runs },
            { "cost_mean", s.cost_mean },
            { "cost_p10", s.cost_p10 },
            { "cost_p50", s.cost_p50 },
            { "cost_p90", s.cost_p90 },
            { "state_violations", s.state_violations },
            { "input_violations", s.input_violations },
            { "infeasible_runs", s.infeasible_runs },
            { "infeasibility_rate", static_cast<double>(s.infeasible_runs) / std::max(1, s.runs) },
            { "started_feasible", s.started_feasible },
            { "confidence_events", s.confidence_events },
            { "containment_violations", s.containment_violations },
            { "sq_acceleration_mean", s.sq_acceleration_mean },
            { "position_error_mean", s.position_error_mean },
        };
        j["envelope_fraction"] = std::isnan(s.envelope_fraction) ? nlohmann::json(nullptr) : nlohmann::json(s.envelope_fraction);
        out.push_back(j);
    }
    return out;
}

void write_summary_csv(std::ostream& os, const std::vector<VariantSummary>& summary)
{
    os << "# armpc campaign summary v1\n";
    os << "controller,runs,cost_mean,cost_p10,cost_p50,cost_p90,state_violations,input_violations,infeasible_runs,"
          "started_feasible,confidence_events,containment_violations,sq_acceleration_mean,position_error_mean,"
          "envelope_fraction\n";
    os << std::setprecision(10);
    for (const auto& s : summary) {
        os << s.controller << ',' << s.runs << ',' << s.cost_mean << ',' << s.cost_p10 << ',' << s.cost_p50 << ','
           << s.cost_p90 << ',' << s.state_violations << ',' << s.input_violations << ',' << s.infeasible_runs << ','
           << s.started_feasible << ',' << s.confidence_events << ',' << s.containment_violations << ','
           << s.sq_acceleration_mean << ',' << s.position_error_mean << ',';
        if (!std::isnan(s.envelope_fraction)) {
            os << s.envelope_fraction;
        }
        os << '\n';
    }
}

// ---------------------------------------------------------------- estimation toy problem

double toy_prior_precision(double sigma, double delta, int d, double radius)
{
    BLRState unit = blr_init({ std::vector<Index>(static_cast<std::size_t>(d)) }, MatrixXd::Zero(1, d),
        { MatrixXd::Identity(d, d) }, VectorXd::Constant(1, sigma), delta);
    for (int k = 0; k < d; ++k) {
        unit.masks[0][static_cast<std::size_t>(k)] = k;
    }
    // max_norm scales as 1/sqrt(lambda) while beta at the prior does not
    // depend on lambda.
    const double r1 = blr_confidence(unit)(0);
    return (r1 / radius) * (r1 / radius);
}

ToyTrace run_toy(const ToyOptions& o, std::uint64_t seed)
{
    Rng rng(seed);
    std::uniform_real_distribution<double> ux(-1.0, 1.0);
    std::uniform_real_distribution<double> uv(-o.noise, o.noise);
    const FeatureMapPtr phi_map = make_toy_features();
    const RowMasks masks { { 0, 1 } };
    const Box V = Box::symmetric(VectorXd::Constant(1, o.noise));
    MatrixXd W_true(1, 2);
    W_true.row(0) = o.w.transpose();

    ToyTrace tr;
    SetMembershipState sm = sm_init(masks, MatrixXd::Zero(1, 2), VectorXd::Constant(1, 1.0));
    const double lambda = toy_prior_precision(o.noise, o.delta, 2, 1.0);
    BLRState blr = blr_init(masks, MatrixXd::Zero(1, 2), { lambda * MatrixXd::Identity(2, 2) },
        VectorXd::Constant(1, o.noise), o.delta);

    bool sm_alive = true;
    double prev_r = std::numeric_limits<double>::infinity();
    {
        const LinearParamModel m0 = blr_model(blr);
        tr.blr_covered = m0.covers(W_true);
        tr.blr_radius.push_back(m0.max_norm(0));
    }
    bool blr_ok = true;
    for (int t = 1; t <= o.samples; ++t) {
        const VectorXd x = Eigen::Vector2d(ux(rng), ux(rng));
        const VectorXd phi = phi_map->evaluate(x, VectorXd());
        const double v = uv(rng);
        const VectorXd y = VectorXd::Constant(1, o.w.dot(phi) + v + o.bias);

        if (sm_alive) {
            try {
                SetMembershipState next = sm_update(sm, phi, y, V);
                if (!contains(sm.theta[0], next.theta[0], kNestingTolerance)) {
                    tr.sm_sets_nested = false;
                }
                sm = std::move(next);
                const LinearParamModel m = sm_point_estimate(sm);
                const double r = m.max_norm(0);
                if (r > prev_r + kNestingTolerance) {
                    tr.sm_radii_monotone = false;
                }
                prev_r = r;
                tr.sm_radius.push_back(r);
                tr.sm_final = m.W_hat.row(0).transpose();
                tr.sm_final_radius = r;
            } catch (const EmptyFeasibleSetError&) {
                sm_alive = false;
                tr.sm_empty_at = t;
            }
        }

        if (blr_ok) {
            try {
                blr = blr_update(blr, phi, y);
                const LinearParamModel m = blr_model(blr);
                if (!m.W_hat.allFinite() || !std::isfinite(m.max_norm(0))) {
                    blr_ok = false;
                } else {
                    tr.blr_radius.push_back(m.max_norm(0));
                    if (!m.covers(W_true)) {
                        tr.blr_covered = false;
                    }
                    tr.blr_final = m.W_hat.row(0).transpose();
                    tr.blr_final_radius = m.max_norm(0);
                }
            } catch (const std::exception&) {
                blr_ok = false;
            }
        }
    }
    tr.blr_completed = blr_ok;
    tr.sm_final_within = sm_alive && tr.sm_final.size() == 2
        && (tr.sm_final - o.w).norm() <= tr.sm_final_radius * (1.0 + 1e-9) + 1e-12;
    return tr;
}

// ---------------------------------------------------------------- robust QP oracle

MPCSolution policy_from_z(const RobustMPCProblem& problem, const CompiledMPC& c, const VectorXd& z)
{
    const Index n = c.n;
    const Index m = c.m;
    MPCSolution sol;
    sol.status = SolveKind::Optimal;
    sol.z = z;
    sol.gains.resize(static_cast<std::size_t>(c.N));
    const MatrixXd A_cl = problem.A - problem.B * problem.K_term;
    for (int k = 0; k < c.N; ++k) {
        sol.u_nominal.push_back(z.segment(k * m, m));
        for (int j = 0; j < k; ++j) {
            MatrixXd K(m, n);
            if (c.fixed_gain) {
                MatrixXd Ap = MatrixXd::Identity(n, n);
                for (int p = 0; p < k - 1 - j; ++p) {
                    Ap = A_cl * Ap;
                }
                K = -problem.K_term * Ap;
            } else {
                const Index off = c.gain_offset(k, j);
                for (Index r = 0; r < m; ++r) {
                    K.row(r) = z.segment(off + r * n, n).transpose();
                }
            }
            sol.gains[static_cast<std::size_t>(k)].push_back(K);
        }
    }
    sol.u0 = sol.u_nominal.front();
    return sol;
}

VectorXd brute_force_worst_case(const RobustMPCProblem& problem, const CompiledMPC& c, const VectorXd& x0,
    const MPCSolution& policy)
{
    const Index n = c.n;
    const int N = c.N;
    const Index bits = n * N;
    require_dims(bits <= 20, "brute_force_worst_case: too many vertices");
    VectorXd worst = VectorXd::Constant(static_cast<Index>(c.rows.size()), -std::numeric_limits<double>::infinity());
    const VectorXd lo = problem.D_box.lower();
    const VectorXd hi = problem.D_box.upper();
    std::vector<VectorXd> d(static_cast<std::size_t>(N), VectorXd(n));
    std::vector<VectorXd> states;
    std::vector<VectorXd> inputs;
    for (long long mask = 0; mask < (1LL << bits); ++mask) {
        for (int k = 0; k < N; ++k) {
            for (Index i = 0; i < n; ++i) {
                d[static_cast<std::size_t>(k)](i) = ((mask >> (k * n + i)) & 1) ? hi(i) : lo(i);
            }
        }
        simulate_policy(problem, x0, policy, d, states, inputs);
        for (std::size_t r = 0; r < c.rows.size(); ++r) {
            const RobustRow& row = c.rows[r];
            double v = 0.0;
            switch (row.kind) {
            case RobustRow::Kind::State:
                v = problem.X.A().row(row.set_row).dot(states[static_cast<std::size_t>(row.step)]);
                break;
            case RobustRow::Kind::Input:
                v = problem.U_eff.A().row(row.set_row).dot(inputs[static_cast<std::size_t>(row.step)]);
                break;
            case RobustRow::Kind::Terminal:
                v = problem.O.A().row(row.set_row).dot(states[static_cast<std::size_t>(row.step)]);
                break;
            }
            worst(static_cast<Index>(r)) = std::max(worst(static_cast<Index>(r)), v);
        }
    }
    return worst;
}

RobustMPCProblem random_robust_instance(Rng& rng, VectorXd& x0)
{
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const Index n = u01(rng) < 0.5 ? 1 : 2;
    const int max_N = static_cast<int>(8 / n);
    const int N = 1 + static_cast<int>(u01(rng) * std::min(max_N, 4));
    RobustMPCProblem p;
    p.N = std::min(N, max_N);
    p.A = MatrixXd::Identity(n, n);
    p.B = MatrixXd(n, 1);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            p.A(i, j) += 0.3 * gauss(rng);
        }
        p.B(i, 0) = gauss(rng);
    }
    p.B(n - 1, 0) += p.B(n - 1, 0) >= 0.0 ? 0.5 : -0.5;
    p.Q = MatrixXd::Identity(n, n);
    p.R = MatrixXd::Identity(1, 1);
    const LqrSolution lq = dlqr(p.A, p.B, p.Q, p.R);
    p.P = lq.P;
    p.K_term = lq.K;
    VectorXd xw(n);
    VectorXd dw(n);
    for (Index i = 0; i < n; ++i) {
        xw(i) = 2.0 + 3.0 * u01(rng);
        dw(i) = 0.2 * u01(rng);
    }
    p.X = Box::symmetric(xw).to_polytope();
    p.U_eff = Box::symmetric(VectorXd::Constant(1, 1.0 + 2.0 * u01(rng))).to_polytope();
    p.D_box = Box::symmetric(dw);
    p.O = Box::symmetric(0.5 * xw).to_polytope();
    p.fixed_gain = u01(rng) < 0.25;
    x0 = VectorXd(n);
    for (Index i = 0; i < n; ++i) {
        x0(i) = 0.3 * xw(i) * (2.0 * u01(rng) - 1.0);
    }
    return p;
}

// ---------------------------------------------------------------- study configs

Config matched_di_config(double w1, int warmup, Variant variant, int steps)
{
    nlohmann::json j {
        { "plant", { { "type", "double_integrator" }, { "matched", true }, { "w1", w1 } } },
        { "controller", { { "variants", { std::string(to_string(variant)) } } } },
        { "estimator",
            { { "type", "blr" }, { "delta", 0.05 },
                { "warmup",
                    { { "kind", "uniform" }, { "samples", warmup }, { "lo", vec({ -1.0, -1.0 }) },
                        { "hi", vec({ 1.0, 1.0 }) }, { "seed_offset", 1000 } } } } },
        { "experiment", { { "steps", steps }, { "seeds", 1 } } },
    };
    return parse_config(j);
}

Config unmatched_di_config(double w1, double w2, int warmup, Variant variant, int steps)
{
    Config c = matched_di_config(w1, warmup, variant, steps);
    nlohmann::json j = c.document;
    j["plant"]["matched"] = false;
    j["plant"]["w2"] = w2;
    return parse_config(j);
}

Config cruise_config()
{
    nlohmann::json j {
        { "plant", { { "type", "cruise" } } },
        { "controller", { { "variants", { "A", "benchmark" } } } },
        { "estimator",
            { { "type", "blr" }, { "delta", 0.05 },
                { "warmup", { { "kind", "trajectory" }, { "samples", 400 }, { "excitation", 0.5 }, { "seed_offset", 500 } } } } },
        { "experiment", { { "steps", cruise_route_steps(CruiseParams {}) }, { "seeds", 20 } } },
    };
    return parse_config(j);
}

Config quadrotor_config(double angle_deg)
{
    nlohmann::json j {
        { "plant", { { "type", "quadrotor" }, { "wind_speed", 4.0 }, { "wind_angle_deg", angle_deg } } },
        { "controller", { { "variants", { "C", "benchmark", "naive" } }, { "fixed_gain", true } } },
        { "estimator",
            { { "type", "blr" }, { "delta", 0.05 },
                { "warmup",
                    { { "kind", "uniform" }, { "samples", 100 }, { "lo", vec({ -2.0, -2.0, -0.5, -1.0, -1.0, -1.0 }) },
                        { "hi", vec({ 2.0, 2.0, 0.5, 1.0, 1.0, 1.0 }) }, { "seed_offset", 700 } } } } },
        { "experiment", { { "steps", 60 }, { "episodes", 5 }, { "seeds", 10 } } },
    };
    return parse_config(j);
}

MarginSweep feasibility_margin_sweep(const std::vector<double>& w1_values, int warmup, int jobs)
{
    MarginSweep s;
    s.w1 = w1_values;
    const int K = static_cast<int>(w1_values.size());
    const auto logs = run_campaign(2 * K, jobs, [&](int i) {
        const Variant v = i % 2 == 0 ? Variant::AdaptiveCE_A : Variant::BenchmarkARMPC;
        return run_one(matched_di_config(w1_values[static_cast<std::size_t>(i / 2)], warmup, v), v, 0);
    });
    bool ce_alive = true;
    bool bench_alive = true;
    for (int k = 0; k < K; ++k) {
        const bool ce = logs[static_cast<std::size_t>(2 * k)].metrics.infeasible_step < 0;
        const bool bench = logs[static_cast<std::size_t>(2 * k + 1)].metrics.infeasible_step < 0;
        s.ce_feasible.push_back(ce);
        s.bench_feasible.push_back(bench);
        ce_alive = ce_alive && ce;
        bench_alive = bench_alive && bench;
        if (ce_alive) {
            s.ce_margin = w1_values[static_cast<std::size_t>(k)];
        }
        if (bench_alive) {
            s.bench_margin = w1_values[static_cast<std::size_t>(k)];
        }
    }
    return s;
}

// ---------------------------------------------------------------- acceptance criteria

namespace {

    int scaled(int count, const AcceptanceOptions& o) { return std::max(1, static_cast<int>(std::lround(count * o.scale))); }

    bool snapshots_nested(const RunLog& log, std::string& why)
    {
        for (std::size_t k = 1; k < log.snapshots.size(); ++k) {
            const SetSnapshot& a = log.snapshots[k - 1];
            const SetSnapshot& b = log.snapshots[k];
            if (!contains(a.F_hat, b.F_hat, kNestingTolerance)) {
                why = "F_hat grew";
            } else if (!contains(a.D_err, b.D_err, kNestingTolerance)) {
                why = "D grew";
            } else if (!contains(a.D_hat, b.D_hat, kNestingTolerance)) {
                why = "D_hat grew";
            } else if (!a.O_empty && (b.O_empty || !contains(b.O, a.O, kNestingTolerance))) {
                why = "O shrank";
            } else {
                continue;
            }
            return false;
        }
        return true;
    }

} // namespace

std::vector<CriterionResult> criteria_matched_runs(const AcceptanceOptions& options)
{
    const auto t0 = Clock::now();
    Config cfg = matched_di_config(0.5, 45, Variant::AdaptiveCE_A);
    cfg.experiment.seeds = scaled(100, options);
    const CampaignResult camp = run_closed_loop_campaign(cfg, options.jobs);
    const double secs = seconds_since(t0);

    const int runs = static_cast<int>(camp.logs.size());
    int conf = 0;
    int started = 0;
    int violations = 0;
    int post_infeasible = 0;
    int nest_fail = 0;
    int contain_fail = 0;
    int contain_steps = 0;
    std::string nest_why;
    for (const RunLog& log : camp.logs) {
        const RunMetrics& m = log.metrics;
        started += m.started_feasible ? 1 : 0;
        std::string why;
        if (!snapshots_nested(log, why)) {
            ++nest_fail;
            nest_why = why;
        }
        if (!m.confidence_event) {
            continue;
        }
        ++conf;
        violations += m.state_violations + m.input_violations;
        post_infeasible += (m.started_feasible && m.infeasible_step > 0) ? 1 : 0;
        contain_fail += m.containment_violations;
        for (const auto& r : log.records) {
            contain_steps += r.terminal ? 0 : 1;
        }
    }
    const int need = static_cast<int>(std::ceil(0.95 * runs));

    std::vector<CriterionResult> out;
    CriterionResult c1;
    c1.id = 1;
    c1.title = "recursive feasibility and safety";
    c1.seconds = secs;
    c1.pass = conf >= need && violations == 0 && post_infeasible == 0 && secs <= 300.0;
    c1.detail = "confidence event " + std::to_string(conf) + "/" + std::to_string(runs) + " (need " + std::to_string(need)
        + "), started feasible " + std::to_string(started) + ", violations " + std::to_string(violations)
        + ", post-t=0 infeasible " + std::to_string(post_infeasible) + ", " + fmt(secs, 3) + " s";
    out.push_back(c1);

    CriterionResult c2;
    c2.id = 2;
    c2.title = "set nesting";
    c2.pass = nest_fail == 0;
    c2.detail = std::to_string(runs - nest_fail) + "/" + std::to_string(runs) + " runs nested at tol "
        + fmt(kNestingTolerance) + (nest_fail ? " (last failure: " + nest_why + ")" : "");
    out.push_back(c2);

    CriterionResult c3;
    c3.id = 3;
    c3.title = "compound disturbance containment";
    c3.pass = contain_fail == 0;
    c3.detail = std::to_string(contain_fail) + " of " + std::to_string(contain_steps) + " steps outside D_hat over "
        + std::to_string(conf) + " confidence runs";
    out.push_back(c3);
    return out;
}

CriterionResult criterion_margin_ratio(const AcceptanceOptions& options)
{
    const auto t0 = Clock::now();
    std::vector<double> grid;
    for (int k = 1; k <= 40; ++k) {
        grid.push_back(0.05 * k);
    }
    const MarginSweep s = feasibility_margin_sweep(grid, 1000, options.jobs);
    CriterionResult c;
    c.id = 4;
    c.title = "feasibility margin ratio";
    c.seconds = seconds_since(t0);
    const double ratio = s.bench_margin > 0.0 ? s.ce_margin / s.bench_margin : std::numeric_limits<double>::infinity();
    c.pass = ratio >= kMarginRatioTarget && c.seconds <= 600.0;
    c.detail = "largest feasible w1: CE " + fmt(s.ce_margin) + ", benchmark " + fmt(s.bench_margin) + ", ratio "
        + fmt(ratio) + " (need " + fmt(kMarginRatioTarget) + "), " + fmt(c.seconds, 3) + " s";
    return c;
}

CriterionResult criterion_envelope(const AcceptanceOptions& options)
{
    const auto t0 = Clock::now();
    // The unmatched sweep is finer because with w2 = 0.5 the CE envelope
    // already vanishes near w1 = 0.15.
    std::vector<double> matched;
    std::vector<double> unmatched;
    for (int k = 1; k <= 15; ++k) {
        matched.push_back(0.1 * k);
    }
    for (int k = 1; k <= 12; ++k) {
        unmatched.push_back(0.025 * k);
    }
    const int M = static_cast<int>(matched.size());
    const int U = static_cast<int>(unmatched.size());
    // Index i: point i / 2 of the matched then unmatched sweep, CE then benchmark.
    std::vector<EnvelopeProbe> probes(static_cast<std::size_t>(2 * (M + U)));
    run_campaign(2 * (M + U), options.jobs, [&](int i) {
        const int point = i / 2;
        const Variant v = i % 2 == 0 ? Variant::AdaptiveCE_A : Variant::BenchmarkARMPC;
        const Config cfg = point < M ? matched_di_config(matched[static_cast<std::size_t>(point)], 50, v)
                                     : unmatched_di_config(unmatched[static_cast<std::size_t>(point - M)], 0.5, 45, v);
        probes[static_cast<std::size_t>(i)] = probe_envelope(cfg, v, 0, 41);
        return RunLog {};
    });
    int dominance_fail = 0;
    int iff_fail = 0;
    std::string zero_at[2] = { "never", "never" };
    std::string ce_zero_at[2] = { "never", "never" };
    for (int point = 0; point < M + U; ++point) {
        const EnvelopeProbe& ce = probes[static_cast<std::size_t>(2 * point)];
        const EnvelopeProbe& be = probes[static_cast<std::size_t>(2 * point + 1)];
        dominance_fail += ce.fraction + 1e-12 >= be.fraction ? 0 : 1;
        iff_fail += (be.fraction == 0.0) == be.O_empty ? 0 : 1;
        const int which = point < M ? 0 : 1;
        const double w1 = point < M ? matched[static_cast<std::size_t>(point)] : unmatched[static_cast<std::size_t>(point - M)];
        if (be.fraction == 0.0 && zero_at[which] == "never") {
            zero_at[which] = fmt(w1);
        }
        if (ce.fraction == 0.0 && ce_zero_at[which] == "never") {
            ce_zero_at[which] = fmt(w1);
        }
    }
    CriterionResult c;
    c.id = 5;
    c.title = "envelope dominance";
    c.seconds = seconds_since(t0);
    c.pass = dominance_fail == 0 && iff_fail == 0;
    c.detail = "CE >= benchmark at " + std::to_string(M + U - dominance_fail) + "/" + std::to_string(M + U)
        + " points, zero-iff-empty-RPI mismatches " + std::to_string(iff_fail) + "; envelope first empty at w1 = "
        + ce_zero_at[0] + " (CE) vs " + zero_at[0] + " (benchmark) matched, " + ce_zero_at[1] + " vs " + zero_at[1]
        + " unmatched";
    return c;
}

CriterionResult criterion_estimators(const AcceptanceOptions& options)
{
    const auto t0 = Clock::now();
    const int seeds = scaled(100, options);
    const int coverage_runs = scaled(500, options);
    ToyOptions well;
    ToyOptions biased;
    biased.bias = 0.05;
    ToyOptions cover;
    cover.samples = 50;

    std::vector<ToyTrace> wt(static_cast<std::size_t>(seeds));
    std::vector<ToyTrace> bt(static_cast<std::size_t>(seeds));
    std::vector<ToyTrace> ct(static_cast<std::size_t>(coverage_runs));
    run_campaign(2 * seeds + coverage_runs, options.jobs, [&](int i) {
        if (i < seeds) {
            wt[static_cast<std::size_t>(i)] = run_toy(well, static_cast<std::uint64_t>(i));
        } else if (i < 2 * seeds) {
            bt[static_cast<std::size_t>(i - seeds)] = run_toy(biased, static_cast<std::uint64_t>(i - seeds));
        } else {
            ct[static_cast<std::size_t>(i - 2 * seeds)] = run_toy(cover, static_cast<std::uint64_t>(10000 + i));
        }
        return RunLog {};
    });
    int sm_ok = 0;
    int blr_ok = 0;
    int collapsed = 0;
    for (int s = 0; s < seeds; ++s) {
        const ToyTrace& w = wt[static_cast<std::size_t>(s)];
        const ToyTrace& b = bt[static_cast<std::size_t>(s)];
        sm_ok += (w.sm_empty_at < 0 && w.sm_radii_monotone && w.sm_sets_nested && w.sm_final_within) ? 1 : 0;
        blr_ok += (w.blr_completed && b.blr_completed) ? 1 : 0;
        collapsed += (b.sm_empty_at > 0 && b.sm_empty_at <= 25) ? 1 : 0;
    }
    int covered = 0;
    for (const auto& t : ct) {
        covered += t.blr_covered && t.blr_completed ? 1 : 0;
    }
    const double coverage = static_cast<double>(covered) / coverage_runs;
    CriterionResult c;
    c.id = 6;
    c.title = "estimator behavior";
    c.seconds = seconds_since(t0);
    const int need_collapse = static_cast<int>(std::ceil(0.8 * seeds));
    c.pass = sm_ok == seeds && collapsed >= need_collapse && blr_ok == seeds && coverage >= 0.95;
    c.detail = "set-membership well-specified " + std::to_string(sm_ok) + "/" + std::to_string(seeds)
        + ", biased collapse within 25 samples " + std::to_string(collapsed) + "/" + std::to_string(seeds) + " (need "
        + std::to_string(need_collapse) + "), BLR completed " + std::to_string(blr_ok) + "/" + std::to_string(seeds)
        + ", BLR coverage " + fmt(coverage) + " over " + std::to_string(coverage_runs) + " runs";
    return c;
}

double blr_batch_max_error(BlrUpdateFn update, Rng& rng)
{
    std::uniform_int_distribution<int> dd(1, 8);
    std::uniform_int_distribution<int> tt(1, 200);
    std::normal_distribution<double> g(0.0, 1.0);
    const int d = dd(rng);
    const int T = tt(rng);
    RowMasks masks { std::vector<Index>(static_cast<std::size_t>(d)) };
    for (int k = 0; k < d; ++k) {
        masks[0][static_cast<std::size_t>(k)] = k;
    }
    MatrixXd L(d, d);
    for (Index i = 0; i < d; ++i) {
        for (Index j = 0; j < d; ++j) {
            L(i, j) = g(rng);
        }
    }
    const MatrixXd Lambda0 = L * L.transpose() / d + MatrixXd::Identity(d, d);
    VectorXd mu0(d);
    VectorXd w(d);
    for (Index i = 0; i < d; ++i) {
        mu0(i) = g(rng);
        w(i) = g(rng);
    }
    BLRState st = blr_init(masks, mu0.transpose(), { Lambda0 }, VectorXd::Constant(1, 0.3), 0.05);
    MatrixXd Lambda = Lambda0;
    VectorXd rhs = Lambda0 * mu0;
    for (int t = 0; t < T; ++t) {
        VectorXd phi(d);
        for (Index i = 0; i < d; ++i) {
            phi(i) = g(rng) / std::sqrt(static_cast<double>(d));
        }
        const double y = w.dot(phi) + 0.3 * g(rng);
        st = update(st, phi, VectorXd::Constant(1, y));
        Lambda += phi * phi.transpose();
        rhs += phi * y;
    }
    const Eigen::LDLT<MatrixXd> ldlt(Lambda);
    const VectorXd mean = ldlt.solve(rhs);
    const MatrixXd cov = ldlt.solve(MatrixXd::Identity(d, d));
    const BlrRow& row = st.rows[0];
    const double e_mean = (row.mean - mean).lpNorm<Eigen::Infinity>() / std::max(1.0, mean.lpNorm<Eigen::Infinity>());
    const double e_cov = (row.covariance - cov).lpNorm<Eigen::Infinity>() / std::max(1.0, cov.lpNorm<Eigen::Infinity>());
    const double e_prec
        = (row.precision - Lambda).lpNorm<Eigen::Infinity>() / std::max(1.0, Lambda.lpNorm<Eigen::Infinity>());
    return std::max({ e_mean, e_cov, e_prec });
}

CriterionResult criterion_blr_batch(const AcceptanceOptions& options)
{
    const auto t0 = Clock::now();
    const int datasets = scaled(100, options);
    Rng rng(20240607);
    double worst = 0.0;
    for (int k = 0; k < datasets; ++k) {
        worst = std::max(worst, blr_batch_max_error(&blr_update, rng));
    }
    CriterionResult c;
    c.id = 7;
    c.title = "BLR filter correctness";
    c.seconds = seconds_since(t0);
    c.pass = worst <= kBlrBatchTolerance;
    c.detail = "max sequential vs batch error " + fmt(worst, 3) + " over " + std::to_string(datasets)
        + " datasets (tol " + fmt(kBlrBatchTolerance) + ")";
    return c;
}

RobustQpCheck robust_qp_check(int instances, std::uint64_t seed)
{
    Rng rng(seed);
    std::uniform_real_distribution<double> uz(-1.0, 1.0);
    RobustQpCheck out;
    for (int k = 0; k < instances; ++k) {
        VectorXd x0;
        const RobustMPCProblem p = random_robust_instance(rng, x0);
        const CompiledMPC c = compile(p, x0);
        // Random (not optimized) decision vector.
        VectorXd z(c.qp.g.size());
        for (Index i = 0; i < z.size(); ++i) {
            z(i) = uz(rng);
        }
        const VectorXd compiled_lhs = worst_case_lhs(c, x0, z);
        const VectorXd brute = brute_force_worst_case(p, c, x0, policy_from_z(p, c, z));
        for (Index r = 0; r < brute.size(); ++r) {
            out.max_lhs_error = std::max(out.max_lhs_error,
                std::abs(compiled_lhs(r) - brute(r)) / std::max(1.0, std::abs(brute(r))));
        }
        ++out.instances;

        const MPCSolution sol = solve(c, x0);
        if (sol.optimal()) {
            ++out.solved;
            out.max_kkt = std::max(out.max_kkt, sol.kkt_residual);
            const VectorXd at_opt = brute_force_worst_case(p, c, x0, policy_from_z(p, c, sol.z));
            const VectorXd lhs_opt = worst_case_lhs(c, x0, sol.z);
            for (Index r = 0; r < at_opt.size(); ++r) {
                out.max_lhs_error = std::max(out.max_lhs_error,
                    std::abs(lhs_opt(r) - at_opt(r)) / std::max(1.0, std::abs(at_opt(r))));
                const double slack = at_opt(r) - c.rows[static_cast<std::size_t>(r)].rhs;
                out.max_violation = std::max(out.max_violation, slack);
            }
        } else if (sol.status == SolveKind::Infeasible) {
            ++out.infeasible;
        } else {
            ++out.failed;
        }
    }
    return out;
}

CriterionResult criterion_robust_qp(const AcceptanceOptions& options)
{
    const auto t0 = Clock::now();
    const RobustQpCheck r = robust_qp_check(scaled(200, options), 77);
    CriterionResult c;
    c.id = 8;
    c.title = "robust QP correctness";
    c.seconds = seconds_since(t0);
    c.pass = r.max_lhs_error <= kWorstCaseTolerance && r.max_kkt <= kKktTolerance && r.solved > 0 && r.failed == 0
        && r.max_violation <= 1e-7;
    c.detail = "max worst-case error " + fmt(r.max_lhs_error, 3) + " over " + std::to_string(r.instances)
        + " instances, solved " + std::to_string(r.solved) + " (infeasible " + std::to_string(r.infeasible)
        + ", failed " + std::to_string(r.failed) + "), max KKT " + fmt(r.max_kkt, 3) + ", max vertex violation "
        + fmt(r.max_violation, 3);
    return c;
}

IssMeasurement measure_iss(int seeds, int jobs)
{
    IssMeasurement out;
    {
        // Exact model and no noise: an essentially zero-width BLR posterior at
        // the true weights.
        nlohmann::json j = matched_di_config(0.5, 45, Variant::AdaptiveCE_A, 100).document;
        j["plant"]["noise"] = "zero";
        const Config cfg = parse_config(j);
        const Plant plant = build_plant(cfg);
        const BLRState st = blr_init(plant.masks, *plant.W_true, { MatrixXd(), 1e12 * MatrixXd::Identity(1, 1) },
            Eigen::Vector2d(1e-6, 1e-6), 0.05);
        Controller ctl(build_controller_config(cfg, plant, Variant::AdaptiveCE_A),
            std::make_unique<BlrEstimator>(st, plant.features));
        RunOptions o;
        o.steps = 100;
        const RunLog log = run_episodes(plant, ctl, o);
        out.exact_feasible = log.metrics.infeasible_step < 0;
        for (const auto& r : log.records) {
            if (r.x.norm() <= 1e-3) {
                out.exact_settle_step = r.t;
                break;
            }
        }
    }
    Config cfg = matched_di_config(0.5, 45, Variant::AdaptiveCE_A, 150);
    cfg.experiment.seeds = seeds;
    const CampaignResult camp = run_closed_loop_campaign(cfg, jobs);
    for (const RunLog& log : camp.logs) {
        if (log.metrics.infeasible_step >= 0) {
            ++out.noisy_infeasible;
            continue;
        }
        double sum = 0.0;
        int count = 0;
        for (const auto& r : log.records) {
            if (!r.terminal && r.t >= 100) {
                sum += r.x.norm();
                ++count;
            }
        }
        const double radius = log.snapshots.back().D_box.half_widths().norm();
        out.ratio = std::max(out.ratio, (sum / count) / radius);
    }
    return out;
}

CriterionResult criterion_iss(const AcceptanceOptions& options)
{
    const auto t0 = Clock::now();
    const IssMeasurement m = measure_iss(scaled(20, options), options.jobs);
    CriterionResult c;
    c.id = 9;
    c.title = "ISS proxy";
    c.seconds = seconds_since(t0);
    const bool locked = std::abs(m.ratio / kIssConstant - 1.0) <= kIssConstantBand;
    c.pass = m.exact_feasible && m.exact_settle_step >= 0 && m.exact_settle_step <= 100 && m.noisy_infeasible == 0
        && locked;
    c.detail = "noise-free ||x|| <= 1e-3 at t = " + std::to_string(m.exact_settle_step) + ", noisy C = " + fmt(m.ratio)
        + " (locked " + fmt(kIssConstant) + " +-" + fmt(100 * kIssConstantBand) + "%), noisy infeasible runs "
        + std::to_string(m.noisy_infeasible);
    return c;
}

CriterionResult criterion_cruise(const AcceptanceOptions& options)
{
    const auto t0 = Clock::now();
    Config cfg = cruise_config();
    cfg.experiment.seeds = scaled(20, options);
    const CampaignResult camp = run_closed_loop_campaign(cfg, options.jobs);
    const VariantSummary& ce = camp.summary[0];
    const VariantSummary& be = camp.summary[1];
    CriterionResult c;
    c.id = 10;
    c.title = "cruise ride quality";
    c.seconds = seconds_since(t0);
    const double ratio = ce.sq_acceleration_mean / be.sq_acceleration_mean;
    c.pass = ratio <= kRideQualityTarget && ce.infeasible_runs == 0 && be.infeasible_runs == 0 && c.seconds <= 300.0;
    c.detail = "squared acceleration CE/benchmark " + fmt(ratio) + " (need <= " + fmt(kRideQualityTarget)
        + "), infeasible runs CE " + std::to_string(ce.infeasible_runs) + ", benchmark "
        + std::to_string(be.infeasible_runs) + ", " + fmt(c.seconds, 3) + " s";
    return c;
}

CriterionResult criterion_quadrotor(const AcceptanceOptions& options)
{
    const auto t0 = Clock::now();
    bool pass = true;
    std::string detail;
    for (double angle : { 0.0, 22.5 }) {
        Config cfg = quadrotor_config(angle);
        cfg.experiment.seeds = scaled(10, options);
        const CampaignResult camp = run_closed_loop_campaign(cfg, options.jobs);
        const VariantSummary& ce = camp.summary[0];
        const VariantSummary& be = camp.summary[1];
        const VariantSummary& naive = camp.summary[2];
        const bool ok = ce.infeasible_runs == 0 && be.started_feasible == 0
            && ce.position_error_mean < naive.position_error_mean;
        pass = pass && ok;
        detail += (detail.empty() ? "" : "; ") + std::string("theta ") + fmt(angle) + ": CE feasible "
            + std::to_string(ce.runs - ce.infeasible_runs) + "/" + std::to_string(ce.runs) + ", benchmark infeasible "
            + std::to_string(be.runs - be.started_feasible) + "/" + std::to_string(be.runs) + ", position error CE "
            + fmt(ce.position_error_mean) + " vs naive " + fmt(naive.position_error_mean);
    }
    CriterionResult c;
    c.id = 11;
    c.title = "quadrotor wind";
    c.seconds = seconds_since(t0);
    c.pass = pass;
    c.detail = detail;
    return c;
}

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options)
{
    std::vector<CriterionResult> out = criteria_matched_runs(options);
    out.push_back(criterion_margin_ratio(options));
    out.push_back(criterion_envelope(options));
    out.push_back(criterion_estimators(options));
    out.push_back(criterion_blr_batch(options));
    out.push_back(criterion_robust_qp(options));
    out.push_back(criterion_iss(options));
    out.push_back(criterion_cruise(options));
    out.push_back(criterion_quadrotor(options));
    return out;
}

} // namespace armpc
