#include "armpc/simulation.hpp"

#include "armpc/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace armpc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

SetSnapshot snapshot(const Controller& controller)
{
    const ControlSets& s = controller.sets();
    SetSnapshot snap;
    snap.id = s.id;
    snap.F_hat = s.budget.F_hat;
    snap.D_err = s.budget.D_err;
    snap.D_hat = s.budget.D_hat;
    snap.D_bench = s.budget.D_bench;
    snap.D_box = s.D_box;
    snap.U_eff = s.U_eff;
    snap.O = s.O.set;
    snap.O_empty = s.O.empty;
    snap.O_converged = s.O.converged;
    return snap;
}

RunLog run_episodes(const Plant& plant, Controller& controller, const RunOptions& options)
{
    const ControllerConfig& cfg = controller.config();
    require_dims(cfg.A.rows() == plant.n() && cfg.B.cols() == plant.m(), "run_episodes: controller and plant dimensions");
    Rng rng(options.seed);
    RunLog log;
    log.seed = options.seed;
    log.controller = std::string(to_string(cfg.variant));
    log.run_id = plant.name + "/" + log.controller + "/" + std::to_string(options.seed);
    log.snapshots.push_back(snapshot(controller));

    RunMetrics& met = log.metrics;
    double position_error_sum = 0.0;
    int global_step = 0;
    bool aborted = false;
    auto record_snapshot = [&]() {
        if (controller.sets().id != log.snapshots.back().id) {
            log.snapshots.push_back(snapshot(controller));
        }
    };

    for (int ep = 0; ep < options.episodes && !aborted; ++ep) {
        VectorXd x = plant.x0;
        VectorXd z = plant.z0;
        for (int t = 0; t < options.steps; ++t, ++global_step) {
            StepRecord rec;
            rec.episode = ep;
            rec.t = t;
            rec.x = x;
            rec.z = z;
            rec.f_true = plant.f_true(x, z);
            rec.state_ok = contains_point(plant.X, x, options.tol);
            // Without exact weights the event cannot be established.
            rec.confidence_ok = plant.W_true && controller.model().covers(*plant.W_true);
            const Box D_used = controller.sets().D_box;
            const StepDiagnostics diag = controller.act(x, t, z);
            rec.u = diag.u;
            rec.u0 = diag.u0;
            rec.f_hat = diag.f_hat;
            rec.status = diag.status;
            rec.objective = diag.objective;
            rec.kkt_residual = diag.kkt_residual;
            rec.sets_id = diag.sets_id;
            rec.model_frozen = diag.model_frozen;
            if (global_step == 0) {
                met.started_feasible = diag.status == SolveKind::Optimal;
            }
            if (diag.status != SolveKind::Optimal) {
                if (met.infeasible_step < 0) {
                    met.infeasible_step = global_step;
                }
                if (options.abort_on_infeasible) {
                    if (!rec.state_ok) {
                        ++met.state_violations;
                    }
                    if (!rec.confidence_ok) {
                        met.confidence_event = false;
                    }
                    log.records.push_back(std::move(rec));
                    aborted = true;
                    break;
                }
                // Without a solution the run continues with u = 0.
            }
            rec.input_ok = contains_point(plant.U, rec.u, options.tol);
            const VectorXd x_next = plant.step(x, rec.u, z, rng);
            const VectorXd x_mean = plant.mean_step(x, rec.u, z);
            rec.d = x_next - cfg.A * x - cfg.B * rec.u0;
            rec.d_contained = contains_point(D_used, rec.d, options.tol);
            met.cost += x.dot(cfg.Q * x) + rec.u.dot(cfg.R * rec.u);
            met.sq_acceleration += ((x_mean - x) / plant.dt).squaredNorm();
            double pe = 0.0;
            for (Index i : plant.position_indices) {
                pe += x(i) * x(i);
            }
            position_error_sum += std::sqrt(pe);
            met.max_kkt = std::max(met.max_kkt, diag.kkt_residual);
            ++met.steps;
            if (!rec.state_ok) {
                ++met.state_violations;
            }
            if (!rec.input_ok) {
                ++met.input_violations;
            }
            if (!rec.d_contained) {
                ++met.containment_violations;
            }
            if (!rec.confidence_ok) {
                met.confidence_event = false;
            }
            log.records.push_back(rec);
            controller.observe(x, rec.u, x_next, z);
            record_snapshot();
            z = plant.next_exogenous(z, x, rng);
            x = x_next;
        }
        if (aborted) {
            break;
        }
        StepRecord last;
        last.episode = ep;
        last.t = options.steps;
        last.x = x;
        last.z = z;
        last.terminal = true;
        last.state_ok = contains_point(plant.X, x, options.tol);
        last.sets_id = controller.sets().id;
        if (!last.state_ok) {
            ++met.state_violations;
        }
        met.cost += x.dot(cfg.Q * x);
        log.records.push_back(last);
        if (ep + 1 < options.episodes) {
            controller.end_episode();
            record_snapshot();
        }
    }
    met.model_frozen = controller.model_frozen();
    met.mean_position_error = met.steps > 0 ? position_error_sum / met.steps : 0.0;
    return log;
}

std::vector<RunLog> run_campaign(int count, int jobs, const std::function<RunLog(int)>& fn)
{
    std::vector<RunLog> out(static_cast<std::size_t>(std::max(count, 0)));
    if (count <= 0) {
        return out;
    }
    const int workers = std::clamp(jobs, 1, count);
    std::atomic<int> next { 0 };
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&]() {
        for (;;) {
            const int k = next.fetch_add(1);
            if (k >= count) {
                return;
            }
            try {
                out[static_cast<std::size_t>(k)] = fn(k);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                }
            }
        }
    };
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int w = 0; w < workers; ++w) {
            threads.emplace_back(worker);
        }
        for (auto& th : threads) {
            th.join();
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }
    return out;
}

namespace {

    struct GridBox {
        Eigen::Vector2d lo;
        Eigen::Vector2d hi;
    };

    GridBox box_of(const Polytope& X)
    {
        require_dims(X.dim() == 2, "feasible_envelope: state space must be 2-D");
        GridBox g;
        for (int i = 0; i < 2; ++i) {
            VectorXd e = VectorXd::Zero(2);
            e(i) = 1.0;
            g.hi(i) = support(X, e);
            g.lo(i) = -support(X, -e);
        }
        return g;
    }

    double grid_value(double lo, double hi, int k, int grid)
    {
        return grid == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * k / (grid - 1);
    }

    EnvelopeResult finish(std::vector<Eigen::Vector2d> points, const GridBox& g)
    {
        EnvelopeResult r;
        r.feasible_points = static_cast<int>(points.size());
        if (points.size() >= 3) {
            r.hull = convex_hull_2d(std::move(points));
            const double area_X = (g.hi(0) - g.lo(0)) * (g.hi(1) - g.lo(1));
            r.fraction = std::clamp(polygon_area(r.hull) / area_X, 0.0, 1.0);
        } else {
            r.hull = convex_hull_2d(std::move(points));
        }
        return r;
    }

} // namespace

EnvelopeResult feasible_envelope(const RobustMPCProblem& problem, int grid)
{
    if (grid < 1) {
        throw std::invalid_argument("feasible_envelope: grid must be positive");
    }
    const GridBox g = box_of(problem.X);
    EnvelopeResult empty;
    if (problem.O.is_empty() || problem.U_eff.is_empty()) {
        return empty;
    }
    const CompiledMPC c = compile(problem, Eigen::Vector2d::Zero());
    const Index nz = c.qp.g.size();
    // Variables (z, x1) with x2 fixed per grid line: A z - E_1 x1 <= b0 + E_2 x2.
    MatrixXd A(c.qp.A_ineq.rows(), nz + 1);
    A.leftCols(nz) = c.qp.A_ineq;
    A.col(nz) = -c.E.col(0);
    std::vector<Eigen::Vector2d> points;
    for (int j = 0; j < grid; ++j) {
        const double x2 = grid_value(g.lo(1), g.hi(1), j, grid);
        const VectorXd b = c.b0 + c.E.col(1) * x2;
        VectorXd cost = VectorXd::Zero(nz + 1);
        cost(nz) = 1.0;
        const SolveStatus lo = solve_lp(cost, A, b);
        if (lo.kind == SolveKind::Infeasible) {
            continue;
        }
        cost(nz) = -1.0;
        const SolveStatus hi = solve_lp(cost, A, b);
        if (!lo.optimal() || !hi.optimal()) {
            throw NumericalError("feasible_envelope: grid-line LP did not solve");
        }
        const double x1_lo = lo.primal(nz) - 1e-9;
        const double x1_hi = hi.primal(nz) + 1e-9;
        for (int k = 0; k < grid; ++k) {
            const double x1 = grid_value(g.lo(0), g.hi(0), k, grid);
            if (x1 >= x1_lo && x1 <= x1_hi) {
                points.emplace_back(x1, x2);
            }
        }
    }
    return finish(std::move(points), g);
}

EnvelopeResult feasible_envelope_bruteforce(const RobustMPCProblem& problem, int grid)
{
    if (grid < 1) {
        throw std::invalid_argument("feasible_envelope_bruteforce: grid must be positive");
    }
    const GridBox g = box_of(problem.X);
    EnvelopeResult empty;
    if (problem.O.is_empty() || problem.U_eff.is_empty()) {
        return empty;
    }
    const CompiledMPC c = compile(problem, Eigen::Vector2d::Zero());
    const VectorXd cost = VectorXd::Zero(c.qp.g.size());
    std::vector<Eigen::Vector2d> points;
    for (int j = 0; j < grid; ++j) {
        for (int k = 0; k < grid; ++k) {
            const Eigen::Vector2d x(grid_value(g.lo(0), g.hi(0), k, grid), grid_value(g.lo(1), g.hi(1), j, grid));
            const VectorXd b = c.b0 + c.E * x;
            const SolveStatus s = solve_lp(cost, c.qp.A_ineq, b);
            if (s.optimal()) {
                points.push_back(x);
            }
        }
    }
    return finish(std::move(points), g);
}

} // namespace armpc
