#include "armpc/run_log.hpp"

#include "armpc/json_io.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace armpc {

namespace {

    void write_vector(std::ostream& os, const Eigen::VectorXd& v, Eigen::Index n)
    {
        for (Eigen::Index i = 0; i < n; ++i) {
            os << ',';
            if (i < v.size()) {
                os << v(i);
            }
        }
    }

    Eigen::Index width(const RunLog& log, Eigen::VectorXd StepRecord::*field)
    {
        Eigen::Index w = 0;
        for (const auto& r : log.records) {
            w = std::max(w, (r.*field).size());
        }
        return w;
    }

} // namespace

void write_run_csv(std::ostream& os, const RunLog& log)
{
    const Eigen::Index nx = width(log, &StepRecord::x);
    const Eigen::Index nz = width(log, &StepRecord::z);
    const Eigen::Index nu = width(log, &StepRecord::u);
    os << "# armpc run log v" << kRunLogSchemaVersion << '\n';
    os << "episode,t";
    auto cols = [&](const char* name, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n; ++i) {
            os << ',' << name << i;
        }
    };
    cols("x", nx);
    cols("z", nz);
    cols("u", nu);
    cols("u0_", nu);
    cols("fhat", nx);
    cols("f", nx);
    cols("d", nx);
    os << ",status,objective,kkt,sets_id,model_frozen,state_ok,input_ok,d_contained,confidence_ok,terminal\n";
    os << std::setprecision(17);
    for (const auto& r : log.records) {
        os << r.episode << ',' << r.t;
        write_vector(os, r.x, nx);
        write_vector(os, r.z, nz);
        write_vector(os, r.u, nu);
        write_vector(os, r.u0, nu);
        write_vector(os, r.f_hat, nx);
        write_vector(os, r.f_true, nx);
        write_vector(os, r.d, nx);
        os << ',' << to_string(r.status) << ',' << r.objective << ',' << r.kkt_residual << ',' << r.sets_id << ','
           << r.model_frozen << ',' << r.state_ok << ',' << r.input_ok << ',' << r.d_contained << ',' << r.confidence_ok
           << ',' << r.terminal << '\n';
    }
}

std::string run_csv(const RunLog& log)
{
    std::ostringstream os;
    write_run_csv(os, log);
    return os.str();
}

nlohmann::json run_metrics_json(const RunMetrics& m)
{
    return nlohmann::json {
        { "cost", m.cost },
        { "steps", m.steps },
        { "state_violations", m.state_violations },
        { "input_violations", m.input_violations },
        { "infeasible_step", m.infeasible_step },
        { "started_feasible", m.started_feasible },
        { "confidence_event", m.confidence_event },
        { "containment_violations", m.containment_violations },
        { "sq_acceleration", m.sq_acceleration },
        { "mean_position_error", m.mean_position_error },
        { "model_frozen", m.model_frozen },
        { "max_kkt", m.max_kkt },
    };
}

nlohmann::json run_sidecar_json(const RunLog& log, const nlohmann::json& config)
{
    nlohmann::json snaps = nlohmann::json::array();
    for (const auto& s : log.snapshots) {
        snaps.push_back({
            { "id", s.id },
            { "F_hat", s.F_hat },
            { "D_err", s.D_err },
            { "D_hat", s.D_hat },
            { "D_bench", s.D_bench },
            { "D_box", s.D_box },
            { "U_eff", s.U_eff },
            { "O", s.O },
            { "O_empty", s.O_empty },
            { "O_converged", s.O_converged },
        });
    }
    std::ostringstream hash;
    hash << std::hex << std::setw(16) << std::setfill('0') << run_hash(log);
    return nlohmann::json {
        { "schema_version", kRunLogSchemaVersion },
        { "run_id", log.run_id },
        { "seed", log.seed },
        { "controller", log.controller },
        { "config", config },
        { "metrics", run_metrics_json(log.metrics) },
        { "snapshots", snaps },
        { "csv_hash", hash.str() },
    };
}

std::uint64_t run_hash(const RunLog& log)
{
    const std::string text = run_csv(log);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

void write_run_files(const std::string& dir, const std::string& stem, const RunLog& log, const nlohmann::json& config)
{
    std::filesystem::create_directories(dir);
    const std::filesystem::path base = std::filesystem::path(dir) / stem;
    {
        std::ofstream csv(base.string() + ".csv");
        if (!csv) {
            throw std::runtime_error("cannot write " + base.string() + ".csv");
        }
        write_run_csv(csv, log);
    }
    std::ofstream js(base.string() + ".json");
    if (!js) {
        throw std::runtime_error("cannot write " + base.string() + ".json");
    }
    js << run_sidecar_json(log, config).dump(2) << '\n';
}

} // namespace armpc
