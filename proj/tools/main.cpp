// armpc command line driver: run, sweep and verify.

#include "armpc/checks.hpp"
#include "armpc/config.hpp"
#include "armpc/errors.hpp"
#include "armpc/experiments.hpp"
#include "armpc/run_log.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace armpc;

namespace {

std::string default_out_dir()
{
    if (const char* env = std::getenv("ARMPC_OUT_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
    return "armpc_out";
}

int default_jobs()
{
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

std::string file_stem(std::string id)
{
    for (char& c : id) {
        if (c == '/' || c == ' ') {
            c = '_';
        }
    }
    return id;
}

void print_summary(const std::vector<VariantSummary>& summary)
{
    std::cout << std::left << std::setw(16) << "controller" << std::right << std::setw(6) << "runs" << std::setw(12)
              << "cost" << std::setw(8) << "viol" << std::setw(8) << "infeas" << std::setw(8) << "conf" << std::setw(10)
              << "contain" << std::setw(12) << "envelope" << '\n';
    for (const auto& s : summary) {
        std::cout << std::left << std::setw(16) << s.controller << std::right << std::setw(6) << s.runs << std::setw(12)
                  << std::setprecision(5) << s.cost_mean << std::setw(8) << s.state_violations + s.input_violations
                  << std::setw(8) << s.infeasible_runs << std::setw(8) << s.confidence_events << std::setw(10)
                  << s.containment_violations << std::setw(12);
        if (std::isnan(s.envelope_fraction)) {
            std::cout << "-";
        } else {
            std::cout << s.envelope_fraction;
        }
        std::cout << '\n';
    }
}

// Safety guarantees only bind the cancelling variants while the confidence
// event holds.
int invariant_failures(const CampaignResult& r)
{
    int failures = 0;
    for (const RunLog& log : r.logs) {
        const bool ce = log.controller.rfind("AdaptiveCE", 0) == 0;
        if (!ce || !log.metrics.confidence_event || log.metrics.model_frozen) {
            continue;
        }
        const bool post_start_infeasible = log.metrics.started_feasible && log.metrics.infeasible_step > 0;
        if (log.metrics.state_violations + log.metrics.input_violations + log.metrics.containment_violations > 0
            || post_start_infeasible) {
            ++failures;
            std::cerr << "invariant failure in " << log.run_id << '\n';
        }
    }
    return failures;
}

int run_estimation(const Config& cfg, const std::string& out, std::uint64_t seed0, int jobs)
{
    ToyOptions o;
    o.w = Eigen::Vector2d(cfg.plant.toy_w(0), cfg.plant.toy_w(1));
    o.noise = cfg.plant.toy_noise;
    o.bias = cfg.plant.toy_bias;
    o.samples = cfg.experiment.steps;
    o.delta = cfg.estimator.delta;
    const int seeds = cfg.experiment.seeds;
    std::vector<ToyTrace> traces(static_cast<std::size_t>(seeds));
    run_campaign(seeds, jobs, [&](int i) {
        traces[static_cast<std::size_t>(i)] = run_toy(o, seed0 + static_cast<std::uint64_t>(i));
        return RunLog {};
    });
    fs::create_directories(out);
    std::ofstream csv(fs::path(out) / "estimation.csv");
    csv << "# armpc estimation trace v1\nseed,t,sm_radius,blr_radius\n" << std::setprecision(12);
    int emptied = 0;
    int consistent = 0;
    int covered = 0;
    for (int s = 0; s < seeds; ++s) {
        const ToyTrace& t = traces[static_cast<std::size_t>(s)];
        emptied += t.sm_empty_at > 0 ? 1 : 0;
        consistent += (t.sm_empty_at < 0 && t.sm_radii_monotone && t.sm_final_within) ? 1 : 0;
        covered += t.blr_covered ? 1 : 0;
        for (std::size_t k = 0; k < t.blr_radius.size(); ++k) {
            csv << seed0 + static_cast<std::uint64_t>(s) << ',' << k << ',';
            // Set-membership radii start after the first sample.
            if (k >= 1 && k - 1 < t.sm_radius.size()) {
                csv << t.sm_radius[k - 1];
            }
            csv << ',' << t.blr_radius[k] << '\n';
        }
    }
    const nlohmann::json summary {
        { "seeds", seeds },
        { "samples", o.samples },
        { "bias", o.bias },
        { "set_membership_emptied", emptied },
        { "set_membership_consistent", consistent },
        { "blr_covered", covered },
    };
    std::ofstream(fs::path(out) / "summary.json") << summary.dump(2) << '\n';
    std::cout << "set-membership emptied " << emptied << "/" << seeds << ", consistent " << consistent << "/" << seeds
              << ", BLR covered " << covered << "/" << seeds << '\n';
    return 0;
}

int cmd_run(const std::string& path, const std::string& out, std::optional<std::uint64_t> seed, int jobs)
{
    const Config cfg = load_config(path);
    const std::uint64_t seed0 = seed.value_or(cfg.experiment.seed);
    if (cfg.experiment.kind == "estimation") {
        return run_estimation(cfg, out, seed0, jobs);
    }
    const CampaignResult r = run_closed_loop_campaign(cfg, jobs, seed0);
    fs::create_directories(out);
    nlohmann::json config_doc = cfg.document;
    config_doc["experiment"]["seed"] = seed0;
    for (const RunLog& log : r.logs) {
        write_run_files(out, file_stem(log.run_id), log, config_doc);
    }
    std::ofstream(fs::path(out) / "summary.json") << nlohmann::json { { "config", config_doc },
        { "controllers", summary_json(r.summary) } }
                                                         .dump(2)
                                                  << '\n';
    std::ofstream csv(fs::path(out) / "summary.csv");
    write_summary_csv(csv, r.summary);
    print_summary(r.summary);
    return invariant_failures(r) == 0 ? 0 : 2;
}

std::vector<double> parse_values(const std::string& list)
{
    std::vector<double> values;
    std::stringstream ss(list);
    for (std::string item; std::getline(ss, item, ',');) {
        if (item.find_first_not_of(" \t") == std::string::npos) {
            continue;
        }
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            throw ValidationError("--values", "'" + item + "' is not a number");
        }
        if (item.find_first_not_of(" \t", used) != std::string::npos) {
            throw ValidationError("--values", "'" + item + "' is not a number");
        }
        values.push_back(v);
    }
    return values;
}

int cmd_sweep(const std::string& path, const std::string& param, const std::string& list, const std::string& out,
    int jobs)
{
    const Config base = load_config(path);
    const std::vector<double> values = parse_values(list);
    if (values.empty()) {
        std::cout << "no values; nothing to do\n";
        return 0;
    }
    if (base.experiment.kind != "closed_loop") {
        throw ValidationError("/experiment/kind", "sweeps need a closed-loop experiment");
    }
    fs::create_directories(out);
    std::ofstream csv(fs::path(out) / "sweep.csv");
    csv << "# armpc sweep v1\n"
        << "param,value,controller,runs,cost_mean,cost_p10,cost_p50,cost_p90,feasible,feasible_fraction,"
           "envelope_fraction\n"
        << std::setprecision(10);
    int failures = 0;
    for (double v : values) {
        nlohmann::json doc = base.document;
        set_config_value(doc, param, v);
        const Config cfg = parse_config(doc, base.base_dir);
        const CampaignResult r = run_closed_loop_campaign(cfg, jobs);
        failures += invariant_failures(r);
        for (const auto& s : r.summary) {
            const double feasible = 1.0 - static_cast<double>(s.infeasible_runs) / s.runs;
            csv << param << ',' << v << ',' << s.controller << ',' << s.runs << ',' << s.cost_mean << ',' << s.cost_p10
                << ',' << s.cost_p50 << ',' << s.cost_p90 << ',' << (s.infeasible_runs == 0 ? 1 : 0) << ','
                << feasible << ',';
            if (!std::isnan(s.envelope_fraction)) {
                csv << s.envelope_fraction;
            }
            csv << '\n';
            std::cout << param << '=' << v << "  " << std::left << std::setw(16) << s.controller << std::right
                      << " feasible " << feasible << "  cost " << s.cost_mean;
            if (!std::isnan(s.envelope_fraction)) {
                std::cout << "  envelope " << s.envelope_fraction;
            }
            std::cout << '\n';
        }
    }
    return failures == 0 ? 0 : 2;
}

int cmd_verify(const std::string& suite, bool mutate, int jobs)
{
    CheckOptions o;
    o.jobs = jobs;
    if (mutate) {
        o.blr_update_fn = &mutant_blr_update;
    }
    const auto results = run_suite(suite, o);
    print_checks(std::cout, results);
    for (const auto& r : results) {
        if (!r.pass) {
            return 1;
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app { "Adaptive robust MPC via uncertainty cancellation" };
    app.require_subcommand(1);
    int jobs = default_jobs();
    app.add_option("--jobs,-j", jobs, "parallel runs")->check(CLI::PositiveNumber);

    std::string config_path;
    std::string out = default_out_dir();
    std::optional<std::uint64_t> seed;
    auto* run = app.add_subcommand("run", "run the campaign described by a config");
    run->add_option("config", config_path, "config file")->required();
    run->add_option("--out,-o", out, "output directory (default $ARMPC_OUT_DIR or ./armpc_out)");
    run->add_option("--seed,-s", seed, "base seed override");
    run->add_option("--jobs,-j", jobs, "parallel runs")->check(CLI::PositiveNumber);

    std::string param;
    std::string values;
    auto* sweep = app.add_subcommand("sweep", "sweep one scalar config entry");
    sweep->add_option("config", config_path, "config file")->required();
    sweep->add_option("--param,-p", param, "dotted path, e.g. plant.w1")->required();
    sweep->add_option("--values,-v", values, "comma separated values")->required();
    sweep->add_option("--out,-o", out, "output directory");
    sweep->add_option("--jobs,-j", jobs, "parallel runs")->check(CLI::PositiveNumber);

    std::string suite;
    bool mutate = false;
    auto* verify = app.add_subcommand("verify", "run a check suite");
    verify->add_option("suite", suite, "geometry | estimators | mpc | closed_loop")->required();
    verify->add_flag("--mutate-blr", mutate, "flip the innovation sign in the BLR update (the check must fail)");
    verify->add_option("--jobs,-j", jobs, "parallel runs")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            return cmd_run(config_path, out, seed, jobs);
        }
        if (*sweep) {
            return cmd_sweep(config_path, param, values, out, jobs);
        }
        if (*verify) {
            if (!is_suite(suite)) {
                std::cerr << "unknown suite '" << suite << "'; expected one of:";
                for (const auto& s : suite_names()) {
                    std::cerr << ' ' << s;
                }
                std::cerr << '\n';
                return 64;
            }
            return cmd_verify(suite, mutate, jobs);
        }
    } catch (const ValidationError& e) {
        std::cerr << "config error at " << (e.field().empty() ? "/" : e.field()) << ": " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
