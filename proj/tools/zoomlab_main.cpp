// Command-line front end: simulate | sweep | bounds | capacity | bode | report.
// Exit codes: 0 ok, 1 usage/config error, 2 verdict inconsistency, 3 I/O error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "zoomlab/channel.hpp"
#include "zoomlab/harness.hpp"
#include "zoomlab/version.hpp"

using namespace zoomlab;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    int64_t seed = -1;
    int workers = -1;
    int64_t horizon = -1;
    int reps = -1;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool config_required = true) {
    auto* opt = cmd->add_option("--config", f.config_path, "experiment config file");
    if (config_required) opt->required();
    cmd->add_option("--out", f.out_dir, "output directory override");
    cmd->add_option("--seed", f.seed, "base seed override");
    cmd->add_option("--workers", f.workers, "worker thread limit");
    cmd->add_option("--horizon", f.horizon, "horizon override");
    cmd->add_option("--reps", f.reps, "replication count override");
}

json load_raw(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

json apply_overrides(json j, const CommonFlags& f) {
    if (!f.out_dir.empty()) j["run"]["out"] = f.out_dir;
    if (f.seed >= 0) j["run"]["seed"] = f.seed;
    if (f.workers >= 0) j["run"]["workers"] = f.workers;
    if (f.horizon >= 0) j["run"]["horizon"] = f.horizon;
    if (f.reps >= 0) j["run"]["replications"] = f.reps;
    return j;
}

void print_run(const RunOutputs& out) {
    std::cout << out.bounds.to_text();
    std::cout << "  stability: " << (out.stability.bounded ? "bounded" : "unbounded")
              << " (worst window p99 = " << out.stability.worst_p99_last_window
              << ", threshold = " << out.stability.bound_used << ")\n";
    if (out.has_ams)
        std::cout << "  cesaro final gap: " << out.stability.cesaro_final_gap << "\n";
    if (out.stability.desync_detected)
        std::cout << "  WARNING: encoder/decoder bin-size logs disagreed\n";
    std::cout << "  C >= V_hat: " << (out.bounds.phr_necessary_ok ? "satisfied" : "violated")
              << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"zoomlab: adaptive zoom coding over finite-rate channels"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    CommonFlags f;

    auto* sim = app.add_subcommand("simulate", "run one closed-loop experiment");
    add_common(sim, f);

    auto* sweep = app.add_subcommand("sweep", "run one experiment per axis value");
    add_common(sweep, f);
    std::string axis;
    std::vector<double> values;
    sweep->add_option("--axis", axis, "K | epsilon | gain | rate")->required();
    sweep->add_option("--values", values, "axis values")->required()->delimiter(',');

    auto* bounds_cmd = app.add_subcommand("bounds", "bound report only (no persistence)");
    add_common(bounds_cmd, f);

    auto* cap = app.add_subcommand("capacity", "channel capacity table");
    add_common(cap, f);

    auto* bode = app.add_subcommand("bode", "linear-Gaussian loop log-sensitivity integral");
    add_common(bode, f, false);
    double bode_gain = 2.0, bode_sw = 1.0, bode_sv = 1.0;
    int64_t bode_samples = int64_t{1} << 20, bode_burn = 8192, bode_seed = 7;
    bode->add_option("--gain", bode_gain, "plant gain a");
    bode->add_option("--sigma-w", bode_sw, "plant noise sigma");
    bode->add_option("--sigma-v", bode_sv, "channel noise sigma");
    bode->add_option("--samples", bode_samples, "post-burn-in samples");
    bode->add_option("--burn-in", bode_burn, "burn-in steps");
    bode->add_option("--bode-seed", bode_seed, "seed");

    auto* report = app.add_subcommand("report", "collate a finished run directory");
    std::string report_dir;
    report->add_option("--out", report_dir, "run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (sim->parsed()) {
            ExperimentConfig cfg = config_from_json(apply_overrides(load_raw(f.config_path), f));
            const RunOutputs out = run_closed_loop(cfg, true);
            print_run(out);
            std::cout << "artifacts in " << cfg.out_dir << "\n";
            return 0;
        }
        if (sweep->parsed()) {
            const json base = apply_overrides(load_raw(f.config_path), f);
            const auto rows = run_sweep(base, axis, values, true);
            std::cout << sweep_csv(rows, axis);
            return 0;
        }
        if (bounds_cmd->parsed()) {
            ExperimentConfig cfg = config_from_json(apply_overrides(load_raw(f.config_path), f));
            const RunOutputs out = run_closed_loop(cfg, false);
            std::cout << out.bounds.to_text();
            std::cout << out.bounds.to_json();
            return 0;
        }
        if (cap->parsed()) {
            ExperimentConfig cfg = config_from_json(apply_overrides(load_raw(f.config_path), f));
            const CapacityResult res = capacity(cfg.channel, 1e-9);
            std::cout << "inputs,outputs,capacity_bits,iterations,gap,converged\n";
            std::cout << cfg.channel.inputs << ',' << cfg.channel.outputs << ','
                      << res.capacity << ',' << res.iterations << ',' << res.gap << ','
                      << (res.converged ? 1 : 0) << "\n";
            return 0;
        }
        if (bode->parsed()) {
            const BodeExperiment ex = run_bode_experiment(
                bode_gain, bode_sw, bode_sv, bode_samples, bode_burn,
                static_cast<uint64_t>(bode_seed));
            std::cout << "bode integral: " << ex.result.integral_bits
                      << " bits (eigenvalue bound " << ex.eigenvalue_bound_bits << " bits, "
                      << ex.result.segments << " segments)\n";
            if (ex.result.nonstationarity_warning)
                std::cout << "WARNING: output record shows mean drift; integral may be biased\n";
            return 0;
        }
        if (report->parsed()) {
            return collate_report(report_dir, std::cout);
        }
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
