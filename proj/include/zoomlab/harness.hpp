#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "zoomlab/bounds.hpp"
#include "zoomlab/config.hpp"
#include "zoomlab/estimators.hpp"
#include "zoomlab/trajectory.hpp"

namespace zoomlab {

struct RunManifest {
    uint64_t config_hash = 0;
    std::vector<uint64_t> seeds;
    std::vector<std::string> artifacts;
    std::string version;

    json to_json() const;
    static RunManifest from_json(const json& j);
};

/// One replication of the configured loop, in memory. Replication seeds come
/// from derive_seed(config seed, rep index), so results do not depend on
/// scheduling.
Trajectory simulate_replication(const ExperimentConfig& cfg, int rep_index);

/// Runs `fn(rep, trajectory)` for every replication across a worker pool.
/// fn is invoked concurrently; implementations must write rep-indexed slots
/// or lock. Worker count 0 means hardware concurrency.
void for_each_replication(const ExperimentConfig& cfg,
                          const std::function<void(int, Trajectory&&)>& fn);

struct StabilityDiagnostics {
    double worst_p99_last_window = 0.0;  // max over reps of the window p99 of |x|_inf
    double bound_used = 0.0;             // boundedness threshold (1000 * delta0)
    bool bounded = false;
    double cesaro_final_gap = 1.0;       // max over event boxes
    double final_mass_in_box = 0.0;      // fraction of reps with x_T inside the box
    bool desync_detected = false;        // encoder/decoder grids disagreed
    int64_t window = 0;
};

struct RunOutputs {
    RunManifest manifest;
    BoundReport bounds;
    StabilityDiagnostics stability;

    bool has_escape = false, has_drift = false, has_tail = false, has_ams = false,
         has_growth = false;
    EscapeTable escape;
    DriftTable drift;
    TailTable tail;
    AmsTable ams;
    GrowthRateFit growth;
    OccupationHistogram occupation;  // tail-half window over the AMS box
    std::vector<StoppingTimeRecord> stopping_records;  // kept when drift/tail ran
};

/// Full experiment: simulate R replications, run the selected estimators, and
/// (optionally) persist trajectories and tables under cfg.out_dir.
/// `keep` non-null retains the raw trajectories (small runs only).
RunOutputs run_closed_loop(const ExperimentConfig& cfg, bool persist,
                           std::vector<Trajectory>* keep = nullptr);

struct SweepRow {
    double value = 0.0;
    BoundReport bounds;
    StabilityDiagnostics stability;
};

/// One full experiment per value of the named axis
/// ("K" | "epsilon" | "gain" | "rate"); writes sweep.csv when persisting.
std::vector<SweepRow> run_sweep(const json& base_config, const std::string& axis,
                                const std::vector<double>& values, bool persist);
std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& axis);

struct BodeExperiment {
    BodeResult result;
    double eigenvalue_bound_bits = 0.0;  // sum of unstable log2|lambda|
};

/// Stabilized scalar linear loop over an additive Gaussian channel
/// q' = q + v; deadbeat control u = -a q'. Records y = q' and v post burn-in.
BodeExperiment run_bode_experiment(double gain, double sigma_w, double sigma_v,
                                   int64_t samples, int64_t burn_in, uint64_t seed);

/// Collates a finished run directory into a human-readable summary.
/// Returns the process exit code: 0 ok, 2 verdict inconsistency,
/// 3 missing/corrupt artifacts.
int collate_report(const std::string& out_dir, std::ostream& os);

}  // namespace zoomlab
