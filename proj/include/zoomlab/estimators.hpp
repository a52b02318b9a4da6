#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "zoomlab/codec.hpp"
#include "zoomlab/common.hpp"
#include "zoomlab/dynamics.hpp"
#include "zoomlab/trajectory.hpp"

namespace zoomlab {

// ---- differential entropy ---------------------------------------------------

struct EntropyEstimate {
    double bits = 0.0;
    int degenerate = 0;     // samples whose k-th neighbor sits at distance 0
    bool warning = false;   // duplicate-heavy input
};

/// Nearest-neighbor differential entropy in bits. `samples` is row-major
/// n x dim; distances in the max norm; neighbor order k (default 4).
EntropyEstimate entropy_estimate(const std::vector<double>& samples, int dim, int k = 4);

/// Replicated snapshots of the state at common times, for growth-rate fits.
struct SnapshotSet {
    int dim = 1;
    std::vector<int64_t> times;
    std::vector<std::vector<double>> samples;  // per time: row-major R x dim
};

struct GrowthRateFit {
    double slope_bits_per_step = 0.0;
    double intercept_bits = 0.0;
    double slope_stderr = 0.0;
    std::vector<double> entropy_bits;  // one per snapshot time
};

/// Least-squares slope of entropy over time. Needs >= 3 snapshot times.
GrowthRateFit entropy_growth_rate(const SnapshotSet& snapshots, int k = 4);

// ---- escape probability -----------------------------------------------------

/// Radius family b(T); admissible when log2 b(T) / T tends to 0.
struct ThresholdFamily {
    std::string name;
    std::function<double(double)> b;
};

ThresholdFamily poly_threshold(double power = 1.0);       // b(T) = T^p
ThresholdFamily expsqrt_threshold();                      // b(T) = 2^sqrt(T)
ThresholdFamily constant_threshold(double c);
ThresholdFamily explinear_threshold(double rate);         // inadmissible; for tests

/// Throws ConfigError when the family is not subexponential over the grid.
void validate_threshold(const ThresholdFamily& family, const std::vector<int64_t>& t_grid);

struct EscapeRow {
    int64_t t = 0;
    double b = 0.0;
    double fraction = 0.0;  // empirical P(|x_T|_inf <= b(T))
    double ci_lo = 0.0, ci_hi = 0.0;
};

struct EscapeTable {
    std::vector<EscapeRow> rows;
    std::string to_csv() const;
};

EscapeTable escape_probability(const std::vector<Trajectory>& trajectories,
                               const ThresholdFamily& family,
                               const std::vector<int64_t>& t_grid);

// ---- stopping times, drift, tails -------------------------------------------

/// Epochs T_0 = 0 < T_1 < ... at which every normalized coordinate is in
/// range. Stored compactly: the grid exponent of delta at each T_z and the
/// inter-arrival gaps.
struct StoppingTimeRecord {
    double delta0 = 0.0;
    double grid_step = 0.0;
    std::vector<int32_t> grid_exp;  // one per epoch
    std::vector<int32_t> gap;       // gap[z] = T_{z+1} - T_z, size epochs-1

    size_t epochs() const { return grid_exp.size(); }
    std::vector<int64_t> times() const;
    double delta(size_t z) const {
        return delta0 * std::exp2(static_cast<double>(grid_exp[z]) * grid_step);
    }
};

StoppingTimeRecord stopping_times(const Trajectory& traj);

struct DriftBin {
    double delta_lo = 0.0, delta_hi = 0.0;
    int64_t count = 0;
    double mean_drift = 0.0;  // E[log2 Delta^2_{T_{z+1}} - log2 Delta^2_{T_z}]
    double ci_lo = 0.0, ci_hi = 0.0;
};

struct DriftTable {
    std::vector<DriftBin> bins;
    double b0 = 0.0;  // -mean drift over epochs with Delta > F
    double b0_ci_lo = 0.0, b0_ci_hi = 0.0;
    int64_t epochs_above_threshold = 0;
    bool underpowered = false;  // fewer than 100 epochs above F
    std::string to_csv() const;
};

/// Conditional drift of log2 Delta^2 across stopping epochs, binned by the
/// epoch-start bin size. F is the compact-set threshold.
DriftTable drift_check(const std::vector<StoppingTimeRecord>& records, double threshold_f,
                       const std::vector<double>& bin_edges);

struct TailBin {
    double delta_lo = 0.0, delta_hi = 0.0;
    int64_t epochs = 0;
    std::vector<double> p_ge;  // p_ge[k-1] = P(gap >= k), k = 1..kmax
    double p_ge2 = 0.0;
    double r_hat = 0.0;        // fitted geometric decay; +inf when all gaps <= 2
    double c_hat = 0.0;        // smallest C with p_ge[k] <= C r_hat^-k
    bool decreasing = true;    // tail nonincreasing over its support
};

struct TailTable {
    std::vector<TailBin> bins;
    bool p_ge2_monotone_decreasing = true;  // across increasing delta bins
    std::string to_csv() const;
};

/// Epoch-gap tail behavior per epoch-start bin-size bin.
TailTable tail_check(const std::vector<StoppingTimeRecord>& records,
                     const std::vector<double>& bin_edges, int kmax = 32);

// ---- occupation and AMS ------------------------------------------------------

struct EventBox {
    Vec lo, hi;  // axis-aligned, closed; non-finite coordinates fall outside
    bool contains(const double* x, int dim) const {
        for (int i = 0; i < dim; ++i)
            if (!(x[i] >= lo[static_cast<size_t>(i)] && x[i] <= hi[static_cast<size_t>(i)]))
                return false;
        return true;
    }
};

struct OccupationHistogram {
    EventBox box;
    int bins_per_axis = 64;
    int dim = 1;
    std::vector<int64_t> counts;  // bins_per_axis^dim cells
    int64_t out_of_box = 0;
    int64_t total = 0;

    void add(const double* x);
    double in_box_mass() const { return total == 0 ? 0.0 : 1.0 - static_cast<double>(out_of_box) / total; }
};

OccupationHistogram occupation_histogram(const std::vector<Trajectory>& trajectories,
                                         const EventBox& box, int bins_per_axis,
                                         int64_t t_lo, int64_t t_hi);

struct AmsRow {
    int64_t n = 0;
    double cesaro_average = 0.0;
    double gap_to_half_n = 0.0;  // |A(n) - A(n/2)|; 0 on the first row
};

struct AmsTable {
    std::vector<std::vector<AmsRow>> per_box;
    double final_gap(size_t box) const { return per_box[box].back().gap_to_half_n; }
    std::string to_csv() const;
};

/// Streaming accumulator over replications: counts, per time step, how many
/// replications sit inside each event box. Integer merges keep the result
/// independent of worker scheduling.
class AmsAccumulator {
  public:
    AmsAccumulator(std::vector<EventBox> boxes, int64_t horizon);
    void add(const Trajectory& traj);
    void merge_counts(const std::vector<std::vector<int32_t>>& counts, int reps);
    /// Cesaro averages A(N) = (1/N) sum_{k<N} P_hat(x_k in box) at doubling N
    /// up to the horizon, with gaps between successive rows.
    AmsTable finalize() const;
    const std::vector<std::vector<int32_t>>& counts() const { return counts_; }
    int replications() const { return reps_; }

  private:
    std::vector<EventBox> boxes_;
    int64_t horizon_;
    int reps_ = 0;
    std::vector<std::vector<int32_t>> counts_;
};

AmsTable ams_cesaro_check(const std::vector<Trajectory>& trajectories,
                          const std::vector<EventBox>& boxes);

// ---- transience probe --------------------------------------------------------

struct TransienceRow {
    double x0 = 0.0;
    int replications = 0;
    double returned_fraction = 0.0;   // tau_S <= horizon
    double undecided_fraction = 0.0;  // not returned within the horizon
    double bracket_lo = 0.0, bracket_hi = 0.0;  // on P(tau_S < infinity)
    double mean_return_time = 0.0;    // over returned replications
};

struct TransienceTable {
    std::vector<TransienceRow> rows;
    std::string to_csv() const;
};

/// Return statistics to S = (-inf, s) for a scalar plant under a stationary
/// finite-memory coder, per start level. Validates inf_{x > slope_check_from}
/// f'(x) > 1 on a sample grid before running.
TransienceTable transience_probe(const SystemModel& model, const FiniteMemoryCoder& coder,
                                 const std::vector<double>& start_levels, int64_t horizon,
                                 int replications, double s_boundary, uint64_t seed,
                                 double slope_check_from);

// ---- Bode integral -----------------------------------------------------------

struct BodeResult {
    double integral_bits = 0.0;
    int segments = 0;
    bool nonstationarity_warning = false;
};

/// Averaged-periodogram estimate of the log-sensitivity integral
/// int_{-1/2}^{1/2} (1/2) log2(S_y(f)/S_v(f)) df for the closed-loop output y
/// and channel noise v. Hann taper, 50% overlap.
BodeResult bode_integral(const std::vector<double>& y, const std::vector<double>& v,
                         int segment = 4096);

/// Welch power spectrum over the full frequency circle (size nfft).
std::vector<double> welch_psd(const std::vector<double>& signal, int nfft);

}  // namespace zoomlab
