#include "zoomlab/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <sstream>

namespace zoomlab {

namespace {

constexpr double kLn2 = 0.6931471805599453;

double digamma(double x) {
    double r = 0.0;
    while (x < 6.0) {
        r -= 1.0 / x;
        x += 1.0;
    }
    const double f = 1.0 / (x * x);
    return r + std::log(x) - 0.5 / x -
           f * (1.0 / 12.0 - f * (1.0 / 120.0 - f * (1.0 / 252.0 - f / 240.0)));
}

struct MeanVar {
    int64_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;
    void add(double v) {
        ++n;
        const double d = v - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (v - mean);
    }
    double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
    double stderr_mean() const {
        return n > 1 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0;
    }
};

// k-d tree over row-major points, max-norm k-nearest-neighbor queries.
class KdTree {
  public:
    KdTree(const double* pts, int n, int dim) : pts_(pts), n_(n), dim_(dim) {
        idx_.resize(static_cast<size_t>(n));
        std::iota(idx_.begin(), idx_.end(), 0);
        nodes_.reserve(static_cast<size_t>(2 * n / kLeaf + 4));
        root_ = build(0, n, 0);
    }

    // Distance to the k-th nearest neighbor of point `self` (self excluded).
    double kth_distance(int self, int k) const {
        std::vector<double> heap;  // max-heap of current best distances
        heap.reserve(static_cast<size_t>(k) + 1);
        search(root_, self, k, heap);
        return heap.front();
    }

  private:
    static constexpr int kLeaf = 16;
    struct Node {
        int lo, hi;       // index range for leaves
        int axis = -1;
        double split = 0.0;
        int left = -1, right = -1;
    };

    int build(int lo, int hi, int depth) {
        Node nd;
        nd.lo = lo;
        nd.hi = hi;
        if (hi - lo <= kLeaf) {
            nodes_.push_back(nd);
            return static_cast<int>(nodes_.size()) - 1;
        }
        const int axis = depth % dim_;
        const int mid = (lo + hi) / 2;
        std::nth_element(idx_.begin() + lo, idx_.begin() + mid, idx_.begin() + hi,
                         [&](int a, int b) { return coord(a, axis) < coord(b, axis); });
        nd.axis = axis;
        nd.split = coord(idx_[static_cast<size_t>(mid)], axis);
        const int me = static_cast<int>(nodes_.size());
        nodes_.push_back(nd);
        const int l = build(lo, mid, depth + 1);
        const int r = build(mid, hi, depth + 1);
        nodes_[static_cast<size_t>(me)].left = l;
        nodes_[static_cast<size_t>(me)].right = r;
        return me;
    }

    double coord(int i, int axis) const { return pts_[static_cast<size_t>(i) * dim_ + axis]; }

    double dist(int a, int b) const {
        double d = 0.0;
        for (int i = 0; i < dim_; ++i)
            d = std::max(d, std::abs(coord(a, i) - coord(b, i)));
        return d;
    }

    void consider(int cand, int self, int k, std::vector<double>& heap) const {
        if (cand == self) return;
        const double d = dist(cand, self);
        if (static_cast<int>(heap.size()) < k) {
            heap.push_back(d);
            std::push_heap(heap.begin(), heap.end());
        } else if (d < heap.front()) {
            std::pop_heap(heap.begin(), heap.end());
            heap.back() = d;
            std::push_heap(heap.begin(), heap.end());
        }
    }

    void search(int node, int self, int k, std::vector<double>& heap) const {
        const Node& nd = nodes_[static_cast<size_t>(node)];
        if (nd.axis < 0) {
            for (int i = nd.lo; i < nd.hi; ++i) consider(idx_[static_cast<size_t>(i)], self, k, heap);
            return;
        }
        const double delta = coord(self, nd.axis) - nd.split;
        const int near = delta < 0.0 ? nd.left : nd.right;
        const int far = delta < 0.0 ? nd.right : nd.left;
        search(near, self, k, heap);
        if (static_cast<int>(heap.size()) < k || std::abs(delta) <= heap.front())
            search(far, self, k, heap);
    }

    const double* pts_;
    int n_, dim_;
    std::vector<int> idx_;
    std::vector<Node> nodes_;
    int root_ = 0;
};

// k-th neighbor distances in 1-D by a sorted sweep, O(n k).
std::vector<double> knn_distances_1d(const std::vector<double>& samples, int k) {
    const int n = static_cast<int>(samples.size());
    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> eps(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        int l = i - 1, r = i + 1;
        double d = 0.0;
        for (int taken = 0; taken < k; ++taken) {
            const double dl = l >= 0 ? sorted[static_cast<size_t>(i)] - sorted[static_cast<size_t>(l)]
                                     : std::numeric_limits<double>::infinity();
            const double dr = r < n ? sorted[static_cast<size_t>(r)] - sorted[static_cast<size_t>(i)]
                                    : std::numeric_limits<double>::infinity();
            if (dl <= dr) {
                d = dl;
                --l;
            } else {
                d = dr;
                ++r;
            }
        }
        eps[static_cast<size_t>(i)] = d;
    }
    return eps;
}

void wald_ci(double fraction, int64_t n, double& lo, double& hi) {
    const double se = n > 0 ? std::sqrt(std::max(fraction * (1.0 - fraction), 0.0) /
                                        static_cast<double>(n))
                            : 0.0;
    lo = std::max(0.0, fraction - 1.96 * se);
    hi = std::min(1.0, fraction + 1.96 * se);
}

}  // namespace

// ---- differential entropy ----------------------------------------------------

EntropyEstimate entropy_estimate(const std::vector<double>& samples, int dim, int k) {
    if (dim < 1) throw ConfigError("entropy_estimate: dimension must be >= 1");
    if (k < 1) throw ConfigError("entropy_estimate: neighbor order must be >= 1");
    const int64_t n = static_cast<int64_t>(samples.size()) / dim;
    if (n < 100) throw ConfigError("entropy_estimate: need at least 100 samples");

    std::vector<double> eps;
    if (dim == 1) {
        eps = knn_distances_1d(samples, k);
    } else {
        KdTree tree(samples.data(), static_cast<int>(n), dim);
        eps.resize(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) eps[static_cast<size_t>(i)] = tree.kth_distance(i, k);
    }

    EntropyEstimate out;
    double sum_log2_eps = 0.0;
    int64_t used = 0;
    for (double e : eps) {
        if (e <= 0.0) {
            ++out.degenerate;
            continue;
        }
        sum_log2_eps += std::log2(e);
        ++used;
    }
    out.warning = out.degenerate > 0;
    if (used == 0) throw ConfigError("entropy_estimate: all neighbor distances degenerate");

    // Kozachenko-Leonenko with the max-norm unit-ball volume 2^dim.
    const double psi_term = (digamma(static_cast<double>(n)) - digamma(static_cast<double>(k))) / kLn2;
    out.bits = psi_term + dim + dim * sum_log2_eps / static_cast<double>(used);
    return out;
}

GrowthRateFit entropy_growth_rate(const SnapshotSet& snapshots, int k) {
    const size_t m = snapshots.times.size();
    if (m < 3) throw ConfigError("entropy_growth_rate: need at least 3 snapshot times");
    if (snapshots.samples.size() != m)
        throw ConfigError("entropy_growth_rate: times/samples length mismatch");

    GrowthRateFit fit;
    fit.entropy_bits.resize(m);
    for (size_t j = 0; j < m; ++j)
        fit.entropy_bits[j] = entropy_estimate(snapshots.samples[j], snapshots.dim, k).bits;

    double tbar = 0.0, hbar = 0.0;
    for (size_t j = 0; j < m; ++j) {
        tbar += static_cast<double>(snapshots.times[j]);
        hbar += fit.entropy_bits[j];
    }
    tbar /= static_cast<double>(m);
    hbar /= static_cast<double>(m);
    double sxx = 0.0, sxy = 0.0;
    for (size_t j = 0; j < m; ++j) {
        const double dt = static_cast<double>(snapshots.times[j]) - tbar;
        sxx += dt * dt;
        sxy += dt * (fit.entropy_bits[j] - hbar);
    }
    fit.slope_bits_per_step = sxy / sxx;
    fit.intercept_bits = hbar - fit.slope_bits_per_step * tbar;
    double rss = 0.0;
    for (size_t j = 0; j < m; ++j) {
        const double pred = fit.intercept_bits +
                            fit.slope_bits_per_step * static_cast<double>(snapshots.times[j]);
        rss += (fit.entropy_bits[j] - pred) * (fit.entropy_bits[j] - pred);
    }
    if (m > 2) fit.slope_stderr = std::sqrt(rss / static_cast<double>(m - 2) / sxx);
    return fit;
}

// ---- escape probability --------------------------------------------------------

ThresholdFamily poly_threshold(double power) {
    return {"T^" + std::to_string(power),
            [power](double t) { return std::pow(t, power); }};
}

ThresholdFamily expsqrt_threshold() {
    return {"2^sqrt(T)", [](double t) { return std::exp2(std::sqrt(t)); }};
}

ThresholdFamily constant_threshold(double c) {
    return {"const " + std::to_string(c), [c](double) { return c; }};
}

ThresholdFamily explinear_threshold(double rate) {
    return {"2^(" + std::to_string(rate) + " T)",
            [rate](double t) { return std::exp2(rate * t); }};
}

void validate_threshold(const ThresholdFamily& family, const std::vector<int64_t>& t_grid) {
    if (t_grid.size() < 2)
        throw ConfigError("escape threshold validation needs at least two horizon points");
    auto rate_at = [&](int64_t t) {
        const double b = family.b(static_cast<double>(t));
        if (!(b > 0.0)) throw ConfigError("escape threshold b(T) must be positive");
        return std::abs(std::log2(b)) / static_cast<double>(t);
    };
    const double first = rate_at(t_grid.front());
    const double last = rate_at(t_grid.back());
    if (last > std::max(0.05, 0.5 * first))
        throw ConfigError("escape threshold '" + family.name +
                          "' is not subexponential over the configured horizon grid");
}

EscapeTable escape_probability(const std::vector<Trajectory>& trajectories,
                               const ThresholdFamily& family,
                               const std::vector<int64_t>& t_grid) {
    if (trajectories.empty()) throw ConfigError("escape_probability: no trajectories");
    validate_threshold(family, t_grid);
    EscapeTable table;
    for (int64_t t : t_grid) {
        EscapeRow row;
        row.t = t;
        row.b = family.b(static_cast<double>(t));
        int64_t inside = 0, total = 0;
        for (const auto& traj : trajectories) {
            if (t > traj.steps()) continue;
            ++total;
            if (linf_norm(traj.state_at(t)) <= row.b) ++inside;
        }
        if (total == 0) throw ConfigError("escape_probability: horizon point beyond all trajectories");
        row.fraction = static_cast<double>(inside) / static_cast<double>(total);
        wald_ci(row.fraction, total, row.ci_lo, row.ci_hi);
        table.rows.push_back(row);
    }
    return table;
}

std::string EscapeTable::to_csv() const {
    std::ostringstream os;
    os << "t,b,fraction,ci_lo,ci_hi\n";
    for (const auto& r : rows)
        os << r.t << ',' << r.b << ',' << r.fraction << ',' << r.ci_lo << ',' << r.ci_hi << '\n';
    return os.str();
}

// ---- stopping times ------------------------------------------------------------

std::vector<int64_t> StoppingTimeRecord::times() const {
    std::vector<int64_t> t(grid_exp.size());
    if (t.empty()) return t;
    t[0] = 0;
    for (size_t z = 1; z < t.size(); ++z) t[z] = t[z - 1] + gap[z - 1];
    return t;
}

StoppingTimeRecord stopping_times(const Trajectory& traj) {
    if (!traj.has_codec())
        throw ConfigError("stopping_times: trajectory has no codec log");
    StoppingTimeRecord rec;
    rec.delta0 = traj.delta0;
    rec.grid_step = traj.grid_step;
    const int64_t n = traj.steps();
    int64_t prev = 0;
    rec.grid_exp.push_back(traj.dec_grid[0]);  // T_0 = 0 by definition
    for (int64_t t = 1; t < n; ++t) {
        if (!traj.overflow[static_cast<size_t>(t)]) {
            rec.gap.push_back(static_cast<int32_t>(t - prev));
            rec.grid_exp.push_back(traj.dec_grid[static_cast<size_t>(t)]);
            prev = t;
        }
    }
    return rec;
}

DriftTable drift_check(const std::vector<StoppingTimeRecord>& records, double threshold_f,
                       const std::vector<double>& bin_edges) {
    if (bin_edges.size() < 2) throw ConfigError("drift_check: need at least two bin edges");
    DriftTable table;
    const size_t nbins = bin_edges.size() - 1;
    std::vector<MeanVar> bins(nbins);
    MeanVar above;

    for (const auto& rec : records) {
        const double two_s = 2.0 * rec.grid_step;
        for (size_t z = 0; z + 1 < rec.epochs(); ++z) {
            const double delta = rec.delta(z);
            const double drift = two_s * static_cast<double>(rec.grid_exp[z + 1] - rec.grid_exp[z]);
            for (size_t b = 0; b < nbins; ++b)
                if (delta >= bin_edges[b] && delta < bin_edges[b + 1]) {
                    bins[b].add(drift);
                    break;
                }
            if (delta > threshold_f) above.add(drift);
        }
    }
    for (size_t b = 0; b < nbins; ++b) {
        DriftBin row;
        row.delta_lo = bin_edges[b];
        row.delta_hi = bin_edges[b + 1];
        row.count = bins[b].n;
        row.mean_drift = bins[b].mean;
        const double e = 1.96 * bins[b].stderr_mean();
        row.ci_lo = bins[b].mean - e;
        row.ci_hi = bins[b].mean + e;
        table.bins.push_back(row);
    }
    table.epochs_above_threshold = above.n;
    table.underpowered = above.n < 100;
    table.b0 = -above.mean;
    const double e = 1.96 * above.stderr_mean();
    table.b0_ci_lo = -above.mean - e;
    table.b0_ci_hi = -above.mean + e;
    return table;
}

std::string DriftTable::to_csv() const {
    std::ostringstream os;
    os << "delta_lo,delta_hi,count,mean_drift_bits,ci_lo,ci_hi\n";
    for (const auto& b : bins)
        os << b.delta_lo << ',' << b.delta_hi << ',' << b.count << ',' << b.mean_drift << ','
           << b.ci_lo << ',' << b.ci_hi << '\n';
    os << "# b0=" << b0 << " ci=[" << b0_ci_lo << ',' << b0_ci_hi
       << "] epochs_above_F=" << epochs_above_threshold << '\n';
    return os.str();
}

TailTable tail_check(const std::vector<StoppingTimeRecord>& records,
                     const std::vector<double>& bin_edges, int kmax) {
    if (bin_edges.size() < 2) throw ConfigError("tail_check: need at least two bin edges");
    const size_t nbins = bin_edges.size() - 1;
    std::vector<std::vector<int64_t>> gap_counts(nbins,
                                                 std::vector<int64_t>(static_cast<size_t>(kmax) + 2, 0));
    std::vector<int64_t> totals(nbins, 0);

    for (const auto& rec : records)
        for (size_t z = 0; z + 1 < rec.epochs(); ++z) {
            const double delta = rec.delta(z);
            const int g = std::min<int>(rec.gap[z], kmax + 1);
            for (size_t b = 0; b < nbins; ++b)
                if (delta >= bin_edges[b] && delta < bin_edges[b + 1]) {
                    ++gap_counts[b][static_cast<size_t>(g)];
                    ++totals[b];
                    break;
                }
        }

    TailTable table;
    double prev_p2 = 2.0;
    for (size_t b = 0; b < nbins; ++b) {
        TailBin bin;
        bin.delta_lo = bin_edges[b];
        bin.delta_hi = bin_edges[b + 1];
        bin.epochs = totals[b];
        bin.p_ge.assign(static_cast<size_t>(kmax), 0.0);
        if (totals[b] > 0) {
            int64_t at_least = totals[b];
            for (int k = 1; k <= kmax; ++k) {
                bin.p_ge[static_cast<size_t>(k - 1)] =
                    static_cast<double>(at_least) / static_cast<double>(totals[b]);
                at_least -= gap_counts[b][static_cast<size_t>(k)];
            }
            bin.p_ge2 = kmax >= 2 ? bin.p_ge[1] : 0.0;

            int last_pos = 0;
            for (int k = 1; k <= kmax; ++k)
                if (bin.p_ge[static_cast<size_t>(k - 1)] > 0.0) last_pos = k;
            bin.decreasing = last_pos <= 1 ||
                             bin.p_ge[static_cast<size_t>(last_pos - 1)] < bin.p_ge[0];

            // log-linear fit of the tail over its positive support
            int pts = 0;
            double sx = 0, sy = 0, sxx = 0, sxy = 0;
            for (int k = 1; k <= last_pos; ++k) {
                const double p = bin.p_ge[static_cast<size_t>(k - 1)];
                if (p <= 0.0) continue;
                const double lk = static_cast<double>(k), lp = std::log2(p);
                ++pts;
                sx += lk;
                sy += lp;
                sxx += lk * lk;
                sxy += lk * lp;
            }
            if (pts >= 3) {
                const double slope = (static_cast<double>(pts) * sxy - sx * sy) /
                                     (static_cast<double>(pts) * sxx - sx * sx);
                bin.r_hat = std::exp2(-slope);
                for (int k = 1; k <= last_pos; ++k) {
                    const double p = bin.p_ge[static_cast<size_t>(k - 1)];
                    if (p > 0.0)
                        bin.c_hat = std::max(bin.c_hat,
                                             p * std::pow(bin.r_hat, static_cast<double>(k)));
                }
            } else {
                bin.r_hat = std::numeric_limits<double>::infinity();  // all gaps tiny
                bin.c_hat = 1.0;
            }
            if (prev_p2 < 2.0 && bin.p_ge2 > prev_p2 + 1e-12)
                table.p_ge2_monotone_decreasing = false;
            prev_p2 = bin.p_ge2;
        }
        table.bins.push_back(bin);
    }
    return table;
}

std::string TailTable::to_csv() const {
    std::ostringstream os;
    os << "delta_lo,delta_hi,epochs,p_ge2,r_hat,c_hat,decreasing\n";
    for (const auto& b : bins)
        os << b.delta_lo << ',' << b.delta_hi << ',' << b.epochs << ',' << b.p_ge2 << ','
           << b.r_hat << ',' << b.c_hat << ',' << (b.decreasing ? 1 : 0) << '\n';
    os << "# p_ge2_monotone_decreasing=" << (p_ge2_monotone_decreasing ? 1 : 0) << '\n';
    return os.str();
}

// ---- occupation and AMS ----------------------------------------------------------

void OccupationHistogram::add(const double* x) {
    ++total;
    int64_t cell = 0, stride = 1;
    for (int i = 0; i < dim; ++i) {
        const double lo = box.lo[static_cast<size_t>(i)], hi = box.hi[static_cast<size_t>(i)];
        // non-finite coordinates (diverged runs) count as escaped mass
        if (!(x[i] >= lo && x[i] <= hi)) {
            ++out_of_box;
            return;
        }
        int b = static_cast<int>((x[i] - lo) / (hi - lo) * bins_per_axis);
        if (b >= bins_per_axis) b = bins_per_axis - 1;
        if (b < 0) b = 0;
        cell += b * stride;
        stride *= bins_per_axis;
    }
    ++counts[static_cast<size_t>(cell)];
}

OccupationHistogram occupation_histogram(const std::vector<Trajectory>& trajectories,
                                         const EventBox& box, int bins_per_axis, int64_t t_lo,
                                         int64_t t_hi) {
    if (trajectories.empty()) throw ConfigError("occupation_histogram: no trajectories");
    OccupationHistogram h;
    h.box = box;
    h.bins_per_axis = bins_per_axis;
    h.dim = trajectories.front().dim;
    int64_t cells = 1;
    for (int i = 0; i < h.dim; ++i) cells *= bins_per_axis;
    h.counts.assign(static_cast<size_t>(cells), 0);
    for (const auto& traj : trajectories) {
        const int64_t hi = std::min(t_hi, traj.steps());
        for (int64_t t = std::max<int64_t>(t_lo, 0); t <= hi; ++t)
            h.add(traj.x.data() + t * traj.dim);
    }
    return h;
}

AmsAccumulator::AmsAccumulator(std::vector<EventBox> boxes, int64_t horizon)
    : boxes_(std::move(boxes)), horizon_(horizon) {
    counts_.assign(boxes_.size(), std::vector<int32_t>(static_cast<size_t>(horizon_ + 1), 0));
}

void AmsAccumulator::add(const Trajectory& traj) {
    ++reps_;
    const int64_t n = std::min(horizon_, traj.steps());
    for (size_t b = 0; b < boxes_.size(); ++b) {
        auto& row = counts_[b];
        const auto& box = boxes_[b];
        for (int64_t t = 0; t <= n; ++t)
            if (box.contains(traj.x.data() + t * traj.dim, traj.dim)) ++row[static_cast<size_t>(t)];
    }
}

void AmsAccumulator::merge_counts(const std::vector<std::vector<int32_t>>& counts, int reps) {
    reps_ += reps;
    for (size_t b = 0; b < counts_.size(); ++b)
        for (size_t t = 0; t < counts_[b].size() && t < counts[b].size(); ++t)
            counts_[b][t] += counts[b][t];
}

AmsTable AmsAccumulator::finalize() const {
    if (reps_ == 0) throw ConfigError("ams_cesaro_check: no replications");
    // N grid: horizon, horizon/2, horizon/4, ... down to 16, then reversed.
    std::vector<int64_t> grid;
    for (int64_t n = horizon_; n >= 16; n /= 2) grid.push_back(n);
    if (grid.empty()) grid.push_back(horizon_);
    std::reverse(grid.begin(), grid.end());

    AmsTable table;
    table.per_box.resize(boxes_.size());
    for (size_t b = 0; b < boxes_.size(); ++b) {
        // prefix sums of across-replication frequencies
        const auto& cnt = counts_[b];
        double running = 0.0;
        std::vector<double> prefix(cnt.size());
        for (size_t t = 0; t < cnt.size(); ++t) {
            running += static_cast<double>(cnt[t]) / static_cast<double>(reps_);
            prefix[t] = running;
        }
        double prev = -1.0;
        for (int64_t n : grid) {
            AmsRow row;
            row.n = n;
            row.cesaro_average = prefix[static_cast<size_t>(n - 1)] / static_cast<double>(n);
            row.gap_to_half_n = prev < 0.0 ? 0.0 : std::abs(row.cesaro_average - prev);
            prev = row.cesaro_average;
            table.per_box[b].push_back(row);
        }
    }
    return table;
}

AmsTable ams_cesaro_check(const std::vector<Trajectory>& trajectories,
                          const std::vector<EventBox>& boxes) {
    if (trajectories.empty()) throw ConfigError("ams_cesaro_check: no trajectories");
    int64_t horizon = trajectories.front().steps();
    for (const auto& t : trajectories) horizon = std::min(horizon, t.steps());
    AmsAccumulator acc(boxes, horizon);
    for (const auto& t : trajectories) acc.add(t);
    return acc.finalize();
}

std::string AmsTable::to_csv() const {
    std::ostringstream os;
    os << "box,n,cesaro_average,gap\n";
    for (size_t b = 0; b < per_box.size(); ++b)
        for (const auto& r : per_box[b])
            os << b << ',' << r.n << ',' << r.cesaro_average << ',' << r.gap_to_half_n << '\n';
    return os.str();
}

// ---- transience probe -------------------------------------------------------------

TransienceTable transience_probe(const SystemModel& model, const FiniteMemoryCoder& coder,
                                 const std::vector<double>& start_levels, int64_t horizon,
                                 int replications, double s_boundary, uint64_t seed,
                                 double slope_check_from) {
    if (model.dim != 1) throw ConfigError("transience_probe: scalar plants only");
    if (s_boundary <= 0.0) throw ConfigError("transience_probe: S = (-inf, s) needs s > 0");

    // Hypothesis check: df/dx > 1 beyond the given point, on a sample grid.
    // A NaN check point disables the screen (sanity inversions).
    if (!std::isnan(slope_check_from)) {
        const Vec w0{0.0};
        const double span = 10.0 * (1.0 + std::abs(slope_check_from));
        for (int i = 0; i <= 256; ++i) {
            const Vec x{slope_check_from + span * static_cast<double>(i) / 256.0 + 1e-6};
            const std::vector<double> jac =
                model.jacobian ? model.jacobian(x, w0) : finite_difference_jacobian(model, x, w0);
            if (jac[0] <= 1.0)
                throw ConfigError("transience_probe: plant slope <= 1 at x = " +
                                  std::to_string(x[0]) + "; hypothesis inf f' > 1 fails");
        }
    }

    const double sigma = model.noise_sigma.empty() ? 1.0 : model.noise_sigma[0];
    TransienceTable table;
    for (size_t lvl = 0; lvl < start_levels.size(); ++lvl) {
        TransienceRow row;
        row.x0 = start_levels[lvl];
        row.replications = replications;
        int64_t returned = 0;
        double tau_sum = 0.0;
        for (int rep = 0; rep < replications; ++rep) {
            NoiseStream rng(derive_seed(seed, lvl * 1000003ULL + static_cast<uint64_t>(rep)),
                            {sigma});
            FiniteMemoryCoder c = coder;  // fresh memory per replication
            double x = row.x0;
            for (int64_t t = 1; t <= horizon; ++t) {
                const FiniteMemoryStep st = finite_memory_step(x, c);
                x = step(model, {x}, {st.u}, {rng.standard_gaussian() * sigma})[0];
                if (x < s_boundary) {
                    ++returned;
                    tau_sum += static_cast<double>(t);
                    break;
                }
            }
        }
        row.returned_fraction = static_cast<double>(returned) / replications;
        row.undecided_fraction = 1.0 - row.returned_fraction;
        // tau_S < infinity is not finitely observable: every unreturned
        // replication stays undecided.
        row.bracket_lo = row.returned_fraction;
        row.bracket_hi = row.returned_fraction + row.undecided_fraction;
        row.mean_return_time = returned > 0 ? tau_sum / static_cast<double>(returned) : 0.0;
        table.rows.push_back(row);
    }
    return table;
}

std::string TransienceTable::to_csv() const {
    std::ostringstream os;
    os << "x0,replications,returned_fraction,undecided_fraction,bracket_lo,bracket_hi,"
          "mean_return_time\n";
    for (const auto& r : rows)
        os << r.x0 << ',' << r.replications << ',' << r.returned_fraction << ','
           << r.undecided_fraction << ',' << r.bracket_lo << ',' << r.bracket_hi << ','
           << r.mean_return_time << '\n';
    return os.str();
}

// ---- Bode integral ------------------------------------------------------------------

namespace {

void fft_inplace(std::vector<std::complex<double>>& a) {
    const size_t n = a.size();
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * M_PI / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t j = 0; j < len / 2; ++j) {
                const std::complex<double> u = a[i + j];
                const std::complex<double> v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

}  // namespace

std::vector<double> welch_psd(const std::vector<double>& signal, int nfft) {
    if (nfft < 2 || (nfft & (nfft - 1)) != 0)
        throw ConfigError("welch_psd: segment length must be a power of two");
    if (static_cast<int>(signal.size()) < nfft)
        throw ConfigError("welch_psd: signal shorter than one segment");

    double mean = 0.0;
    for (double v : signal) mean += v;
    mean /= static_cast<double>(signal.size());

    std::vector<double> window(static_cast<size_t>(nfft));
    double wss = 0.0;
    for (int i = 0; i < nfft; ++i) {
        window[static_cast<size_t>(i)] =
            0.5 * (1.0 - std::cos(2.0 * M_PI * i / static_cast<double>(nfft - 1)));
        wss += window[static_cast<size_t>(i)] * window[static_cast<size_t>(i)];
    }

    std::vector<double> psd(static_cast<size_t>(nfft), 0.0);
    std::vector<std::complex<double>> buf(static_cast<size_t>(nfft));
    const int hop = nfft / 2;
    int segments = 0;
    for (size_t off = 0; off + static_cast<size_t>(nfft) <= signal.size();
         off += static_cast<size_t>(hop)) {
        for (int i = 0; i < nfft; ++i)
            buf[static_cast<size_t>(i)] =
                (signal[off + static_cast<size_t>(i)] - mean) * window[static_cast<size_t>(i)];
        fft_inplace(buf);
        for (int i = 0; i < nfft; ++i) psd[static_cast<size_t>(i)] += std::norm(buf[static_cast<size_t>(i)]);
        ++segments;
    }
    for (double& v : psd) v /= static_cast<double>(segments) * wss;
    return psd;
}

BodeResult bode_integral(const std::vector<double>& y, const std::vector<double>& v,
                         int segment) {
    if (y.size() != v.size())
        throw ConfigError("bode_integral: output and noise records differ in length");
    BodeResult res;

    // Mean-drift screen for nonstationarity: compare half means to the spread.
    {
        const size_t n = y.size(), half = n / 2;
        double m1 = 0.0, m2 = 0.0, m = 0.0, s2 = 0.0;
        for (size_t i = 0; i < half; ++i) m1 += y[i];
        for (size_t i = half; i < n; ++i) m2 += y[i];
        m1 /= static_cast<double>(half);
        m2 /= static_cast<double>(n - half);
        for (double t : y) m += t;
        m /= static_cast<double>(n);
        for (double t : y) s2 += (t - m) * (t - m);
        const double sd = std::sqrt(s2 / static_cast<double>(n - 1));
        if (std::abs(m1 - m2) > 0.5 * sd) res.nonstationarity_warning = true;
    }

    const std::vector<double> sy = welch_psd(y, segment);
    const std::vector<double> sv = welch_psd(v, segment);
    res.segments = static_cast<int>(2 * (y.size() / static_cast<size_t>(segment))) - 1;

    // Trapezoid over the periodic frequency grid = mean over all bins.
    double acc = 0.0;
    for (int j = 0; j < segment; ++j) {
        const double num = std::max(sy[static_cast<size_t>(j)], 1e-300);
        const double den = std::max(sv[static_cast<size_t>(j)], 1e-300);
        acc += 0.5 * std::log2(num / den);
    }
    res.integral_bits = acc / static_cast<double>(segment);
    return res;
}

}  // namespace zoomlab
