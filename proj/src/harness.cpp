#include "zoomlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "zoomlab/channel.hpp"
#include "zoomlab/version.hpp"

namespace fs = std::filesystem;

namespace zoomlab {

json RunManifest::to_json() const {
    json j;
    j["config_hash"] = config_hash;
    j["seeds"] = seeds;
    j["artifacts"] = artifacts;
    j["version"] = version;
    return j;
}

RunManifest RunManifest::from_json(const json& j) {
    RunManifest m;
    m.config_hash = j.at("config_hash").get<uint64_t>();
    for (const auto& s : j.at("seeds")) m.seeds.push_back(s.get<uint64_t>());
    for (const auto& a : j.at("artifacts")) m.artifacts.push_back(a.get<std::string>());
    m.version = j.at("version").get<std::string>();
    return m;
}

namespace {

Vec draw_x0(const ExperimentConfig& cfg, NoiseStream& rng) {
    if (!cfg.x0_fixed.empty()) return cfg.x0_fixed;
    Vec x(static_cast<size_t>(cfg.model.dim));
    for (auto& v : x) v = cfg.x0_sigma * rng.standard_gaussian();
    return x;
}

double coder_gain(const ExperimentConfig& cfg) {
    if (cfg.fm_gain != 0.0) return cfg.fm_gain;
    if (cfg.model.name == "linear" && cfg.model.certificate) return cfg.model.certificate->a;
    throw ConfigError("finite-memory coder needs an explicit gain for this model");
}

}  // namespace

Trajectory simulate_replication(const ExperimentConfig& cfg, int rep_index) {
    const uint64_t rep_seed = derive_seed(cfg.seed, static_cast<uint64_t>(rep_index));
    const SystemModel& model = cfg.model;
    const Vec sigma = model.noise_sigma.empty() ? Vec(static_cast<size_t>(model.dim), 1.0)
                                                : model.noise_sigma;

    NoiseStream plant_rng(derive_seed(rep_seed, 1), sigma);
    NoiseStream chan_rng(derive_seed(rep_seed, 2));
    NoiseStream x0_rng(derive_seed(rep_seed, 3));

    Trajectory traj;
    traj.dim = model.dim;
    traj.seed = rep_seed;
    traj.config_hash = cfg.hash;
    traj.reserve(cfg.horizon);

    Vec x = draw_x0(cfg, x0_rng);
    traj.x.insert(traj.x.end(), x.begin(), x.end());

    const bool zoom = cfg.codec_type == CodecType::Zoom;
    CodecState enc, dec;
    if (zoom) {
        traj.delta0 = cfg.delta0;
        traj.grid_step = cfg.zoom.grid_step;
        traj.levels = cfg.zoom.levels;
        enc = make_codec_state(cfg.zoom, cfg.delta0, CodecState::Side::Encoder);
        dec = make_codec_state(cfg.zoom, cfg.delta0, CodecState::Side::Decoder);
        traj.enc_grid.push_back(static_cast<int32_t>(enc.grid_exp));
        traj.dec_grid.push_back(static_cast<int32_t>(dec.grid_exp));
    }

    FiniteMemoryCoder coder;
    if (cfg.codec_type == CodecType::FixedQuantizer) {
        const double g = coder_gain(cfg);
        coder = fixed_quantizer_coder(cfg.fm_levels, cfg.fm_delta,
                                      [g](double xhat) { return -g * xhat; });
        if (cfg.channel.kind != ChannelKind::Noiseless)
            throw ConfigError("finite-memory coders are driven over noiseless channels here");
    } else if (cfg.codec_type == CodecType::SignZoom) {
        coder = sign_zoom_coder(coder_gain(cfg), cfg.fm_delta);
        if (cfg.channel.kind != ChannelKind::Noiseless)
            throw ConfigError("finite-memory coders are driven over noiseless channels here");
    }

    const Vec zero_u(static_cast<size_t>(model.dim), 0.0);
    for (int64_t t = 0; t < cfg.horizon; ++t) {
        Vec u = zero_u;
        if (zoom) {
            const QuantizeResult qr = vector_quantize(x, cfg.zoom, enc);
            const int q = static_cast<int>(qr.symbol);
            const int qprime = transmit(cfg.channel, q, chan_rng);
            const bool erased = cfg.channel.is_erasure(qprime);
            const bool overflow_observed =
                erased || qprime == static_cast<int>(cfg.zoom.overflow_symbol());

            DecoderOutput dout = decoder_step(qprime, erased, dec, cfg.zoom, model);
            // channel feedback: the encoder applies the same received-symbol update
            sync_update(enc, cfg.zoom, overflow_observed);
            u = dout.u;

            traj.q.push_back(q);
            traj.qprime.push_back(qprime);
            traj.overflow.push_back(static_cast<uint8_t>(overflow_observed));
            traj.enc_grid.push_back(static_cast<int32_t>(enc.grid_exp));
            traj.dec_grid.push_back(static_cast<int32_t>(dec.grid_exp));
        } else if (cfg.codec_type != CodecType::None) {
            const FiniteMemoryStep st = finite_memory_step(x[0], coder);
            u[0] = st.u;
        }
        const Vec w = plant_rng.gaussian_vector();
        x = step(model, x, u, w);
        traj.u.insert(traj.u.end(), u.begin(), u.end());
        traj.x.insert(traj.x.end(), x.begin(), x.end());
    }
    return traj;
}

void for_each_replication(const ExperimentConfig& cfg,
                          const std::function<void(int, Trajectory&&)>& fn) {
    int workers = cfg.workers > 0 ? cfg.workers
                                  : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min(workers, cfg.replications));

    if (workers == 1) {
        for (int r = 0; r < cfg.replications; ++r) fn(r, simulate_replication(cfg, r));
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int wkr = 0; wkr < workers; ++wkr)
        pool.emplace_back([&] {
            for (;;) {
                const int r = next.fetch_add(1);
                if (r >= cfg.replications) return;
                fn(r, simulate_replication(cfg, r));
            }
        });
    for (auto& th : pool) th.join();
}

namespace {

bool selected(const ExperimentConfig& cfg, const char* name) {
    if (cfg.estimators.empty())
        return std::string(name) == "bounds" || std::string(name) == "ams";
    for (const auto& s : cfg.estimators)
        if (s == name) return true;
    return false;
}

ThresholdFamily threshold_from_config(const ExperimentConfig& cfg) {
    if (cfg.escape_threshold == "poly") return poly_threshold(cfg.escape_power);
    if (cfg.escape_threshold == "expsqrt") return expsqrt_threshold();
    if (cfg.escape_threshold == "const") return constant_threshold(cfg.escape_power);
    throw ConfigError("unknown escape threshold family: " + cfg.escape_threshold);
}

std::vector<double> default_delta_bins(const ExperimentConfig& cfg) {
    const double floor_l = cfg.zoom.floor_delta;
    std::vector<double> edges{cfg.zoom.alpha() * floor_l * 0.999};
    double e = floor_l;
    const double top = std::max(cfg.delta0 * cfg.zoom.zoom_out(), 4.0 * floor_l);
    while (e < top) {
        edges.push_back(e);
        e *= 4.0;
    }
    edges.push_back(std::numeric_limits<double>::infinity());
    return edges;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << content;
    if (!out) throw IoError("write failed: " + path);
}

double quantile(std::vector<double> v, double p) {
    if (v.empty()) return 0.0;
    for (double& x : v)
        if (!std::isfinite(x)) x = std::numeric_limits<double>::infinity();
    std::sort(v.begin(), v.end());
    const double pos = p * static_cast<double>(v.size() - 1);
    const size_t i = static_cast<size_t>(pos);
    if (i + 1 >= v.size()) return v.back();
    const double frac = pos - static_cast<double>(i);
    if (frac == 0.0 || v[i] == v[i + 1]) return v[i];
    if (!std::isfinite(v[i + 1])) return v[i + 1];
    return v[i] * (1.0 - frac) + v[i + 1] * frac;
}

}  // namespace

RunOutputs run_closed_loop(const ExperimentConfig& cfg, bool persist,
                           std::vector<Trajectory>* keep) {
    RunOutputs out;
    out.manifest.config_hash = cfg.hash;
    out.manifest.version = kVersion;
    for (int r = 0; r < cfg.replications; ++r)
        out.manifest.seeds.push_back(derive_seed(cfg.seed, static_cast<uint64_t>(r)));

    const bool zoom = cfg.codec_type == CodecType::Zoom;
    const bool want_ams = selected(cfg, "ams");
    const bool want_escape = selected(cfg, "escape");
    const bool want_drift = zoom && selected(cfg, "drift");
    const bool want_tail = zoom && selected(cfg, "tail");
    const bool want_growth = selected(cfg, "growth") && cfg.snapshot_times.size() >= 3;

    if (persist) {
        fs::create_directories(cfg.out_dir);
        write_text_file(cfg.out_dir + "/config_canonical.json", canonical_json(cfg.raw));
    }

    // ---- per-replication reductions ----
    const int reps = cfg.replications;
    const int64_t window = std::max<int64_t>(1, cfg.horizon / 10);

    std::vector<EventBox> boxes;
    {
        const double h = cfg.ams_box_halfwidth;
        boxes.push_back({Vec(static_cast<size_t>(cfg.model.dim), -h),
                         Vec(static_cast<size_t>(cfg.model.dim), h)});
        // a strict sub-box makes the Cesaro average non-trivial
        boxes.push_back({Vec(static_cast<size_t>(cfg.model.dim), 0.0),
                         Vec(static_cast<size_t>(cfg.model.dim), h / 4.0)});
    }
    AmsAccumulator ams_acc(boxes, cfg.horizon);
    std::mutex ams_mutex;

    OccupationHistogram occ;
    occ.box = boxes[0];
    occ.dim = cfg.model.dim;
    occ.bins_per_axis = cfg.hist_bins;
    {
        int64_t cells = 1;
        while (std::pow(static_cast<double>(occ.bins_per_axis), cfg.model.dim) > (1 << 22))
            occ.bins_per_axis /= 2;
        for (int i = 0; i < cfg.model.dim; ++i) cells *= occ.bins_per_axis;
        occ.counts.assign(static_cast<size_t>(cells), 0);
    }

    std::vector<double> rep_p99(static_cast<size_t>(reps), 0.0);
    std::vector<double> rep_vhat(static_cast<size_t>(reps), 0.0);
    std::vector<uint8_t> rep_final_in_box(static_cast<size_t>(reps), 0);
    std::vector<StoppingTimeRecord> stopping(static_cast<size_t>(want_drift || want_tail ? reps : 0));
    std::atomic<bool> desync{false};

    std::vector<int64_t> escape_grid;
    if (want_escape) {
        for (int k = 1; k <= 10; ++k) escape_grid.push_back(cfg.horizon * k / 10);
        escape_grid.erase(std::unique(escape_grid.begin(), escape_grid.end()), escape_grid.end());
    }
    std::vector<std::vector<double>> escape_norms(static_cast<size_t>(reps));

    SnapshotSet snaps;
    snaps.dim = cfg.model.dim;
    snaps.times = cfg.snapshot_times;
    snaps.samples.assign(snaps.times.size(),
                         std::vector<double>(static_cast<size_t>(reps) * cfg.model.dim, 0.0));

    const Vec sigma = cfg.model.noise_sigma.empty() ? Vec(static_cast<size_t>(cfg.model.dim), 1.0)
                                                    : cfg.model.noise_sigma;
    const Vec zero_w(static_cast<size_t>(cfg.model.dim), 0.0);
    std::vector<double> rep_lj_min(static_cast<size_t>(reps), 0.0);
    std::vector<double> rep_lj_max(static_cast<size_t>(reps), 0.0);

    for_each_replication(cfg, [&](int r, Trajectory&& traj) {
        // stability window p99 of |x|_inf
        {
            std::vector<double> norms;
            norms.reserve(static_cast<size_t>(window));
            for (int64_t t = std::max<int64_t>(0, cfg.horizon - window); t <= traj.steps(); ++t)
                norms.push_back(linf_norm(traj.state_at(t)));
            rep_p99[static_cast<size_t>(r)] = quantile(std::move(norms), 0.99);
        }
        // empirical jacobian rate over the tail half, fresh inner draws if needed
        {
            NoiseStream inner(derive_seed(cfg.seed ^ 0x9e3779b9ULL, static_cast<uint64_t>(r)),
                              sigma);
            double sum = 0.0;
            double mn = std::numeric_limits<double>::infinity(), mx = -mn;
            int64_t n = 0;
            for (int64_t t = traj.steps() / 2; t <= traj.steps(); ++t) {
                const Vec xs = traj.state_at(t);
                double v;
                if (cfg.model.jacobian_depends_on_noise) {
                    v = 0.0;
                    for (int d = 0; d < 16; ++d) v += log_jacobian(cfg.model, xs, inner.gaussian_vector());
                    v /= 16.0;
                } else {
                    v = log_jacobian(cfg.model, xs, zero_w);
                }
                sum += v;
                mn = std::min(mn, v);
                mx = std::max(mx, v);
                ++n;
            }
            rep_vhat[static_cast<size_t>(r)] = sum / static_cast<double>(n);
            rep_lj_min[static_cast<size_t>(r)] = mn;
            rep_lj_max[static_cast<size_t>(r)] = mx;
        }
        rep_final_in_box[static_cast<size_t>(r)] =
            boxes[0].contains(traj.x.data() + traj.steps() * traj.dim, traj.dim) ? 1 : 0;

        if (want_escape) {
            auto& row = escape_norms[static_cast<size_t>(r)];
            for (int64_t t : escape_grid) row.push_back(linf_norm(traj.state_at(std::min(t, traj.steps()))));
        }
        for (size_t ti = 0; ti < snaps.times.size(); ++ti) {
            const int64_t t = std::min<int64_t>(snaps.times[ti], traj.steps());
            for (int i = 0; i < traj.dim; ++i)
                snaps.samples[ti][static_cast<size_t>(r) * traj.dim + i] =
                    traj.x[static_cast<size_t>(t * traj.dim + i)];
        }
        if (zoom) {
            for (size_t t = 0; t < traj.enc_grid.size(); ++t)
                if (traj.enc_grid[t] != traj.dec_grid[t]) desync = true;
            if (want_drift || want_tail) stopping[static_cast<size_t>(r)] = stopping_times(traj);
        }
        if (want_ams) {
            std::lock_guard<std::mutex> lock(ams_mutex);
            ams_acc.add(traj);
            for (int64_t t = traj.steps() / 2; t <= traj.steps(); ++t)
                occ.add(traj.x.data() + t * traj.dim);
        }
        if (persist) {
            char name[32];
            std::snprintf(name, sizeof name, "rep_%05d.csv", r);
            write_trajectory_csv(cfg.out_dir + "/" + name, traj);
        }
        if (keep) {
            std::lock_guard<std::mutex> lock(ams_mutex);
            if (keep->size() < static_cast<size_t>(reps)) keep->resize(static_cast<size_t>(reps));
            (*keep)[static_cast<size_t>(r)] = std::move(traj);
        }
    });

    // ---- stability diagnostics ----
    out.stability.window = window;
    out.stability.worst_p99_last_window = *std::max_element(rep_p99.begin(), rep_p99.end());
    out.stability.bound_used = zoom ? 1000.0 * cfg.delta0 : 1000.0 * std::max(1.0, cfg.x0_sigma);
    out.stability.bounded =
        std::isfinite(out.stability.worst_p99_last_window) &&
        out.stability.worst_p99_last_window <= out.stability.bound_used;
    out.stability.desync_detected = desync.load();
    {
        int64_t inside = 0;
        for (uint8_t v : rep_final_in_box) inside += v;
        out.stability.final_mass_in_box = static_cast<double>(inside) / reps;
    }

    // ---- bound report ----
    {
        BoundInputs in;
        double sum = 0.0, sumsq = 0.0;
        for (double v : rep_vhat) {
            sum += v;
            sumsq += v * v;
        }
        in.v_hat = sum / reps;
        if (reps > 1) {
            const double var = (sumsq - sum * sum / reps) / (reps - 1);
            in.v_hat_se = std::sqrt(std::max(var, 0.0) / reps);
        }
        const double smin = *std::min_element(rep_lj_min.begin(), rep_lj_min.end());
        const double smax = *std::max_element(rep_lj_max.begin(), rep_lj_max.end());
        in.l_inf = std::isfinite(cfg.model.l1_bits) ? cfg.model.l1_bits : smin;
        in.m_sup = std::isfinite(cfg.model.m1_bits) ? cfg.model.m1_bits : smax;
        in.capacity = capacity(cfg.channel, 1e-9).capacity;
        if (cfg.model.name == "linear") {
            std::vector<std::complex<double>> eigs;
            const Vec zx(static_cast<size_t>(cfg.model.dim), 0.0);
            const auto jac = cfg.model.jacobian(zx, zx);
            for (int i = 0; i < cfg.model.dim; ++i)
                eigs.emplace_back(jac[static_cast<size_t>(i) * cfg.model.dim + i], 0.0);
            in.linear_bound = linear_rate_bound(eigs);
            in.has_linear_bound = true;
        }
        if (cfg.model.certificate) {
            in.sufficiency = sufficiency_threshold(cfg.model);
            in.has_sufficiency = true;
        }
        if (zoom) {
            in.codec_rate_bits = cfg.zoom.rate_bits();
            in.rate_condition_ok = cfg.zoom.rate_condition_ok();
        }
        out.bounds = verdicts(in);
    }

    // ---- estimators ----
    if (want_ams) {
        out.ams = ams_acc.finalize();
        out.has_ams = true;
        out.occupation = std::move(occ);
        double worst = 0.0;
        for (size_t b = 0; b < out.ams.per_box.size(); ++b)
            worst = std::max(worst, out.ams.final_gap(b));
        out.stability.cesaro_final_gap = worst;
    }
    if (want_escape) {
        const ThresholdFamily fam = threshold_from_config(cfg);
        validate_threshold(fam, escape_grid);
        for (size_t gi = 0; gi < escape_grid.size(); ++gi) {
            EscapeRow row;
            row.t = escape_grid[gi];
            row.b = fam.b(static_cast<double>(row.t));
            int64_t inside = 0;
            for (int r = 0; r < reps; ++r)
                if (escape_norms[static_cast<size_t>(r)][gi] <= row.b) ++inside;
            row.fraction = static_cast<double>(inside) / reps;
            const double se = std::sqrt(std::max(row.fraction * (1 - row.fraction), 0.0) / reps);
            row.ci_lo = std::max(0.0, row.fraction - 1.96 * se);
            row.ci_hi = std::min(1.0, row.fraction + 1.96 * se);
            out.escape.rows.push_back(row);
        }
        out.has_escape = true;
    }
    if (want_drift || want_tail) {
        const auto edges = default_delta_bins(cfg);
        if (want_drift) {
            const double f = cfg.drift_f > 0.0 ? cfg.drift_f : 8.0 * cfg.zoom.floor_delta;
            out.drift = drift_check(stopping, f, edges);
            out.has_drift = true;
        }
        if (want_tail) {
            out.tail = tail_check(stopping, edges);
            out.has_tail = true;
        }
        out.stopping_records = std::move(stopping);
    }
    if (want_growth) {
        out.growth = entropy_growth_rate(snaps);
        out.has_growth = true;
    }

    // ---- persistence ----
    if (persist) {
        write_text_file(cfg.out_dir + "/bound_report.txt", out.bounds.to_text());
        write_text_file(cfg.out_dir + "/bound_report.json", out.bounds.to_json());
        json summary;
        summary["stability"] = {{"worst_p99_last_window", out.stability.worst_p99_last_window},
                                {"bound_used", out.stability.bound_used},
                                {"bounded", out.stability.bounded},
                                {"cesaro_final_gap", out.stability.cesaro_final_gap},
                                {"final_mass_in_box", out.stability.final_mass_in_box},
                                {"desync_detected", out.stability.desync_detected},
                                {"window", out.stability.window}};
        summary["verdicts"] = {{"ams_necessary_ok", out.bounds.ams_necessary_ok},
                               {"phr_necessary_ok", out.bounds.phr_necessary_ok},
                               {"sufficiency_ok", out.bounds.sufficiency_ok}};
        summary["capacity"] = out.bounds.capacity;
        summary["v_hat"] = out.bounds.v_hat;
        summary["v_hat_se"] = out.bounds.v_hat_se;
        summary["l_inf"] = out.bounds.l_inf;
        json est = json::object();
        if (out.has_escape) {
            const EscapeRow& last = out.escape.rows.back();
            est["escape"] = {{"final_t", last.t}, {"fraction", last.fraction},
                             {"ci_lo", last.ci_lo}, {"ci_hi", last.ci_hi}};
        }
        if (out.has_drift)
            est["drift"] = {{"b0", out.drift.b0}, {"ci_lo", out.drift.b0_ci_lo},
                            {"ci_hi", out.drift.b0_ci_hi},
                            {"epochs_above_f", out.drift.epochs_above_threshold},
                            {"underpowered", out.drift.underpowered}};
        if (out.has_tail) {
            double top_r = 0.0;
            for (const auto& bin : out.tail.bins)
                if (bin.epochs > 0) top_r = bin.r_hat;
            est["tail"] = {{"p_ge2_monotone", out.tail.p_ge2_monotone_decreasing},
                           {"top_bin_r_hat", top_r}};
        }
        if (out.has_ams) {
            json gaps = json::array();
            for (size_t b = 0; b < out.ams.per_box.size(); ++b)
                gaps.push_back(out.ams.final_gap(b));
            est["ams"] = {{"final_gaps", gaps}};
            est["occupation"] = {{"in_box_mass", out.occupation.in_box_mass()},
                                 {"out_of_box", out.occupation.out_of_box},
                                 {"total", out.occupation.total}};
        }
        if (out.has_growth)
            est["growth"] = {{"slope_bits_per_step", out.growth.slope_bits_per_step},
                             {"stderr", out.growth.slope_stderr}};
        summary["estimators"] = est;
        write_text_file(cfg.out_dir + "/summary.json", canonical_json(summary));

        out.manifest.artifacts = {"config_canonical.json", "bound_report.txt",
                                  "bound_report.json", "summary.json"};
        if (out.has_escape) {
            write_text_file(cfg.out_dir + "/escape.csv", out.escape.to_csv());
            out.manifest.artifacts.push_back("escape.csv");
        }
        if (out.has_drift) {
            write_text_file(cfg.out_dir + "/drift.csv", out.drift.to_csv());
            out.manifest.artifacts.push_back("drift.csv");
        }
        if (out.has_tail) {
            write_text_file(cfg.out_dir + "/tail.csv", out.tail.to_csv());
            out.manifest.artifacts.push_back("tail.csv");
        }
        if (out.has_ams) {
            write_text_file(cfg.out_dir + "/ams.csv", out.ams.to_csv());
            out.manifest.artifacts.push_back("ams.csv");
            std::ostringstream os;
            os << "# tail-half occupation, box half-width " << cfg.ams_box_halfwidth
               << ", bins/axis " << out.occupation.bins_per_axis << ", in_box_mass "
               << out.occupation.in_box_mass() << ", out_of_box " << out.occupation.out_of_box
               << ", total " << out.occupation.total << "\ncell,count\n";
            for (size_t c = 0; c < out.occupation.counts.size(); ++c)
                if (out.occupation.counts[c] > 0) os << c << ',' << out.occupation.counts[c] << '\n';
            write_text_file(cfg.out_dir + "/occupation.csv", os.str());
            out.manifest.artifacts.push_back("occupation.csv");
        }
        if (out.has_growth) {
            std::ostringstream os;
            os << "t,entropy_bits\n";
            for (size_t i = 0; i < snaps.times.size(); ++i)
                os << snaps.times[i] << ',' << out.growth.entropy_bits[i] << '\n';
            os << "# slope=" << out.growth.slope_bits_per_step
               << " stderr=" << out.growth.slope_stderr << '\n';
            write_text_file(cfg.out_dir + "/growth.csv", os.str());
            out.manifest.artifacts.push_back("growth.csv");
        }
        for (int r = 0; r < reps; ++r) {
            char name[32];
            std::snprintf(name, sizeof name, "rep_%05d.csv", r);
            out.manifest.artifacts.push_back(name);
        }
        write_text_file(cfg.out_dir + "/manifest.json", canonical_json(out.manifest.to_json()));
    }
    return out;
}

std::vector<SweepRow> run_sweep(const json& base_config, const std::string& axis,
                                const std::vector<double>& values, bool persist) {
    if (values.empty()) throw ConfigError("sweep needs at least one value");
    std::vector<SweepRow> rows;
    const std::string base_out =
        base_config.contains("run") && base_config.at("run").contains("out")
            ? base_config.at("run").at("out").get<std::string>()
            : "out";
    for (double v : values) {
        json j = base_config;
        if (axis == "K")
            j["codec"]["K"] = static_cast<int64_t>(std::llround(v));
        else if (axis == "epsilon")
            j["channel"]["epsilon"] = v;
        else if (axis == "gain")
            j["model"]["gain"] = v;
        else if (axis == "rate")
            j["channel"]["alphabet"] = static_cast<int64_t>(std::llround(std::exp2(v)));
        else
            throw ConfigError("unknown sweep axis: " + axis + " (use K|epsilon|gain|rate)");
        std::ostringstream dir;
        dir << base_out << "/sweep_" << axis << "_" << v;
        j["run"]["out"] = dir.str();
        ExperimentConfig cfg = config_from_json(j);
        const RunOutputs res = run_closed_loop(cfg, persist);
        SweepRow row;
        row.value = v;
        row.bounds = res.bounds;
        row.stability = res.stability;
        rows.push_back(row);
    }
    if (persist) {
        fs::create_directories(base_out);
        write_text_file(base_out + "/sweep.csv", sweep_csv(rows, axis));
    }
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& axis) {
    std::ostringstream os;
    os << axis
       << ",capacity,v_hat,l_inf,codec_rate_bits,rate_condition_ok,bounded,"
          "worst_p99,cesaro_gap,ams_necessary_ok,phr_necessary_ok,sufficiency_ok\n";
    for (const auto& r : rows)
        os << r.value << ',' << r.bounds.capacity << ',' << r.bounds.v_hat << ','
           << r.bounds.l_inf << ',' << r.bounds.codec_rate_bits << ','
           << (r.bounds.rate_condition_ok ? 1 : 0) << ',' << (r.stability.bounded ? 1 : 0) << ','
           << r.stability.worst_p99_last_window << ',' << r.stability.cesaro_final_gap << ','
           << (r.bounds.ams_necessary_ok ? 1 : 0) << ',' << (r.bounds.phr_necessary_ok ? 1 : 0)
           << ',' << (r.bounds.sufficiency_ok ? 1 : 0) << '\n';
    return os.str();
}

BodeExperiment run_bode_experiment(double gain, double sigma_w, double sigma_v, int64_t samples,
                                   int64_t burn_in, uint64_t seed) {
    if (samples < 8192) throw ConfigError("bode experiment needs at least 8192 samples");
    NoiseStream wrng(derive_seed(seed, 1), {sigma_w});
    NoiseStream vrng(derive_seed(seed, 2), {sigma_v});

    std::vector<double> y, v;
    y.reserve(static_cast<size_t>(samples));
    v.reserve(static_cast<size_t>(samples));
    double x = 0.0;
    for (int64_t t = 0; t < burn_in + samples; ++t) {
        const double vt = sigma_v * vrng.standard_gaussian();
        const double yt = x + vt;           // q' = q + v with q = x
        const double ut = -gain * yt;       // certainty-equivalent deadbeat
        if (t >= burn_in) {
            y.push_back(yt);
            v.push_back(vt);
        }
        x = gain * x + ut + sigma_w * wrng.standard_gaussian();
    }
    BodeExperiment out;
    out.result = bode_integral(y, v);
    out.eigenvalue_bound_bits = std::abs(gain) > 1.0 ? std::log2(std::abs(gain)) : 0.0;
    return out;
}

int collate_report(const std::string& out_dir, std::ostream& os) {
    const std::string manifest_path = out_dir + "/manifest.json";
    if (!fs::exists(manifest_path)) {
        os << "report error: missing artifact: " << manifest_path << "\n";
        return 3;
    }
    RunManifest manifest;
    json summary;
    try {
        std::ifstream in(manifest_path);
        manifest = RunManifest::from_json(json::parse(in));
    } catch (const std::exception& e) {
        os << "report error: corrupt manifest " << manifest_path << ": " << e.what() << "\n";
        return 3;
    }

    std::vector<std::string> missing;
    for (const auto& name : manifest.artifacts)
        if (!fs::exists(out_dir + "/" + name)) missing.push_back(name);
    if (!missing.empty()) {
        os << "report error: missing artifacts:";
        for (const auto& m : missing) os << ' ' << m;
        os << "\n";
        return 3;
    }

    // parse health checks on everything the manifest lists
    for (const auto& name : manifest.artifacts) {
        const std::string path = out_dir + "/" + name;
        try {
            if (name.size() > 5 && name.substr(name.size() - 5) == ".json") {
                std::ifstream in(path);
                const json parsed = json::parse(in);
                (void)parsed;
            } else if (name.rfind("rep_", 0) == 0) {
                read_trajectory_csv(path);
            }
        } catch (const std::exception& e) {
            os << "report error: corrupt artifact " << name << ": " << e.what() << "\n";
            return 3;
        }
    }

    try {
        std::ifstream in(out_dir + "/summary.json");
        summary = json::parse(in);
    } catch (const std::exception& e) {
        os << "report error: corrupt artifact summary.json: " << e.what() << "\n";
        return 3;
    }

    os << "run " << out_dir << " (config hash " << manifest.config_hash << ", version "
       << manifest.version << ", " << manifest.seeds.size() << " replications)\n";
    {
        std::ifstream in(out_dir + "/bound_report.txt");
        os << in.rdbuf();
    }
    const bool bounded = summary.at("stability").at("bounded").get<bool>();
    const bool ams_ok = summary.at("verdicts").at("ams_necessary_ok").get<bool>();
    const bool phr_ok = summary.at("verdicts").at("phr_necessary_ok").get<bool>();
    os << "  stability: " << (bounded ? "bounded" : "unbounded")
       << " (worst window p99 = " << summary.at("stability").at("worst_p99_last_window").get<double>()
       << ", cesaro gap = " << summary.at("stability").at("cesaro_final_gap").get<double>() << ")\n";
    os << "  C >= V_hat: " << (phr_ok ? "satisfied" : "violated") << "\n";
    os << "  C >= L_inf: " << (ams_ok ? "satisfied" : "violated") << "\n";

    if (bounded && (!ams_ok || !phr_ok)) {
        os << "verdict inconsistency: stability diagnostics claim a bounded loop while a "
              "necessary rate condition is violated\n";
        return 2;
    }
    return 0;
}

}  // namespace zoomlab
