#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "zoomlab/harness.hpp"
#include "zoomlab/version.hpp"

using namespace zoomlab;
namespace fs = std::filesystem;

namespace {

json benchmark_config(int64_t horizon, int reps, uint64_t seed) {
    json j;
    j["model"] = {{"name", "benchmark"}, {"dimension", 1}, {"gain", 1.2},
                  {"noise_sigma", 1.0}};
    j["codec"] = {{"type", "zoom"}, {"K", 4}, {"s", 1.0}, {"n_in", 1}, {"n_out", 1},
                  {"floor", 1.0}, {"delta0", 8.0}};
    j["channel"] = {{"kind", "noiseless"}};
    j["run"] = {{"horizon", horizon}, {"replications", reps}, {"seed", seed}, {"workers", 2}};
    return j;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("config text parses into nested tables") {
    const std::string text = R"(
# experiment
[model]
name = "benchmark"   # catalog entry
gain = 1.2
dimension = 2

[model.x0]
sigma = 0.5

[codec]
type = "zoom"
K = 8

[run]
horizon = 100
snapshots = [5, 10, 15]
)";
    const json j = parse_config_text(text);
    CHECK(j["model"]["name"] == "benchmark");
    CHECK(j["model"]["gain"] == 1.2);
    CHECK(j["model"]["x0"]["sigma"] == 0.5);
    CHECK(j["run"]["snapshots"].size() == 3);
    CHECK(j["run"]["snapshots"][1] == 10);

    CHECK_THROWS_AS(parse_config_text("[broken\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("key value\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("k = [1, 2\n"), ConfigError);
}

TEST_CASE("reordered configs hash identically") {
    const json a = parse_config_text("[model]\nname = \"linear\"\ngain = 2.0\n[run]\nseed = 5\n");
    const json b = parse_config_text("[run]\nseed = 5\n[model]\ngain = 2.0\nname = \"linear\"\n");
    CHECK(config_hash(a) == config_hash(b));
    CHECK(canonical_json(a) == canonical_json(b));
    const json c = parse_config_text("[model]\nname = \"linear\"\ngain = 2.5\n[run]\nseed = 5\n");
    CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("rate and alphabet mismatches fail before simulation") {
    json j = benchmark_config(10, 1, 1);
    j["channel"]["alphabet"] = 3;  // zoom K=4 needs 5 symbols
    CHECK_THROWS_AS(config_from_json(j), ConfigError);

    json j2 = benchmark_config(10, 1, 1);
    j2["codec"]["K"] = 3;  // odd
    CHECK_THROWS_AS(config_from_json(j2), ConfigError);
}

TEST_CASE("identical seeds give identical trajectories") {
    const ExperimentConfig cfg = config_from_json(benchmark_config(500, 2, 77));
    const Trajectory a = simulate_replication(cfg, 0);
    const Trajectory b = simulate_replication(cfg, 0);
    CHECK(a.x == b.x);
    CHECK(a.q == b.q);
    CHECK(a.dec_grid == b.dec_grid);
    // different replication index, different stream
    const Trajectory c = simulate_replication(cfg, 1);
    CHECK(a.x != c.x);
}

TEST_CASE("results are independent of the worker count") {
    json j = benchmark_config(2000, 6, 31);
    j["run"]["workers"] = 1;
    std::vector<Trajectory> keep1, keep4;
    const RunOutputs o1 = run_closed_loop(config_from_json(j), false, &keep1);
    j["run"]["workers"] = 4;
    const RunOutputs o4 = run_closed_loop(config_from_json(j), false, &keep4);
    REQUIRE(keep1.size() == keep4.size());
    for (size_t r = 0; r < keep1.size(); ++r) {
        CHECK(keep1[r].x == keep4[r].x);
        CHECK(keep1[r].dec_grid == keep4[r].dec_grid);
    }
    CHECK(o1.bounds.v_hat == o4.bounds.v_hat);
    CHECK(o1.stability.worst_p99_last_window == o4.stability.worst_p99_last_window);
    CHECK(o1.stability.cesaro_final_gap == o4.stability.cesaro_final_gap);
}

TEST_CASE("byte-identical artifacts across runs") {
    TempDir d1("zoomlab_rep_a"), d2("zoomlab_rep_b");
    json j = benchmark_config(300, 2, 99);
    j["run"]["out"] = d1.path.string();
    run_closed_loop(config_from_json(j), true);
    j["run"]["out"] = d2.path.string();
    run_closed_loop(config_from_json(j), true);
    for (const char* name : {"rep_00000.csv", "rep_00001.csv", "bound_report.json", "ams.csv"})
        CHECK(slurp((d1.path / name).string()) == slurp((d2.path / name).string()));
    // manifest differs only in... nothing: out dir is not part of the manifest
    CHECK(slurp((d1.path / "manifest.json").string()) ==
          slurp((d2.path / "manifest.json").string()));
}

TEST_CASE("noiseless loop keeps encoder and decoder aligned") {
    std::vector<Trajectory> keep;
    run_closed_loop(config_from_json(benchmark_config(10, 1, 5)), false, &keep);
    REQUIRE(keep.size() == 1);
    CHECK(keep[0].enc_grid == keep[0].dec_grid);
}

TEST_CASE("erasure loop with feedback stays synchronized") {
    json j = benchmark_config(20000, 1, 6);
    j["channel"] = {{"kind", "erasure"}, {"epsilon", 0.2}};
    std::vector<Trajectory> keep;
    const RunOutputs out = run_closed_loop(config_from_json(j), false, &keep);
    CHECK_FALSE(out.stability.desync_detected);
    CHECK(keep[0].enc_grid == keep[0].dec_grid);
    // erasures did happen
    int64_t erased = 0;
    for (size_t t = 0; t < keep[0].qprime.size(); ++t)
        if (keep[0].qprime[t] == 6) ++erased;  // K+1 inputs, erasure output = 6
    CHECK(erased > 3000);
}

TEST_CASE("open loop doubles the state each step") {
    json j;
    j["model"] = {{"name", "linear"}, {"dimension", 1}, {"gain", 2.0}, {"noise_sigma", 1.0}};
    j["codec"] = {{"type", "none"}};
    j["channel"] = {{"kind", "noiseless"}, {"alphabet", 2}};
    j["run"] = {{"horizon", 30}, {"replications", 51}, {"seed", 13}, {"workers", 2}};
    std::vector<Trajectory> keep;
    run_closed_loop(config_from_json(j), false, &keep);
    std::vector<double> finals;
    for (const auto& t : keep) finals.push_back(std::abs(t.x[static_cast<size_t>(t.steps())]));
    std::sort(finals.begin(), finals.end());
    const double median = finals[finals.size() / 2];
    const double rate = std::log2(median) / 30.0;
    CHECK(rate > 0.8);
    CHECK(rate < 1.1);
}

TEST_CASE("trajectory csv round trip") {
    TempDir dir("zoomlab_traj");
    const ExperimentConfig cfg = config_from_json(benchmark_config(50, 1, 21));
    const Trajectory t = simulate_replication(cfg, 0);
    const std::string path = (dir.path / "t.csv").string();
    write_trajectory_csv(path, t);
    const Trajectory r = read_trajectory_csv(path);
    CHECK(r.dim == t.dim);
    CHECK(r.seed == t.seed);
    CHECK(r.config_hash == t.config_hash);
    REQUIRE(r.x.size() == t.x.size());
    for (size_t i = 0; i < t.x.size(); ++i) CHECK(r.x[i] == t.x[i]);
    CHECK(r.q == t.q);
    CHECK(r.dec_grid == t.dec_grid);
    CHECK(r.overflow == t.overflow);
}

TEST_CASE("sweep over K flips the stability verdict at the rate condition") {
    // linear gain 1.8, alpha = 0.5: the zoom-in overshoot race is lost for
    // 2^R' below |a|/alpha = 3.6 and won above it
    json j = benchmark_config(4000, 4, 50);
    j["model"] = {{"name", "linear"}, {"dimension", 1}, {"gain", 1.8}, {"noise_sigma", 1.0}};
    j["codec"]["delta0"] = 8.0;
    const auto rows = run_sweep(j, "K", {2.0, 4.0, 8.0}, false);
    REQUIRE(rows.size() == 3);
    CHECK_FALSE(rows[0].bounds.rate_condition_ok);
    CHECK(rows[1].bounds.rate_condition_ok);
    CHECK(rows[2].bounds.rate_condition_ok);
    CHECK_FALSE(rows[0].stability.bounded);
    CHECK(rows[1].stability.bounded);
    CHECK(rows[2].stability.bounded);
    // noiseless channel sized to K^N + 1
    CHECK(rows[0].bounds.capacity == doctest::Approx(std::log2(3.0)));
    CHECK(rows[2].bounds.capacity == doctest::Approx(std::log2(9.0)));
    CHECK(rows[0].bounds.sufficiency_threshold == doctest::Approx(std::log2(1.8) + 1.0));
}

TEST_CASE("erasure sweep capacity follows the closed form") {
    json j = benchmark_config(200, 2, 51);
    j["channel"] = {{"kind", "erasure"}, {"epsilon", 0.0}};
    const auto rows = run_sweep(j, "epsilon", {0.1, 0.5}, false);
    const double m = std::log2(5.0);  // K + 1 = 5 input symbols
    CHECK(rows[0].bounds.capacity == doctest::Approx(0.9 * m).epsilon(1e-6));
    CHECK(rows[1].bounds.capacity == doctest::Approx(0.5 * m).epsilon(1e-6));
    CHECK_THROWS_AS(run_sweep(j, "epsilon", {}, false), ConfigError);
    CHECK_THROWS_AS(run_sweep(j, "frequency", {1.0}, false), ConfigError);
}

TEST_CASE("single-value sweep equals a direct run") {
    json j = benchmark_config(800, 3, 52);
    const auto rows = run_sweep(j, "K", {4.0}, false);
    const RunOutputs direct = run_closed_loop(config_from_json(j), false);
    CHECK(rows[0].bounds.v_hat == direct.bounds.v_hat);
    CHECK(rows[0].bounds.capacity == direct.bounds.capacity);
    CHECK(rows[0].stability.worst_p99_last_window == direct.stability.worst_p99_last_window);
}

TEST_CASE("report collates a finished run and flags corruption") {
    TempDir dir("zoomlab_report");
    json j = benchmark_config(200, 2, 53);
    j["run"]["out"] = dir.path.string();
    run_closed_loop(config_from_json(j), true);

    std::ostringstream os;
    CHECK(collate_report(dir.path.string(), os) == 0);
    CHECK(os.str().find("C >= V_hat") != std::string::npos);

    // corrupt one trajectory file: nonzero exit naming it
    {
        std::ofstream out(dir.path / "rep_00001.csv", std::ios::trunc);
        out << "garbage\n";
    }
    std::ostringstream os2;
    CHECK(collate_report(dir.path.string(), os2) == 3);
    CHECK(os2.str().find("rep_00001.csv") != std::string::npos);

    // remove it entirely: report lists the absence
    fs::remove(dir.path / "rep_00001.csv");
    std::ostringstream os3;
    CHECK(collate_report(dir.path.string(), os3) == 3);
    CHECK(os3.str().find("rep_00001.csv") != std::string::npos);

    std::ostringstream os4;
    CHECK(collate_report((dir.path / "nonexistent").string(), os4) == 3);
}

TEST_CASE("report exits 2 on verdict inconsistency") {
    TempDir dir("zoomlab_inconsistent");
    // hand-crafted artifacts: stability claims bounded while C < L_inf
    RunManifest m;
    m.config_hash = 1;
    m.version = kVersion;
    m.artifacts = {"summary.json", "bound_report.txt"};
    std::ofstream(dir.path / "manifest.json") << canonical_json(m.to_json());
    json summary;
    summary["stability"] = {{"worst_p99_last_window", 1.0}, {"bound_used", 10.0},
                            {"bounded", true}, {"cesaro_final_gap", 0.001},
                            {"final_mass_in_box", 1.0}, {"desync_detected", false},
                            {"window", 10}};
    summary["verdicts"] = {{"ams_necessary_ok", false}, {"phr_necessary_ok", true},
                           {"sufficiency_ok", false}};
    summary["capacity"] = 1.0;
    summary["v_hat"] = 0.5;
    summary["l_inf"] = 2.0;
    std::ofstream(dir.path / "summary.json") << canonical_json(summary);
    std::ofstream(dir.path / "bound_report.txt") << "bound report\n";

    std::ostringstream os;
    CHECK(collate_report(dir.path.string(), os) == 2);
    CHECK(os.str().find("inconsistency") != std::string::npos);
}

TEST_CASE("bode experiment clears the eigenvalue bound") {
    const BodeExperiment ex = run_bode_experiment(2.0, 1.0, 1.0, int64_t{1} << 17, 4096, 7);
    CHECK(ex.eigenvalue_bound_bits == doctest::Approx(1.0));
    CHECK(ex.result.integral_bits >= 1.0 - 0.15);
    CHECK(ex.result.integral_bits < 1.6);
    CHECK_FALSE(ex.result.nonstationarity_warning);
}

TEST_CASE("snapshot growth estimate through the harness") {
    json j;
    j["model"] = {{"name", "linear"}, {"dimension", 1}, {"gain", 2.0}, {"noise_sigma", 1.0}};
    j["codec"] = {{"type", "none"}};
    j["channel"] = {{"kind", "noiseless"}, {"alphabet", 2}};
    j["run"] = {{"horizon", 16}, {"replications", 400}, {"seed", 60}, {"workers", 2},
                {"snapshots", json::array({4, 8, 12, 16})}};
    j["estimators"] = {{"select", json::array({"bounds", "growth"})}};
    const RunOutputs out = run_closed_loop(config_from_json(j), false);
    REQUIRE(out.has_growth);
    CHECK(std::abs(out.growth.slope_bits_per_step - 1.0) < 0.3);
}

TEST_CASE("drift is negative in every populated bin above the threshold") {
    json j = benchmark_config(5000, 50, 70);
    j["codec"]["K"] = 8;
    j["codec"]["delta0"] = 32.0;
    j["estimators"] = {{"select", json::array({"bounds", "drift"})}, {"drift_f", 2.0}};
    const RunOutputs out = run_closed_loop(config_from_json(j), false);
    REQUIRE(out.has_drift);
    CHECK(out.drift.b0 > 0.0);
    CHECK(out.drift.b0_ci_lo > 0.0);
    for (const auto& bin : out.drift.bins) {
        if (bin.delta_lo < 2.0 || bin.count < 50) continue;
        CHECK(bin.mean_drift < 0.0);
        CHECK(bin.ci_hi < 0.0);
    }
}

TEST_CASE("stopping times replay their defining property") {
    std::vector<Trajectory> keep;
    json j = benchmark_config(3000, 1, 71);
    run_closed_loop(config_from_json(j), false, &keep);
    const StoppingTimeRecord rec = stopping_times(keep[0]);
    const auto times = rec.times();
    REQUIRE(times.size() >= 10);
    size_t z = 1;
    for (int64_t t = 1; t < keep[0].steps(); ++t) {
        const bool is_epoch = z < times.size() && times[z] == t;
        if (is_epoch) {
            CHECK(keep[0].h_max_at(t) <= 1.0);
            CHECK(rec.delta(z) == doctest::Approx(keep[0].delta_at(t)));
            ++z;
        } else {
            CHECK(keep[0].h_max_at(t) > 1.0);
        }
    }
    CHECK(z == times.size());
}

TEST_CASE("v_hat standard error shrinks like one over sqrt replications") {
    // the sample SE is itself noisy, so average it over independent runs
    double se_small = 0.0, se_big = 0.0;
    for (uint64_t g = 0; g < 4; ++g) {
        json j = benchmark_config(3000, 24, 720 + g);
        se_small += run_closed_loop(config_from_json(j), false).bounds.v_hat_se / 4.0;
        json jb = benchmark_config(3000, 96, 730 + g);
        se_big += run_closed_loop(config_from_json(jb), false).bounds.v_hat_se / 4.0;
    }
    REQUIRE(se_big > 0.0);
    const double ratio = se_small / se_big;
    // quadrupling replications should halve the standard error, within 1.5x
    CHECK(ratio > 2.0 / 1.5);
    CHECK(ratio < 2.0 * 1.5);
}

TEST_CASE("explicit kernel matrix channels load from csv") {
    TempDir dir("zoomlab_kernel");
    {
        std::ofstream k(dir.path / "kernel.csv");
        k << "# binary symmetric, p = 0.1\n";
        k << "0.9, 0.1\n0.1, 0.9\n";
    }
    json j;
    j["model"] = {{"name", "linear"}, {"dimension", 1}, {"gain", 0.5}, {"noise_sigma", 1.0}};
    j["codec"] = {{"type", "none"}};
    j["channel"] = {{"kind", "general"}, {"kernel_csv", (dir.path / "kernel.csv").string()}};
    j["run"] = {{"horizon", 10}, {"replications", 1}, {"seed", 5}};
    const ExperimentConfig cfg = config_from_json(j);
    CHECK(cfg.channel.inputs == 2);
    CHECK(cfg.channel.outputs == 2);
    const double c = capacity(cfg.channel, 1e-9).capacity;
    CHECK(std::abs(c - bsc_capacity_closed_form(0.1)) < 1e-6);

    json bad = j;
    bad["channel"].erase("kernel_csv");
    CHECK_THROWS_AS(config_from_json(bad), ConfigError);
}

TEST_CASE("codec interface accepts the alpha_exp/zoomout_exp/L spellings") {
    json j = benchmark_config(100, 1, 90);
    j["codec"].erase("n_in");
    j["codec"].erase("n_out");
    j["codec"].erase("floor");
    j["codec"]["alpha_exp"] = 1;
    j["codec"]["zoomout_exp"] = 1;
    j["codec"]["L"] = 1.0;
    const ExperimentConfig cfg = config_from_json(j);
    CHECK(cfg.zoom.zoom_in_exp == 1);
    CHECK(cfg.zoom.zoom_out_exp == 1);
    CHECK(cfg.zoom.floor_delta == 1.0);
}

TEST_CASE("occupation artifact tracks out-of-box mass") {
    TempDir dir("zoomlab_occ");
    json j = benchmark_config(2000, 3, 91);
    j["run"]["out"] = dir.path.string();
    j["estimators"] = {{"select", json::array({"bounds", "ams"})}, {"ams_box", 4.0}};
    const RunOutputs out = run_closed_loop(config_from_json(j), true);
    CHECK(out.occupation.total > 0);
    int64_t inside = 0;
    for (int64_t c : out.occupation.counts) inside += c;
    CHECK(inside + out.occupation.out_of_box == out.occupation.total);
    CHECK(fs::exists(dir.path / "occupation.csv"));
    std::ostringstream os;
    CHECK(collate_report(dir.path.string(), os) == 0);
}
