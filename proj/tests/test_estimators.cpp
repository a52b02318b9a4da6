#include <doctest.h>

#include <cmath>

#include "zoomlab/estimators.hpp"
#include "zoomlab/rng.hpp"

using namespace zoomlab;

namespace {

double gaussian_entropy_bits(double sigma) {
    return 0.5 * std::log2(2.0 * M_PI * M_E * sigma * sigma);
}

std::vector<double> gaussian_samples(int n, double sigma, uint64_t seed) {
    NoiseStream rng(seed);
    std::vector<double> out(static_cast<size_t>(n));
    for (auto& v : out) v = sigma * rng.standard_gaussian();
    return out;
}

Trajectory synthetic_scalar_trajectory(const std::vector<double>& states,
                                       const std::vector<uint8_t>& overflow) {
    Trajectory t;
    t.dim = 1;
    t.delta0 = 1.0;
    t.grid_step = 1.0;
    t.levels = 4;
    t.x = states;
    const size_t n = states.size() - 1;
    t.u.assign(n, 0.0);
    t.q.assign(n, 1);
    t.qprime.assign(n, 1);
    t.overflow = overflow;
    t.enc_grid.assign(n + 1, 0);
    t.dec_grid.assign(n + 1, 0);
    return t;
}

}  // namespace

TEST_CASE("entropy of a gaussian matches the closed form") {
    const auto s = gaussian_samples(100000, 1.0, 101);
    const EntropyEstimate est = entropy_estimate(s, 1);
    CHECK_FALSE(est.warning);
    CHECK(std::abs(est.bits - gaussian_entropy_bits(1.0)) < 0.05);
}

TEST_CASE("entropy scales by one bit when sigma doubles") {
    const auto s1 = gaussian_samples(100000, 1.0, 102);
    const auto s2 = gaussian_samples(100000, 2.0, 103);
    const double d = entropy_estimate(s2, 1).bits - entropy_estimate(s1, 1).bits;
    CHECK(std::abs(d - 1.0) < 0.07);
}

TEST_CASE("entropy of uniform [0,1] is zero") {
    NoiseStream rng(104);
    std::vector<double> s(100000);
    for (auto& v : s) v = rng.uniform01();
    CHECK(std::abs(entropy_estimate(s, 1).bits) < 0.05);
}

TEST_CASE("entropy is invariant under translation") {
    const auto s = gaussian_samples(5000, 1.0, 105);
    std::vector<double> shifted = s;
    for (auto& v : shifted) v += 7.25;
    CHECK(std::abs(entropy_estimate(s, 1).bits - entropy_estimate(shifted, 1).bits) < 1e-12);
}

TEST_CASE("entropy shift under a linear map approaches log2|det A|") {
    NoiseStream rng(106);
    const int n = 30000;
    std::vector<double> base(static_cast<size_t>(2 * n)), mapped(static_cast<size_t>(2 * n));
    for (int i = 0; i < n; ++i) {
        const double x1 = rng.standard_gaussian(), x2 = rng.standard_gaussian();
        base[static_cast<size_t>(2 * i)] = x1;
        base[static_cast<size_t>(2 * i + 1)] = x2;
        mapped[static_cast<size_t>(2 * i)] = 2.0 * x1;
        mapped[static_cast<size_t>(2 * i + 1)] = 3.0 * x2;
    }
    const double d = entropy_estimate(mapped, 2).bits - entropy_estimate(base, 2).bits;
    CHECK(std::abs(d - std::log2(6.0)) < 0.15);
}

TEST_CASE("degenerate duplicates raise the warning") {
    std::vector<double> s(500, 1.0);  // all identical
    for (int i = 0; i < 100; ++i) s.push_back(static_cast<double>(i));
    const EntropyEstimate est = entropy_estimate(s, 1);
    CHECK(est.warning);
    CHECK(est.degenerate > 0);
}

TEST_CASE("entropy estimate input validation") {
    CHECK_THROWS_AS(entropy_estimate(std::vector<double>(50, 0.0), 1), ConfigError);
    CHECK_THROWS_AS(entropy_estimate(std::vector<double>(500, 0.0), 0), ConfigError);
    CHECK_THROWS_AS(entropy_estimate(std::vector<double>(500, 0.0), 1, 0), ConfigError);
}

TEST_CASE("growth rate of the doubling open loop is one bit per step") {
    // x_{t+1} = 2 x_t + w_t, replicated snapshots at common times
    const int reps = 3000;
    SnapshotSet snaps;
    snaps.dim = 1;
    snaps.times = {4, 8, 12, 16};
    snaps.samples.assign(4, std::vector<double>(static_cast<size_t>(reps)));
    for (int r = 0; r < reps; ++r) {
        NoiseStream rng(derive_seed(4242, static_cast<uint64_t>(r)));
        double x = rng.standard_gaussian();
        for (int64_t t = 1; t <= 16; ++t) {
            x = 2.0 * x + rng.standard_gaussian();
            for (size_t j = 0; j < snaps.times.size(); ++j)
                if (snaps.times[j] == t) snaps.samples[j][static_cast<size_t>(r)] = x;
        }
    }
    const GrowthRateFit fit = entropy_growth_rate(snaps);
    CHECK(std::abs(fit.slope_bits_per_step - 1.0) < 0.15);
}

TEST_CASE("growth rate of an iid source is zero") {
    const int reps = 2000;
    SnapshotSet snaps;
    snaps.dim = 1;
    snaps.times = {10, 20, 30, 40};
    for (size_t j = 0; j < 4; ++j)
        snaps.samples.push_back(gaussian_samples(reps, 1.0, 500 + j));
    const GrowthRateFit fit = entropy_growth_rate(snaps);
    CHECK(std::abs(fit.slope_bits_per_step) < 0.01);
}

TEST_CASE("growth rate needs three snapshot times") {
    SnapshotSet snaps;
    snaps.dim = 1;
    snaps.times = {1, 2};
    snaps.samples.assign(2, gaussian_samples(200, 1.0, 1));
    CHECK_THROWS_AS(entropy_growth_rate(snaps), ConfigError);
}

TEST_CASE("escape threshold validation") {
    const std::vector<int64_t> grid{100, 200, 400, 800};
    CHECK_NOTHROW(validate_threshold(poly_threshold(1.0), grid));
    CHECK_NOTHROW(validate_threshold(expsqrt_threshold(), grid));
    CHECK_NOTHROW(validate_threshold(constant_threshold(10.0), grid));
    CHECK_THROWS_AS(validate_threshold(explinear_threshold(0.5), grid), ConfigError);
    CHECK_THROWS_AS(validate_threshold(poly_threshold(1.0), {100}), ConfigError);
}

TEST_CASE("escape fractions for bounded and exploding paths") {
    std::vector<Trajectory> stable, exploding;
    for (int r = 0; r < 8; ++r) {
        std::vector<double> xs(101), xe(101);
        for (int t = 0; t <= 100; ++t) {
            xs[static_cast<size_t>(t)] = std::sin(0.1 * t + r);          // bounded
            xe[static_cast<size_t>(t)] = std::pow(4.0, t) * (r + 1.0);   // explodes
        }
        stable.push_back(synthetic_scalar_trajectory(xs, std::vector<uint8_t>(100, 0)));
        exploding.push_back(synthetic_scalar_trajectory(xe, std::vector<uint8_t>(100, 0)));
    }
    const std::vector<int64_t> grid{25, 50, 100};
    const EscapeTable ts = escape_probability(stable, poly_threshold(1.0), grid);
    CHECK(ts.rows.back().fraction == 1.0);
    const EscapeTable te = escape_probability(exploding, poly_threshold(1.0), grid);
    CHECK(te.rows.back().fraction == 0.0);
    CHECK_THROWS_AS(escape_probability({}, poly_threshold(1.0), grid), ConfigError);
}

TEST_CASE("stopping times on synthetic codec logs") {
    // always in range: T_z = z
    {
        std::vector<double> xs(1001, 0.0);
        const Trajectory t = synthetic_scalar_trajectory(xs, std::vector<uint8_t>(1000, 0));
        const StoppingTimeRecord rec = stopping_times(t);
        CHECK(rec.epochs() == 1000);
        for (int32_t g : rec.gap) CHECK(g == 1);
        const auto times = rec.times();
        CHECK(times[0] == 0);
        CHECK(times[999] == 999);
    }
    // overflow at steps 3 and 4: the gap across them is 3
    {
        std::vector<double> xs(11, 0.0);
        std::vector<uint8_t> of(10, 0);
        of[3] = of[4] = 1;
        const StoppingTimeRecord rec = stopping_times(synthetic_scalar_trajectory(xs, of));
        const auto times = rec.times();
        // epochs at 0,1,2,5,6,...
        CHECK(times[2] == 2);
        CHECK(times[3] == 5);
        CHECK(rec.gap[2] == 3);
    }
}

TEST_CASE("drift of the deterministic in-range toy is exactly 2 log2 alpha") {
    // gap always 1 and delta above the floor: every epoch multiplies by alpha
    StoppingTimeRecord rec;
    rec.delta0 = std::exp2(300.0);  // keeps every epoch far above the floor
    rec.grid_step = 1.0;
    const int n = 200;
    for (int z = 0; z < n; ++z) {
        rec.grid_exp.push_back(static_cast<int32_t>(-z));  // one zoom-in notch per epoch
        if (z + 1 < n) rec.gap.push_back(1);
    }
    // stay above the floor for every epoch in the record: delta = 2^300 * 2^-z
    const DriftTable table = drift_check({rec}, 1e-9, {1e-9, 1e300});
    CHECK(table.bins[0].count == n - 1);
    const double expected = 2.0 * std::log2(0.5);  // alpha = 2^-1
    CHECK(table.bins[0].mean_drift == doctest::Approx(expected).epsilon(1e-12));
    CHECK(table.b0 == doctest::Approx(-expected).epsilon(1e-12));
    CHECK(table.b0_ci_lo > 0.0);
    CHECK_FALSE(table.underpowered);
}

TEST_CASE("drift flags underpowered inputs") {
    StoppingTimeRecord rec;
    rec.delta0 = 4.0;
    rec.grid_step = 1.0;
    rec.grid_exp = {0, -1, -2};
    rec.gap = {1, 1};
    const DriftTable table = drift_check({rec}, 1.0, {0.5, 100.0});
    CHECK(table.underpowered);
}

TEST_CASE("tail table recovers a geometric gap law") {
    // synthetic record: gaps drawn geometric(r = 2) at delta = 8, all gaps 1 at delta = 64
    StoppingTimeRecord rec;
    rec.delta0 = 1.0;
    rec.grid_step = 1.0;
    NoiseStream rng(2718);
    auto push = [&](int32_t g, int32_t gap) {
        rec.grid_exp.push_back(g);
        rec.gap.push_back(gap);
    };
    for (int i = 0; i < 20000; ++i) {
        int gap = 1;
        while (rng.uniform01() < 0.5 && gap < 30) ++gap;  // P(gap >= k) = 2^{1-k}
        push(3, gap);
    }
    for (int i = 0; i < 5000; ++i) push(6, 1);
    rec.grid_exp.push_back(3);  // terminal epoch

    const TailTable table = tail_check({rec}, {4.0, 32.0, 1e9});
    REQUIRE(table.bins.size() == 2);
    CHECK(table.bins[0].epochs == 20000);
    CHECK(table.bins[0].decreasing);
    CHECK(table.bins[0].r_hat == doctest::Approx(2.0).epsilon(0.1));
    CHECK(table.bins[0].p_ge2 == doctest::Approx(0.5).epsilon(0.05));
    CHECK(table.bins[1].p_ge2 == 0.0);
    CHECK(std::isinf(table.bins[1].r_hat));
    CHECK(table.p_ge2_monotone_decreasing);
}

TEST_CASE("cesaro averages of an iid process match the box probability") {
    // iid standard gaussian states; box [-1, 1] has probability 0.6827
    std::vector<Trajectory> trajs;
    for (int r = 0; r < 64; ++r) {
        NoiseStream rng(derive_seed(31337, static_cast<uint64_t>(r)));
        std::vector<double> xs(513);
        for (auto& v : xs) v = rng.standard_gaussian();
        trajs.push_back(synthetic_scalar_trajectory(xs, std::vector<uint8_t>(512, 0)));
    }
    const EventBox box{{-1.0}, {1.0}};
    const AmsTable table = ams_cesaro_check(trajs, {box});
    const AmsRow& last = table.per_box[0].back();
    CHECK(std::abs(last.cesaro_average - 0.6827) < 0.02);
    CHECK(last.gap_to_half_n < 0.02);
}

TEST_CASE("occupation histogram accounts for every sample") {
    std::vector<Trajectory> trajs;
    NoiseStream rng(8);
    std::vector<double> xs(101);
    for (auto& v : xs) v = 3.0 * rng.standard_gaussian();
    trajs.push_back(synthetic_scalar_trajectory(xs, std::vector<uint8_t>(100, 0)));
    const OccupationHistogram h =
        occupation_histogram(trajs, {{-2.0}, {2.0}}, 16, 0, 100);
    int64_t inside = 0;
    for (int64_t c : h.counts) inside += c;
    CHECK(inside + h.out_of_box == h.total);
    CHECK(h.total == 101);
    CHECK(h.in_box_mass() == doctest::Approx(static_cast<double>(inside) / 101.0));
}

TEST_CASE("transience probe hypothesis validation") {
    const SystemModel contracting = linear_model({0.5});
    const FiniteMemoryCoder coder =
        fixed_quantizer_coder(4, 1.0, [](double xhat) { return -0.5 * xhat; });
    // slope check rejects a contracting plant
    CHECK_THROWS_AS(
        transience_probe(contracting, coder, {4.0}, 100, 50, 1.0, 1, 10.0),
        ConfigError);
    // with the check disabled the sanity inversion returns almost surely
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const TransienceTable table =
        transience_probe(contracting, coder, {4.0}, 200, 200, 1.0, 1, nan);
    CHECK(table.rows[0].returned_fraction > 0.99);
    CHECK(table.rows[0].bracket_lo <= table.rows[0].bracket_hi);
}

TEST_CASE("bode integral of identical records is zero") {
    NoiseStream rng(9);
    std::vector<double> v(1 << 15);
    for (auto& x : v) x = rng.standard_gaussian();
    const BodeResult res = bode_integral(v, v);
    CHECK(res.integral_bits == 0.0);
    CHECK_FALSE(res.nonstationarity_warning);
}

TEST_CASE("bode integral of a constant spectral ratio") {
    NoiseStream rng(10);
    const int n = 1 << 17;
    std::vector<double> y(static_cast<size_t>(n)), v(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        v[static_cast<size_t>(i)] = rng.standard_gaussian();
        y[static_cast<size_t>(i)] = 2.0 * rng.standard_gaussian();  // var 4x
    }
    const BodeResult res = bode_integral(y, v);
    CHECK(std::abs(res.integral_bits - 1.0) < 0.1);
}

TEST_CASE("bode flags drifting records") {
    std::vector<double> y(1 << 14), v(1 << 14);
    NoiseStream rng(11);
    for (size_t i = 0; i < y.size(); ++i) {
        y[i] = 1e-4 * static_cast<double>(i) + 0.01 * rng.standard_gaussian();
        v[i] = rng.standard_gaussian();
    }
    CHECK(bode_integral(y, v).nonstationarity_warning);
}
