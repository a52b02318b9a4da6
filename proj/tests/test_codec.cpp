#include <doctest.h>

#include <cmath>

#include "zoomlab/codec.hpp"
#include "zoomlab/rng.hpp"

using namespace zoomlab;

namespace {

// Direct interval scan of the quantizer definition; independent of the
// closed-form arithmetic in uniform_quantize.
double quantizer_oracle(double x, int levels, double delta) {
    for (int k = 1; k <= levels; ++k) {
        const double lo = (k - 1 - 0.5 * levels) * delta;
        const double hi = (k - 0.5 * levels) * delta;
        if (x >= lo && x < hi) return (k - 0.5 * (levels + 1)) * delta;
    }
    if (x == 0.5 * levels * delta) return 0.5 * (levels - 1) * delta;
    return 0.0;
}

ZoomParams bench_params(int dim, int levels = 4) {
    ZoomParams p;
    p.levels = levels;
    p.dim = dim;
    p.grid_step = 1.0;
    p.zoom_in_exp = 1;
    p.zoom_out_exp = 1;
    p.floor_delta = 1.0;
    p.contraction_a = 1.8;
    p.validate();
    return p;
}

}  // namespace

TEST_CASE("uniform quantizer worked examples") {
    CHECK(uniform_quantize(0.3, 4, 1.0) == 0.5);
    CHECK(uniform_quantize(2.0, 4, 1.0) == 1.5);   // x = K delta / 2 boundary
    CHECK(uniform_quantize(5.0, 4, 1.0) == 0.0);   // overflow
    CHECK(uniform_quantize(-2.0, 4, 1.0) == -1.5); // bin 1 closed on the left
}

TEST_CASE("uniform quantizer matches the interval-scan oracle") {
    for (int levels : {2, 4, 8}) {
        for (double delta : {0.5, 1.0, 2.0}) {
            const double span = (0.5 * levels + 1.0) * delta;
            for (int i = 0; i <= 2000; ++i) {
                const double x = -span + 2.0 * span * i / 2000.0;
                CHECK(uniform_quantize(x, levels, delta) == quantizer_oracle(x, levels, delta));
            }
            for (int k = 1; k <= levels + 1; ++k) {
                const double edge = (k - 1 - 0.5 * levels) * delta;
                CHECK(uniform_quantize(edge, levels, delta) ==
                      quantizer_oracle(edge, levels, delta));
            }
        }
    }
}

TEST_CASE("vector quantizer indexing and overflow") {
    const ZoomParams p = bench_params(2);
    CodecState st = make_codec_state(p, 1.0, CodecState::Side::Encoder);

    const QuantizeResult a = vector_quantize({0.3, -2.0}, p, st);
    CHECK_FALSE(a.overflow);
    CHECK(a.xhat[0] == 0.5);
    CHECK(a.xhat[1] == -1.5);
    CHECK(a.symbol >= 1);
    CHECK(a.symbol <= 16);

    const QuantizeResult b = vector_quantize({5.0, 0.3}, p, st);
    CHECK(b.overflow);
    CHECK(b.symbol == 17);  // K^2 + 1
    CHECK(b.xhat[0] == 0.0);
    CHECK(b.xhat[1] == 0.0);

    // mid-rise: no zero level in range
    const QuantizeResult c = vector_quantize({0.0, 0.0}, p, st);
    CHECK_FALSE(c.overflow);
    CHECK(std::abs(c.xhat[0]) == 0.5);
    CHECK(std::abs(c.xhat[1]) == 0.5);
}

TEST_CASE("bar-Q rows") {
    const ZoomParams p = bench_params(1);
    CHECK(zoom_factor(1.2, 5.0, p) == p.zoom_out());
    CHECK(zoom_factor(0.7, 2.0 * p.floor_delta, p) == p.alpha());
    CHECK(zoom_factor(0.7, 0.5 * p.floor_delta, p) == 1.0);
    CHECK_THROWS_AS(zoom_factor(0.5, 0.0, p), ConfigError);
}

TEST_CASE("zoom parameter validation") {
    ZoomParams p = bench_params(2);
    p.levels = 3;
    CHECK_THROWS_AS(p.validate(), ConfigError);  // odd K collides with overflow flag
    p.levels = 1;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = bench_params(2);
    p.zoom_in_exp = 2;
    p.zoom_out_exp = 4;
    CHECK_THROWS_AS(p.validate(), ConfigError);  // gcd 2
    p = bench_params(2);
    p.contraction_a = 2.5;
    CHECK_THROWS_AS(p.validate(), ConfigError);  // zoom-out factor below |a|

    const ZoomParams ok = bench_params(2, 8);
    CHECK(ok.symbol_count() == 65);
    CHECK(ok.rate_bits() == doctest::Approx(std::log2(65.0)));
    CHECK(ok.rate_condition_ok());  // 8 > 1.8 / 0.5
    const ZoomParams tight = bench_params(2, 2);
    CHECK_FALSE(tight.rate_condition_ok());  // 2 < 3.6
}

TEST_CASE("zoom grid updates stay on the integer ladder") {
    const ZoomParams p = bench_params(1);
    CodecState st = make_codec_state(p, 8.0, CodecState::Side::Encoder);
    const int64_t g0 = st.grid_exp;

    sync_update(st, p, false);  // in range above floor: one zoom-in notch
    CHECK(st.grid_exp == g0 - p.zoom_in_exp);
    CHECK(st.delta() == doctest::Approx(8.0 * p.alpha()));

    sync_update(st, p, true);  // overflow: one zoom-out notch
    CHECK(st.grid_exp == g0 - p.zoom_in_exp + p.zoom_out_exp);

    // at or below the floor the bin size holds
    while (!st.at_or_below_floor()) sync_update(st, p, false);
    const int64_t g_floor = st.grid_exp;
    sync_update(st, p, false);
    CHECK(st.grid_exp == g_floor);
    CHECK(st.delta() >= p.alpha() * p.floor_delta * (1.0 - 1e-12));
}

TEST_CASE("encoder and decoder stay synchronized over a noiseless channel") {
    const SystemModel model = benchmark_model(1, 1.2);
    const ZoomParams p = bench_params(1);
    CodecState enc = make_codec_state(p, 4.0, CodecState::Side::Encoder);
    CodecState dec = make_codec_state(p, 4.0, CodecState::Side::Decoder);

    NoiseStream rng(31, {1.0});
    Vec x{0.7};
    for (int t = 0; t < 100; ++t) {
        const double delta_t = enc.delta();
        const EncoderOutput eo = encoder_step(x, enc, p);
        const DecoderOutput dout = decoder_step(eo.symbol, false, dec, p, model);
        CHECK(enc.grid_exp == dec.grid_exp);
        CHECK(enc.time == dec.time);
        if (!eo.overflow) {
            CHECK(dout.xhat[0] == eo.xhat[0]);
            CHECK(std::abs(x[0] - dout.xhat[0]) <= 0.5 * delta_t + 1e-12);
        }
        x = step(model, x, dout.u, rng.gaussian_vector());
    }
}

TEST_CASE("erasures zoom out on both sides") {
    const SystemModel model = benchmark_model(1, 1.2);
    const ZoomParams p = bench_params(1);
    CodecState dec = make_codec_state(p, 4.0, CodecState::Side::Decoder);
    const int64_t g0 = dec.grid_exp;
    const DecoderOutput out = decoder_step(0, true, dec, p, model);
    CHECK(out.overflow);
    CHECK(out.xhat[0] == 0.0);
    CHECK(out.u[0] == 0.0);  // kappa(0) = 0
    CHECK(dec.grid_exp == g0 + p.zoom_out_exp);
}

TEST_CASE("decoder rejects symbols outside the codebook") {
    const SystemModel model = benchmark_model(1, 1.2);
    const ZoomParams p = bench_params(1);
    CodecState dec = make_codec_state(p, 4.0, CodecState::Side::Decoder);
    CHECK_THROWS_AS(decoder_step(99, false, dec, p, model), ProtocolError);
    CHECK_THROWS_AS(decoder_step(0, false, dec, p, model), ProtocolError);
}

TEST_CASE("long zoom run: floor, grid membership, reconstruction error") {
    const SystemModel model = benchmark_model(1, 1.2);
    const ZoomParams p = bench_params(1);
    const double delta0 = 16.0;
    CodecState enc = make_codec_state(p, delta0, CodecState::Side::Encoder);
    CodecState dec = make_codec_state(p, delta0, CodecState::Side::Decoder);
    NoiseStream rng(777, {1.0});

    Vec x{0.3};
    int64_t min_g = enc.grid_exp;
    for (int t = 0; t < 100000; ++t) {
        const double delta_before = enc.delta();
        const EncoderOutput eo = encoder_step(x, enc, p);
        const DecoderOutput dout = decoder_step(eo.symbol, false, dec, p, model);
        CHECK(eo.symbol >= 1);
        CHECK(eo.symbol <= p.symbol_count());
        if (!eo.overflow) {
            // in-range reconstruction error is at most half a bin
            if (std::abs(x[0] - eo.xhat[0]) > 0.5 * delta_before + 1e-12) {
                CHECK(std::abs(x[0] - eo.xhat[0]) <= 0.5 * delta_before + 1e-12);
            }
        }
        min_g = std::min(min_g, enc.grid_exp);
        x = step(model, x, dout.u, rng.gaussian_vector());
    }
    CHECK(enc.grid_exp == dec.grid_exp);
    // floor: delta >= alpha L, exactly one zoom-in notch below the floor exponent
    CHECK(min_g >= enc.floor_exp + 1 - p.zoom_in_exp);
    const double min_delta = delta0 * std::exp2(static_cast<double>(min_g) * p.grid_step);
    CHECK(min_delta >= p.alpha() * p.floor_delta * (1.0 - 1e-12));
}

TEST_CASE("fixed quantizer coder has bounded control and trivial memory") {
    const int levels = 4;
    const double delta = 1.0;
    FiniteMemoryCoder coder =
        fixed_quantizer_coder(levels, delta, [](double xhat) { return -2.0 * xhat; });
    const double bound = 2.0 * 0.5 * (levels - 1) * delta;  // gain * max |xhat|

    NoiseStream rng(5);
    for (int i = 0; i < 1000; ++i) {
        const double x = 40.0 * (2.0 * rng.uniform01() - 1.0);
        const int64_t m_before = coder.memory;
        const FiniteMemoryStep st = finite_memory_step(x, coder);
        CHECK(std::abs(st.u) <= bound + 1e-12);
        CHECK(coder.memory == m_before);  // |S| = 1
        CHECK(st.q >= 1);
        CHECK(st.q <= levels + 1);
    }
    // far outside the range: xhat = 0, so u = 0
    const FiniteMemoryStep far = finite_memory_step(1e9, coder);
    CHECK(far.u == 0.0);
    CHECK(far.q == levels + 1);

    // identical input, constant memory: identical control
    FiniteMemoryCoder c2 = fixed_quantizer_coder(levels, delta, [](double v) { return -2.0 * v; });
    const double u1 = finite_memory_step(0.7, c2).u;
    const double u2 = finite_memory_step(0.7, c2).u;
    CHECK(u1 == u2);
}

TEST_CASE("sign coder doubles on repeats and halves on alternation") {
    FiniteMemoryCoder coder = sign_zoom_coder(4.0, 1.0);
    finite_memory_step(1.0, coder);   // bit 1
    const int64_t g1 = coder.memory >> 1;
    finite_memory_step(1.0, coder);   // repeat -> expand
    const int64_t g2 = coder.memory >> 1;
    CHECK(g2 == g1 + 1);
    finite_memory_step(-1.0, coder);  // alternate -> shrink
    const int64_t g3 = coder.memory >> 1;
    CHECK(g3 == g2 - 1);
}
