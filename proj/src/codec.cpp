#include "zoomlab/codec.hpp"

#include <cmath>

namespace zoomlab {

int64_t ZoomParams::symbol_count() const {
    int64_t n = 1;
    for (int i = 0; i < dim; ++i) {
        if (n > (int64_t{1} << 56) / levels)
            throw ConfigError("zoom codec symbol count overflows: K^N too large");
        n *= levels;
    }
    return n + 1;
}

void ZoomParams::validate() const {
    if (dim < 1) throw ConfigError("zoom codec: dimension must be >= 1");
    if (levels < 2) throw ConfigError("zoom codec: K must be >= 2");
    if (levels % 2 != 0)
        throw ConfigError("zoom codec: K must be even (odd K has a zero level, "
                          "which collides with the overflow flag)");
    if (grid_step <= 0.0) throw ConfigError("zoom codec: grid step s must be > 0");
    if (zoom_in_exp < 1 || zoom_out_exp < 1)
        throw ConfigError("zoom codec: grid exponents must be positive integers");
    if (gcd_ll(zoom_in_exp, zoom_out_exp) != 1)
        throw ConfigError("zoom codec: gcd(n_out, n_in) must be 1");
    if (floor_delta <= 0.0) throw ConfigError("zoom codec: floor L must be > 0");
    if (contraction_a > 0.0 && zoom_out() <= contraction_a)
        throw ConfigError("zoom codec: zoom-out factor must exceed |a| (delta > 0)");
    symbol_count();  // overflow guard
}

CodecState make_codec_state(const ZoomParams& params, double delta0, CodecState::Side side) {
    if (delta0 <= 0.0) throw ConfigError("zoom codec: delta0 must be > 0");
    CodecState st;
    st.side = side;
    st.delta0 = delta0;
    st.grid_step = params.grid_step;
    st.grid_exp = 0;
    // Largest g with delta0 * 2^(g s) <= L, fixed up so the integer floor test
    // agrees with the reconstructed delta exactly.
    int64_t g = static_cast<int64_t>(
        std::floor(std::log2(params.floor_delta / delta0) / params.grid_step));
    auto delta_of = [&](int64_t gg) {
        return delta0 * std::exp2(static_cast<double>(gg) * params.grid_step);
    };
    while (delta_of(g + 1) <= params.floor_delta) ++g;
    while (delta_of(g) > params.floor_delta) --g;
    st.floor_exp = g;
    return st;
}

double uniform_quantize(double x, int levels, double delta) {
    const double half_range = 0.5 * levels * delta;
    if (x == half_range) return 0.5 * (levels - 1) * delta;
    if (x < -half_range || x > half_range) return 0.0;
    int k = static_cast<int>(std::floor(x / delta + 0.5 * levels)) + 1;
    if (k < 1) k = 1;
    if (k > levels) k = levels;  // x in [K delta/2 - ulp, K delta/2)
    return (k - 0.5 * (levels + 1)) * delta;
}

namespace {

// Bin index 1..K for in-range x; assumes |x| <= half range.
int bin_index(double x, int levels, double delta) {
    const double half_range = 0.5 * levels * delta;
    if (x == half_range) return levels;
    int k = static_cast<int>(std::floor(x / delta + 0.5 * levels)) + 1;
    if (k < 1) k = 1;
    if (k > levels) k = levels;
    return k;
}

double level_value(int k, int levels, double delta) {
    return (k - 0.5 * (levels + 1)) * delta;
}

}  // namespace

QuantizeResult vector_quantize(const Vec& x, const ZoomParams& params, const CodecState& state) {
    if (static_cast<int>(x.size()) != params.dim)
        throw ConfigError("vector_quantize: state dimension mismatch");
    const double delta = state.delta();
    const double half_range = 0.5 * params.levels * delta;

    QuantizeResult res;
    res.h_max = linf_norm(x) / half_range;
    // In-range test on |x_i| <= K delta / 2 directly; equivalent to
    // max_i |h_i| <= 1 but free of division rounding. Written so that a
    // non-finite coordinate (diverged run) lands on the overflow symbol.
    bool in_range = true;
    for (double xi : x)
        if (!(std::abs(xi) <= half_range)) in_range = false;

    if (!in_range) {
        res.symbol = params.overflow_symbol();
        res.xhat.assign(x.size(), 0.0);
        res.overflow = true;
        return res;
    }
    res.xhat.resize(x.size());
    int64_t index = 0;
    int64_t stride = 1;
    for (size_t i = 0; i < x.size(); ++i) {
        const int k = bin_index(x[i], params.levels, delta);
        res.xhat[i] = level_value(k, params.levels, delta);
        index += static_cast<int64_t>(k - 1) * stride;
        stride *= params.levels;
    }
    res.symbol = index + 1;
    return res;
}

double zoom_factor(double h_max, double delta_min, const ZoomParams& params) {
    if (delta_min <= 0.0) throw ConfigError("zoom_factor: delta must be > 0");
    if (h_max > 1.0) return params.zoom_out();
    if (delta_min > params.floor_delta) return params.alpha();
    return 1.0;
}

void sync_update(CodecState& state, const ZoomParams& params, bool overflow) {
    if (overflow)
        state.grid_exp += params.zoom_out_exp;
    else if (!state.at_or_below_floor())
        state.grid_exp -= params.zoom_in_exp;
    ++state.time;
}

EncoderOutput encoder_step(const Vec& x, CodecState& state, const ZoomParams& params) {
    QuantizeResult qr = vector_quantize(x, params, state);
    EncoderOutput out{qr.symbol, std::move(qr.xhat), qr.overflow, qr.h_max};
    sync_update(state, params, out.overflow);
    return out;
}

DecoderOutput decoder_step(int64_t qprime, bool erased, CodecState& state,
                           const ZoomParams& params, const SystemModel& model) {
    if (!model.certificate)
        throw ConfigError("zoom decoder needs a model with a contraction certificate");
    DecoderOutput out;
    const int64_t n_symbols = params.symbol_count();
    if (!erased && (qprime < 1 || qprime > n_symbols))
        throw ProtocolError("decoder received symbol " + std::to_string(qprime) +
                            " outside codebook of size " + std::to_string(n_symbols));

    out.overflow = erased || qprime == params.overflow_symbol();
    out.xhat.assign(static_cast<size_t>(params.dim), 0.0);
    if (!out.overflow) {
        const double delta = state.delta();
        int64_t index = qprime - 1;
        for (int i = 0; i < params.dim; ++i) {
            const int k = static_cast<int>(index % params.levels) + 1;
            index /= params.levels;
            out.xhat[static_cast<size_t>(i)] = level_value(k, params.levels, delta);
        }
    }
    out.u = model.certificate->kappa(out.xhat);
    sync_update(state, params, out.overflow);
    return out;
}

FiniteMemoryStep finite_memory_step(double x, FiniteMemoryCoder& coder) {
    FiniteMemoryStep out;
    out.q = coder.encode(x, coder.memory);
    out.u = coder.control(coder.memory, out.q);
    coder.memory = coder.update(coder.memory, out.q);
    return out;
}

FiniteMemoryCoder fixed_quantizer_coder(int levels, double delta,
                                        std::function<double(double)> control_of_xhat) {
    if (levels < 2) throw ConfigError("fixed_quantizer_coder: K must be >= 2");
    if (delta <= 0.0) throw ConfigError("fixed_quantizer_coder: delta must be > 0");
    FiniteMemoryCoder c;
    c.memory = 0;
    c.memory_cardinality = 1;
    c.input_symbols = levels + 1;
    c.encode = [levels, delta](double x, int64_t) {
        const double half_range = 0.5 * levels * delta;
        if (x == half_range) return levels;
        if (x < -half_range || x > half_range) return levels + 1;  // overflow symbol
        int k = static_cast<int>(std::floor(x / delta + 0.5 * levels)) + 1;
        if (k < 1) k = 1;
        if (k > levels) k = levels;
        return k;
    };
    c.control = [levels, delta, control_of_xhat](int64_t, int q) {
        const double xhat = q > levels ? 0.0 : (q - 0.5 * (levels + 1)) * delta;
        return control_of_xhat(xhat);
    };
    c.update = [](int64_t, int) -> int64_t { return 0; };
    return c;
}

FiniteMemoryCoder sign_zoom_coder(double gain, double delta0) {
    if (delta0 <= 0.0) throw ConfigError("sign_zoom_coder: delta0 must be > 0");
    FiniteMemoryCoder c;
    // memory packs (step exponent g, previous bit): m = 2 g + prev.
    c.memory = 0;
    c.memory_cardinality = 0;  // countable, not finite
    c.input_symbols = 2;
    c.encode = [](double x, int64_t) { return x >= 0.0 ? 2 : 1; };
    c.control = [gain, delta0](int64_t m, int q) {
        const int64_t g = m >> 1;
        const double delta = delta0 * std::exp2(static_cast<double>(g));
        const double xhat = (q == 2 ? 1.0 : -1.0) * delta;
        return -gain * xhat;
    };
    c.update = [](int64_t m, int q) -> int64_t {
        int64_t g = m >> 1;
        const int prev = static_cast<int>(m & 1);
        const int bit = q - 1;
        g += (bit == prev) ? 1 : -1;
        if (g > (1 << 20)) g = 1 << 20;
        if (g < -(1 << 20)) g = -(1 << 20);
        return (g << 1) | bit;
    };
    return c;
}

}  // namespace zoomlab
