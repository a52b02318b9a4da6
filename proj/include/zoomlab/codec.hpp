#pragma once

#include <cstdint>
#include <functional>

#include "zoomlab/common.hpp"
#include "zoomlab/dynamics.hpp"

namespace zoomlab {

/// Adaptive zoom quantizer parameters. The zoom factors live on a log grid:
/// log2(zoom_out) = n_out * s and log2(alpha) = -n_in * s with gcd(n_out, n_in) = 1,
/// which makes the bin-size process countable (an integer exponent).
struct ZoomParams {
    int levels = 4;        // K per coordinate; R' = log2 K bits/coordinate
    int dim = 1;           // N
    double grid_step = 1.0;  // s > 0
    int zoom_in_exp = 1;     // n_in
    int zoom_out_exp = 1;    // n_out
    double floor_delta = 1.0;  // L
    double contraction_a = 0.0;  // |a| from the model certificate

    double alpha() const { return std::exp2(-zoom_in_exp * grid_step); }
    double zoom_out() const { return std::exp2(zoom_out_exp * grid_step); }
    double rate_bits_per_coordinate() const { return std::log2(static_cast<double>(levels)); }
    /// K^N + 1 (one dedicated overflow symbol).
    int64_t symbol_count() const;
    int64_t overflow_symbol() const { return symbol_count(); }
    /// Required channel rate log2(K^N + 1) in bits/step.
    double rate_bits() const { return std::log2(static_cast<double>(symbol_count())); }
    /// The achievability proof needs 2^{R'} > |a| / alpha.
    bool rate_condition_ok() const {
        return static_cast<double>(levels) > contraction_a / alpha();
    }

    /// Throws ConfigError on invalid parameters (K odd, gcd != 1, no zoom-out
    /// margin over |a|, non-positive floor or grid step).
    void validate() const;
};

/// Bin-size state, synchronized between encoder and decoder. Delta is tracked
/// by its integer grid exponent: delta = delta0 * 2^(g*s), so floor
/// comparisons and the zoom ladder are exact integer arithmetic.
struct CodecState {
    enum class Side { Encoder, Decoder };

    Side side = Side::Encoder;
    double delta0 = 1.0;
    double grid_step = 1.0;
    int64_t grid_exp = 0;   // g
    int64_t floor_exp = 0;  // largest g with delta(g) <= L
    int64_t time = 0;

    double delta() const { return delta0 * std::exp2(static_cast<double>(grid_exp) * grid_step); }
    bool at_or_below_floor() const { return grid_exp <= floor_exp; }
};

CodecState make_codec_state(const ZoomParams& params, double delta0, CodecState::Side side);

/// Mid-rise uniform quantizer of the construction: reconstruction level
/// (k - (K+1)/2) * delta for x in [(k-1-K/2) delta, (k-K/2) delta), the upper
/// boundary folded into level K, and 0 outside [-K delta/2, K delta/2].
double uniform_quantize(double x, int levels, double delta);

struct QuantizeResult {
    int64_t symbol = 0;   // 1 .. K^N + 1; K^N + 1 is the overflow symbol
    Vec xhat;             // reconstruction; all zeros on overflow
    bool overflow = false;
    double h_max = 0.0;   // max_i |x_i| / (delta * 2^(R'-1))
};

/// Coordinatewise quantization plus bijective symbol indexing.
QuantizeResult vector_quantize(const Vec& x, const ZoomParams& params, const CodecState& state);

/// The bar-Q multiplier: zoom_out when some coordinate overflowed (h_max > 1),
/// alpha when in range above the floor, 1 at or below the floor.
double zoom_factor(double h_max, double delta_min, const ZoomParams& params);

/// Applies bar-Q for the step outcome implied by the received symbol (an
/// erased symbol counts as overflow) and advances time. Both sides call this
/// with the same argument, which is what keeps them synchronized.
void sync_update(CodecState& state, const ZoomParams& params, bool overflow);

struct EncoderOutput {
    int64_t symbol = 0;
    Vec xhat;
    bool overflow = false;
    double h_max = 0.0;
};

/// Quantize x, emit the channel symbol, apply the zoom update, advance time.
EncoderOutput encoder_step(const Vec& x, CodecState& state, const ZoomParams& params);

struct DecoderOutput {
    Vec u;
    Vec xhat;
    bool overflow = false;  // overflow symbol received or erasure
};

/// Reconstruct x_hat from the received symbol (zero on overflow/erasure), emit
/// the contraction-realizing control kappa(x_hat), apply the identical zoom
/// update. Throws ProtocolError on a symbol outside the codebook.
DecoderOutput decoder_step(int64_t qprime, bool erased, CodecState& state,
                           const ZoomParams& params, const SystemModel& model);

// ---- finite-memory coders (structured stationary policies) -----------------

/// Stationary coder/controller with memory update m' = eta(m, q'). A finite
/// memory_cardinality is the Theorem-7 setting; 0 marks a countable memory.
struct FiniteMemoryCoder {
    int64_t memory = 0;
    int64_t memory_cardinality = 1;  // |S|; 0 = countably infinite
    int input_symbols = 2;
    std::function<int(double, int64_t)> encode;    // gamma_e(x, m) -> q
    std::function<double(int64_t, int)> control;   // gamma_d(m, q') -> u
    std::function<int64_t(int64_t, int)> update;   // eta(m, q') -> m'
};

struct FiniteMemoryStep {
    double u = 0.0;
    int q = 0;
};

/// One noiseless-channel step: q = gamma_e(x, m), u = gamma_d(m, q), m = eta(m, q).
FiniteMemoryStep finite_memory_step(double x, FiniteMemoryCoder& coder);

/// |S| = 1: fixed-bin quantizer, u = control_of_xhat(Q(x)). Control magnitude
/// is bounded by the (finite) reconstruction image.
FiniteMemoryCoder fixed_quantizer_coder(int levels, double delta,
                                        std::function<double(double)> control_of_xhat);

/// One-bit sign coder with a step size that doubles on repeated signs and
/// halves on alternation; u = -gain * xhat. Countable memory (g, last bit).
FiniteMemoryCoder sign_zoom_coder(double gain, double delta0);

}  // namespace zoomlab
