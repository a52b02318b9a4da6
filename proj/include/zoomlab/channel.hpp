#pragma once

#include <string>
#include <vector>

#include "zoomlab/common.hpp"
#include "zoomlab/rng.hpp"

namespace zoomlab {

enum class ChannelKind { Noiseless, Erasure, Bsc, General };

/// Finite-alphabet memoryless channel. Symbols are 1-based on both sides.
struct ChannelModel {
    ChannelKind kind = ChannelKind::Noiseless;
    int inputs = 0;   // M
    int outputs = 0;  // M'
    std::vector<double> kernel;  // row-stochastic, inputs x outputs, row-major
    double epsilon = 0.0;        // erasure probability (Erasure kind)
    double flip = 0.0;           // crossover probability (Bsc kind)

    double p(int q, int qprime) const {
        return kernel[static_cast<size_t>(q - 1) * outputs + (qprime - 1)];
    }
    /// Erasure kind reserves the last output symbol for the erasure flag.
    bool is_erasure(int qprime) const { return kind == ChannelKind::Erasure && qprime == outputs; }
};

ChannelModel noiseless_channel(int symbols);
ChannelModel erasure_channel(int symbols, double epsilon);
ChannelModel bsc_channel(double flip);
ChannelModel general_channel(std::vector<double> kernel, int inputs, int outputs);

/// Throws ConfigError unless every row sums to 1 within 1e-12 with entries in [0,1].
void validate_kernel(const ChannelModel& channel);

/// One channel use: output drawn from row q of the kernel.
int transmit(const ChannelModel& channel, int q, NoiseStream& rng);

struct CapacityResult {
    double capacity = 0.0;       // bits per use
    std::vector<double> input_distribution;
    int iterations = 0;
    double gap = 0.0;            // upper bound minus lower bound at stop
    bool converged = true;
    std::vector<double> lower_bounds;  // per-iteration, monotone nondecreasing
};

/// Shannon capacity by alternating maximization; for memoryless channels this
/// equals the feedback capacity. Noiseless channels short-circuit to log2(M).
CapacityResult capacity(const ChannelModel& channel, double tolerance = 1e-9,
                        int max_iterations = 10000);

/// 1 - H_b(p); reference value for tests and reports.
double bsc_capacity_closed_form(double flip);

}  // namespace zoomlab
