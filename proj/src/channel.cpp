#include "zoomlab/channel.hpp"

#include <algorithm>
#include <cmath>

namespace zoomlab {

ChannelModel noiseless_channel(int symbols) {
    if (symbols < 1) throw ConfigError("noiseless channel needs at least one symbol");
    ChannelModel ch;
    ch.kind = ChannelKind::Noiseless;
    ch.inputs = ch.outputs = symbols;
    ch.kernel.assign(static_cast<size_t>(symbols) * symbols, 0.0);
    for (int i = 0; i < symbols; ++i) ch.kernel[static_cast<size_t>(i) * symbols + i] = 1.0;
    return ch;
}

ChannelModel erasure_channel(int symbols, double epsilon) {
    if (symbols < 1) throw ConfigError("erasure channel needs at least one input symbol");
    if (epsilon < 0.0 || epsilon > 1.0) throw ConfigError("erasure probability outside [0,1]");
    ChannelModel ch;
    ch.kind = ChannelKind::Erasure;
    ch.inputs = symbols;
    ch.outputs = symbols + 1;
    ch.epsilon = epsilon;
    ch.kernel.assign(static_cast<size_t>(symbols) * (symbols + 1), 0.0);
    for (int i = 0; i < symbols; ++i) {
        ch.kernel[static_cast<size_t>(i) * ch.outputs + i] = 1.0 - epsilon;
        ch.kernel[static_cast<size_t>(i) * ch.outputs + symbols] = epsilon;
    }
    return ch;
}

ChannelModel bsc_channel(double flip) {
    if (flip < 0.0 || flip > 1.0) throw ConfigError("BSC crossover outside [0,1]");
    ChannelModel ch;
    ch.kind = ChannelKind::Bsc;
    ch.inputs = ch.outputs = 2;
    ch.flip = flip;
    ch.kernel = {1.0 - flip, flip, flip, 1.0 - flip};
    return ch;
}

ChannelModel general_channel(std::vector<double> kernel, int inputs, int outputs) {
    ChannelModel ch;
    ch.kind = ChannelKind::General;
    ch.inputs = inputs;
    ch.outputs = outputs;
    ch.kernel = std::move(kernel);
    validate_kernel(ch);
    return ch;
}

void validate_kernel(const ChannelModel& channel) {
    if (channel.inputs < 1 || channel.outputs < 1 ||
        channel.kernel.size() != static_cast<size_t>(channel.inputs) * channel.outputs)
        throw ConfigError("channel kernel has wrong shape");
    for (int i = 0; i < channel.inputs; ++i) {
        double row = 0.0;
        for (int j = 0; j < channel.outputs; ++j) {
            const double v = channel.kernel[static_cast<size_t>(i) * channel.outputs + j];
            if (v < 0.0 || v > 1.0) throw ConfigError("channel kernel entry outside [0,1]");
            row += v;
        }
        if (std::abs(row - 1.0) > 1e-12)
            throw ConfigError("channel kernel row " + std::to_string(i + 1) +
                              " does not sum to 1");
    }
}

int transmit(const ChannelModel& channel, int q, NoiseStream& rng) {
    if (q < 1 || q > channel.inputs)
        throw ConfigError("channel input symbol " + std::to_string(q) + " outside {1.." +
                          std::to_string(channel.inputs) + "}");
    switch (channel.kind) {
        case ChannelKind::Noiseless:
            return q;
        case ChannelKind::Erasure:
            return rng.uniform01() < 1.0 - channel.epsilon ? q : channel.outputs;
        case ChannelKind::Bsc:
            return rng.uniform01() < 1.0 - channel.flip ? q : 3 - q;
        case ChannelKind::General:
            break;
    }
    const double u = rng.uniform01();
    double cum = 0.0;
    for (int j = 1; j <= channel.outputs; ++j) {
        cum += channel.p(q, j);
        if (u < cum) return j;
    }
    return channel.outputs;  // u landed in the rounding slack of the last bin
}

double bsc_capacity_closed_form(double flip) {
    auto hx = [](double p) { return p <= 0.0 || p >= 1.0 ? 0.0 : -p * std::log2(p); };
    return 1.0 - hx(flip) - hx(1.0 - flip);
}

CapacityResult capacity(const ChannelModel& channel, double tolerance, int max_iterations) {
    validate_kernel(channel);
    if (tolerance <= 0.0) throw ConfigError("capacity tolerance must be > 0");

    const int m = channel.inputs, mp = channel.outputs;
    CapacityResult res;

    if (channel.kind == ChannelKind::Noiseless) {
        res.capacity = std::log2(static_cast<double>(m));
        res.input_distribution.assign(static_cast<size_t>(m), 1.0 / m);
        return res;
    }

    std::vector<double> p(static_cast<size_t>(m), 1.0 / m);
    std::vector<double> q(static_cast<size_t>(mp), 0.0);
    std::vector<double> c(static_cast<size_t>(m), 0.0);

    for (int it = 1; it <= max_iterations; ++it) {
        std::fill(q.begin(), q.end(), 0.0);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < mp; ++j)
                q[static_cast<size_t>(j)] +=
                    p[static_cast<size_t>(i)] * channel.kernel[static_cast<size_t>(i) * mp + j];

        double lower = 0.0, upper = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < m; ++i) {
            double ci = 0.0;
            for (int j = 0; j < mp; ++j) {
                const double pij = channel.kernel[static_cast<size_t>(i) * mp + j];
                if (pij > 0.0) ci += pij * std::log2(pij / q[static_cast<size_t>(j)]);
            }
            c[static_cast<size_t>(i)] = ci;
            lower += p[static_cast<size_t>(i)] * ci;
            upper = std::max(upper, ci);
        }

        res.iterations = it;
        res.capacity = lower;
        res.gap = upper - lower;
        res.lower_bounds.push_back(lower);
        if (res.gap <= tolerance) {
            res.input_distribution = p;
            return res;
        }

        double norm = 0.0;
        for (int i = 0; i < m; ++i) {
            p[static_cast<size_t>(i)] *= std::exp2(c[static_cast<size_t>(i)] - lower);
            norm += p[static_cast<size_t>(i)];
        }
        for (double& v : p) v /= norm;
    }
    res.converged = false;
    res.input_distribution = p;
    return res;
}

}  // namespace zoomlab
