#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "zoomlab/common.hpp"

namespace zoomlab {

/// Time-indexed record of one closed-loop run: states x_0..x_T, and per step
/// the control, channel symbols, grid exponents on both codec sides, and the
/// overflow flag. Open-loop runs leave the codec arrays empty.
struct Trajectory {
    int dim = 1;
    uint64_t seed = 0;
    uint64_t config_hash = 0;

    // Codec grid reconstruction: delta_t = delta0 * 2^(g_t * grid_step).
    double delta0 = 0.0;
    double grid_step = 0.0;
    int levels = 0;

    std::vector<double> x;           // (steps+1) * dim
    std::vector<double> u;           // steps * dim
    std::vector<int32_t> q;          // steps
    std::vector<int32_t> qprime;     // steps
    std::vector<int32_t> enc_grid;   // steps + 1
    std::vector<int32_t> dec_grid;   // steps + 1
    std::vector<uint8_t> overflow;   // steps

    int64_t steps() const { return static_cast<int64_t>(u.size()) / dim; }
    bool has_codec() const { return delta0 > 0.0; }

    Vec state_at(int64_t t) const {
        return Vec(x.begin() + t * dim, x.begin() + (t + 1) * dim);
    }
    double delta_at(int64_t t) const {
        return delta0 * std::exp2(static_cast<double>(dec_grid[static_cast<size_t>(t)]) * grid_step);
    }
    /// max_i |x^i_t| / (delta_t K/2); only meaningful with a zoom codec.
    double h_max_at(int64_t t) const {
        return linf_norm(state_at(t)) / (0.5 * levels * delta_at(t));
    }

    void reserve(int64_t steps_hint);
};

void write_trajectory_csv(const std::string& path, const Trajectory& traj);
Trajectory read_trajectory_csv(const std::string& path);

}  // namespace zoomlab
