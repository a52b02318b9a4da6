#pragma once

#include <cstdint>
#include <random>

#include "zoomlab/common.hpp"

namespace zoomlab {

/// Deterministic random stream owned by exactly one worker.
///
/// Gaussians come from Box-Muller on explicit uniforms (two engine words per
/// scalar), so the mapping seed + draw index -> sample is fixed and does not
/// depend on the standard library's distribution internals.
class NoiseStream {
  public:
    explicit NoiseStream(uint64_t seed, Vec sigma = {1.0});

    uint64_t seed() const { return seed_; }
    uint64_t draw_index() const { return draws_; }
    const Vec& sigma() const { return sigma_; }
    int dim() const { return static_cast<int>(sigma_.size()); }

    /// Uniform on [0,1); consumes one draw.
    double uniform01();

    /// Standard normal scalar; consumes two draws.
    double standard_gaussian();

    /// One noise vector w ~ N(0, diag(sigma^2)).
    Vec gaussian_vector();

    /// `count` consecutive noise vectors.
    std::vector<Vec> sample(int count);

    /// Independent stream derived from this one's seed (not its state).
    NoiseStream fork(uint64_t tag) const { return NoiseStream(derive_seed(seed_, tag), sigma_); }

  private:
    uint64_t seed_;
    uint64_t draws_ = 0;
    Vec sigma_;
    std::mt19937_64 engine_;
};

}  // namespace zoomlab
