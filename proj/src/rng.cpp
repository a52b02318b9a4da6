#include "zoomlab/rng.hpp"

#include <cmath>

namespace zoomlab {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

NoiseStream::NoiseStream(uint64_t seed, Vec sigma)
    : seed_(seed), sigma_(std::move(sigma)), engine_(seed) {
    if (sigma_.empty()) throw ConfigError("NoiseStream: empty sigma vector");
    for (double s : sigma_)
        if (!(s >= 0.0)) throw ConfigError("NoiseStream: sigma must be >= 0");
}

double NoiseStream::uniform01() {
    ++draws_;
    // 53-bit mantissa; in [0,1).
    return (engine_() >> 11) * 0x1.0p-53;
}

double NoiseStream::standard_gaussian() {
    // Box-Muller, cosine branch only, so every scalar costs exactly two words.
    double u1 = uniform01();
    double u2 = uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

Vec NoiseStream::gaussian_vector() {
    Vec w(sigma_.size());
    for (size_t i = 0; i < sigma_.size(); ++i) w[i] = sigma_[i] * standard_gaussian();
    return w;
}

std::vector<Vec> NoiseStream::sample(int count) {
    if (count < 0) throw ConfigError("NoiseStream::sample: count must be >= 0");
    std::vector<Vec> out;
    out.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) out.push_back(gaussian_vector());
    return out;
}

}  // namespace zoomlab
