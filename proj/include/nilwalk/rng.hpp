#pragma once

#include <cmath>
#include <cstdint>

namespace nilwalk {

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based stream: output k is a hash of (state0 + k*gamma), so any
/// (master seed, stream id) pair yields the same sequence on any worker.
/// SplitMix64 core; normals via Box-Muller from explicit uniforms, keeping
/// results bit-identical across platforms and thread counts.
class StreamRng {
public:
    StreamRng(std::uint64_t seed, std::uint64_t stream_id) {
        state_ = mix64(seed + 0x9e3779b97f4a7c15ULL);
        state_ = mix64(state_ ^ (stream_id * 0xda942042e4dd58b5ULL + 1));
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }

    /// Uniform on [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform(); // (0, 1], keeps the log finite
        double u2 = uniform();
        double radius = std::sqrt(-2.0 * std::log(u1));
        double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    std::uint64_t state_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace nilwalk
