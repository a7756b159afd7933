#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace diffam {

/// Stable 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view text);

/// Per-stream seed derived from the run seed and a stream name.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

/// Seeded generator whose outputs depend only on the engine's raw bit stream,
/// so draws are identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    Rng(std::uint64_t seed, std::string_view stream) : engine_(derive_seed(seed, stream)) {}

    std::uint64_t next() { return engine_(); }
    /// Uniform in [0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace diffam
