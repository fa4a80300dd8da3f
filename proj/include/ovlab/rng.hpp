#pragma once

#include <cstdint>
#include <random>

namespace ovlab {

/// Portable seeded generator.
///
/// The integer stream is std::mt19937_64 (its output sequence is fixed by the
/// C++ standard). Floating-point draws are derived from it without any
/// implementation-defined distribution:
///   uniform()        = (next() >> 11) * 2^-53                in [0, 1)
///   uniform_open()   = ((next() >> 11) + 0.5) * 2^-53        in (0, 1)
///   normal()         = Box-Muller on two uniform_open() draws u1, u2:
///                      sqrt(-2 ln u1) * cos(2 pi u2), then the paired
///                      sqrt(-2 ln u1) * sin(2 pi u2) on the following call
///   sign()           = +1 if the top bit of next() is set, else -1
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    double uniform();
    double uniform_open();
    double normal();
    int sign();

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// SplitMix64 mix of (base, stream); used to give every trial/run its own seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

} // namespace ovlab
