#pragma once

#include <cstdint>
#include <vector>

#include "sdn/tensor.hpp"

namespace sdn {

// Deterministic 64-bit-seeded generator (xoshiro256++ seeded through
// splitmix64). The same seed and the same call sequence always produce the
// same stream, independent of platform or standard library, so checkpoints
// can pin randomness by recording {algorithm name, seed}.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed);

    static const char* algorithm() { return "xoshiro256++"; }
    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64();

    // Uniform on [lo, hi). lo == hi yields the constant lo.
    double uniform(double lo = 0.0, double hi = 1.0);
    // Gaussian via the Box-Muller transform; two uniforms per sample, no
    // cached spare, so the stream position is a pure function of call count.
    double normal(double mean = 0.0, double sd = 1.0);

    Tensor uniform_tensor(std::vector<std::size_t> shape, double lo, double hi);
    Tensor normal_tensor(std::vector<std::size_t> shape, double mean, double sd);

    // Derive an independent child generator. split(i) on equal-seed parents
    // gives equal children, so parallel work seeded by index stays
    // reproducible regardless of scheduling.
    SeededRng split(std::uint64_t index) const;

private:
    std::uint64_t seed_;
    std::uint64_t state_[4];
};

}  // namespace sdn
