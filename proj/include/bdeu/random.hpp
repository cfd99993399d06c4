#pragma once

#include <cstdint>

namespace bdeu {

// SplitMix64 generator (Steele, Lea & Flood 2014). Chosen because it is a
// documented, portable algorithm with a one-word state, so imputation
// results are reproducible bit-for-bit from (seed, column) alone.
struct SplitMix64 {
    std::uint64_t state = 0;

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
};

// Independent stream for column k: initial state is seed XOR (k+1)*golden.
// Each column draws from its own stream, so preprocessing one column never
// depends on how many values other columns imputed.
inline SplitMix64 column_stream(std::uint64_t seed, int column) {
    return SplitMix64{seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(column) + 1))};
}

} // namespace bdeu
