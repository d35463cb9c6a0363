#pragma once

#include <cstdint>
#include <random>

namespace osda {

// One RNG stream per pipeline phase. Toggling a feature therefore never
// shifts the draws consumed by another phase.
enum class Stream : uint64_t {
    kDataGen = 1,
    kClustering = 2,
    kClassifierInit = 3,
    kBankInit = 4,
    kSelection = 5,
    kComplementary = 6,
    kNegativeKeys = 7,
    kAugWeak = 8,
    kAugStrong = 9,
    kBatchOrder = 10,
    kPretrain = 11,
};

// Deterministic stream RNG: identical (seed, stream, call sequence) yields
// identical draws. Draw primitives are implemented here rather than with
// std::*_distribution, whose output is not pinned by the standard.
class Rng {
   public:
    Rng(uint64_t seed, uint64_t stream);
    Rng(uint64_t seed, Stream stream) : Rng(seed, static_cast<uint64_t>(stream)) {}

    uint64_t next_u64();

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform01();

    double uniform(double lo, double hi);

    // Uniform integer in [0, n), unbiased via rejection. Requires n >= 1.
    int uniform_int(int n);

    // Standard normal via Box-Muller; the spare draw is cached.
    double gaussian();

    bool bernoulli(double p);

    // First k indices of a uniform random permutation of {0..n-1}.
    std::vector<int> sample_without_replacement(int n, int k);

    void shuffle(std::vector<int>& v);

   private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace osda
