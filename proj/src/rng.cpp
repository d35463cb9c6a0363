#include "osda/rng.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "osda/error.hpp"

namespace osda {

namespace {

// SplitMix64 step, used to decorrelate (seed, stream) pairs before seeding
// the mt19937_64 engine.
uint64_t splitmix64(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(uint64_t seed, uint64_t stream) {
    uint64_t state = seed;
    uint64_t a = splitmix64(state);
    state ^= stream * 0xda942042e4dd58b5ULL;
    uint64_t b = splitmix64(state);
    gen_.seed(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

uint64_t Rng::next_u64() { return gen_(); }

double Rng::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

int Rng::uniform_int(int n) {
    if (n < 1) throw InvalidConfig("uniform_int: n must be >= 1");
    const uint64_t un = static_cast<uint64_t>(n);
    const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return static_cast<int>(x % un);
}

double Rng::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

bool Rng::bernoulli(double p) { return uniform01() < p; }

std::vector<int> Rng::sample_without_replacement(int n, int k) {
    if (k > n) throw InsufficientSamples("sample_without_replacement: k > n");
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    // Partial Fisher-Yates: only the first k positions are needed.
    for (int i = 0; i < k; ++i) {
        const int j = i + uniform_int(n - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

void Rng::shuffle(std::vector<int>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
        const int j = uniform_int(i + 1);
        std::swap(v[i], v[j]);
    }
}

}  // namespace osda
