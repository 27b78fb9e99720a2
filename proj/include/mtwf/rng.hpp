#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

// Pinned PRNG stack: splitmix64 seeds a xoshiro256** stream, Gaussians come
// from the Box-Muller cosine branch. Noised datasets and shuffles are
// reproducible across implementations from the seed alone.

namespace mtwf {

struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
};

class Xoshiro256ss {
public:
    explicit Xoshiro256ss(std::uint64_t seed) {
        SplitMix64 sm(seed);
        for (auto& word : s_) word = sm.next();
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // [0, 1), 53-bit resolution.
    double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // (0, 1]; safe as a log argument.
    double next_unit_positive() {
        return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    // One draw per call; the sine branch is discarded deliberately so the
    // stream position is a pure function of the draw count.
    double gaussian(double mu, double sigma) {
        double u1 = next_unit_positive();
        double u2 = next_unit();
        double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
        return mu + sigma * z;
    }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next() % n; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t s_[4];
};

// Fisher-Yates with the pinned generator; used for every split and batch
// shuffle so partitions are reproducible from the seed.
template <typename T>
void seeded_shuffle(std::vector<T>& items, Xoshiro256ss& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(items[i - 1], items[j]);
    }
}

template <typename T>
void seeded_shuffle(std::vector<T>& items, std::uint64_t seed) {
    Xoshiro256ss rng(seed);
    seeded_shuffle(items, rng);
}

// Domain-separated stream derivation: one master seed, independent streams
// per purpose (weight init, shuffling, dropout, noise rows).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    SplitMix64 sm(seed ^ (tag * 0x9e3779b97f4a7c15ull));
    return sm.next();
}

} // namespace mtwf
