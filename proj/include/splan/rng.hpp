#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace splan {

// Deterministic random stream. All draw algorithms are implemented here rather
// than with std:: distributions, whose output is not pinned by the standard;
// artifacts must be byte-reproducible across library versions.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {
        // warm the state so nearby seeds decorrelate
        for (int i = 0; i < 4; ++i) next_u64();
    }

    // Independent substream for a subsystem. Mixing the tag keeps streams
    // stable when unrelated draw counts change elsewhere.
    static Rng derive(uint64_t seed, std::string_view tag) {
        uint64_t h = 1469598103934665603ull; // FNV-1a
        for (char c : tag) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        return Rng(seed ^ h);
    }

    uint64_t next_u64() {
        // splitmix64
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive bounds
    int uniform_int(int lo, int hi) {
        if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
        uint64_t span = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo) + 1;
        return lo + static_cast<int>(next_u64() % span);
    }

    double normal(double mu = 0.0, double sigma = 1.0) {
        // Box-Muller without the cached second sample, so the stream position
        // is a pure function of the number of calls.
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        return mu + sigma * r * std::cos(6.283185307179586476925286766559 * u2);
    }

    double lognormal(double mu, double sigma) { return std::exp(normal(mu, sigma)); }

    // index draw proportional to nonnegative weights
    size_t categorical(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) {
            if (w < 0.0) throw std::invalid_argument("categorical: negative weight");
            total += w;
        }
        if (total <= 0.0) throw std::invalid_argument("categorical: zero total weight");
        double u = uniform() * total;
        double acc = 0.0;
        for (size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return i;
        }
        return weights.size() - 1;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        // Fisher-Yates
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = next_u64() % i;
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t state_;
};

} // namespace splan
