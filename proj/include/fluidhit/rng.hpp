#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fluidhit {

/// splitmix64 finalizer; mixes (seed, stream) into an engine seed.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

/// mt19937_64 with fixed transforms. The standard distributions are
/// implementation-defined, so uniform/geometric/bounded draws are done here to
/// keep streams identical across standard libraries.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    Rng(std::uint64_t seed, std::uint64_t stream) : engine_(derive_seed(seed, stream)) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1].
    double uniform_pos() { return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; }

    /// Uniform integer in [0, n), Lemire's multiply-and-reject.
    std::uint64_t below(std::uint64_t n) {
        __uint128_t m = static_cast<__uint128_t>(engine_()) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                m = static_cast<__uint128_t>(engine_()) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Number of trials up to and including the first success, p in (0, 1].
    std::uint64_t geometric(double p) {
        if (p >= 1.0) {
            return 1;
        }
        const double g = std::floor(std::log(uniform_pos()) / std::log1p(-p));
        if (!(g < 1.8e19)) {
            return UINT64_MAX;
        }
        return 1 + static_cast<std::uint64_t>(g);
    }

  private:
    std::mt19937_64 engine_;
};

} // namespace fluidhit
