#pragma once

#include <cstdint>
#include <random>

namespace rhbt {

/// Identifies one deterministic random substream.
struct RngStreamSpec {
    std::uint64_t master_seed = 0;
    std::uint64_t chunk_index = 0;
};

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for substream `index` of `master`. Used to key grid points and runs.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index)
{
    return mix64(mix64(master) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// Generator state for one substream. mt19937_64 output is fixed by the
/// standard, and the conversions below avoid library-defined distributions,
/// so sequences are identical on every platform.
class RandomStream {
  public:
    explicit RandomStream(RngStreamSpec spec)
        : engine_(derive_seed(spec.master_seed, spec.chunk_index))
    {
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

  private:
    std::mt19937_64 engine_;
};

}  // namespace rhbt
