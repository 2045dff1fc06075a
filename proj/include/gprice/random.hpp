#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>

namespace gprice {

/// Seedable, splittable normal generator. Stream `k` of seed `s` is a
/// 64-bit Mersenne Twister keyed by a SplitMix64 mix of (s, k), so each path
/// owns an independent substream and results do not depend on batch size or
/// thread count.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream);

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Runs body(i) for i in [0, n) on up to hardware_concurrency threads with a
/// static partition. The first exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace gprice
