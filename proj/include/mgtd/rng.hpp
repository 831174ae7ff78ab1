#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace mgtd {

// splitmix64. Fixed here (rather than <random>) so shuffles and derived seeds
// are bit-identical across platforms and standard libraries.
class rng64 {
public:
    explicit rng64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Modulo draw; bias is < n/2^64, irrelevant for shuffling corpus-sized n.
    std::uint64_t next_below(std::uint64_t n) { return n <= 1 ? 0 : next() % n; }

private:
    std::uint64_t state_;
};

// Derives an independent stream seed from (base, salt), e.g. per class or per
// epoch.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt) {
    rng64 r(base ^ (salt + 0x9e3779b97f4a7c15ull + (base << 6) + (base >> 2)));
    r.next();
    return r.next();
}

// In-place Fisher-Yates with the splitmix64 stream.
template <typename T>
void deterministic_shuffle(std::vector<T>& items, std::uint64_t seed) {
    rng64 r(seed);
    for (std::size_t i = items.size(); i > 1; --i) {
        std::swap(items[i - 1], items[r.next_below(i)]);
    }
}

}  // namespace mgtd
