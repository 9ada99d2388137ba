#pragma once

// Seeded randomness with named substreams.
//
// Channel outcomes are counter-based: the draw for (stream, relay, slot) is
// a hash of those coordinates, so every policy sees the same A/W value for a
// given relay and slot no matter which other draws it made. Tie-breaking uses
// a sequential SplitMix64 stream.

#include <cstdint>
#include <string_view>

namespace relaysel {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline constexpr double to_unit(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

class RngStream {
public:
    explicit RngStream(std::uint64_t key) : state_(key) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    double uniform01() { return to_unit(next_u64()); }

    // Unbiased integer in [0, n) (Lemire's multiply-and-reject).
    std::uint64_t below(std::uint64_t n) {
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                m = static_cast<unsigned __int128>(next_u64()) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

private:
    std::uint64_t state_;
};

enum class Channel { A, W };  // source->relay, relay->destination

class RngPlan {
public:
    explicit RngPlan(std::uint64_t master_seed) : master_(master_seed) {}

    std::uint64_t master_seed() const { return master_; }

    std::uint64_t stream_key(std::string_view name) const {
        return splitmix64(master_ ^ splitmix64(fnv1a64(name)));
    }

    RngStream policy_ties() const { return RngStream(stream_key("policy_ties")); }

    double channel_uniform(Channel ch, std::size_t relay, std::int64_t slot) const {
        const std::uint64_t base = ch == Channel::A ? key_a_ : key_w_;
        const std::uint64_t k = splitmix64(base ^ splitmix64(static_cast<std::uint64_t>(relay)));
        return to_unit(splitmix64(k ^ splitmix64(static_cast<std::uint64_t>(slot) + 0x632BE59BD9B4E019ULL)));
    }

    bool channel_success(Channel ch, std::size_t relay, std::int64_t slot, double p) const {
        return channel_uniform(ch, relay, slot) < p;
    }

private:
    std::uint64_t master_;
    std::uint64_t key_a_ = stream_key("channel_A");
    std::uint64_t key_w_ = stream_key("channel_W");
};

}  // namespace relaysel
