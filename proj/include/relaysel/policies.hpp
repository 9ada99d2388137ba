#pragma once

// Relay selection rules. Every rule returns exactly one relay; ties are
// broken uniformly at random using the caller's tie-breaking stream.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "relaysel/model.hpp"
#include "relaysel/rng.hpp"
#include "relaysel/whittle.hpp"

namespace relaysel {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PolicyContext {
    std::int64_t slot = 0;
    std::span<const int> queues;
    std::span<const RelayParams> params;
    std::span<const IndexTable> index_tables;  // empty unless Whittle
    RngStream* ties = nullptr;
};

namespace detail {

// Picks uniformly among the indices whose score equals the best one.
// `better(a, b)` is a strict order on scores.
template <typename Score, typename Better>
std::size_t pick_best(std::span<const Score> scores, Better better, RngStream& rng) {
    std::size_t best = 0;
    std::size_t tied = 1;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (better(scores[i], scores[best])) {
            best = i;
            tied = 1;
        } else if (!better(scores[best], scores[i])) {
            ++tied;
        }
    }
    if (tied == 1) return best;
    std::uint64_t k = rng.below(tied);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!better(scores[best], scores[i]) && !better(scores[i], scores[best])) {
            if (k == 0) return i;
            --k;
        }
    }
    return best;
}

inline RngStream& ties(const PolicyContext& ctx) {
    if (ctx.ties == nullptr) throw ConfigError("policy context has no tie-breaking stream");
    return *ctx.ties;
}

inline std::size_t relay_count(const PolicyContext& ctx) {
    if (ctx.queues.empty()) throw ConfigError("policy context has no relays");
    if (ctx.queues.size() != ctx.params.size())
        throw ConfigError("queue and parameter vectors differ in length");
    return ctx.queues.size();
}

}  // namespace detail

inline std::size_t select_random(const PolicyContext& ctx) {
    const std::size_t M = detail::relay_count(ctx);
    if (M == 1) return 0;
    return static_cast<std::size_t>(detail::ties(ctx).below(M));
}

inline std::size_t select_load_based(const PolicyContext& ctx) {
    detail::relay_count(ctx);
    return detail::pick_best(ctx.queues, [](int a, int b) { return a < b; }, detail::ties(ctx));
}

inline std::size_t select_mmrs(const PolicyContext& ctx) {
    const std::size_t M = detail::relay_count(ctx);
    std::vector<double> score(M);
    for (std::size_t i = 0; i < M; ++i) score[i] = std::min(ctx.params[i].f, ctx.params[i].l);
    return detail::pick_best(std::span<const double>(score), [](double a, double b) { return a > b; },
                             detail::ties(ctx));
}

// Largest backlog-times-delivery-probability, exactly as the baseline is
// defined, even though it favours already loaded relays.
inline std::size_t select_mlrs(const PolicyContext& ctx) {
    const std::size_t M = detail::relay_count(ctx);
    std::vector<double> score(M);
    for (std::size_t i = 0; i < M; ++i) score[i] = ctx.queues[i] * ctx.params[i].l;
    return detail::pick_best(std::span<const double>(score), [](double a, double b) { return a > b; },
                             detail::ties(ctx));
}

inline std::size_t select_whittle(const PolicyContext& ctx) {
    const std::size_t M = detail::relay_count(ctx);
    if (ctx.index_tables.size() != M)
        throw ConfigError("whittle policy needs one index table per relay (have " +
                          std::to_string(ctx.index_tables.size()) + ", need " + std::to_string(M) + ")");
    std::vector<double> score(M);
    for (std::size_t i = 0; i < M; ++i) score[i] = ctx.index_tables[i].lookup(ctx.queues[i]);
    return detail::pick_best(std::span<const double>(score), [](double a, double b) { return a < b; },
                             detail::ties(ctx));
}

inline std::size_t select(PolicyKind kind, const PolicyContext& ctx) {
    switch (kind) {
        case PolicyKind::Random: return select_random(ctx);
        case PolicyKind::LoadBased: return select_load_based(ctx);
        case PolicyKind::MMRS: return select_mmrs(ctx);
        case PolicyKind::MLRS: return select_mlrs(ctx);
        case PolicyKind::Whittle: return select_whittle(ctx);
    }
    throw ConfigError("unknown policy");
}

inline std::string_view policy_name(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::Random: return "random";
        case PolicyKind::LoadBased: return "load";
        case PolicyKind::MMRS: return "mmrs";
        case PolicyKind::MLRS: return "mlrs";
        case PolicyKind::Whittle: return "whittle";
    }
    return "?";
}

inline PolicyKind parse_policy(std::string_view name) {
    for (PolicyKind k : {PolicyKind::Random, PolicyKind::LoadBased, PolicyKind::MMRS, PolicyKind::MLRS,
                         PolicyKind::Whittle})
        if (policy_name(k) == name) return k;
    throw ConfigError("unknown policy \"" + std::string(name) +
                      "\" (expected random, load, mmrs, mlrs or whittle)");
}

}  // namespace relaysel
