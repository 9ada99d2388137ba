#pragma once

// Slotted simulator of source -> relays -> destination.
//
// Slot n:
//   cost is charged on the queues at the start of the slot;
//   mini-slot 1: the policy picks one relay and the head-of-line source
//     packet is sent to it (success w.p. f);
//   mini-slot 2: every relay holding a packet, including one that just
//     arrived, sends its head packet to the destination (success w.p. l).
// A packet that reaches a full relay is admitted only if that relay delivers
// in mini-slot 2 (the queue stays at K); otherwise it is blocked.

#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "relaysel/model.hpp"
#include "relaysel/parallel.hpp"
#include "relaysel/policies.hpp"
#include "relaysel/rng.hpp"
#include "relaysel/whittle.hpp"

namespace relaysel {

enum class OnFail { Retry, Drop };

struct SimOptions {
    OnFail on_fail = OnFail::Retry;
    bool record_time_series = false;
    bool record_trace = false;
};

struct SlotTrace {
    std::vector<int> queues;        // at the start of the slot
    std::size_t selected = 0;
    bool a = false;                 // first-hop outcome for the selected relay
    std::vector<signed char> w;     // -1: not drawn, else 0/1
};

struct SimReport {
    double avg_cost = 0.0;   // cost units per slot
    double avg_delay = std::numeric_limits<double>::quiet_NaN();  // slots; NaN if nothing delivered
    double throughput = 0.0; // packets per slot
    std::int64_t delivered = 0;
    std::int64_t entered = 0;           // packets accepted by some relay
    std::int64_t drops_suppressed = 0;  // first-hop successes blocked by a full buffer
    std::int64_t source_drops = 0;      // packets discarded under OnFail::Drop
    std::int64_t in_flight = 0;         // still queued at the horizon
    std::vector<double> per_relay_mean_queue;
    std::vector<int> final_queues;
    std::vector<double> time_series;    // per-slot total cost, if recorded
    std::vector<SlotTrace> trace;       // if recorded

    friend bool operator==(const SimReport& a, const SimReport& b) {
        auto same = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
        return same(a.avg_cost, b.avg_cost) && same(a.avg_delay, b.avg_delay) &&
               same(a.throughput, b.throughput) && a.delivered == b.delivered && a.entered == b.entered &&
               a.drops_suppressed == b.drops_suppressed && a.source_drops == b.source_drops &&
               a.in_flight == b.in_flight && a.per_relay_mean_queue == b.per_relay_mean_queue &&
               a.final_queues == b.final_queues && a.time_series == b.time_series;
    }
};

namespace detail {

inline void check_runnable(const SystemConfig& config, std::span<const IndexTable> tables) {
    if (config.relays.empty()) throw ConfigError("at least one relay required");
    if (config.horizon < 1) throw ConfigError("horizon must be >= 1");
    for (const auto& r : config.relays) {
        if (!(r.f >= 0.0 && r.f <= 1.0) || !(r.l >= 0.0 && r.l <= 1.0))
            throw ConfigError("channel probabilities must lie in [0, 1]");
        if (r.K < 1) throw ConfigError("buffer capacity must be >= 1");
    }
    if (config.policy == PolicyKind::Whittle && tables.size() != config.relays.size())
        throw ConfigError("whittle policy requires one prebuilt index table per relay");
}

}  // namespace detail

inline SimReport run(const SystemConfig& config, const RngPlan& rng, std::span<const IndexTable> tables = {},
                     const SimOptions& options = {}) {
    detail::check_runnable(config, tables);
    const std::size_t M = config.relays.size();
    const std::int64_t T = config.horizon;

    std::vector<int> X(M, 0);
    std::vector<std::deque<std::int64_t>> fifo(M);  // head slot of each queued packet
    std::vector<double> queue_sum(M, 0.0);
    RngStream ties = rng.policy_ties();
    PolicyContext ctx{0, X, config.relays, tables, &ties};

    SimReport rep;
    if (options.record_time_series) rep.time_series.reserve(static_cast<std::size_t>(T));
    double cost_sum = 0.0;
    std::int64_t delay_sum = 0;
    std::int64_t head_slot = 0;

    for (std::int64_t n = 0; n < T; ++n) {
        double slot_cost = 0.0;
        for (std::size_t i = 0; i < M; ++i) {
            slot_cost += config.relays[i].C * X[i];
            queue_sum[i] += X[i];
        }
        cost_sum += slot_cost;
        if (options.record_time_series) rep.time_series.push_back(slot_cost);

        SlotTrace tr;
        if (options.record_trace) tr.queues = X;

        ctx.slot = n;
        const std::size_t sel = select(config.policy, ctx);
        const RelayParams& target = config.relays[sel];
        const bool a = rng.channel_success(Channel::A, sel, n, target.f);
        bool admitted = false;
        bool blocked = false;
        if (a) {
            if (X[sel] < target.K) {
                fifo[sel].push_back(head_slot);
                ++X[sel];
                admitted = true;
            } else {
                blocked = true;
            }
        }

        bool sel_departed = false;
        if (options.record_trace) tr.w.assign(M, -1);
        for (std::size_t j = 0; j < M; ++j) {
            if (X[j] == 0) continue;
            const bool w = rng.channel_success(Channel::W, j, n, config.relays[j].l);
            if (options.record_trace) tr.w[j] = w ? 1 : 0;
            if (!w) continue;
            delay_sum += n - fifo[j].front() + 1;
            fifo[j].pop_front();
            --X[j];
            ++rep.delivered;
            if (j == sel) sel_departed = true;
        }

        if (blocked) {
            if (sel_departed) {
                fifo[sel].push_back(head_slot);
                ++X[sel];
                admitted = true;
            } else {
                ++rep.drops_suppressed;
            }
        }
        if (admitted) {
            ++rep.entered;
            head_slot = n + 1;
        } else if (options.on_fail == OnFail::Drop) {
            ++rep.source_drops;
            head_slot = n + 1;
        }

        if (options.record_trace) {
            tr.selected = sel;
            tr.a = a;
            rep.trace.push_back(std::move(tr));
        }
    }

    const auto Td = static_cast<double>(T);
    rep.avg_cost = cost_sum / Td;
    rep.throughput = static_cast<double>(rep.delivered) / Td;
    if (rep.delivered > 0) rep.avg_delay = static_cast<double>(delay_sum) / static_cast<double>(rep.delivered);
    rep.per_relay_mean_queue.resize(M);
    for (std::size_t i = 0; i < M; ++i) rep.per_relay_mean_queue[i] = queue_sum[i] / Td;
    rep.final_queues = X;
    for (int x : X) rep.in_flight += x;
    return rep;
}

struct MetricSummary {
    double mean = 0.0;
    double stderr_ = 0.0;  // sample standard deviation / sqrt(n); 0 for one run
};

inline MetricSummary summarize(std::span<const double> xs) {
    MetricSummary s;
    if (xs.empty()) return s;
    const auto n = static_cast<double>(xs.size());
    for (double x : xs) s.mean += x;
    s.mean /= n;
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - s.mean) * (x - s.mean);
        s.stderr_ = std::sqrt(ss / (n - 1.0) / n);
    }
    return s;
}

struct BatchResult {
    std::vector<std::uint64_t> seeds;
    std::vector<SimReport> reports;
    MetricSummary avg_cost, avg_delay, throughput, delivered, drops_suppressed;
};

inline BatchResult aggregate(std::vector<std::uint64_t> seeds, std::vector<SimReport> reports) {
    BatchResult b{std::move(seeds), std::move(reports), {}, {}, {}, {}, {}};
    auto collect = [&](auto field) {
        std::vector<double> xs;
        for (const auto& r : b.reports) xs.push_back(static_cast<double>(field(r)));
        return summarize(xs);
    };
    b.avg_cost = collect([](const SimReport& r) { return r.avg_cost; });
    b.avg_delay = collect([](const SimReport& r) { return r.avg_delay; });
    b.throughput = collect([](const SimReport& r) { return r.throughput; });
    b.delivered = collect([](const SimReport& r) { return r.delivered; });
    b.drops_suppressed = collect([](const SimReport& r) { return r.drops_suppressed; });
    return b;
}

inline BatchResult run_batch(const SystemConfig& config, std::span<const std::uint64_t> seeds,
                             std::span<const IndexTable> tables = {}, const SimOptions& options = {},
                             unsigned threads = 1) {
    if (seeds.empty()) throw ConfigError("run_batch needs at least one seed");
    std::vector<SimReport> reports(seeds.size());
    const auto errors = parallel_for(seeds.size(), threads, [&](std::size_t i) {
        reports[i] = run(config, RngPlan(seeds[i]), tables, options);
    });
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return aggregate({seeds.begin(), seeds.end()}, std::move(reports));
}

}  // namespace relaysel
