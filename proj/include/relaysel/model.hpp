#pragma once

// Relay parameters, system configuration and the controlled birth-death
// kernel of a single relay queue.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace relaysel {

struct RelayParams {
    double f = 0.5;  // source -> relay success probability
    double l = 0.5;  // relay -> destination success probability
    double C = 1.0;  // holding cost per packet per slot
    int K = 1;       // buffer capacity

    friend bool operator==(const RelayParams&, const RelayParams&) = default;
};

enum class PolicyKind { Random, LoadBased, MMRS, MLRS, Whittle };

struct SystemConfig {
    std::vector<RelayParams> relays;
    std::int64_t horizon = 1;
    std::uint64_t seed = 0;
    PolicyKind policy = PolicyKind::Whittle;

    // min_i l_i > max_i f_i; surfaced, never enforced.
    bool stable() const {
        if (relays.empty()) return false;
        double min_l = relays.front().l;
        double max_f = relays.front().f;
        for (const auto& r : relays) {
            min_l = std::min(min_l, r.l);
            max_f = std::max(max_f, r.f);
        }
        return min_l > max_f;
    }
};

struct Action {
    bool active = false;
    friend bool operator==(const Action&, const Action&) = default;
};

// Down/stay/up probabilities of one step of the queue.
struct StepProbs {
    double down = 0.0;
    double stay = 1.0;
    double up = 0.0;
};

struct Transition {
    int to_state;
    double prob;
};

struct TransitionRow {
    int from_state = 0;
    Action action;
    std::vector<Transition> entries;  // sorted by to_state, no duplicates

    double prob(int to_state) const {
        for (const auto& e : entries)
            if (e.to_state == to_state) return e.prob;
        return 0.0;
    }
};

inline void check_state(int x, const RelayParams& p) {
    if (x < 0 || x > p.K)
        throw std::domain_error("state " + std::to_string(x) + " outside [0, " +
                                std::to_string(p.K) + "]");
}

// One slot with the source sending to this relay. Arrival in the first
// mini-slot, departure in the second; an arrival that would overflow K is
// folded into a self-loop.
inline StepProbs active_step(int x, const RelayParams& p) {
    check_state(x, p);
    const double f = p.f, l = p.l;
    StepProbs s;
    if (x == 0) {
        s.down = 0.0;
        s.stay = (1.0 - f) + f * l;
        s.up = f * (1.0 - l);
    } else if (x == p.K) {
        s.down = (1.0 - f) * l;
        s.stay = (1.0 - f) * (1.0 - l) + f * l + f * (1.0 - l);
        s.up = 0.0;
    } else {
        s.down = (1.0 - f) * l;
        s.stay = (1.0 - f) * (1.0 - l) + f * l;
        s.up = f * (1.0 - l);
    }
    return s;
}

inline StepProbs passive_step(int x, const RelayParams& p) {
    check_state(x, p);
    if (x == 0) return {0.0, 1.0, 0.0};
    return {p.l, 1.0 - p.l, 0.0};
}

inline StepProbs step(int x, Action a, const RelayParams& p) {
    return a.active ? active_step(x, p) : passive_step(x, p);
}

namespace detail {
inline TransitionRow make_row(int x, Action a, const StepProbs& s) {
    TransitionRow row{x, a, {}};
    if (s.down > 0.0) row.entries.push_back({x - 1, s.down});
    row.entries.push_back({x, s.stay});
    if (s.up > 0.0) row.entries.push_back({x + 1, s.up});
    return row;
}
}  // namespace detail

inline TransitionRow active_row(int x, const RelayParams& p) {
    return detail::make_row(x, Action{true}, active_step(x, p));
}

inline TransitionRow passive_row(int x, const RelayParams& p) {
    return detail::make_row(x, Action{false}, passive_step(x, p));
}

enum class Severity { Warning, Error };

struct Diagnostic {
    Severity severity;
    std::string field;
    std::string message;
};

inline bool has_errors(const std::vector<Diagnostic>& diags) {
    return std::any_of(diags.begin(), diags.end(),
                       [](const Diagnostic& d) { return d.severity == Severity::Error; });
}

inline std::vector<Diagnostic> validate(const RelayParams& p, const std::string& where) {
    std::vector<Diagnostic> out;
    auto err = [&](const std::string& field, const std::string& msg) {
        out.push_back({Severity::Error, where + "." + field, msg});
    };
    // Negated comparisons so that NaN is rejected too.
    if (!(p.f > 0.0 && p.f < 1.0)) err("f", "must lie in (0, 1), got " + std::to_string(p.f));
    if (!(p.l > 0.0 && p.l < 1.0)) err("l", "must lie in (0, 1), got " + std::to_string(p.l));
    if (!(p.C > 0.0)) err("C", "must be > 0, got " + std::to_string(p.C));
    if (p.K < 1) err("K", "buffer capacity must be >= 1, got " + std::to_string(p.K));
    return out;
}

inline std::vector<Diagnostic> validate(const SystemConfig& config) {
    std::vector<Diagnostic> out;
    if (config.relays.empty()) out.push_back({Severity::Error, "relays", "at least one relay required"});
    if (config.horizon < 1) out.push_back({Severity::Error, "T", "horizon must be >= 1"});
    for (std::size_t i = 0; i < config.relays.size(); ++i) {
        auto d = validate(config.relays[i], "relays[" + std::to_string(i) + "]");
        out.insert(out.end(), d.begin(), d.end());
    }
    if (!config.relays.empty() && !config.stable()) {
        double min_l = 1.0, max_f = 0.0;
        for (const auto& r : config.relays) {
            min_l = std::min(min_l, r.l);
            max_f = std::max(max_f, r.f);
        }
        out.push_back({Severity::Warning, "relays",
                       "min(l) = " + std::to_string(min_l) + " <= max(f) = " + std::to_string(max_f) +
                           "; positive recurrence is only guaranteed by the finite buffer"});
    }
    return out;
}

}  // namespace relaysel
