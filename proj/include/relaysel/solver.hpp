#pragma once

// Average-cost value functions for a single relay under a tax on passivity.
//
//   V(y) = C y - sigma + E_active[V | y]           y <= threshold
//   V(y) = C y + lambda - sigma + E_passive[V | y]  y >  threshold
//   V(0) = 0
//
// The threshold system is solved in O(K) by exploiting the birth-death
// structure of the kernel. Relative value iteration and a brute-force joint-MDP
// solver are provided as independent references.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "relaysel/model.hpp"

namespace relaysel {

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NonConvergence : public std::runtime_error {
public:
    NonConvergence(const std::string& what, double last_span)
        : std::runtime_error(what), span(last_span) {}
    double span;
};

struct ValueSolution {
    std::vector<double> V;  // indexed by state 0..K, V[0] == 0
    double sigma = 0.0;
    double lambda = 0.0;
    int threshold = -1;  // states <= threshold active; -1 means all passive
    // Largest decrease V(y-1) - V(y) found; > 1e-9 means the monotonicity
    // check failed.
    double monotone_violation = 0.0;

    bool monotone() const { return monotone_violation <= 1e-9; }
};

struct DpeResidual {
    double max_abs_residual = 0.0;
    int argmax_state = 0;
};

namespace detail {

inline double monotone_violation(const std::vector<double>& V) {
    double worst = 0.0;
    for (std::size_t y = 1; y < V.size(); ++y) worst = std::max(worst, V[y - 1] - V[y]);
    return worst;
}

inline double expect(const StepProbs& s, std::span<const double> V, int x) {
    double e = s.stay * V[static_cast<std::size_t>(x)];
    if (s.down != 0.0) e += s.down * V[static_cast<std::size_t>(x - 1)];
    if (s.up != 0.0) e += s.up * V[static_cast<std::size_t>(x + 1)];
    return e;
}

}  // namespace detail

inline bool threshold_active(int y, int threshold) { return y <= threshold; }

// Gain and differences D(y) = V(y) - V(y-1) (D[0] unused) of the
// threshold system.
struct ThresholdDifferences {
    std::vector<double> D;
    double sigma = 0.0;
};

inline ThresholdDifferences threshold_differences(const RelayParams& p, double lambda, int threshold) {
    const int K = p.K;
    if (threshold < -1 || threshold > K)
        throw std::domain_error("threshold " + std::to_string(threshold) + " outside [-1, " +
                                std::to_string(K) + "]");

    auto cost = [&](int y) { return p.C * y + (threshold_active(y, threshold) ? 0.0 : lambda); };
    auto probs = [&](int y) { return step(y, Action{threshold_active(y, threshold)}, p); };

    // States 0..top form the recurrent class; passive states above it only
    // drain. On the class the chain is birth-death, so the gain is the
    // stationary mean cost and the differences D(y) = V(y) - V(y-1) follow
    // from flow balance across the cut {< y} | {>= y}:
    //
    //   pi(y-1) up(y-1) D(y) = sum_{z >= y} pi(z) (c(z) - sigma)
    //                        = sum_{z <  y} pi(z) (sigma - c(z)).
    //
    // Each side is evaluated as a recursion in pi-ratios, picking the one
    // whose terms share a sign so nothing cancels.
    const int top = threshold < 0 ? 0 : std::min(threshold + 1, K);
    const auto m = static_cast<std::size_t>(top);

    std::vector<double> up(m + 1, 0.0), ratio(m + 1, 0.0), c(m + 1);
    for (int y = 0; y <= top; ++y) c[static_cast<std::size_t>(y)] = cost(y);
    for (int y = 0; y < top; ++y) {
        const auto i = static_cast<std::size_t>(y);
        up[i] = probs(y).up;
        const double down_next = probs(y + 1).down;
        if (!(up[i] > 0.0) || !(down_next > 0.0))
            throw SolverError("degenerate birth-death step at state " + std::to_string(y));
        ratio[i] = up[i] / down_next;  // pi(y+1) / pi(y)
    }

    // Stationary law on the class, in log space to survive long chains.
    std::vector<double> logw(m + 1, 0.0);
    for (std::size_t i = 0; i < m; ++i) logw[i + 1] = logw[i] + std::log(ratio[i]);
    const double peak = *std::max_element(logw.begin(), logw.end());
    double mass = 0.0, weighted = 0.0;
    for (std::size_t i = 0; i <= m; ++i) {
        const double w = std::exp(logw[i] - peak);
        mass += w;
        weighted += w * c[i];
    }
    const double sigma = weighted / mass;

    // head[y] = sum_{z<y} pi(z)/pi(y-1) (sigma - c(z)), forward.
    // tail[y] = sum_{z>=y} pi(z)/pi(y-1) (c(z) - sigma), backward.
    std::vector<double> head(m + 2, 0.0), tail(m + 2, 0.0);
    if (m >= 1) head[1] = sigma - c[0];
    for (std::size_t y = 1; y < m; ++y) head[y + 1] = head[y] / ratio[y - 1] + (sigma - c[y]);
    for (std::size_t y = m; y >= 1; --y) tail[y] = ratio[y - 1] * ((c[y] - sigma) + tail[y + 1]);

    ThresholdDifferences out;
    out.sigma = sigma;
    out.D.assign(static_cast<std::size_t>(K) + 1, 0.0);
    for (int y = 1; y <= K; ++y) {
        const auto i = static_cast<std::size_t>(y);
        if (y <= top)
            out.D[i] = (c[i - 1] < sigma ? head[i] : tail[i]) / up[i - 1];
        else
            out.D[i] = (cost(y) - sigma) / probs(y).down;
    }
    return out;
}

inline ValueSolution solve_threshold_system(const RelayParams& p, double lambda, int threshold) {
    const ThresholdDifferences td = threshold_differences(p, lambda, threshold);
    ValueSolution sol;
    sol.V.assign(td.D.size(), 0.0);
    for (std::size_t i = 1; i < td.D.size(); ++i) sol.V[i] = sol.V[i - 1] + td.D[i];
    sol.sigma = td.sigma;
    sol.lambda = lambda;
    sol.threshold = threshold;
    sol.monotone_violation = detail::monotone_violation(sol.V);
    return sol;
}

// Largest violation of the linear equations that define sol (including V(0) = 0).
inline DpeResidual equation_residual(const RelayParams& p, const ValueSolution& sol) {
    DpeResidual r{std::abs(sol.V[0]), 0};
    for (int y = 0; y <= p.K; ++y) {
        const bool active = threshold_active(y, sol.threshold);
        const double rhs = p.C * y + (active ? 0.0 : sol.lambda) - sol.sigma +
                           detail::expect(step(y, Action{active}, p), sol.V, y);
        const double e = std::abs(sol.V[static_cast<std::size_t>(y)] - rhs);
        if (e > r.max_abs_residual) r = {e, y};
    }
    return r;
}

struct Branches {
    double active;   // E_active[V | x]
    double passive;  // lambda + E_passive[V | x]
};

inline Branches branch_values(const RelayParams& p, std::span<const double> V, double lambda, int x) {
    return {detail::expect(active_step(x, p), V, x),
            lambda + detail::expect(passive_step(x, p), V, x)};
}

// Residual of the optimality equation with min over both actions.
inline DpeResidual dpe_residual(const RelayParams& p, const ValueSolution& sol) {
    DpeResidual r;
    for (int x = 0; x <= p.K; ++x) {
        const Branches b = branch_values(p, sol.V, sol.lambda, x);
        const double rhs = p.C * x - sol.sigma + std::min(b.active, b.passive);
        const double e = std::abs(sol.V[static_cast<std::size_t>(x)] - rhs);
        if (e > r.max_abs_residual) r = {e, x};
    }
    return r;
}

// Greedy action per state (ties go to the active action).
inline std::vector<bool> greedy_actions(const RelayParams& p, std::span<const double> V, double lambda) {
    std::vector<bool> out(static_cast<std::size_t>(p.K) + 1);
    for (int x = 0; x <= p.K; ++x) {
        const Branches b = branch_values(p, V, lambda, x);
        out[static_cast<std::size_t>(x)] = b.active <= b.passive;
    }
    return out;
}

// Largest y such that every state 0..y is active; -1 if state 0 is passive.
inline int leading_active_threshold(const std::vector<bool>& actions) {
    int t = -1;
    while (t + 1 < static_cast<int>(actions.size()) && actions[static_cast<std::size_t>(t + 1)]) ++t;
    return t;
}

struct RviOptions {
    double tol = 1e-10;
    std::int64_t max_iter = 1'000'000;
};

inline ValueSolution relative_value_iteration(const RelayParams& p, double lambda,
                                              const RviOptions& opt = {}) {
    if (!(opt.tol > 0.0)) throw std::invalid_argument("tol must be > 0");
    if (opt.max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");

    const auto n = static_cast<std::size_t>(p.K) + 1;
    std::vector<StepProbs> act(n), pas(n);
    for (int x = 0; x <= p.K; ++x) {
        act[static_cast<std::size_t>(x)] = active_step(x, p);
        pas[static_cast<std::size_t>(x)] = passive_step(x, p);
    }

    std::vector<double> V(n, 0.0), W(n);
    double span = std::numeric_limits<double>::infinity();
    double sigma = 0.0;
    for (std::int64_t it = 0; it < opt.max_iter; ++it) {
        for (std::size_t x = 0; x < n; ++x) {
            const int xi = static_cast<int>(x);
            const double a = detail::expect(act[x], V, xi);
            const double b = lambda + detail::expect(pas[x], V, xi);
            W[x] = p.C * xi + std::min(a, b);
        }
        sigma = W[0];
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t x = 0; x < n; ++x) {
            const double d = W[x] - V[x];
            lo = std::min(lo, d);
            hi = std::max(hi, d);
            V[x] = W[x] - sigma;
        }
        span = hi - lo;
        if (span < opt.tol) {
            ValueSolution sol;
            sol.V = V;
            sol.sigma = sigma;
            sol.lambda = lambda;
            sol.threshold = leading_active_threshold(greedy_actions(p, sol.V, lambda));
            sol.monotone_violation = detail::monotone_violation(sol.V);
            return sol;
        }
    }
    throw NonConvergence("relative value iteration did not converge, span " + std::to_string(span),
                         span);
}

// Exact solution of the unrelaxed problem (one active relay per slot) on
// the product chain, by relative value iteration.
struct JointSolution {
    double sigma = 0.0;
    std::vector<int> dims;      // K_i + 1 per relay
    std::vector<int> policy;    // flattened state -> active relay
    std::vector<double> value;  // relative values, V(0, ..., 0) = 0
    std::int64_t iterations = 0;

    std::size_t flatten(std::span<const int> queues) const {
        std::size_t idx = 0;
        for (std::size_t i = 0; i < dims.size(); ++i)
            idx = idx * static_cast<std::size_t>(dims[i]) + static_cast<std::size_t>(queues[i]);
        return idx;
    }
    int action(std::span<const int> queues) const { return policy[flatten(queues)]; }
};

struct JointOptions {
    double tol = 1e-9;
    std::int64_t max_iter = 2'000'000;
    std::size_t max_states = 25'000;
};

inline JointSolution solve_joint_optimal(std::span<const RelayParams> relays, const JointOptions& opt = {}) {
    const std::size_t M = relays.size();
    if (M == 0) throw std::invalid_argument("at least one relay required");
    std::size_t total = 1;
    JointSolution sol;
    for (const auto& r : relays) {
        total *= static_cast<std::size_t>(r.K) + 1;
        if (total > opt.max_states)
            throw std::length_error("joint state space exceeds " + std::to_string(opt.max_states) +
                                    " states");
        sol.dims.push_back(r.K + 1);
    }

    // Per relay, per state: {down, stay, up} for passive (0) and active (1).
    std::vector<std::vector<std::array<StepProbs, 2>>> kern(M);
    for (std::size_t i = 0; i < M; ++i)
        for (int x = 0; x <= relays[i].K; ++x)
            kern[i].push_back({passive_step(x, relays[i]), active_step(x, relays[i])});

    std::vector<std::size_t> stride(M, 1);
    for (std::size_t i = M - 1; i-- > 0;) stride[i] = stride[i + 1] * static_cast<std::size_t>(sol.dims[i + 1]);

    std::vector<double> V(total, 0.0), W(total), cost(total);
    std::vector<std::vector<int>> coords(total, std::vector<int>(M));
    for (std::size_t s = 0; s < total; ++s) {
        double c = 0.0;
        for (std::size_t i = 0; i < M; ++i) {
            const int x = static_cast<int>((s / stride[i]) % static_cast<std::size_t>(sol.dims[i]));
            coords[s][i] = x;
            c += relays[i].C * x;
        }
        cost[s] = c;
    }
    sol.policy.assign(total, 0);

    // E[V(next)] for state s with relay `act` active, summing the product of
    // independent per-relay moves recursively.
    auto expectation = [&](std::size_t s, std::size_t act) {
        double acc = 0.0;
        auto rec = [&](auto&& self, std::size_t i, std::size_t idx, double prob) -> void {
            if (i == M) {
                acc += prob * V[idx];
                return;
            }
            const StepProbs& st = kern[i][static_cast<std::size_t>(coords[s][i])][i == act ? 1 : 0];
            self(self, i + 1, idx, prob * st.stay);
            if (st.down != 0.0) self(self, i + 1, idx - stride[i], prob * st.down);
            if (st.up != 0.0) self(self, i + 1, idx + stride[i], prob * st.up);
        };
        rec(rec, 0, s, 1.0);
        return acc;
    };

    double span = std::numeric_limits<double>::infinity();
    for (std::int64_t it = 0; it < opt.max_iter; ++it) {
        for (std::size_t s = 0; s < total; ++s) {
            double best = std::numeric_limits<double>::infinity();
            int best_i = 0;
            for (std::size_t a = 0; a < M; ++a) {
                const double e = expectation(s, a);
                if (e < best) {
                    best = e;
                    best_i = static_cast<int>(a);
                }
            }
            W[s] = cost[s] + best;
            sol.policy[s] = best_i;
        }
        const double g = W[0];
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t s = 0; s < total; ++s) {
            const double d = W[s] - V[s];
            lo = std::min(lo, d);
            hi = std::max(hi, d);
            V[s] = W[s] - g;
        }
        span = hi - lo;
        if (span < opt.tol) {
            // The gain lies in [lo, hi]; report the midpoint.
            sol.sigma = 0.5 * (lo + hi);
            sol.value = std::move(V);
            sol.iterations = it + 1;
            return sol;
        }
    }
    throw NonConvergence("joint relative value iteration did not converge, span " + std::to_string(span),
                         span);
}

}  // namespace relaysel
