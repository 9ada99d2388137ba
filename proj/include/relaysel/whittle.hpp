#pragma once

// Whittle indices for one relay.
//
// For a query state x, fix the threshold at x and let V_lambda solve the
// threshold system. The index is the fixed point of
//
//   g(lambda) = E_active[V_lambda | x] - E_passive[V_lambda | x],
//
// i.e. the tax at which sending and not sending are equally good at x.
// g is affine in lambda, so besides the damped iteration we can solve the
// fixed point exactly from two evaluations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "relaysel/model.hpp"
#include "relaysel/solver.hpp"

namespace relaysel {

enum class IndexMode { Iterative, AffineSolve, Both };

struct WhittleConfig {
    double beta = 0.1;
    std::int64_t max_iter = 10'000;
    double tol_lambda = 1e-8;
    IndexMode mode = IndexMode::AffineSolve;
    std::optional<int> grid_stride;  // unset: max(1, K / 64)
    int dense_prefix = 16;

    int stride_for(int K) const { return grid_stride ? *grid_stride : std::max(1, K / 64); }
};

inline void check(const WhittleConfig& cfg) {
    if (!(cfg.beta > 0.0 && cfg.beta <= 1.0)) throw std::invalid_argument("whittle.beta must lie in (0, 1]");
    if (cfg.max_iter < 1) throw std::invalid_argument("whittle.max_iter must be >= 1");
    if (!(cfg.tol_lambda > 0.0)) throw std::invalid_argument("whittle.tol_lambda must be > 0");
    if (cfg.grid_stride && *cfg.grid_stride < 1) throw std::invalid_argument("whittle.grid_stride must be >= 1");
    if (cfg.dense_prefix < 0) throw std::invalid_argument("whittle.dense_prefix must be >= 0");
}

class IndexNonConvergence : public std::runtime_error {
public:
    IndexNonConvergence(const std::string& what, double last, double res)
        : std::runtime_error(what), last_lambda(last), residual(res) {}
    double last_lambda;
    double residual;
};

class DegenerateIndex : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The index is a property of the relay dynamics, not of where the buffer
// is cut: with the threshold at x only states 0..x+1 are recurrent, so we
// solve on a chain one state longer than the buffer. On the buffer's own
// chain the folded arrival at K makes sending to a full relay free, which
// would pull the index at K below the one at K-1.
inline RelayParams open_chain(const RelayParams& p, int capacity) {
    RelayParams q = p;
    q.K = std::max(capacity, p.K + 1);
    return q;
}

// g(lambda) for query state x.
inline double index_gap(const RelayParams& p, int x, double lambda) {
    const RelayParams open = open_chain(p, p.K + 1);
    const ThresholdDifferences td = threshold_differences(open, lambda, x);
    // E_active[V|x] - E_passive[V|x] written in differences, which avoids
    // subtracting two large expectations.
    const StepProbs a = active_step(x, open);
    const StepProbs q = passive_step(x, open);
    const auto i = static_cast<std::size_t>(x);
    double gap = (a.up - q.up) * td.D[i + 1];
    if (x > 0) gap -= (a.down - q.down) * td.D[i];
    return gap;
}

inline double fixed_point_residual(const RelayParams& p, int x, double lambda) {
    return std::abs(lambda - index_gap(p, x, lambda));
}

struct IterativeIndex {
    double lambda = 0.0;
    std::int64_t iterations = 0;
};

// Damped fixed-point iteration from lambda = 0. The map is affine, so the
// ratio of successive steps is its contraction factor q and
// |lambda - lambda*| <= |step| q / (1 - q); we stop once that bound (or the
// raw step, when q is not yet known) is below tol_lambda.
inline IterativeIndex index_iterative(const RelayParams& p, int x, const WhittleConfig& cfg = {}) {
    check_state(x, p);
    check(cfg);
    double lambda = 0.0;
    double prev_step = 0.0;
    for (std::int64_t tau = 0; tau < cfg.max_iter; ++tau) {
        const double next = lambda + cfg.beta * (index_gap(p, x, lambda) - lambda);
        const double step_size = std::abs(next - lambda);
        lambda = next;
        double bound = step_size;
        if (prev_step > 0.0) {
            const double q = step_size / prev_step;
            bound = q < 1.0 ? step_size * q / (1.0 - q) : std::numeric_limits<double>::infinity();
        }
        prev_step = step_size;
        if (step_size == 0.0 || (step_size < cfg.tol_lambda && bound < cfg.tol_lambda)) {
            const double res = fixed_point_residual(p, x, lambda);
            if (res > 10.0 * cfg.tol_lambda * std::max(1.0, std::abs(lambda)))
                throw IndexNonConvergence("index iteration stalled at state " + std::to_string(x) +
                                              " with fixed-point residual " + std::to_string(res),
                                          lambda, res);
            return {lambda, tau + 1};
        }
    }
    throw IndexNonConvergence("index iteration exhausted " + std::to_string(cfg.max_iter) +
                                  " iterations at state " + std::to_string(x),
                              lambda, fixed_point_residual(p, x, lambda));
}

inline double index_affine(const RelayParams& p, int x) {
    check_state(x, p);
    const double g0 = index_gap(p, x, 0.0);
    const double g1 = index_gap(p, x, 1.0);
    const double slope = g1 - g0;
    if (std::abs(1.0 - slope) < 1e-12)
        throw DegenerateIndex("unit slope of the index map at state " + std::to_string(x));
    // One secant correction at the estimate removes the error of
    // extrapolating the slope from [0, 1] out to large indices.
    const double estimate = g0 / (1.0 - slope);
    return estimate + (index_gap(p, x, estimate) - estimate) / (1.0 - slope);
}

// Index at x using cfg.mode. Both runs the affine solve and cross-checks it
// against the iteration; AffineSolve falls back to iterating on a
// degenerate slope.
inline double whittle_index(const RelayParams& p, int x, const WhittleConfig& cfg = {}) {
    switch (cfg.mode) {
        case IndexMode::Iterative:
            return index_iterative(p, x, cfg).lambda;
        case IndexMode::AffineSolve:
            try {
                return index_affine(p, x);
            } catch (const DegenerateIndex&) {
                return index_iterative(p, x, cfg).lambda;
            }
        case IndexMode::Both: {
            const double a = index_affine(p, x);
            const double it = index_iterative(p, x, cfg).lambda;
            if (std::abs(a - it) > 10.0 * cfg.tol_lambda * std::max(1.0, std::abs(a)))
                throw SolverError("index modes disagree at state " + std::to_string(x) + ": " +
                                  std::to_string(a) + " vs " + std::to_string(it));
            return a;
        }
    }
    return 0.0;
}

struct IndexCertificate {
    double dpe_residual = 0.0;  // max over every state of the solved chain
    int argmax_state = 0;
    double branch_gap = 0.0;    // |active - passive| at the query state
    int chain_capacity = 0;
};

// Re-solves the threshold-x system at lambda and checks the full optimality
// equation. The chain is extended until its artificial top state is itself
// consistent: passive beats the free arrival there once
// f (C top - sigma) >= (1 - f) lambda.
inline IndexCertificate certify_index(const RelayParams& p, int x, double lambda) {
    check_state(x, p);
    int capacity = p.K + 1;
    const ValueSolution probe = solve_threshold_system(open_chain(p, capacity), lambda, x);
    if (lambda > 0.0) {
        const double need = ((1.0 - p.f) * lambda / p.f + probe.sigma) / p.C;
        if (need > capacity - 1) capacity = static_cast<int>(std::min(std::ceil(need) + 2.0, 1e7));
    }
    const RelayParams open = open_chain(p, capacity);
    const ValueSolution sol = solve_threshold_system(open, lambda, x);
    const DpeResidual r = dpe_residual(open, sol);
    const Branches b = branch_values(open, sol.V, lambda, x);
    return {r.max_abs_residual, r.argmax_state, std::abs(b.active - b.passive), open.K};
}

struct IndexTable {
    int relay_id = 0;
    RelayParams relay;
    std::vector<int> grid;        // strictly increasing, grid.front() == 0, grid.back() == K
    std::vector<double> lambda;   // index at each grid state
    std::vector<std::string> diagnostics;

    // Exact at knots, piecewise linear in between.
    double lookup(int x) const {
        if (x < 0 || x > relay.K)
            throw std::domain_error("lookup state " + std::to_string(x) + " outside [0, " +
                                    std::to_string(relay.K) + "]");
        const auto it = std::lower_bound(grid.begin(), grid.end(), x);
        const auto hi = static_cast<std::size_t>(it - grid.begin());
        if (*it == x) return lambda[hi];
        const std::size_t lo = hi - 1;
        const double t = static_cast<double>(x - grid[lo]) / static_cast<double>(grid[hi] - grid[lo]);
        return lambda[lo] + t * (lambda[hi] - lambda[lo]);
    }
};

inline double lookup(const IndexTable& table, int x) { return table.lookup(x); }

inline std::vector<int> table_grid(int K, const WhittleConfig& cfg) {
    std::vector<int> grid;
    const int dense = std::min(cfg.dense_prefix, K);
    for (int x = 0; x <= dense; ++x) grid.push_back(x);
    const int stride = cfg.stride_for(K);
    for (int x = dense + stride; x < K; x += stride) grid.push_back(x);
    if (grid.back() != K) grid.push_back(K);
    return grid;
}

inline std::vector<std::string> monotonicity_diagnostics(const IndexTable& t, double tol = 1e-6) {
    std::vector<std::string> out;
    for (std::size_t i = 1; i < t.grid.size(); ++i)
        if (t.lambda[i] < t.lambda[i - 1] - tol)
            out.push_back("index decreases from state " + std::to_string(t.grid[i - 1]) + " (" +
                          std::to_string(t.lambda[i - 1]) + ") to state " + std::to_string(t.grid[i]) +
                          " (" + std::to_string(t.lambda[i]) + ")");
    return out;
}

inline IndexTable build_table(const RelayParams& p, const WhittleConfig& cfg = {}, int relay_id = 0) {
    check(cfg);
    IndexTable t;
    t.relay_id = relay_id;
    t.relay = p;
    t.grid = table_grid(p.K, cfg);
    t.lambda.reserve(t.grid.size());
    for (int x : t.grid) t.lambda.push_back(whittle_index(p, x, cfg));
    t.diagnostics = monotonicity_diagnostics(t);
    return t;
}

}  // namespace relaysel
