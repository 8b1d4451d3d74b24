#pragma once

#include <algorithm>
#include <functional>
#include <optional>
#include <unordered_set>
#include <vector>

#include "qnet/balanced_router.hpp"
#include "qnet/dp_router.hpp"
#include "qnet/routing_base.hpp"

namespace qnet {

enum class InnerAlgo { DpApprox, Balanced };

struct IterOptions {
    double min_rate = 0.1;  // stop once the best candidate rate drops below
    RouterOptions router;
};

struct IterResult {
    std::vector<std::vector<RouteResult>> trees_per_pair;
    ResidualState final_state;
    double aggregate_rate = 0.0;
};

// Iterative augmentation for multiple pairs: each round routes every pair on
// the residual graph, commits the highest-rate throttled tree, and repeats
// until no candidate clears min_rate. Candidates are only recomputed for
// pairs whose previous tree touched the committed nodes; residual rates
// elsewhere are unchanged so the cached candidate is still optimal. Flows
// never cancel: residuals only decrease.
inline IterResult iter_route(const NetworkGraph& g,
                             const std::vector<std::pair<NodeId, NodeId>>& pairs, InnerAlgo inner,
                             const PhysParams& p, const IterOptions& opt = {}) {
    if (pairs.empty()) throw std::invalid_argument("iter_route: no pairs");
    if (opt.min_rate <= 0.0) throw std::invalid_argument("iter_route: min_rate must be positive");

    IterResult res;
    res.trees_per_pair.resize(pairs.size());
    ResidualState state = ResidualState::full(g);

    auto candidate = [&](size_t idx) -> std::optional<RouteResult> {
        auto [s, d] = pairs[idx];
        if (inner == InnerAlgo::DpApprox) {
            // route with DP-Approx, then commit the throttled balanced tree
            // over its path
            auto r = dp_approx(g, state, s, d, p, opt.router);
            if (!r) return std::nullopt;
            auto bal = throttled_balanced_tree(g, state, r->path, p);
            if (!bal) return std::nullopt;
            return make_route_result(std::move(*bal));
        }
        return best_balanced_path_per_length(g, state, s, d, p);
    };

    std::vector<std::optional<RouteResult>> cand(pairs.size());
    std::vector<char> dirty(pairs.size(), 1);

    while (true) {
        for (size_t i = 0; i < pairs.size(); ++i)
            if (dirty[i]) {
                cand[i] = candidate(i);
                dirty[i] = 0;
            }
        int best = -1;
        for (size_t i = 0; i < pairs.size(); ++i)
            if (cand[i] && (best < 0 || cand[i]->rate > cand[best]->rate))
                best = static_cast<int>(i);
        if (best < 0 || cand[best]->rate < opt.min_rate) break;

        state = apply_residual(std::move(state), cand[best]->tree, g, p);
        res.aggregate_rate += cand[best]->rate;
        std::unordered_set<NodeId> touched(cand[best]->path.begin(), cand[best]->path.end());
        res.trees_per_pair[best].push_back(std::move(*cand[best]));
        for (size_t i = 0; i < pairs.size(); ++i) {
            if (static_cast<int>(i) == best) { dirty[i] = 1; continue; }
            if (!cand[i]) continue;  // a shrinking graph cannot make it feasible
            for (NodeId v : cand[i]->path)
                if (touched.count(v)) { dirty[i] = 1; break; }
        }
    }
    res.final_state = std::move(state);
    return res;
}

// Fraction of pairs that received at least one tree.
inline double fairness(const IterResult& res, size_t pair_count) {
    if (pair_count == 0) return 0.0;
    size_t served = 0;
    for (const auto& trees : res.trees_per_pair)
        if (!trees.empty()) ++served;
    return static_cast<double>(served) / static_cast<double>(pair_count);
}

}  // namespace qnet
