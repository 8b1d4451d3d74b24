#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <sstream>
#include <vector>

#include "qnet/graph.hpp"
#include "qnet/params.hpp"
#include "qnet/swap_tree.hpp"

namespace qnet {

struct RouterOptions {
    int    usage_grid_step = 10;   // usage grid granularity, percent points
    double height_cap_factor = 2.0;  // height cap c in ceil(c log2 n)
};

inline int height_cap(int n, const RouterOptions& opt = {}) {
    if (n < 2) return 1;
    return static_cast<int>(std::ceil(opt.height_cap_factor * std::log2(static_cast<double>(n))));
}

// A routed swapping tree, throttled, with leaf latencies reflecting the
// capacity shares actually committed. raw_tree keeps the annotation before
// throttling (same root latency, faster leaves).
struct RouteResult {
    SwappingTree tree;
    SwappingTree raw_tree;
    std::vector<NodeId> path;
    double latency = 0.0;
    double rate = 0.0;
};

inline RouteResult make_route_result(SwappingTree tree, SwappingTree raw = {}) {
    RouteResult r;
    r.path = tree_path(tree);
    r.latency = tree.root_latency();
    r.rate = 1.0 / r.latency;
    r.tree = std::move(tree);
    r.raw_tree = raw.empty() ? r.tree : std::move(raw);
    return r;
}

// Capacity share a path grants each node towards one adjacent link: path
// interiors feed two links and split evenly; endpoints feed one.
inline double path_share(const std::vector<NodeId>& path, size_t pos) {
    return (pos == 0 || pos + 1 == path.size()) ? 1.0 : 0.5;
}

inline bool path_memory_ok(const ResidualState& state, std::span<const NodeId> path) {
    for (size_t i = 0; i < path.size(); ++i) {
        int need = (i == 0 || i + 1 == path.size()) ? 1 : 2;
        if (state.free_memory[path[i]] < need) return false;
    }
    return true;
}

// Throttled balanced tree over a path, with leaf rates capped by the
// residual generation capacity shares. Returns nullopt when a link is
// missing or some node has no residual capacity or memory.
inline std::optional<SwappingTree> throttled_balanced_tree(const NetworkGraph& g,
                                                           const ResidualState& state,
                                                           const std::vector<NodeId>& path,
                                                           const PhysParams& p) {
    if (path.size() < 2) return std::nullopt;
    if (!path_memory_ok(state, path)) return std::nullopt;
    std::vector<double> leaf_lat(path.size() - 1);
    std::vector<double> leaf_len(path.size() - 1);
    for (size_t t = 0; t + 1 < path.size(); ++t) {
        int idx = g.link_between(path[t], path[t + 1]);
        if (idx < 0) return std::nullopt;
        const double cap_a = path_share(path, t) * state.gen_rate[path[t]];
        const double cap_b = path_share(path, t + 1) * state.gen_rate[path[t + 1]];
        const double attempts = std::min(cap_a, cap_b);
        if (attempts <= 0.0) return std::nullopt;
        leaf_len[t] = g.link(idx).length_km;
        leaf_lat[t] = 1.0 / (attempts * link_success_prob(leaf_len[t], p));
    }
    SwappingTree tree = balanced_tree_over_path(path);
    std::vector<int> leaves = tree.leaves_in_order();
    for (size_t t = 0; t < leaves.size(); ++t) tree.verts[leaves[t]].leaf_length_km = leaf_len[t];
    annotate_tree_latency(tree, leaf_lat, p);
    return throttle(std::move(tree), p);
}

// Same construction, returned before throttling.
inline std::optional<SwappingTree> raw_balanced_tree(const NetworkGraph& g,
                                                     const ResidualState& state,
                                                     const std::vector<NodeId>& path,
                                                     const PhysParams& p) {
    auto tree = throttled_balanced_tree(g, state, path, p);
    if (!tree) return std::nullopt;
    SwappingTree raw = *tree;
    std::vector<double> leaf_lat;
    for (size_t t = 0; t + 1 < path.size(); ++t) {
        int idx = g.link_between(path[t], path[t + 1]);
        const double cap_a = path_share(path, t) * state.gen_rate[path[t]];
        const double cap_b = path_share(path, t + 1) * state.gen_rate[path[t + 1]];
        leaf_lat.push_back(1.0 / (std::min(cap_a, cap_b) *
                                  link_success_prob(g.link(idx).length_km, p)));
    }
    annotate_tree_latency(raw, leaf_lat, p);
    return raw;
}

// Commit a throttled tree's leaf rates and memory demand; returns the new
// state. Fails identifying the violated node.
inline ResidualState apply_residual(ResidualState state, const SwappingTree& tree,
                                    const NetworkGraph& g, const PhysParams& p) {
    if (tree.empty()) return state;
    const std::vector<NodeId> path = tree_path(tree);
    for (int leaf : tree.leaves_in_order()) {
        const TreeVertex& t = tree.verts[leaf];
        int idx = g.link_between(t.a, t.b);
        if (idx < 0) throw std::invalid_argument("apply_residual: leaf is not a network link");
        const double rate = 1.0 / t.latency;
        const double attempts = rate / link_success_prob(g.link(idx).length_km, p);
        for (NodeId n : {t.a, t.b}) {
            state.gen_rate[n] -= attempts;
            if (state.gen_rate[n] < -1e-9 * (1.0 / g.node(n).gen_interval)) {
                std::ostringstream msg;
                msg << "apply_residual: generation capacity exceeded at node " << n;
                throw CapacityError(n, msg.str());
            }
        }
        state.link_rate[idx] += rate;
    }
    for (size_t i = 0; i < path.size(); ++i) {
        int need = (i == 0 || i + 1 == path.size()) ? 1 : 2;
        state.free_memory[path[i]] -= need;
        if (state.free_memory[path[i]] < 0) {
            std::ostringstream msg;
            msg << "apply_residual: memory exceeded at node " << path[i];
            throw CapacityError(path[i], msg.str());
        }
    }
    return state;
}

// Exact inverse of apply_residual for the same tree.
inline ResidualState release_residual(ResidualState state, const SwappingTree& tree,
                                      const NetworkGraph& g, const PhysParams& p) {
    if (tree.empty()) return state;
    const std::vector<NodeId> path = tree_path(tree);
    for (int leaf : tree.leaves_in_order()) {
        const TreeVertex& t = tree.verts[leaf];
        int idx = g.link_between(t.a, t.b);
        if (idx < 0) throw std::invalid_argument("release_residual: leaf is not a network link");
        const double rate = 1.0 / t.latency;
        const double attempts = rate / link_success_prob(g.link(idx).length_km, p);
        state.gen_rate[t.a] += attempts;
        state.gen_rate[t.b] += attempts;
        state.link_rate[idx] -= rate;
    }
    for (size_t i = 0; i < path.size(); ++i)
        state.free_memory[path[i]] += (i == 0 || i + 1 == path.size()) ? 1 : 2;
    return state;
}

}  // namespace qnet
