#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <vector>

#include "qnet/routing_base.hpp"

namespace qnet {

// Path metric M(P): bottleneck link latency lifted to the root of a balanced
// tree by iterating T(i) = ((3/2)T(i-1) + t_ab + t_cl)/p_ab for
// d = ceil(log2 |P|) levels. The recursion is authoritative.
inline double path_metric(std::span<const double> link_latencies, const PhysParams& p) {
    if (link_latencies.empty()) throw std::invalid_argument("path_metric: empty path");
    double t = *std::max_element(link_latencies.begin(), link_latencies.end());
    const int d = static_cast<int>(std::ceil(std::log2(static_cast<double>(link_latencies.size()))));
    for (int i = 0; i < d; ++i) t = (1.5 * t + p.t_ab + p.t_cl) / p.p_ab;
    return t;
}

inline double metric_from_summary(double max_link_latency, int link_count, const PhysParams& p) {
    double t = max_link_latency;
    const int d = static_cast<int>(std::ceil(std::log2(static_cast<double>(link_count))));
    for (int i = 0; i < d; ++i) t = (1.5 * t + p.t_ab + p.t_cl) / p.p_ab;
    return t;
}

// Metric weight of each link on the residual graph: the latency of the best
// pair rate both end nodes can jointly sustain.
inline std::vector<double> metric_link_weights(const NetworkGraph& g, const ResidualState& state,
                                               const PhysParams& p) {
    std::vector<double> w(g.link_count(), std::numeric_limits<double>::infinity());
    for (int e = 0; e < g.link_count(); ++e) {
        const Link& l = g.link(e);
        const double attempts = std::min(state.gen_rate[l.u], state.gen_rate[l.v]);
        if (attempts > 0.0) w[e] = 1.0 / (attempts * link_success_prob(l.length_km, p));
    }
    return w;
}

inline double path_metric_on_graph(const NetworkGraph& g, const ResidualState& state,
                                   std::span<const NodeId> path, const PhysParams& p) {
    std::vector<double> w = metric_link_weights(g, state, p);
    std::vector<double> lat;
    for (size_t i = 0; i + 1 < path.size(); ++i) {
        int e = g.link_between(path[i], path[i + 1]);
        if (e < 0) throw std::invalid_argument("path_metric_on_graph: missing link");
        lat.push_back(w[e]);
    }
    return path_metric(lat, p);
}

inline std::vector<NodeId> strip_cycles(const std::vector<NodeId>& walk) {
    std::vector<NodeId> out;
    for (NodeId v : walk) {
        auto it = std::find(out.begin(), out.end(), v);
        if (it != out.end()) out.erase(it + 1, out.end());
        else out.push_back(v);
    }
    return out;
}

namespace detail_bal {

struct Label {
    double metric;
    double max_lat;
    int count;
    NodeId node;
    int pred_label;  // index into the label pool
};

}  // namespace detail_bal

// Minimum-M path via a Dijkstra-style label search. Each label carries the
// (bottleneck latency, link count) summary that determines M; extending a
// path never lowers either, so labels can be settled in M order. Dominated
// labels (both summaries no better) are pruned per node.
inline std::optional<std::vector<NodeId>> min_metric_path(const NetworkGraph& g,
                                                          const ResidualState& state, NodeId s,
                                                          NodeId d, const PhysParams& p,
                                                          int max_links = -1) {
    using detail_bal::Label;
    const std::vector<double> w = metric_link_weights(g, state, p);
    std::vector<Label> pool;
    std::vector<std::vector<int>> frontier(g.node_count());
    using QEntry = std::pair<double, int>;  // (metric, label index)
    std::priority_queue<QEntry, std::vector<QEntry>, std::greater<>> queue;

    pool.push_back({0.0, 0.0, 0, s, -1});
    queue.push({0.0, 0});

    auto dominated = [&](NodeId v, double max_lat, int count) {
        for (int li : frontier[v]) {
            const Label& o = pool[li];
            if (o.max_lat <= max_lat && o.count <= count) return true;
        }
        return false;
    };

    while (!queue.empty()) {
        auto [m, li] = queue.top();
        queue.pop();
        Label lab = pool[li];
        if (lab.node == d) {
            std::vector<NodeId> walk;
            for (int cur = li; cur >= 0; cur = pool[cur].pred_label) walk.push_back(pool[cur].node);
            std::reverse(walk.begin(), walk.end());
            std::vector<NodeId> path = strip_cycles(walk);
            if (path.size() >= 2) return path;
            continue;
        }
        if (dominated(lab.node, lab.max_lat, lab.count)) continue;
        frontier[lab.node].push_back(li);
        // interior relaxation needs swap memory at this node
        if (lab.node != s && state.free_memory[lab.node] < 2) continue;
        if (max_links >= 0 && lab.count >= max_links) continue;
        for (int e : g.incident(lab.node)) {
            if (!(w[e] < std::numeric_limits<double>::infinity())) continue;
            const NodeId to = g.link(e).other(lab.node);
            if (to == s) continue;
            const double max_lat = std::max(lab.max_lat, w[e]);
            const int count = lab.count + 1;
            if (dominated(to, max_lat, count)) continue;
            const double metric = metric_from_summary(max_lat, count, p);
            pool.push_back({metric, max_lat, count, to, li});
            queue.push({metric, static_cast<int>(pool.size()) - 1});
        }
    }
    return std::nullopt;
}

// Balanced-tree heuristic: the min-M path and the throttled balanced tree
// over it. No fidelity filtering in this variant.
inline std::optional<RouteResult> best_balanced_path(const NetworkGraph& g,
                                                     const ResidualState& state, NodeId s, NodeId d,
                                                     const PhysParams& p) {
    if (s == d) throw std::invalid_argument("best_balanced_path: source equals destination");
    if (state.free_memory[s] < 1 || state.free_memory[d] < 1) return std::nullopt;
    auto path = min_metric_path(g, state, s, d, p);
    if (!path) return std::nullopt;
    auto tree = throttled_balanced_tree(g, state, *path, p);
    if (!tree) return std::nullopt;
    return make_route_result(std::move(*tree));
}

// Age of a balanced tree approximated from its root latency and leaf count:
// the deepest leaf sits at depth ceil(log2 L).
inline double balanced_age_estimate(double root_latency, int leaf_count, double max_leaf_len_km,
                                    const PhysParams& p) {
    const int depth = leaf_count > 1
                          ? static_cast<int>(std::ceil(std::log2(static_cast<double>(leaf_count))))
                          : 0;
    const double gamma = (2.0 / 3.0) * p.p_ab;
    double sum = 0.0;
    for (int i = 0; i <= depth; ++i) sum += 0.25 * root_latency * std::pow(gamma, i);
    return sum + p.t_ob + photon_transit_time(max_leaf_len_km);
}

// Fidelity-constrained variant: per-length optimal bottleneck paths for
// lengths 1..tau_l (row l depends only on row l-1), then the min-M feasible
// one under the leaf and approximate-age tests.
inline std::optional<RouteResult> best_balanced_path_per_length(const NetworkGraph& g,
                                                                const ResidualState& state,
                                                                NodeId s, NodeId d,
                                                                const PhysParams& p) {
    if (s == d)
        throw std::invalid_argument("best_balanced_path_per_length: source equals destination");
    if (state.free_memory[s] < 1 || state.free_memory[d] < 1) return std::nullopt;
    const double inf = std::numeric_limits<double>::infinity();
    const std::vector<double> w = metric_link_weights(g, state, p);
    const int n = g.node_count();

    std::vector<double> prev(n, inf), cur(n, inf);
    std::vector<std::vector<NodeId>> prev_pred(p.tau_l + 1, std::vector<NodeId>(n, -1));
    std::vector<std::vector<double>> rows(p.tau_l + 1, std::vector<double>(n, inf));
    prev[s] = 0.0;
    rows[0][s] = 0.0;

    for (int len = 1; len <= p.tau_l; ++len) {
        std::fill(cur.begin(), cur.end(), inf);
        for (int e = 0; e < g.link_count(); ++e) {
            if (!(w[e] < inf)) continue;
            const Link& l = g.link(e);
            for (auto [from, to] : {std::pair{l.u, l.v}, std::pair{l.v, l.u}}) {
                if (!(prev[from] < inf)) continue;
                if (from != s && state.free_memory[from] < 2) continue;  // becomes interior
                const double cand = std::max(prev[from], w[e]);
                if (cand < cur[to]) {
                    cur[to] = cand;
                    prev_pred[len][to] = from;
                }
            }
        }
        rows[len] = cur;
        std::swap(prev, cur);
    }

    std::optional<RouteResult> best;
    double best_metric = inf;
    for (int len = 1; len <= p.tau_l; ++len) {
        if (!(rows[len][d] < inf)) continue;
        std::vector<NodeId> walk{d};
        for (int l = len, v = d; l >= 1; --l) {
            v = prev_pred[l][v];
            if (v < 0) { walk.clear(); break; }
            walk.push_back(v);
        }
        if (walk.empty()) continue;
        std::reverse(walk.begin(), walk.end());
        std::vector<NodeId> path = strip_cycles(walk);
        if (path.size() < 2 || path.front() != s || path.back() != d) continue;
        if (static_cast<int>(path.size()) - 1 > p.tau_l) continue;

        auto tree = throttled_balanced_tree(g, state, path, p);
        if (!tree) continue;
        double max_len = 0.0;
        for (int leaf : tree->leaves_in_order())
            max_len = std::max(max_len, tree->verts[leaf].leaf_length_km);
        const double est_age = balanced_age_estimate(tree->root_latency(), tree->leaf_count(),
                                                     max_len, p);
        if (est_age > p.tau_d) continue;

        std::vector<double> lat;
        for (size_t i = 0; i + 1 < path.size(); ++i)
            lat.push_back(w[g.link_between(path[i], path[i + 1])]);
        const double metric = path_metric(lat, p);
        if (metric < best_metric * (1.0 - kLatencyRelTol)) {
            best_metric = metric;
            best = make_route_result(std::move(*tree));
        }
    }
    return best;
}

}  // namespace qnet
