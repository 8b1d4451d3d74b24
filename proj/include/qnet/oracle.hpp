#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <sstream>
#include <vector>

#include "qnet/dp_router.hpp"
#include "qnet/routing_base.hpp"

namespace qnet {

struct OracleBudgetError : std::runtime_error {
    uint64_t paths = 0;
    uint64_t evals = 0;
    OracleBudgetError(uint64_t np, uint64_t ne, const std::string& what)
        : std::runtime_error(what), paths(np), evals(ne) {}
};

struct OracleOptions {
    uint64_t max_candidates = 400'000'000;  // (path, split, shape) evaluations
};

struct OracleOutcome {
    std::optional<RouteResult> best;
    uint64_t paths = 0;
    uint64_t candidates = 0;
};

namespace detail_oracle {

struct ShapeNode {
    int left = -1, right = -1;
    int leaf_pos = -1;
    int lo = 0, hi = 0;  // covered leaf range [lo, hi)
};

struct Shape {
    std::vector<ShapeNode> nodes;  // children precede parents
    int root = -1;
    int height = 0;
    // per qubit: (leaf position, left side, depth where the extreme-climb
    // stops, leaf depth); drives the expected-age partial sums
    struct Qubit {
        int leaf, dstart, dleaf;
        bool left_side;
    };
    std::vector<Qubit> qubits;
};

inline void enumerate_shapes_rec(int lo, int hi, std::vector<Shape>& out) {
    // generates all full binary trees over leaf positions [lo, hi)
    if (hi - lo == 1) {
        Shape s;
        ShapeNode n;
        n.leaf_pos = lo;
        n.lo = lo;
        n.hi = hi;
        s.nodes.push_back(n);
        s.root = 0;
        out.push_back(std::move(s));
        return;
    }
    for (int m = lo + 1; m < hi; ++m) {
        std::vector<Shape> ls, rs;
        enumerate_shapes_rec(lo, m, ls);
        enumerate_shapes_rec(m, hi, rs);
        for (const Shape& a : ls)
            for (const Shape& b : rs) {
                Shape s;
                s.nodes = a.nodes;
                const int off = static_cast<int>(a.nodes.size());
                for (ShapeNode n : b.nodes) {
                    if (n.left >= 0) { n.left += off; n.right += off; }
                    s.nodes.push_back(n);
                }
                ShapeNode root;
                root.left = a.root;
                root.right = b.root + off;
                root.lo = lo;
                root.hi = hi;
                s.nodes.push_back(root);
                s.root = static_cast<int>(s.nodes.size()) - 1;
                out.push_back(std::move(s));
            }
    }
}

inline void finalize_shape(Shape& s) {
    const int n = static_cast<int>(s.nodes.size());
    std::vector<int> parent(n, -1), depth(n, 0);
    for (int v = n - 1; v >= 0; --v) {
        const ShapeNode& nd = s.nodes[v];
        if (nd.left >= 0) {
            parent[nd.left] = v;
            parent[nd.right] = v;
        }
    }
    std::vector<int> order{s.root};
    for (size_t q = 0; q < order.size(); ++q) {
        int v = order[q];
        if (s.nodes[v].left >= 0) {
            depth[s.nodes[v].left] = depth[v] + 1;
            depth[s.nodes[v].right] = depth[v] + 1;
            order.push_back(s.nodes[v].left);
            order.push_back(s.nodes[v].right);
        }
    }
    s.height = 0;
    for (int v = 0; v < n; ++v)
        if (s.nodes[v].leaf_pos >= 0) s.height = std::max(s.height, depth[v]);
    for (int v = 0; v < n; ++v) {
        if (s.nodes[v].leaf_pos < 0) continue;
        for (bool left_side : {true, false}) {
            int cur = v;
            while (parent[cur] >= 0) {
                const ShapeNode& pa = s.nodes[parent[cur]];
                if ((left_side && pa.left == cur) || (!left_side && pa.right == cur))
                    cur = parent[cur];
                else
                    break;
            }
            s.qubits.push_back({s.nodes[v].leaf_pos, depth[cur], depth[v], left_side});
        }
    }
}

inline const std::vector<Shape>& shapes_for(int k) {
    static std::vector<std::vector<Shape>> cache(1);
    while (static_cast<int>(cache.size()) <= k) {
        int kk = static_cast<int>(cache.size());
        std::vector<Shape> out;
        enumerate_shapes_rec(0, kk, out);
        for (Shape& s : out) finalize_shape(s);
        cache.push_back(std::move(out));
    }
    return cache[k];
}

inline uint64_t shape_count(int k) { return shapes_for(k).size(); }

}  // namespace detail_oracle

// Exhaustive reference optimum: every simple path of at most max_links links,
// every binary tree shape over it (within the shared height cap), every
// usage split on the shared grid, filtered by the leaf and age thresholds.
inline OracleOutcome brute_force_opt(const NetworkGraph& g, const ResidualState& state, NodeId s,
                                     NodeId d, const PhysParams& p, int max_links,
                                     const OracleOptions& oopt = {},
                                     const RouterOptions& ropt = {}) {
    using namespace detail_oracle;
    if (s == d) throw std::invalid_argument("brute_force_opt: source equals destination");
    const detail_dp::UsageGrid grid(ropt.usage_grid_step);
    const int H = height_cap(g.node_count(), ropt);
    const int max_k = std::min(max_links, std::min(p.tau_l, g.node_count() - 1));

    OracleOutcome out;
    if (state.free_memory[s] < 1 || state.free_memory[d] < 1) return out;

    const double gamma = (2.0 / 3.0) * p.p_ab;
    std::vector<double> gsum(H + 2, 0.0);  // gsum[i] = sum_{j<i} gamma^j
    for (int i = 1; i <= H + 1; ++i) gsum[i] = gsum[i - 1] + std::pow(gamma, i - 1);

    struct Best {
        double lat = std::numeric_limits<double>::infinity();
        int leaves = 0, height = 0;
        std::vector<NodeId> path;
        std::vector<int> splits;
        int shape = -1;
    } best;

    std::vector<NodeId> path{s};
    std::vector<char> visited(g.node_count(), 0);
    visited[s] = 1;

    auto process_path = [&](const std::vector<NodeId>& pa) {
        const int k = static_cast<int>(pa.size()) - 1;
        std::vector<double> plink(k), tp(k), cap(k + 1);
        double tp_max = 0.0;
        for (int t = 0; t < k; ++t) {
            int e = g.link_between(pa[t], pa[t + 1]);
            plink[t] = link_success_prob(g.link(e).length_km, p);
            tp[t] = photon_transit_time(g.link(e).length_km);
            tp_max = std::max(tp_max, tp[t]);
        }
        for (int t = 0; t <= k; ++t) cap[t] = state.gen_rate[pa[t]];

        const std::vector<Shape>& shapes = shapes_for(k);
        std::vector<int> usable;
        for (size_t i = 0; i < shapes.size(); ++i)
            if (shapes[i].height <= H) usable.push_back(static_cast<int>(i));
        if (usable.empty()) return;

        std::vector<int> split(k > 0 ? k - 1 : 0, 0);
        std::vector<double> leaf_lat(k), lat;
        while (true) {
            bool feasible = true;
            for (int t = 0; t < k && feasible; ++t) {
                const double ca =
                    (t == 0 ? 1.0 : grid.frac(grid.split_right(split[t - 1]))) * cap[t];
                const double cb =
                    (t == k - 1 ? 1.0 : grid.frac(grid.split_left(split[t]))) * cap[t + 1];
                const double attempts = std::min(ca, cb);
                if (attempts <= 0.0) feasible = false;
                else leaf_lat[t] = 1.0 / (attempts * plink[t]);
            }
            if (feasible) {
                for (int si : usable) {
                    const Shape& sh = shapes[si];
                    if (++out.candidates > oopt.max_candidates) {
                        std::ostringstream msg;
                        msg << "brute_force_opt: budget exceeded after " << out.paths
                            << " paths and " << out.candidates << " candidates";
                        throw OracleBudgetError(out.paths, out.candidates, msg.str());
                    }
                    lat.resize(sh.nodes.size());
                    for (size_t v = 0; v < sh.nodes.size(); ++v) {
                        const ShapeNode& nd = sh.nodes[v];
                        lat[v] = nd.leaf_pos >= 0
                                     ? leaf_lat[nd.leaf_pos]
                                     : parent_latency(lat[nd.left], lat[nd.right], p);
                    }
                    const double T = lat[sh.root];
                    // age screen: cheap bounds, exact only near the threshold
                    const double hi = (k == 1 ? 0.0 : 0.25 * T * gsum[sh.height + 1]) + p.t_ob +
                                      tp_max;
                    if (hi > p.tau_d) {
                        double age = 0.0;
                        for (const Shape::Qubit& q : sh.qubits) {
                            const double waits =
                                k == 1 ? 0.0 : 0.25 * T * (gsum[q.dleaf + 1] - gsum[q.dstart]);
                            age = std::max(age, waits + p.t_ob + tp[q.leaf]);
                        }
                        if (age > p.tau_d) continue;
                    }
                    const bool better =
                        T < best.lat * (1.0 - kLatencyRelTol) ||
                        (nearly_equal(T, best.lat) &&
                         (k < best.leaves || (k == best.leaves && sh.height < best.height)));
                    if (better) {
                        best.lat = T;
                        best.leaves = k;
                        best.height = sh.height;
                        best.path = pa;
                        best.splits = split;
                        best.shape = si;
                    }
                }
            }
            // odometer
            int pos = 0;
            for (; pos < k - 1; ++pos) {
                if (++split[pos] < grid.splits()) break;
                split[pos] = 0;
            }
            if (k <= 1 || pos == k - 1) break;
        }
    };

    std::function<void(NodeId)> dfs = [&](NodeId v) {
        if (v == d) {
            ++out.paths;
            process_path(path);
            return;
        }
        if (static_cast<int>(path.size()) - 1 >= max_k) return;
        if (v != s && state.free_memory[v] < 2) return;  // v would be interior
        for (int e : g.incident(v)) {
            NodeId to = g.link(e).other(v);
            if (visited[to]) continue;
            visited[to] = 1;
            path.push_back(to);
            dfs(to);
            path.pop_back();
            visited[to] = 0;
        }
    };
    dfs(s);

    if (best.shape < 0) return out;

    // rebuild the winning tree
    const Shape& sh = shapes_for(best.leaves)[best.shape];
    const int k = best.leaves;
    std::vector<double> leaf_lat(k);
    for (int t = 0; t < k; ++t) {
        const double ca =
            (t == 0 ? 1.0 : grid.frac(grid.split_right(best.splits[t - 1]))) *
            state.gen_rate[best.path[t]];
        const double cb =
            (t == k - 1 ? 1.0 : grid.frac(grid.split_left(best.splits[t]))) *
            state.gen_rate[best.path[t + 1]];
        int e = g.link_between(best.path[t], best.path[t + 1]);
        leaf_lat[t] = 1.0 / (std::min(ca, cb) * link_success_prob(g.link(e).length_km, p));
    }
    SwappingTree tree;
    std::vector<int> vmap(sh.nodes.size(), -1);
    for (size_t v = 0; v < sh.nodes.size(); ++v) {
        const ShapeNode& nd = sh.nodes[v];
        TreeVertex tv;
        if (nd.leaf_pos >= 0) {
            tv.a = best.path[nd.leaf_pos];
            tv.b = best.path[nd.leaf_pos + 1];
            tv.latency = leaf_lat[nd.leaf_pos];
            tv.leaf_length_km = g.link(g.link_between(tv.a, tv.b)).length_km;
        } else {
            tv.left = vmap[nd.left];
            tv.right = vmap[nd.right];
            tv.a = tree.verts[tv.left].a;
            tv.b = tree.verts[tv.right].b;
            tv.swap_node = tree.verts[tv.left].b;
            tv.latency = parent_latency(tree.verts[tv.left].latency,
                                        tree.verts[tv.right].latency, p);
        }
        vmap[v] = static_cast<int>(tree.verts.size());
        tree.verts.push_back(tv);
    }
    tree.root = vmap[sh.root];
    tree = throttle(std::move(tree), p);
    out.best = make_route_result(std::move(tree));
    return out;
}

// Number of binary tree shapes over a k-link path (the Catalan numbers).
inline uint64_t oracle_shape_count(int k) { return detail_oracle::shape_count(k); }

}  // namespace qnet
