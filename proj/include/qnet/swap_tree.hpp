#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "qnet/graph.hpp"
#include "qnet/params.hpp"

namespace qnet {

// Relative tolerance for latency equality throughout the tree analytics.
inline constexpr double kLatencyRelTol = 1e-9;

inline bool nearly_equal(double a, double b, double rel = kLatencyRelTol) {
    return std::fabs(a - b) <= rel * std::max({std::fabs(a), std::fabs(b), 1e-300});
}

struct TreeVertex {
    NodeId a = -1, b = -1;     // endpoints of the pair this vertex generates
    double latency = 0.0;      // expected generation latency [s]
    int    left = -1, right = -1;  // child vertex indices; -1,-1 for a leaf
    NodeId swap_node = -1;         // shared node of the two children
    double leaf_length_km = 0.0;   // physical link length, leaves only

    bool is_leaf() const { return left < 0; }
};

// Full binary tree over the ordered links of a simple path. Leaves are
// network links; each internal vertex is the swap of its two children at
// swap_node. Value type: all operations below are pure.
struct SwappingTree {
    std::vector<TreeVertex> verts;
    int root = -1;

    bool empty() const { return root < 0; }
    const TreeVertex& at(int i) const { return verts.at(i); }

    int leaf_count() const { return count_leaves(root); }
    int height() const { return height_of(root); }
    double root_latency() const { return verts.at(root).latency; }

    int count_leaves(int v) const {
        if (v < 0) return 0;
        const TreeVertex& t = verts[v];
        return t.is_leaf() ? 1 : count_leaves(t.left) + count_leaves(t.right);
    }
    int height_of(int v) const {
        if (v < 0) return -1;
        const TreeVertex& t = verts[v];
        return t.is_leaf() ? 0 : 1 + std::max(height_of(t.left), height_of(t.right));
    }

    // Leaf vertex indices in path order.
    std::vector<int> leaves_in_order() const {
        std::vector<int> out;
        collect_leaves(root, out);
        return out;
    }

  private:
    void collect_leaves(int v, std::vector<int>& out) const {
        if (v < 0) return;
        const TreeVertex& t = verts[v];
        if (t.is_leaf()) { out.push_back(v); return; }
        collect_leaves(t.left, out);
        collect_leaves(t.right, out);
    }
};

// Expected latency of a parent pair from its two children (Bell-measurement
// retry recursion): ((3/2)max(tl,tr) + t_ab + t_cl) / p_ab. Exact when the
// children are equal (throttled trees), an upper bound otherwise.
inline double parent_latency(double t_left, double t_right, const PhysParams& p) {
    return (1.5 * std::max(t_left, t_right) + p.t_ab + p.t_cl) / p.p_ab;
}

inline void annotate_up(SwappingTree& tree, int v, const PhysParams& p);

// Bottom-up latency annotation from per-leaf latencies (path order).
// Returns the root latency.
inline double annotate_tree_latency(SwappingTree& tree, std::span<const double> leaf_latencies,
                                    const PhysParams& p) {
    std::vector<int> leaves = tree.leaves_in_order();
    if (leaves.size() != leaf_latencies.size())
        throw std::invalid_argument("annotate_tree_latency: leaf latency count mismatch");
    for (size_t i = 0; i < leaves.size(); ++i) {
        if (leaf_latencies[i] <= 0.0)
            throw std::invalid_argument("annotate_tree_latency: leaf latency must be positive");
        tree.verts[leaves[i]].latency = leaf_latencies[i];
    }
    annotate_up(tree, tree.root, p);
    return tree.root_latency();
}

inline void annotate_up(SwappingTree& tree, int v, const PhysParams& p) {
    TreeVertex& t = tree.verts[v];
    if (t.is_leaf()) return;
    annotate_up(tree, t.left, p);
    annotate_up(tree, t.right, p);
    t.latency = parent_latency(tree.verts[t.left].latency, tree.verts[t.right].latency, p);
}

// Throttle: equalize sibling latencies so every parent satisfies the latency
// recursion with equality. Works top-down from the root, whose latency is
// unchanged; leaf rates only decrease.
inline SwappingTree throttle(SwappingTree tree, const PhysParams& p) {
    if (tree.empty()) return tree;
    std::vector<int> stack{tree.root};
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        TreeVertex& t = tree.verts[v];
        if (t.is_leaf()) continue;
        const double child = (2.0 / 3.0) * (t.latency * p.p_ab - p.t_cl - p.t_ab);
        if (child <= 0.0)
            throw std::logic_error("throttle: inconsistent latency annotation");
        tree.verts[t.left].latency = child;
        tree.verts[t.right].latency = child;
        stack.push_back(t.left);
        stack.push_back(t.right);
    }
    return tree;
}

inline bool is_throttled(const SwappingTree& tree, const PhysParams& p) {
    for (const TreeVertex& t : tree.verts) {
        if (t.is_leaf()) continue;
        const TreeVertex& l = tree.verts[t.left];
        const TreeVertex& r = tree.verts[t.right];
        if (!nearly_equal(l.latency, r.latency)) return false;
        if (!nearly_equal(t.latency, parent_latency(l.latency, r.latency, p))) return false;
    }
    return true;
}

// Expected latency T(i) of a pair at depth i of a throttled tree with root
// latency T, ignoring the additive BSM/classical terms:
// T(i) = (T/2) ((2/3) p_ab)^i. The per-qubit expected wait at depth i is
// T(i)/2. The printed formula gives T/2 at i = 0 and is used as such.
inline double depth_latency(double root_latency, int depth, const PhysParams& p) {
    if (depth < 0) throw std::invalid_argument("depth_latency: negative depth");
    const double gamma = (2.0 / 3.0) * p.p_ab;
    return 0.5 * root_latency * std::pow(gamma, depth);
}

struct QubitAge {
    int    leaf = -1;       // leaf vertex index
    NodeId node = -1;       // node holding the qubit
    bool   left_side = false;
    double age = 0.0;       // expected storage time [s]
};

struct AgeProfile {
    std::vector<QubitAge> qubits;
    double tree_age = 0.0;  // max over qubits
};

// Expected age of every leaf qubit. A qubit q born at a leaf survives while
// its containing pair waits for siblings, one level per ancestor of the
// maximal subtree having the leaf as extreme (left qubit: leftmost; right
// qubit: rightmost): A(q) = sum_{i=d..d+d'} T(i)/2 + (t_ob + t_p).
inline AgeProfile qubit_ages(const SwappingTree& tree, const PhysParams& p) {
    AgeProfile out;
    if (tree.empty()) return out;
    const double T = tree.root_latency();

    // depth and parent arrays
    std::vector<int> parent(tree.verts.size(), -1), depth(tree.verts.size(), 0);
    std::vector<int> stack{tree.root};
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        const TreeVertex& t = tree.verts[v];
        if (t.is_leaf()) continue;
        parent[t.left] = v;
        parent[t.right] = v;
        depth[t.left] = depth[v] + 1;
        depth[t.right] = depth[v] + 1;
        stack.push_back(t.left);
        stack.push_back(t.right);
    }

    const double gamma = (2.0 / 3.0) * p.p_ab;
    auto wait_sum = [&](int from_depth, int to_depth) {
        double s = 0.0;
        for (int i = from_depth; i <= to_depth; ++i)
            s += 0.25 * T * std::pow(gamma, i);
        return s;
    };

    for (int leaf : tree.leaves_in_order()) {
        for (bool left_side : {true, false}) {
            // climb while the leaf stays the extreme on this side
            int v = leaf;
            while (parent[v] >= 0) {
                const TreeVertex& pa = tree.verts[parent[v]];
                if ((left_side && pa.left == v) || (!left_side && pa.right == v))
                    v = parent[v];
                else
                    break;
            }
            QubitAge q;
            q.leaf = leaf;
            q.left_side = left_side;
            q.node = left_side ? tree.verts[leaf].a : tree.verts[leaf].b;
            // a lone link has no swapping ancestors: nothing ever waits
            const double waits = depth[leaf] == 0 ? 0.0 : wait_sum(depth[v], depth[leaf]);
            q.age = waits + p.t_ob + photon_transit_time(tree.verts[leaf].leaf_length_km);
            out.qubits.push_back(q);
        }
    }
    out.tree_age = 0.0;
    for (const QubitAge& q : out.qubits) out.tree_age = std::max(out.tree_age, q.age);
    return out;
}

struct FidelityCheck {
    bool pass = false;
    bool leaves_ok = false;
    bool age_ok = false;
    int  leaf_count = 0;
    double tree_age = 0.0;
};

inline FidelityCheck check_fidelity(const SwappingTree& tree, const PhysParams& p) {
    FidelityCheck c;
    c.leaf_count = tree.leaf_count();
    c.tree_age = qubit_ages(tree, p).tree_age;
    c.leaves_ok = c.leaf_count <= p.tau_l;
    c.age_ok = c.tree_age <= p.tau_d;
    c.pass = c.leaves_ok && c.age_ok;
    return c;
}

inline int build_balanced(SwappingTree& tree, std::span<const NodeId> path, int lo, int hi);

// Canonical balanced tree over a path: split the k links at ceil(k/2),
// recurse; the extra leaf goes left.
inline SwappingTree balanced_tree_over_path(std::span<const NodeId> path) {
    if (path.size() < 2) throw std::invalid_argument("balanced_tree_over_path: need >= 1 link");
    SwappingTree tree;
    tree.root = build_balanced(tree, path, 0, static_cast<int>(path.size()) - 1);
    return tree;
}

inline int build_balanced(SwappingTree& tree, std::span<const NodeId> path, int lo, int hi) {
    // covers links between path[lo] .. path[hi]
    TreeVertex v;
    v.a = path[lo];
    v.b = path[hi];
    if (hi - lo == 1) {
        int idx = static_cast<int>(tree.verts.size());
        tree.verts.push_back(v);
        return idx;
    }
    const int k = hi - lo;
    const int mid = lo + (k + 1) / 2;
    int l = build_balanced(tree, path, lo, mid);
    int r = build_balanced(tree, path, mid, hi);
    v.left = l;
    v.right = r;
    v.swap_node = path[mid];
    int idx = static_cast<int>(tree.verts.size());
    tree.verts.push_back(v);
    return idx;
}

// Nodes of the underlying path, in order, reconstructed from the leaves.
inline std::vector<NodeId> tree_path(const SwappingTree& tree) {
    std::vector<NodeId> path;
    if (tree.empty()) return path;
    for (int leaf : tree.leaves_in_order()) {
        const TreeVertex& t = tree.verts[leaf];
        if (path.empty()) {
            path.push_back(t.a);
        } else if (path.back() != t.a) {
            throw std::logic_error("tree_path: leaves do not chain into a path");
        }
        path.push_back(t.b);
    }
    return path;
}

inline bool path_is_simple(const std::vector<NodeId>& path) {
    std::unordered_set<NodeId> seen(path.begin(), path.end());
    return seen.size() == path.size();
}

// Mirror image: reverses the path and swaps every left/right pair.
inline SwappingTree mirror_tree(const SwappingTree& tree) {
    SwappingTree out = tree;
    for (TreeVertex& t : out.verts) {
        std::swap(t.a, t.b);
        std::swap(t.left, t.right);
    }
    return out;
}

namespace detail {

inline int copy_subtree(const SwappingTree& src, int v, SwappingTree& dst) {
    const TreeVertex& t = src.verts[v];
    TreeVertex copy = t;
    if (!t.is_leaf()) {
        copy.left = copy_subtree(src, t.left, dst);
        copy.right = copy_subtree(src, t.right, dst);
    }
    int idx = static_cast<int>(dst.verts.size());
    dst.verts.push_back(copy);
    return idx;
}

inline int extract_prefix_rec(const SwappingTree& src, int v, NodeId w,
                              const std::unordered_map<NodeId, int>& pos, SwappingTree& dst,
                              const PhysParams& p) {
    const TreeVertex& t = src.verts[v];
    if (w == t.b) return copy_subtree(src, v, dst);
    if (t.is_leaf()) throw std::logic_error("extract_prefix_tree: fell off a leaf");
    if (w == t.swap_node) return copy_subtree(src, t.left, dst);
    if (pos.at(w) < pos.at(t.swap_node)) return extract_prefix_rec(src, t.left, w, pos, dst, p);
    // w lies strictly inside the right child's span: extract there, then
    // re-merge with the intact left child at the original swap node.
    int l = copy_subtree(src, t.left, dst);
    int r = extract_prefix_rec(src, t.right, w, pos, dst, p);
    TreeVertex merged;
    merged.a = dst.verts[l].a;
    merged.b = dst.verts[r].b;
    merged.left = l;
    merged.right = r;
    merged.swap_node = t.swap_node;
    merged.latency = parent_latency(dst.verts[l].latency, dst.verts[r].latency, p);
    int idx = static_cast<int>(dst.verts.size());
    dst.verts.push_back(merged);
    return idx;
}

}  // namespace detail

// Subtree-extraction construction: from a tree over x..y and a node w on its
// path (w != x), build a tree over x..w with latency and height no larger
// than the original's.
inline SwappingTree extract_prefix_tree(const SwappingTree& tree, NodeId w, const PhysParams& p) {
    std::vector<NodeId> path = tree_path(tree);
    std::unordered_map<NodeId, int> pos;
    for (size_t i = 0; i < path.size(); ++i) pos[path[i]] = static_cast<int>(i);
    auto it = pos.find(w);
    if (it == pos.end())
        throw std::invalid_argument("extract_prefix_tree: node not on the tree's path");
    if (it->second == 0)
        throw std::invalid_argument("extract_prefix_tree: node equals the path start");
    SwappingTree out;
    out.root = detail::extract_prefix_rec(tree, tree.root, w, pos, out, p);
    return out;
}

inline SwappingTree extract_suffix_tree(const SwappingTree& tree, NodeId w, const PhysParams& p) {
    return mirror_tree(extract_prefix_tree(mirror_tree(tree), w, p));
}

}  // namespace qnet
