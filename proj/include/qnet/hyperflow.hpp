#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "qnet/linear_program.hpp"
#include "qnet/routing_base.hpp"

namespace qnet {

enum class HyperVertexKind { Start, Term, Prod, Avail };
enum class HyperArcKind { Start, Swap, Prod, Term };

struct HyperVertex {
    HyperVertexKind kind;
    NodeId u = -1, v = -1;  // canonical u < v
    int leaves = 0;         // leaf-count parameter; 0 in the plain variant
};

struct HyperArc {
    HyperArcKind kind;
    std::vector<int> tails;  // vertex indices
    int head = -1;
    NodeId swap_node = -1;   // Swap arcs
    int link = -1;           // Start arcs: network link index
};

// B-hypergraph of pair-production states: avail/prod vertices per node pair
// (optionally per leaf count), Start arcs from real links, Swap arcs for all
// distinct middle nodes, Term arcs per requested pair. Vertices and arcs are
// laid out canonically so models reproduce bit-identically.
struct EntanglementHypergraph {
    std::vector<HyperVertex> vertices;
    std::vector<HyperArc> arcs;
    std::vector<std::pair<NodeId, NodeId>> pairs;
    int start_vertex = -1, term_vertex = -1;
    bool fidelity_variant = false;
    int tau_l = 0;

    int vertex_id(HyperVertexKind kind, NodeId a, NodeId b, int leaves = 0) const {
        auto it = index_.find(key(kind, a, b, leaves));
        return it == index_.end() ? -1 : it->second;
    }

    // arcs entering / leaving each vertex (tail membership = leaving)
    std::vector<std::vector<int>> in_arcs, out_arcs;

    void freeze() {
        in_arcs.assign(vertices.size(), {});
        out_arcs.assign(vertices.size(), {});
        for (size_t a = 0; a < arcs.size(); ++a) {
            in_arcs[arcs[a].head].push_back(static_cast<int>(a));
            for (int t : arcs[a].tails) out_arcs[t].push_back(static_cast<int>(a));
        }
    }

    int add_vertex(HyperVertexKind kind, NodeId a, NodeId b, int leaves = 0) {
        if (a > b) std::swap(a, b);
        vertices.push_back({kind, a, b, leaves});
        index_[key(kind, a, b, leaves)] = static_cast<int>(vertices.size()) - 1;
        return static_cast<int>(vertices.size()) - 1;
    }

  private:
    static uint64_t key(HyperVertexKind kind, NodeId a, NodeId b, int leaves) {
        if (a > b) std::swap(a, b);
        return (static_cast<uint64_t>(kind) << 60) | (static_cast<uint64_t>(leaves) << 40) |
               (static_cast<uint64_t>(static_cast<uint32_t>(a + 1)) << 20) |
               static_cast<uint64_t>(static_cast<uint32_t>(b + 1));
    }
    std::map<uint64_t, int> index_;
};

inline EntanglementHypergraph build_hypergraph(const NetworkGraph& g,
                                               const std::vector<std::pair<NodeId, NodeId>>& pairs) {
    if (pairs.empty()) throw std::invalid_argument("build_hypergraph: no pairs");
    EntanglementHypergraph h;
    h.pairs = pairs;
    const int n = g.node_count();
    h.start_vertex = h.add_vertex(HyperVertexKind::Start, -1, -1);
    h.term_vertex = h.add_vertex(HyperVertexKind::Term, -1, -1);
    for (NodeId u = 0; u < n; ++u)
        for (NodeId v = u + 1; v < n; ++v) {
            h.add_vertex(HyperVertexKind::Prod, u, v);
            h.add_vertex(HyperVertexKind::Avail, u, v);
        }
    // Start arcs only where a physical link exists
    for (int e = 0; e < g.link_count(); ++e) {
        const Link& l = g.link(e);
        HyperArc a{HyperArcKind::Start,
                   {h.start_vertex},
                   h.vertex_id(HyperVertexKind::Avail, l.u, l.v),
                   -1,
                   e};
        h.arcs.push_back(a);
    }
    // Swap arcs over every distinct (u, w, v) with unordered ends
    for (NodeId u = 0; u < n; ++u)
        for (NodeId v = u + 1; v < n; ++v)
            for (NodeId w = 0; w < n; ++w) {
                if (w == u || w == v) continue;
                HyperArc a{HyperArcKind::Swap,
                           {h.vertex_id(HyperVertexKind::Avail, u, w),
                            h.vertex_id(HyperVertexKind::Avail, w, v)},
                           h.vertex_id(HyperVertexKind::Prod, u, v),
                           w,
                           -1};
                h.arcs.push_back(a);
            }
    for (NodeId u = 0; u < n; ++u)
        for (NodeId v = u + 1; v < n; ++v) {
            HyperArc a{HyperArcKind::Prod,
                       {h.vertex_id(HyperVertexKind::Prod, u, v)},
                       h.vertex_id(HyperVertexKind::Avail, u, v),
                       -1,
                       -1};
            h.arcs.push_back(a);
        }
    for (auto& [s, d] : pairs) {
        HyperArc a{HyperArcKind::Term,
                   {h.vertex_id(HyperVertexKind::Avail, s, d)},
                   h.term_vertex,
                   -1,
                   -1};
        h.arcs.push_back(a);
    }
    h.freeze();
    return h;
}

// Leaf-count-parameterized variant: avail/prod carry n in [1, tau_l]; swaps
// compose only compatible counts (n = n' + n''); Term accepts n <= tau_l.
// Age feasibility is enforced on decomposed trees afterwards.
inline EntanglementHypergraph build_hypergraph_fidelity(
    const NetworkGraph& g, const std::vector<std::pair<NodeId, NodeId>>& pairs, int tau_l) {
    if (pairs.empty()) throw std::invalid_argument("build_hypergraph_fidelity: no pairs");
    if (tau_l < 1) throw std::invalid_argument("build_hypergraph_fidelity: tau_l must be >= 1");
    EntanglementHypergraph h;
    h.pairs = pairs;
    h.fidelity_variant = true;
    h.tau_l = tau_l;
    const int n = g.node_count();
    h.start_vertex = h.add_vertex(HyperVertexKind::Start, -1, -1);
    h.term_vertex = h.add_vertex(HyperVertexKind::Term, -1, -1);
    for (NodeId u = 0; u < n; ++u)
        for (NodeId v = u + 1; v < n; ++v)
            for (int c = 1; c <= tau_l; ++c) {
                h.add_vertex(HyperVertexKind::Prod, u, v, c);
                h.add_vertex(HyperVertexKind::Avail, u, v, c);
            }
    for (int e = 0; e < g.link_count(); ++e) {
        const Link& l = g.link(e);
        h.arcs.push_back({HyperArcKind::Start,
                          {h.start_vertex},
                          h.vertex_id(HyperVertexKind::Avail, l.u, l.v, 1),
                          -1,
                          e});
    }
    for (NodeId u = 0; u < n; ++u)
        for (NodeId v = u + 1; v < n; ++v)
            for (NodeId w = 0; w < n; ++w) {
                if (w == u || w == v) continue;
                for (int c1 = 1; c1 < tau_l; ++c1)
                    for (int c2 = 1; c1 + c2 <= tau_l; ++c2)
                        h.arcs.push_back({HyperArcKind::Swap,
                                          {h.vertex_id(HyperVertexKind::Avail, u, w, c1),
                                           h.vertex_id(HyperVertexKind::Avail, w, v, c2)},
                                          h.vertex_id(HyperVertexKind::Prod, u, v, c1 + c2),
                                          w,
                                          -1});
            }
    for (NodeId u = 0; u < n; ++u)
        for (NodeId v = u + 1; v < n; ++v)
            for (int c = 1; c <= tau_l; ++c)
                h.arcs.push_back({HyperArcKind::Prod,
                                  {h.vertex_id(HyperVertexKind::Prod, u, v, c)},
                                  h.vertex_id(HyperVertexKind::Avail, u, v, c),
                                  -1,
                                  -1});
    for (auto& [s, d] : pairs)
        for (int c = 1; c <= tau_l; ++c)
            h.arcs.push_back({HyperArcKind::Term,
                              {h.vertex_id(HyperVertexKind::Avail, s, d, c)},
                              h.term_vertex,
                              -1,
                              -1});
    h.freeze();
    return h;
}

struct FlowSolution {
    LpStatus status = LpStatus::Infeasible;
    double objective = 0.0;
    std::vector<double> arc_flow;
};

// Arcs that can actually carry flow: forward pass marks pair states
// producible from the links, backward pass marks states that can feed a
// requested pair. Everything else is fixed at zero before the solver sees it.
inline std::vector<char> flow_carrying_arcs(const EntanglementHypergraph& h) {
    const size_t nv = h.vertices.size();
    std::vector<char> reach(nv, 0), useful(nv, 0);
    reach[h.start_vertex] = 1;
    bool changed = true;
    while (changed) {
        changed = false;
        for (const HyperArc& a : h.arcs) {
            if (reach[a.head]) continue;
            bool ok = true;
            for (int t : a.tails) ok = ok && reach[t];
            if (ok) {
                reach[a.head] = 1;
                changed = true;
            }
        }
    }
    useful[h.term_vertex] = 1;
    changed = true;
    while (changed) {
        changed = false;
        for (const HyperArc& a : h.arcs) {
            if (!useful[a.head]) continue;
            bool feeds = true;
            for (int t : a.tails) feeds = feeds && reach[t];
            if (!feeds) continue;
            for (int t : a.tails)
                if (!useful[t]) {
                    useful[t] = 1;
                    changed = true;
                }
        }
    }
    std::vector<char> alive(h.arcs.size(), 0);
    for (size_t ai = 0; ai < h.arcs.size(); ++ai) {
        const HyperArc& a = h.arcs[ai];
        bool ok = useful[a.head];
        for (int t : a.tails) ok = ok && reach[t] && useful[t];
        alive[ai] = ok && reach[a.head];
    }
    return alive;
}

struct FlowLp {
    LpModel model;
    std::vector<int> var_of_arc;  // -1 when presolved away (zero flow)
};

// Lossy B-hyperflow LP. One rate variable per arc; a Swap arc draws its rate
// from BOTH tail pairs (equal sibling rates, hence throttled trees). Swapping
// converts rate with factor (2/3) p_ab; making pairs available is lossless.
inline FlowLp build_flow_lp(const EntanglementHypergraph& h, const NetworkGraph& g,
                            const ResidualState& state, const PhysParams& p) {
    FlowLp out;
    const std::vector<char> alive = flow_carrying_arcs(h);
    out.var_of_arc.assign(h.arcs.size(), -1);
    for (size_t a = 0; a < h.arcs.size(); ++a)
        if (alive[a]) out.var_of_arc[a] = out.model.add_variable("z" + std::to_string(a));

    // node generation capacity over incident Start arcs
    for (NodeId i = 0; i < g.node_count(); ++i) {
        std::vector<std::pair<int, double>> terms;
        for (size_t a = 0; a < h.arcs.size(); ++a) {
            const HyperArc& arc = h.arcs[a];
            if (arc.kind != HyperArcKind::Start || out.var_of_arc[a] < 0) continue;
            const Link& l = g.link(arc.link);
            if (l.u != i && l.v != i) continue;
            terms.push_back({out.var_of_arc[a], 1.0 / link_success_prob(l.length_km, p)});
        }
        if (!terms.empty())
            out.model.add_constraint(std::move(terms), LpRelation::LE, state.gen_rate[i]);
    }
    const double swap_gain = (2.0 / 3.0) * p.p_ab;
    for (size_t v = 0; v < h.vertices.size(); ++v) {
        const HyperVertex& vert = h.vertices[v];
        if (vert.kind != HyperVertexKind::Avail && vert.kind != HyperVertexKind::Prod) continue;
        const double gain = vert.kind == HyperVertexKind::Prod ? swap_gain : 1.0;
        std::vector<std::pair<int, double>> terms;
        for (int a : h.in_arcs[v])
            if (out.var_of_arc[a] >= 0) terms.push_back({out.var_of_arc[a], gain});
        for (int a : h.out_arcs[v])
            if (out.var_of_arc[a] >= 0) terms.push_back({out.var_of_arc[a], -1.0});
        if (!terms.empty()) out.model.add_constraint(std::move(terms), LpRelation::EQ, 0.0);
    }
    std::vector<std::pair<int, double>> obj;
    for (int a : h.in_arcs[h.term_vertex])
        if (out.var_of_arc[a] >= 0) obj.push_back({out.var_of_arc[a], 1.0});
    out.model.set_objective(obj, LpSense::Maximize);
    return out;
}

inline FlowSolution solve_flow(const EntanglementHypergraph& h, const NetworkGraph& g,
                               const ResidualState& state, const PhysParams& p,
                               const LpSolver& solver = SimplexSolver{}) {
    FlowLp lp = build_flow_lp(h, g, state, p);
    LpSolution sol = solver.solve(lp.model);
    if (sol.status == LpStatus::Unbounded)
        throw std::runtime_error("solve_flow: LP unbounded; hypergraph construction is broken");
    if (sol.status != LpStatus::Optimal)
        throw std::runtime_error("solve_flow: LP solver failed");
    FlowSolution f;
    f.status = sol.status;
    f.objective = sol.objective;
    f.arc_flow.assign(h.arcs.size(), 0.0);
    for (size_t a = 0; a < h.arcs.size(); ++a)
        if (lp.var_of_arc[a] >= 0) f.arc_flow[a] = sol.values[lp.var_of_arc[a]];
    return f;
}

// Largest conservation violation across avail/prod vertices.
inline double flow_conservation_residual(const EntanglementHypergraph& h, const PhysParams& p,
                                         const std::vector<double>& flow) {
    const double swap_gain = (2.0 / 3.0) * p.p_ab;
    double worst = 0.0;
    for (size_t v = 0; v < h.vertices.size(); ++v) {
        const HyperVertex& vert = h.vertices[v];
        if (vert.kind != HyperVertexKind::Avail && vert.kind != HyperVertexKind::Prod) continue;
        const double gain = vert.kind == HyperVertexKind::Prod ? swap_gain : 1.0;
        double s = 0.0;
        for (int a : h.in_arcs[v]) s += gain * flow[a];
        for (int a : h.out_arcs[v]) s -= flow[a];
        worst = std::max(worst, std::fabs(s));
    }
    return worst;
}

struct DecomposedTree {
    SwappingTree tree;  // throttled
    std::pair<NodeId, NodeId> ends;
    double flow_rate = 0.0;      // rate peeled from the LP flow
    double analytic_rate = 0.0;  // 1 / throttled root latency
    bool age_ok = true;
    bool leaves_ok = true;
};

struct Decomposition {
    std::vector<DecomposedTree> trees;
    double undecomposed = 0.0;  // term flow that could not be peeled
};

namespace detail_flow {

struct Extraction {
    std::vector<std::pair<int, double>> arc_mult;  // (arc, flow multiplier per unit rate)
    SwappingTree tree;
    std::vector<double> leaf_mult;
};

// expand an avail vertex into a concrete subtree following max-flow arcs;
// fails on cyclic support or overlapping spans
inline int expand_avail(const EntanglementHypergraph& h, const std::vector<double>& flow,
                        double tol, int avail, NodeId a, NodeId b, double mult, double swap_gain,
                        Extraction& ex, std::set<NodeId>& span, int depth) {
    if (depth > 64) return -1;
    int start_arc = -1, prod_arc = -1;
    for (int arc : h.in_arcs[avail]) {
        if (h.arcs[arc].kind == HyperArcKind::Start) start_arc = arc;
        if (h.arcs[arc].kind == HyperArcKind::Prod) prod_arc = arc;
    }
    const double fs = start_arc >= 0 ? flow[start_arc] : 0.0;
    const double fp = prod_arc >= 0 ? flow[prod_arc] : 0.0;
    if (fs < tol && fp < tol) return -1;

    auto take_leaf = [&]() -> int {
        if (fs < tol || span.count(a) || span.count(b)) return -1;
        span.insert(a);
        span.insert(b);
        ex.arc_mult.push_back({start_arc, mult});
        TreeVertex leaf;
        leaf.a = a;
        leaf.b = b;
        ex.tree.verts.push_back(leaf);
        ex.leaf_mult.push_back(mult);
        return static_cast<int>(ex.tree.verts.size()) - 1;
    };

    if (fs >= fp) {
        int leaf = take_leaf();
        if (leaf >= 0) return leaf;
    }
    if (fp < tol) return fs >= fp ? -1 : take_leaf();

    // via prod: pick the best positive swap arc whose spans stay disjoint
    const int prod_vertex = h.arcs[prod_arc].tails[0];
    std::vector<int> swaps(h.in_arcs[prod_vertex]);
    std::sort(swaps.begin(), swaps.end(), [&](int x, int y) {
        if (flow[x] != flow[y]) return flow[x] > flow[y];
        return h.arcs[x].swap_node < h.arcs[y].swap_node;
    });
    for (int sw : swaps) {
        if (flow[sw] < tol) break;
        const NodeId w = h.arcs[sw].swap_node;
        if (span.count(w)) continue;
        const double child_mult = mult / swap_gain;
        std::set<NodeId> attempt = span;
        Extraction saved = ex;
        // left tail covers (a, w); right covers (w, b)
        const HyperVertex& t0 = h.vertices[h.arcs[sw].tails[0]];
        int left_tail, right_tail;
        if ((t0.u == std::min(a, w)) && (t0.v == std::max(a, w))) {
            left_tail = h.arcs[sw].tails[0];
            right_tail = h.arcs[sw].tails[1];
        } else {
            left_tail = h.arcs[sw].tails[1];
            right_tail = h.arcs[sw].tails[0];
        }
        int l = expand_avail(h, flow, tol, left_tail, a, w, child_mult, swap_gain, ex, attempt,
                             depth + 1);
        if (l < 0) { ex = saved; continue; }
        attempt.erase(w);  // w is shared between the two child spans
        int r = expand_avail(h, flow, tol, right_tail, w, b, child_mult, swap_gain, ex, attempt,
                             depth + 1);
        if (r < 0) { ex = saved; continue; }
        ex.arc_mult.push_back({prod_arc, mult});
        ex.arc_mult.push_back({sw, child_mult});
        TreeVertex v;
        v.a = a;
        v.b = b;
        v.left = l;
        v.right = r;
        v.swap_node = w;
        ex.tree.verts.push_back(v);
        attempt.insert(w);
        span = attempt;
        return static_cast<int>(ex.tree.verts.size()) - 1;
    }
    // no swap arc worked; a start leaf may still be available
    if (fs >= tol && fs < fp) return take_leaf();
    return -1;
}

}  // namespace detail_flow

// Greedy B-hyperpath peeling: repeatedly extract the swapping tree supporting
// the largest Term flow, scale by its bottleneck, subtract, and repeat.
// Returned trees are annotated from their leaf flow rates and throttled; ones
// violating the age threshold are flagged.
inline Decomposition decompose_flow(const EntanglementHypergraph& h, const FlowSolution& sol,
                                    const NetworkGraph& g, const PhysParams& p) {
    Decomposition out;
    std::vector<double> flow = sol.arc_flow;
    const double swap_gain = (2.0 / 3.0) * p.p_ab;
    const double tol = std::max(1e-10, 1e-9 * std::max(1.0, sol.objective));

    for (int guard = 0; guard < 100000; ++guard) {
        int term_arc = -1;
        for (int a : h.in_arcs[h.term_vertex])
            if (flow[a] > tol && (term_arc < 0 || flow[a] > flow[term_arc])) term_arc = a;
        if (term_arc < 0) break;

        const HyperVertex& av = h.vertices[h.arcs[term_arc].tails[0]];
        detail_flow::Extraction ex;
        std::set<NodeId> span;
        int root = detail_flow::expand_avail(h, flow, tol, h.arcs[term_arc].tails[0], av.u, av.v,
                                             1.0, swap_gain, ex, span, 0);
        if (root < 0) {
            // cyclic or conflicting support under this pair; drop the arc
            out.undecomposed += flow[term_arc];
            flow[term_arc] = 0.0;
            continue;
        }
        ex.tree.root = root;
        ex.arc_mult.push_back({term_arc, 1.0});

        double rate = std::numeric_limits<double>::infinity();
        for (auto& [arc, mult] : ex.arc_mult) rate = std::min(rate, flow[arc] / mult);
        if (!(rate > tol)) {
            out.undecomposed += flow[term_arc];
            flow[term_arc] = 0.0;
            continue;
        }
        for (auto& [arc, mult] : ex.arc_mult) flow[arc] = std::max(0.0, flow[arc] - mult * rate);

        // leaf rates follow the flow multipliers (creation order is in-order)
        std::vector<int> leaves = ex.tree.leaves_in_order();
        std::vector<double> leaf_lat(leaves.size());
        for (size_t q = 0; q < leaves.size(); ++q) {
            TreeVertex& tv = ex.tree.verts[leaves[q]];
            int e = g.link_between(tv.a, tv.b);
            if (e >= 0) tv.leaf_length_km = g.link(e).length_km;
            leaf_lat[q] = 1.0 / (ex.leaf_mult[q] * rate);
        }
        annotate_tree_latency(ex.tree, leaf_lat, p);
        SwappingTree tree = throttle(std::move(ex.tree), p);

        DecomposedTree dt;
        dt.ends = {av.u, av.v};
        dt.flow_rate = rate;
        dt.analytic_rate = 1.0 / tree.root_latency();
        FidelityCheck fc = check_fidelity(tree, p);
        dt.age_ok = fc.age_ok;
        dt.leaves_ok = fc.leaf_count <= p.tau_l;
        dt.tree = std::move(tree);
        out.trees.push_back(std::move(dt));
    }
    for (int a : h.in_arcs[h.term_vertex]) out.undecomposed += std::max(0.0, flow[a]);
    return out;
}

}  // namespace qnet
