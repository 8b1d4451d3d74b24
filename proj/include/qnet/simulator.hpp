#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <queue>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "qnet/rng.hpp"
#include "qnet/routing_base.hpp"
#include "qnet/swap_tree.hpp"

namespace qnet {

enum class Protocol { Waiting, WaitLess };

struct SimConfig {
    double duration = 10.0;  // simulated seconds
    uint64_t seed = 1;
    Protocol protocol = Protocol::Waiting;
    double discard_age = 1.0;  // runtime qubit discard threshold [s]

    void validate() const {
        if (duration <= 0) throw std::invalid_argument("SimConfig: duration must be positive");
        if (discard_age <= 0) throw std::invalid_argument("SimConfig: discard_age must be positive");
    }
};

struct SimResult {
    uint64_t ep_count = 0;
    double duration = 0.0;
    double measured_rate = 0.0;
    std::vector<double> fidelities;   // one sample per delivered pair
    uint64_t discard_count = 0;       // pairs dropped for exceeding discard_age
    std::vector<double> qubit_ages;   // storage time of every consumed/discarded qubit
    uint64_t slots = 0;               // WaitLess only

    double mean_fidelity() const {
        if (fidelities.empty()) return 0.0;
        double s = 0.0;
        for (double f : fidelities) s += f;
        return s / static_cast<double>(fidelities.size());
    }
};

namespace detail_sim {

struct Ep {
    uint64_t id = 0;
    double birth_a = 0.0, birth_b = 0.0;  // end-qubit birth times
    double acc_storage = 0.0;             // storage already paid by consumed qubits
    int leaves = 0, swaps = 0;
};

// Waiting-protocol engine for one tree. Each leaf runs an independent
// generator pair whose attempt spacing realizes the leaf's annotated
// (throttled) latency; a pair waits in memory for its sibling; a failed swap
// or an aged-out pair restarts the unchlying subtree's leaves.
class WaitingEngine {
  public:
    WaitingEngine(const SwappingTree& tree, const PhysParams& p, const SimConfig& cfg,
                  uint64_t stream_base)
        : tree_(tree), p_(p), cfg_(cfg) {
        const std::vector<int> leaves = tree.leaves_in_order();
        info_.resize(tree.verts.size());
        for (size_t v = 0; v < tree_.verts.size(); ++v) {
            const TreeVertex& t = tree_.verts[v];
            if (!t.is_leaf()) {
                info_[t.left].parent = static_cast<int>(v);
                info_[t.right].parent = static_cast<int>(v);
            }
        }
        for (int leaf : leaves) {
            VertexInfo& in = info_[leaf];
            in.success_prob = link_success_prob(tree_.verts[leaf].leaf_length_km, p_);
            in.establish_delay = photon_transit_time(tree_.verts[leaf].leaf_length_km) + p_.t_ob;
            in.attempt_interval = in.success_prob * tree_.verts[leaf].latency;
            in.rng.emplace(cfg_.seed, stream_base + 2 * static_cast<uint64_t>(leaf));
        }
        for (size_t v = 0; v < tree_.verts.size(); ++v)
            if (!tree_.verts[v].is_leaf())
                info_[v].rng.emplace(cfg_.seed, stream_base + 2 * v + 1);
    }

    SimResult run() {
        SimResult out;
        out.duration = cfg_.duration;
        for (int leaf : tree_.leaves_in_order()) start_leaf(leaf, 0.0);
        while (!queue_.empty()) {
            Event ev = queue_.top();
            queue_.pop();
            if (ev.t > cfg_.duration) break;
            switch (ev.kind) {
                case Event::LeafSuccess: on_leaf_success(ev, out); break;
                case Event::SwapResolve: on_swap_resolve(ev, out); break;
                case Event::Discard: on_discard(ev, out); break;
            }
        }
        out.measured_rate = static_cast<double>(out.ep_count) / cfg_.duration;
        return out;
    }

  private:
    struct Event {
        enum Kind { LeafSuccess, SwapResolve, Discard } kind;
        double t;
        uint64_t seq;
        int vertex;
        uint64_t id;  // pair id for Discard validity / swap generation
        bool operator>(const Event& o) const { return std::tie(t, seq) > std::tie(o.t, o.seq); }
    };
    struct VertexInfo {
        int parent = -1;
        // leaves
        std::optional<RngStream> rng;
        double attempt_interval = 0.0, success_prob = 0.0, establish_delay = 0.0;
        // internal: pending child pairs (index 0 = from left child)
        std::optional<Ep> pending[2];
        // internal: pair under measurement
        std::optional<std::pair<Ep, Ep>> in_bsm;
        uint64_t bsm_id = 0;
    };

    void schedule(Event ev) {
        ev.seq = seq_++;
        queue_.push(ev);
    }

    void start_leaf(int leaf, double t) {
        VertexInfo& in = info_[leaf];
        const uint64_t k = in.rng->geometric_attempts(in.success_prob);
        const double birth = t + static_cast<double>(k - 1) * in.attempt_interval;
        Event ev;
        ev.kind = Event::LeafSuccess;
        ev.t = birth + in.establish_delay;
        ev.vertex = leaf;
        ev.id = next_id_++;
        births_[ev.id] = birth;
        schedule(ev);
    }

    void restart_subtree(int v, double t) {
        const TreeVertex& tv = tree_.verts[v];
        if (tv.is_leaf()) {
            start_leaf(v, t);
            return;
        }
        // drop anything still pending below (only possible at v itself when
        // one child delivered and the other side failed independently)
        for (auto& slot : info_[v].pending) slot.reset();
        restart_subtree(tv.left, t);
        restart_subtree(tv.right, t);
    }

    void on_leaf_success(const Event& ev, SimResult& out) {
        auto it = births_.find(ev.id);
        const double birth = it->second;
        births_.erase(it);
        Ep ep;
        ep.id = ev.id;
        ep.birth_a = birth;
        ep.birth_b = birth;
        ep.leaves = 1;
        ep.swaps = 0;
        hand_up(ev.vertex, ep, ev.t, out);
    }

    void hand_up(int v, Ep ep, double t, SimResult& out) {
        if (v == tree_.root) {
            finish_root(ep, t, out);
            return;
        }
        const int parent = info_[v].parent;
        VertexInfo& pin = info_[parent];
        const int side = tree_.verts[parent].left == v ? 0 : 1;
        const int other = 1 - side;
        if (pin.pending[other]) {
            Ep sib = *pin.pending[other];
            pin.pending[other].reset();
            pin.in_bsm = side == 0 ? std::make_pair(ep, sib) : std::make_pair(sib, ep);
            pin.bsm_id = next_id_++;
            Event swap;
            swap.kind = Event::SwapResolve;
            swap.t = t + p_.t_ab;
            swap.vertex = parent;
            swap.id = pin.bsm_id;
            schedule(swap);
        } else {
            pin.pending[side] = ep;
            Event dis;
            dis.kind = Event::Discard;
            dis.t = std::min(ep.birth_a, ep.birth_b) + cfg_.discard_age;
            dis.vertex = parent;
            dis.id = ep.id;
            schedule(dis);
        }
    }

    void finish_root(const Ep& ep, double t, SimResult& out) {
        const double age_a = t - ep.birth_a;
        const double age_b = t - ep.birth_b;
        out.qubit_ages.push_back(age_a);
        out.qubit_ages.push_back(age_b);
        if (age_a > cfg_.discard_age || age_b > cfg_.discard_age) {
            ++out.discard_count;
        } else {
            ++out.ep_count;
            const double storage = ep.acc_storage + age_a + age_b;
            const double w = std::pow(p_.werner_gate, ep.swaps) *
                             std::pow(p_.werner_link, ep.leaves) * std::exp(-storage / p_.t_dec);
            out.fidelities.push_back(fidelity_for_werner(w));
        }
        restart_subtree(tree_.root, t);
    }

    void on_swap_resolve(const Event& ev, SimResult& out) {
        VertexInfo& in = info_[ev.vertex];
        if (!in.in_bsm || in.bsm_id != ev.id) return;
        auto [le, re] = *in.in_bsm;
        in.in_bsm.reset();
        // the two qubits at the swap node are consumed now
        const double age_l = ev.t - le.birth_b;
        const double age_r = ev.t - re.birth_a;
        out.qubit_ages.push_back(age_l);
        out.qubit_ages.push_back(age_r);
        if (age_l > cfg_.discard_age || age_r > cfg_.discard_age) {
            ++out.discard_count;
            restart_subtree(ev.vertex, ev.t + p_.t_cl);
            return;
        }
        if (in.rng->bernoulli(p_.p_ab)) {
            Ep ep;
            ep.id = next_id_++;
            ep.birth_a = le.birth_a;
            ep.birth_b = re.birth_b;
            ep.acc_storage = le.acc_storage + re.acc_storage + age_l + age_r;
            ep.leaves = le.leaves + re.leaves;
            ep.swaps = le.swaps + re.swaps + 1;
            hand_up(ev.vertex, ep, ev.t + p_.t_cl, out);
        } else {
            restart_subtree(ev.vertex, ev.t + p_.t_cl);
        }
    }

    void on_discard(const Event& ev, SimResult& out) {
        VertexInfo& in = info_[ev.vertex];
        for (int side = 0; side < 2; ++side) {
            if (in.pending[side] && in.pending[side]->id == ev.id) {
                const Ep ep = *in.pending[side];
                in.pending[side].reset();
                ++out.discard_count;
                out.qubit_ages.push_back(ev.t - ep.birth_a);
                out.qubit_ages.push_back(ev.t - ep.birth_b);
                const int child = side == 0 ? tree_.verts[ev.vertex].left
                                            : tree_.verts[ev.vertex].right;
                restart_subtree(child, ev.t + p_.t_cl);
                return;
            }
        }
    }

    const SwappingTree& tree_;
    const PhysParams& p_;
    const SimConfig& cfg_;
    std::vector<VertexInfo> info_;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
    std::unordered_map<uint64_t, double> births_;
    uint64_t seq_ = 0;
    uint64_t next_id_ = 1;
};

}  // namespace detail_sim

// Waiting-protocol simulation of a set of trees sharing one network. Trees
// must be resource-feasible together; each runs on independent generator
// pairs and RNG streams, so results are per-tree deterministic.
inline std::vector<SimResult> simulate_waiting(const std::vector<SwappingTree>& trees,
                                               const NetworkGraph& g, const PhysParams& p,
                                               const SimConfig& cfg) {
    cfg.validate();
    ResidualState state = ResidualState::full(g);
    for (const SwappingTree& t : trees) state = apply_residual(std::move(state), t, g, p);
    std::vector<SimResult> out;
    uint64_t stream_base = 1;
    for (const SwappingTree& t : trees) {
        detail_sim::WaitingEngine engine(t, p, cfg, stream_base);
        out.push_back(engine.run());
        stream_base += 2 * t.verts.size() + 16;
    }
    return out;
}

// Single tree on a synthetic path (no graph feasibility check); used by
// property tests that build trees directly.
inline SimResult simulate_waiting_tree(const SwappingTree& tree, const PhysParams& p,
                                       const SimConfig& cfg, uint64_t stream_base = 1) {
    cfg.validate();
    detail_sim::WaitingEngine engine(tree, p, cfg, stream_base);
    return engine.run();
}

// WaitLess: synchronized slots of length t_g + t_ob + t_ab + t_cl; a pair is
// delivered end to end only when every link generation and every swap in the
// slot succeeds, otherwise everything is discarded.
inline SimResult simulate_waitless(const std::vector<double>& link_lengths_km, const PhysParams& p,
                                   const SimConfig& cfg) {
    cfg.validate();
    if (link_lengths_km.empty())
        throw std::invalid_argument("simulate_waitless: empty path");
    const double slot = p.t_g + p.t_ob + p.t_ab + p.t_cl;
    const uint64_t nslots = static_cast<uint64_t>(cfg.duration / slot);
    const int k = static_cast<int>(link_lengths_km.size());
    std::vector<double> plink(k);
    double storage = 0.0;
    for (int i = 0; i < k; ++i) {
        plink[i] = link_success_prob(link_lengths_km[i], p);
        storage += 2.0 * (p.t_ob + photon_transit_time(link_lengths_km[i]));
    }
    RngStream rng(cfg.seed, 0xA0);
    SimResult out;
    out.duration = cfg.duration;
    out.slots = nslots;
    const double w_op = std::pow(p.werner_gate, k - 1) * std::pow(p.werner_link, k) *
                        std::exp(-storage / p.t_dec);
    for (uint64_t sidx = 0; sidx < nslots; ++sidx) {
        bool ok = true;
        for (int i = 0; i < k; ++i)
            if (!rng.bernoulli(plink[i])) ok = false;
        if (!ok) continue;
        for (int i = 0; i < k - 1 && ok; ++i)
            if (!rng.bernoulli(p.p_ab)) ok = false;
        if (ok) {
            ++out.ep_count;
            out.fidelities.push_back(fidelity_for_werner(w_op));
        }
    }
    out.measured_rate = static_cast<double>(out.ep_count) / cfg.duration;
    return out;
}

inline SimResult simulate_waitless_path(const std::vector<NodeId>& path, const NetworkGraph& g,
                                        const PhysParams& p, const SimConfig& cfg) {
    std::vector<double> lens;
    for (size_t i = 0; i + 1 < path.size(); ++i) {
        int e = g.link_between(path[i], path[i + 1]);
        if (e < 0) throw std::invalid_argument("simulate_waitless_path: missing link");
        lens.push_back(g.link(e).length_km);
    }
    return simulate_waitless(lens, p, cfg);
}

// Per-slot end-to-end success probability of the WaitLess protocol.
inline double waitless_slot_success(const std::vector<double>& link_lengths_km,
                                    const PhysParams& p) {
    double prob = 1.0;
    for (double d : link_lengths_km) prob *= link_success_prob(d, p);
    for (size_t i = 0; i + 1 < link_lengths_km.size(); ++i) prob *= p.p_ab;
    return prob;
}

}  // namespace qnet
