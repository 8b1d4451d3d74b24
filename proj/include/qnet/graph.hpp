#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qnet/params.hpp"

namespace qnet {

using NodeId = int;

struct NodeInfo {
    NodeId id = 0;
    double x_km = 0.0;
    double y_km = 0.0;
    int    memory_slots = 16;
    double gen_interval = 50e-6;  // per-node t_g(i) [s]
};

struct Link {
    NodeId u = -1;
    NodeId v = -1;
    double length_km = 0.0;

    NodeId other(NodeId n) const { return n == u ? v : u; }
};

// Undirected simple graph: at most one link per node pair. Immutable after
// construction; safe for concurrent readers.
class NetworkGraph {
  public:
    NetworkGraph() = default;
    NetworkGraph(std::vector<NodeInfo> nodes, std::vector<Link> links)
        : nodes_(std::move(nodes)) {
        adj_.resize(nodes_.size());
        for (const Link& l : links) add_link(l);
    }

    int node_count() const { return static_cast<int>(nodes_.size()); }
    int link_count() const { return static_cast<int>(links_.size()); }

    const std::vector<NodeInfo>& nodes() const { return nodes_; }
    const std::vector<Link>& links() const { return links_; }
    const NodeInfo& node(NodeId i) const { return nodes_.at(i); }
    const Link& link(int idx) const { return links_.at(idx); }

    // Link indices incident to node i.
    const std::vector<int>& incident(NodeId i) const { return adj_.at(i); }

    int link_between(NodeId a, NodeId b) const {
        for (int idx : adj_.at(a))
            if (links_[idx].other(a) == b) return idx;
        return -1;
    }

    double distance(NodeId a, NodeId b) const {
        const NodeInfo& na = nodes_.at(a);
        const NodeInfo& nb = nodes_.at(b);
        return std::hypot(na.x_km - nb.x_km, na.y_km - nb.y_km);
    }

  private:
    void add_link(const Link& l) {
        if (l.u == l.v) throw std::invalid_argument("NetworkGraph: self-loop");
        if (l.u < 0 || l.v < 0 || l.u >= node_count() || l.v >= node_count())
            throw std::invalid_argument("NetworkGraph: link endpoint out of range");
        if (link_between(l.u, l.v) >= 0)
            throw std::invalid_argument("NetworkGraph: duplicate link between pair");
        int idx = static_cast<int>(links_.size());
        links_.push_back(l);
        adj_[l.u].push_back(idx);
        adj_[l.v].push_back(idx);
    }

    std::vector<NodeInfo> nodes_;
    std::vector<Link> links_;
    std::vector<std::vector<int>> adj_;
};

struct CapacityError : std::runtime_error {
    NodeId node;
    CapacityError(NodeId n, const std::string& what) : std::runtime_error(what), node(n) {}
};

// Expected pair latency of a network link when its end nodes commit the given
// usage fractions of their generation capacity.
inline double link_ep_latency(const NetworkGraph& g, int link_idx, double usage_u, double usage_v,
                              const PhysParams& p) {
    const Link& l = g.link(link_idx);
    return link_ep_latency_rates(l.length_km, 1.0 / g.node(l.u).gen_interval,
                                 1.0 / g.node(l.v).gen_interval, usage_u, usage_v, p);
}

// Mutable resource bookkeeping: residual atom-photon generation rate and
// free memory per node, committed pair rate per link. Single-writer.
struct ResidualState {
    std::vector<double> gen_rate;     // residual 1/t_g(i) [1/s]
    std::vector<int>    free_memory;  // free slots
    std::vector<double> link_rate;    // committed R_e per link [1/s]

    static ResidualState full(const NetworkGraph& g) {
        ResidualState s;
        s.gen_rate.reserve(g.node_count());
        s.free_memory.reserve(g.node_count());
        for (const NodeInfo& n : g.nodes()) {
            s.gen_rate.push_back(1.0 / n.gen_interval);
            s.free_memory.push_back(n.memory_slots);
        }
        s.link_rate.assign(g.link_count(), 0.0);
        return s;
    }
};

}  // namespace qnet
