#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qnet/graph.hpp"
#include "qnet/params.hpp"
#include "qnet/swap_tree.hpp"
#include "qnet/version.hpp"

namespace qnet {

using nlohmann::json;

inline json params_to_json(const PhysParams& p) {
    return json{{"t_g", p.t_g},
                {"p_g", p.p_g},
                {"p_ob", p.p_ob},
                {"t_ob", p.t_ob},
                {"p_ab", p.p_ab},
                {"t_ab", p.t_ab},
                {"t_cl", p.t_cl},
                {"attenuation_km", p.attenuation_km},
                {"tau_l", p.tau_l},
                {"tau_d", p.tau_d},
                {"discard_age", p.discard_age},
                {"werner_link", p.werner_link},
                {"werner_gate", p.werner_gate},
                {"t_dec", p.t_dec}};
}

inline PhysParams params_from_json(const json& j) {
    PhysParams p;
    p.t_g = j.value("t_g", p.t_g);
    p.p_g = j.value("p_g", p.p_g);
    p.p_ob = j.value("p_ob", p.p_ob);
    p.t_ob = j.value("t_ob", p.t_ob);
    p.p_ab = j.value("p_ab", p.p_ab);
    p.t_ab = j.value("t_ab", p.t_ab);
    p.t_cl = j.value("t_cl", p.t_cl);
    p.attenuation_km = j.value("attenuation_km", p.attenuation_km);
    p.tau_l = j.value("tau_l", p.tau_l);
    p.tau_d = j.value("tau_d", p.tau_d);
    p.discard_age = j.value("discard_age", p.discard_age);
    p.werner_link = j.value("werner_link", p.werner_link);
    p.werner_gate = j.value("werner_gate", p.werner_gate);
    p.t_dec = j.value("t_dec", p.t_dec);
    p.validate();
    return p;
}

inline json topology_to_json(const NetworkGraph& g, const PhysParams& p) {
    json nodes = json::array();
    for (const NodeInfo& n : g.nodes())
        nodes.push_back({{"id", n.id},
                         {"x_km", n.x_km},
                         {"y_km", n.y_km},
                         {"mem", n.memory_slots},
                         {"t_g", n.gen_interval}});
    json links = json::array();
    for (const Link& l : g.links())
        links.push_back({{"u", l.u}, {"v", l.v}, {"len_km", l.length_km}});
    return json{{"params", params_to_json(p)}, {"nodes", nodes}, {"links", links}};
}

struct Topology {
    NetworkGraph graph;
    PhysParams params;
};

inline Topology topology_from_json(const json& j) {
    PhysParams p = params_from_json(j.at("params"));
    std::vector<NodeInfo> nodes;
    for (const json& n : j.at("nodes")) {
        NodeInfo info;
        info.id = n.at("id").get<int>();
        info.x_km = n.at("x_km").get<double>();
        info.y_km = n.at("y_km").get<double>();
        info.memory_slots = n.at("mem").get<int>();
        info.gen_interval = n.value("t_g", p.t_g);
        nodes.push_back(info);
    }
    // node ids must be dense 0..n-1 in order
    for (size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].id != static_cast<int>(i))
            throw std::invalid_argument("topology: node ids must be 0..n-1 in order");
    std::vector<Link> links;
    for (const json& l : j.at("links"))
        links.push_back({l.at("u").get<int>(), l.at("v").get<int>(), l.at("len_km").get<double>()});
    return {NetworkGraph(std::move(nodes), std::move(links)), p};
}

inline void save_topology(const std::string& path, const NetworkGraph& g, const PhysParams& p) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << topology_to_json(g, p).dump(2) << "\n";
}

inline Topology load_topology(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    json j;
    is >> j;
    return topology_from_json(j);
}

inline json tree_to_json(const SwappingTree& t, int v) {
    const TreeVertex& tv = t.verts.at(v);
    json j{{"pair", {tv.a, tv.b}}, {"latency", tv.latency}};
    if (tv.is_leaf()) {
        j["len_km"] = tv.leaf_length_km;
    } else {
        j["swap"] = tv.swap_node;
        j["left"] = tree_to_json(t, tv.left);
        j["right"] = tree_to_json(t, tv.right);
    }
    return j;
}

inline json tree_to_json(const SwappingTree& t) { return tree_to_json(t, t.root); }

inline int tree_from_json(const json& j, SwappingTree& out) {
    TreeVertex v;
    v.a = j.at("pair").at(0).get<int>();
    v.b = j.at("pair").at(1).get<int>();
    v.latency = j.at("latency").get<double>();
    if (j.contains("left")) {
        v.left = tree_from_json(j.at("left"), out);
        v.right = tree_from_json(j.at("right"), out);
        v.swap_node = j.at("swap").get<int>();
    } else {
        v.leaf_length_km = j.value("len_km", 0.0);
    }
    out.verts.push_back(v);
    return static_cast<int>(out.verts.size()) - 1;
}

inline SwappingTree tree_from_json(const json& j) {
    SwappingTree t;
    t.root = tree_from_json(j, t);
    return t;
}

struct NamedTree {
    std::string id;
    std::string algo;
    std::pair<NodeId, NodeId> ends{-1, -1};
    double analytic_rate = 0.0;
    SwappingTree tree;
};

inline void save_trees(const std::string& path, const std::vector<NamedTree>& trees) {
    json arr = json::array();
    for (const NamedTree& t : trees)
        arr.push_back({{"id", t.id},
                       {"algo", t.algo},
                       {"ends", {t.ends.first, t.ends.second}},
                       {"analytic_rate", t.analytic_rate},
                       {"tree", tree_to_json(t.tree)}});
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << json{{"trees", arr}}.dump(2) << "\n";
}

inline std::vector<NamedTree> load_trees(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    json j;
    is >> j;
    std::vector<NamedTree> out;
    for (const json& e : j.at("trees")) {
        NamedTree t;
        t.id = e.at("id").get<std::string>();
        t.algo = e.value("algo", "");
        t.ends = {e.at("ends").at(0).get<int>(), e.at("ends").at(1).get<int>()};
        t.analytic_rate = e.at("analytic_rate").get<double>();
        t.tree = tree_from_json(e.at("tree"));
        out.push_back(std::move(t));
    }
    return out;
}

// ---- CSV with a provenance comment line -----------------------------------

inline uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string csv_meta_line(uint64_t seed, const PhysParams& p) {
    std::ostringstream ss;
    ss << "# tool=" << kToolName << " version=" << kToolVersion << " seed=" << seed
       << " params=" << std::hex << fnv1a(params_to_json(p).dump());
    return ss.str();
}

class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::string& meta, const std::string& header)
        : os_(path) {
        if (!os_) throw std::runtime_error("cannot write " + path);
        if (!meta.empty()) os_ << meta << "\n";
        os_ << header << "\n";
    }
    template <class... Ts>
    void row(const Ts&... cells) {
        bool first = true;
        ((os_ << (first ? "" : ","), first = false, write_cell(cells)), ...);
        os_ << "\n";
    }

  private:
    void write_cell(const std::string& s) { os_ << s; }
    void write_cell(const char* s) { os_ << s; }
    void write_cell(double d) {
        std::ostringstream ss;
        ss.precision(12);
        ss << d;
        os_ << ss.str();
    }
    void write_cell(uint64_t v) { os_ << v; }
    void write_cell(int v) { os_ << v; }
    std::ofstream os_;
};

// rows of a CSV file, comment lines skipped, header returned separately
struct CsvData {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline CsvData read_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    CsvData out;
    std::string line;
    bool have_header = false;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!have_header) {
            out.header = cells;
            have_header = true;
        } else {
            out.rows.push_back(cells);
        }
    }
    return out;
}

}  // namespace qnet
