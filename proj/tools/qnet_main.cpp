// Command-line front end: topology generation, single- and multi-pair
// routing, protocol simulation, analytic-vs-simulated comparison, brute-force
// reference search, and benchmark timing. Exit codes: 0 success, 2 no
// feasible route, 1 error.

#include <chrono>
#include <iostream>
#include <map>
#include <set>

#include <CLI11.hpp>

#include "qnet/balanced_router.hpp"
#include "qnet/dp_router.hpp"
#include "qnet/hyperflow.hpp"
#include "qnet/io.hpp"
#include "qnet/iter_router.hpp"
#include "qnet/oracle.hpp"
#include "qnet/simulator.hpp"
#include "qnet/version.hpp"
#include "qnet/waxman.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInfeasible = 2;

struct GenArgs {
    int nodes = 100;
    double area = 100.0, max_link = 10.0, density = 0.03;
    uint64_t seed = 1;
    std::string out;
    int tau_l = 8;
    double tau_d = 1.0, discard_age = 1.0;
};

int cmd_gen(const GenArgs& a) {
    qnet::PhysParams p;
    p.tau_l = a.tau_l;
    p.tau_d = a.tau_d;
    p.discard_age = a.discard_age;
    p.validate();
    qnet::NetworkGraph g = qnet::generate_waxman(a.nodes, a.area, a.max_link, a.density, a.seed);
    qnet::save_topology(a.out, g, p);
    std::cout << "nodes=" << g.node_count() << " links=" << g.link_count() << " out=" << a.out
              << "\n";
    return kExitOk;
}

std::optional<qnet::RouteResult> run_single(const std::string& algo, const qnet::NetworkGraph& g,
                                            const qnet::ResidualState& st, qnet::NodeId s,
                                            qnet::NodeId d, const qnet::PhysParams& p) {
    if (algo == "dp-opt") return qnet::dp_opt(g, st, s, d, p);
    if (algo == "dp-approx") return qnet::dp_approx(g, st, s, d, p);
    if (algo == "balanced") return qnet::best_balanced_path_per_length(g, st, s, d, p);
    throw std::invalid_argument("unknown algorithm: " + algo);
}

struct RouteArgs {
    std::string topo, algo = "dp-approx", emit_tree;
    int src = 0, dst = 1;
    int tau_l = -1;
    double tau_d = -1;
};

int cmd_route(const RouteArgs& a) {
    qnet::Topology topo = qnet::load_topology(a.topo);
    if (a.tau_l > 0) topo.params.tau_l = a.tau_l;
    if (a.tau_d > 0) topo.params.tau_d = a.tau_d;
    qnet::ResidualState st = qnet::ResidualState::full(topo.graph);
    auto r = run_single(a.algo, topo.graph, st, a.src, a.dst, topo.params);
    if (!r) {
        std::cout << "infeasible\n";
        return kExitInfeasible;
    }
    std::cout << "algo=" << a.algo << " src=" << a.src << " dst=" << a.dst
              << " latency_s=" << r->latency << " rate_eps=" << r->rate
              << " leaves=" << r->tree.leaf_count() << "\n";
    if (!a.emit_tree.empty()) {
        qnet::NamedTree t;
        t.id = a.algo + "_" + std::to_string(a.src) + "_" + std::to_string(a.dst);
        t.algo = a.algo;
        t.ends = {a.src, a.dst};
        t.analytic_rate = r->rate;
        t.tree = r->tree;
        qnet::save_trees(a.emit_tree, {t});
    }
    return kExitOk;
}

struct MultiArgs {
    std::string topo, pairs, algo = "iter-bal", out_trees, summary, lp_dump;
    double min_rate = 0.1;
    int tau_l = -1;
};

std::vector<std::pair<qnet::NodeId, qnet::NodeId>> load_pairs(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    qnet::json j;
    is >> j;
    std::vector<std::pair<qnet::NodeId, qnet::NodeId>> pairs;
    for (const qnet::json& e : j.at("pairs")) pairs.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
    return pairs;
}

int cmd_route_multi(const MultiArgs& a) {
    qnet::Topology topo = qnet::load_topology(a.topo);
    if (a.tau_l > 0) topo.params.tau_l = a.tau_l;
    auto pairs = load_pairs(a.pairs);
    std::vector<qnet::NamedTree> out_trees;
    double aggregate = 0.0, fairness_val = 0.0;
    std::vector<std::pair<int, double>> per_pair_rate(pairs.size(), {0, 0.0});

    if (a.algo == "lp") {
        qnet::EntanglementHypergraph h = qnet::build_hypergraph(topo.graph, pairs);
        qnet::ResidualState st = qnet::ResidualState::full(topo.graph);
        if (!a.lp_dump.empty()) {
            std::ofstream os(a.lp_dump);
            qnet::build_flow_lp(h, topo.graph, st, topo.params).model.write_lp(os);
        }
        qnet::FlowSolution sol = qnet::solve_flow(h, topo.graph, st, topo.params);
        qnet::Decomposition dec = qnet::decompose_flow(h, sol, topo.graph, topo.params);
        aggregate = sol.objective;
        std::map<std::pair<int, int>, int> pair_idx;
        for (size_t i = 0; i < pairs.size(); ++i) {
            auto [s, d] = pairs[i];
            pair_idx[{std::min(s, d), std::max(s, d)}] = static_cast<int>(i);
        }
        int ti = 0;
        for (const qnet::DecomposedTree& dt : dec.trees) {
            int pi = pair_idx.count(dt.ends) ? pair_idx[dt.ends] : -1;
            qnet::NamedTree t;
            t.id = "p" + std::to_string(pi) + "_t" + std::to_string(ti++);
            t.algo = "lp";
            t.ends = dt.ends;
            t.analytic_rate = dt.analytic_rate;
            t.tree = dt.tree;
            out_trees.push_back(std::move(t));
            if (pi >= 0) {
                per_pair_rate[pi].first++;
                per_pair_rate[pi].second += dt.analytic_rate;
            }
        }
        int served = 0;
        for (auto& [cnt, rate] : per_pair_rate)
            if (cnt > 0) ++served;
        fairness_val = pairs.empty() ? 0.0 : double(served) / pairs.size();
    } else {
        qnet::InnerAlgo inner;
        if (a.algo == "iter-dpa") inner = qnet::InnerAlgo::DpApprox;
        else if (a.algo == "iter-bal") inner = qnet::InnerAlgo::Balanced;
        else throw std::invalid_argument("unknown algorithm: " + a.algo);
        qnet::IterOptions opt;
        opt.min_rate = a.min_rate;
        qnet::IterResult res = qnet::iter_route(topo.graph, pairs, inner, topo.params, opt);
        aggregate = res.aggregate_rate;
        fairness_val = qnet::fairness(res, pairs.size());
        for (size_t i = 0; i < pairs.size(); ++i) {
            int ti = 0;
            for (const qnet::RouteResult& r : res.trees_per_pair[i]) {
                qnet::NamedTree t;
                t.id = "p" + std::to_string(i) + "_t" + std::to_string(ti++);
                t.algo = a.algo;
                t.ends = pairs[i];
                t.analytic_rate = r.rate;
                t.tree = r.tree;
                out_trees.push_back(std::move(t));
                per_pair_rate[i].first++;
                per_pair_rate[i].second += r.rate;
            }
        }
    }

    if (!a.out_trees.empty()) qnet::save_trees(a.out_trees, out_trees);
    if (!a.summary.empty()) {
        qnet::CsvWriter csv(a.summary, qnet::csv_meta_line(0, topo.params),
                            "pair,src,dst,trees,analytic_rate,fairness");
        for (size_t i = 0; i < pairs.size(); ++i)
            csv.row(static_cast<int>(i), pairs[i].first, pairs[i].second, per_pair_rate[i].first,
                    per_pair_rate[i].second, fairness_val);
    }
    std::cout << "algo=" << a.algo << " pairs=" << pairs.size() << " trees=" << out_trees.size()
              << " aggregate_rate=" << aggregate << " fairness=" << fairness_val << "\n";
    return out_trees.empty() ? kExitInfeasible : kExitOk;
}

struct SimArgs {
    std::string topo, trees, out, ages, protocol = "waiting";
    double duration = 10.0, discard_age = -1;
    uint64_t seed = 1;
};

int cmd_simulate(const SimArgs& a) {
    qnet::Topology topo = qnet::load_topology(a.topo);
    std::vector<qnet::NamedTree> trees = qnet::load_trees(a.trees);
    qnet::SimConfig cfg;
    cfg.duration = a.duration;
    cfg.seed = a.seed;
    cfg.discard_age = a.discard_age > 0 ? a.discard_age : topo.params.discard_age;
    cfg.protocol = a.protocol == "waitless" ? qnet::Protocol::WaitLess : qnet::Protocol::Waiting;

    std::vector<qnet::SimResult> results;
    if (cfg.protocol == qnet::Protocol::Waiting) {
        std::vector<qnet::SwappingTree> ts;
        for (const qnet::NamedTree& t : trees) ts.push_back(t.tree);
        results = qnet::simulate_waiting(ts, topo.graph, topo.params, cfg);
    } else {
        for (const qnet::NamedTree& t : trees) {
            std::vector<double> lens;
            for (int leaf : t.tree.leaves_in_order())
                lens.push_back(t.tree.verts[leaf].leaf_length_km);
            results.push_back(qnet::simulate_waitless(lens, topo.params, cfg));
        }
    }

    qnet::CsvWriter csv(a.out, qnet::csv_meta_line(a.seed, topo.params),
                        "id,protocol,duration_s,ep_count,rate_eps,mean_fidelity,discards");
    for (size_t i = 0; i < trees.size(); ++i)
        csv.row(trees[i].id, a.protocol, results[i].duration, results[i].ep_count,
                results[i].measured_rate, results[i].mean_fidelity(), results[i].discard_count);

    if (!a.ages.empty()) {
        qnet::CsvWriter ages(a.ages, qnet::csv_meta_line(a.seed, topo.params),
                             "id,bin_lo_s,bin_hi_s,count");
        const int bins = 50;
        for (size_t i = 0; i < trees.size(); ++i) {
            double max_age = cfg.discard_age;
            std::vector<uint64_t> hist(bins + 1, 0);
            for (double age : results[i].qubit_ages) {
                int b = static_cast<int>(age / max_age * bins);
                hist[std::min(b, bins)]++;
            }
            for (int b = 0; b <= bins; ++b) {
                if (hist[b] == 0) continue;
                ages.row(trees[i].id, b * max_age / bins,
                         b == bins ? std::numeric_limits<double>::infinity()
                                   : (b + 1) * max_age / bins,
                         hist[b]);
            }
        }
    }
    std::cout << "simulated " << trees.size() << " trees, protocol=" << a.protocol << "\n";
    return kExitOk;
}

struct CompareArgs {
    std::string trees, sim, out;
};

int cmd_compare(const CompareArgs& a) {
    std::vector<qnet::NamedTree> trees = qnet::load_trees(a.trees);
    qnet::CsvData sim = qnet::read_csv(a.sim);
    auto col = [&](const std::string& name) {
        for (size_t c = 0; c < sim.header.size(); ++c)
            if (sim.header[c] == name) return static_cast<int>(c);
        throw std::runtime_error("simulation CSV lacks column " + name);
    };
    const int c_id = col("id"), c_rate = col("rate_eps"), c_fid = col("mean_fidelity");

    std::map<std::string, const qnet::NamedTree*> by_id;
    for (const qnet::NamedTree& t : trees) by_id[t.id] = &t;
    std::set<std::string> seen;
    qnet::CsvWriter csv(a.out, std::string("# tool=") + qnet::kToolName + " version=" + qnet::kToolVersion,
                        "algo,pair,analytic_rate,simulated_rate,ratio,fidelity");
    std::vector<std::string> orphans;
    for (const auto& row : sim.rows) {
        auto it = by_id.find(row[c_id]);
        if (it == by_id.end()) {
            orphans.push_back(row[c_id]);
            continue;
        }
        seen.insert(row[c_id]);
        const qnet::NamedTree& t = *it->second;
        const double simulated = std::stod(row[c_rate]);
        csv.row(t.algo,
                std::to_string(t.ends.first) + "-" + std::to_string(t.ends.second),
                t.analytic_rate, simulated,
                simulated > 0 ? t.analytic_rate / simulated : 0.0, std::stod(row[c_fid]));
    }
    for (const auto& [id, t] : by_id)
        if (!seen.count(id)) orphans.push_back(id);
    if (!orphans.empty()) {
        std::ostringstream msg;
        msg << "compare: unmatched tree ids:";
        for (const std::string& o : orphans) msg << " " << o;
        throw std::runtime_error(msg.str());
    }
    std::cout << "compared " << seen.size() << " trees -> " << a.out << "\n";
    return kExitOk;
}

struct OracleArgs {
    std::string topo;
    int src = 0, dst = 1, max_links = 6;
    uint64_t budget = 400'000'000;
};

int cmd_oracle(const OracleArgs& a) {
    qnet::Topology topo = qnet::load_topology(a.topo);
    qnet::ResidualState st = qnet::ResidualState::full(topo.graph);
    qnet::OracleOptions opt;
    opt.max_candidates = a.budget;
    try {
        qnet::OracleOutcome oc =
            qnet::brute_force_opt(topo.graph, st, a.src, a.dst, topo.params, a.max_links, opt);
        if (!oc.best) {
            std::cout << "infeasible (paths=" << oc.paths << " candidates=" << oc.candidates
                      << ")\n";
            return kExitInfeasible;
        }
        std::cout << "latency_s=" << oc.best->latency << " rate_eps=" << oc.best->rate
                  << " leaves=" << oc.best->tree.leaf_count() << " paths=" << oc.paths
                  << " candidates=" << oc.candidates << "\n";
        return kExitOk;
    } catch (const qnet::OracleBudgetError& e) {
        std::cout << "budget exceeded: " << e.what() << "\n";
        return kExitError;
    }
}

struct BenchArgs {
    std::string algo = "balanced", sizes = "100", seeds = "1", out;
    double area = 100.0, max_link = 10.0, density = 0.03;
    int max_links = 6;
};

std::vector<uint64_t> parse_list(const std::string& s) {
    std::vector<uint64_t> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stoull(tok));
    return out;
}

int cmd_bench(const BenchArgs& a) {
    std::optional<qnet::CsvWriter> csv;
    if (!a.out.empty())
        csv.emplace(a.out, qnet::csv_meta_line(0, qnet::PhysParams{}), "algo,n,seed,ms,status");
    for (uint64_t n : parse_list(a.sizes)) {
        for (uint64_t seed : parse_list(a.seeds)) {
            qnet::PhysParams p;
            qnet::NetworkGraph g = qnet::generate_waxman(static_cast<int>(n), a.area, a.max_link,
                                                         a.density, seed);
            qnet::ResidualState st = qnet::ResidualState::full(g);
            // deterministic query pair: nodes roughly 15-20 km apart if any
            qnet::NodeId s = 0, d = 1;
            double best_gap = 1e30;
            for (int i = 0; i < g.node_count(); ++i)
                for (int j = i + 1; j < g.node_count(); ++j) {
                    const double dist = g.distance(i, j);
                    const double gap = std::fabs(dist - 17.5);
                    if (gap < best_gap) {
                        best_gap = gap;
                        s = i;
                        d = j;
                    }
                }
            std::string status = "ok";
            const auto t0 = std::chrono::steady_clock::now();
            try {
                if (a.algo == "oracle") {
                    qnet::OracleOutcome oc = qnet::brute_force_opt(g, st, s, d, p, a.max_links);
                    if (!oc.best) status = "infeasible";
                } else {
                    auto r = run_single(a.algo, g, st, s, d, p);
                    if (!r) status = "infeasible";
                }
            } catch (const qnet::OracleBudgetError&) {
                status = "budget";
            }
            const double ms = std::chrono::duration<double, std::milli>(
                                  std::chrono::steady_clock::now() - t0)
                                  .count();
            std::cout << a.algo << " n=" << n << " seed=" << seed << " ms=" << ms
                      << " status=" << status << "\n";
            if (csv) csv->row(a.algo, static_cast<int>(n), static_cast<uint64_t>(seed), ms, status);
        }
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string(qnet::kToolName) + " " + qnet::kToolVersion +
                 " - swapping-tree routing toolkit"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* cgen = app.add_subcommand("gen", "generate a Waxman topology");
    cgen->add_option("--nodes", gen.nodes)->required();
    cgen->add_option("--area", gen.area);
    cgen->add_option("--max-link", gen.max_link);
    cgen->add_option("--density", gen.density);
    cgen->add_option("--seed", gen.seed);
    cgen->add_option("--out", gen.out)->required();
    cgen->add_option("--tau-l", gen.tau_l);
    cgen->add_option("--tau-d", gen.tau_d);
    cgen->add_option("--discard-age", gen.discard_age);

    RouteArgs route;
    auto* croute = app.add_subcommand("route", "single-pair swapping-tree routing");
    croute->add_option("--topo", route.topo)->required();
    croute->add_option("--algo", route.algo)
        ->check(CLI::IsMember({"dp-opt", "dp-approx", "balanced"}));
    croute->add_option("--src", route.src)->required();
    croute->add_option("--dst", route.dst)->required();
    croute->add_option("--tau-l", route.tau_l);
    croute->add_option("--tau-d", route.tau_d);
    croute->add_option("--emit-tree", route.emit_tree);

    MultiArgs multi;
    auto* cmulti = app.add_subcommand("route-multi", "multi-pair routing");
    cmulti->add_option("--topo", multi.topo)->required();
    cmulti->add_option("--pairs", multi.pairs)->required();
    cmulti->add_option("--algo", multi.algo)->check(CLI::IsMember({"iter-dpa", "iter-bal", "lp"}));
    cmulti->add_option("--min-rate", multi.min_rate);
    cmulti->add_option("--tau-l", multi.tau_l);
    cmulti->add_option("--out-trees", multi.out_trees);
    cmulti->add_option("--summary", multi.summary);
    cmulti->add_option("--lp-dump", multi.lp_dump);

    SimArgs sim;
    auto* csim = app.add_subcommand("simulate", "protocol simulation of routed trees");
    csim->add_option("--topo", sim.topo)->required();
    csim->add_option("--trees", sim.trees)->required();
    csim->add_option("--duration", sim.duration);
    csim->add_option("--seed", sim.seed);
    csim->add_option("--protocol", sim.protocol)->check(CLI::IsMember({"waiting", "waitless"}));
    csim->add_option("--discard-age", sim.discard_age);
    csim->add_option("--out", sim.out)->required();
    csim->add_option("--ages", sim.ages);

    CompareArgs cmp;
    auto* ccmp = app.add_subcommand("compare", "join analytic and simulated rates");
    ccmp->add_option("--trees", cmp.trees)->required();
    ccmp->add_option("--sim", cmp.sim)->required();
    ccmp->add_option("--out", cmp.out)->required();

    OracleArgs orc;
    auto* corc = app.add_subcommand("oracle", "exhaustive reference optimum");
    corc->add_option("--topo", orc.topo)->required();
    corc->add_option("--src", orc.src)->required();
    corc->add_option("--dst", orc.dst)->required();
    corc->add_option("--max-links", orc.max_links);
    corc->add_option("--budget", orc.budget);

    BenchArgs bench;
    auto* cbench = app.add_subcommand("bench", "algorithm timing over generated topologies");
    cbench->add_option("--algo", bench.algo)
        ->check(CLI::IsMember({"balanced", "dp-approx", "dp-opt", "oracle"}));
    cbench->add_option("--sizes", bench.sizes);
    cbench->add_option("--seeds", bench.seeds);
    cbench->add_option("--area", bench.area);
    cbench->add_option("--max-link", bench.max_link);
    cbench->add_option("--density", bench.density);
    cbench->add_option("--max-links", bench.max_links);
    cbench->add_option("--out", bench.out);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*cgen) return cmd_gen(gen);
        if (*croute) return cmd_route(route);
        if (*cmulti) return cmd_route_multi(multi);
        if (*csim) return cmd_simulate(sim);
        if (*ccmp) return cmd_compare(cmp);
        if (*corc) return cmd_oracle(orc);
        if (*cbench) return cmd_bench(bench);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
