#include <catch2/catch_amalgamated.hpp>

#include "qnet/oracle.hpp"
#include "qnet/simulator.hpp"

using namespace qnet;
using Catch::Approx;

namespace {

constexpr double kLat10 = 3.7849432293391365e-3;

SwappingTree path_tree(int k, double leaf_lat, double len_km, const PhysParams& p) {
    std::vector<NodeId> path;
    for (int i = 0; i <= k; ++i) path.push_back(i);
    SwappingTree t = balanced_tree_over_path(path);
    for (int leaf : t.leaves_in_order()) t.verts[leaf].leaf_length_km = len_km;
    std::vector<double> lat(k, leaf_lat);
    annotate_tree_latency(t, lat, p);
    return throttle(std::move(t), p);
}

}  // namespace

TEST_CASE("werner model calibration") {
    PhysParams p;
    CHECK(fidelity_for_werner(p.werner_link) == Approx(0.995).epsilon(1e-12));
    // a stored qubit's pair decays from 1.0 to 0.90 over one minute
    CHECK(fidelity_for_werner(std::exp(-60.0 / p.t_dec)) == Approx(0.90).epsilon(1e-12));
}

TEST_CASE("simulation is deterministic per seed") {
    PhysParams p;
    SwappingTree t = path_tree(4, kLat10, 10.0, p);
    SimConfig cfg;
    cfg.duration = 20.0;
    cfg.seed = 42;
    SimResult a = simulate_waiting_tree(t, p, cfg);
    SimResult b = simulate_waiting_tree(t, p, cfg);
    CHECK(a.ep_count == b.ep_count);
    CHECK(a.discard_count == b.discard_count);
    REQUIRE(a.fidelities.size() == b.fidelities.size());
    for (size_t i = 0; i < a.fidelities.size(); ++i) CHECK(a.fidelities[i] == b.fidelities[i]);
    cfg.seed = 43;
    SimResult c = simulate_waiting_tree(t, p, cfg);
    CHECK(c.ep_count != a.ep_count);  // different stream, different trajectory
}

TEST_CASE("single link converges to the analytic rate") {
    PhysParams p;
    SwappingTree t = path_tree(1, kLat10, 10.0, p);
    SimConfig cfg;
    cfg.duration = 40.0;
    cfg.seed = 11;
    SimResult r = simulate_waiting_tree(t, p, cfg);
    CHECK(r.ep_count > 2000);
    CHECK(r.measured_rate == Approx(1.0 / kLat10).epsilon(0.05));
    CHECK(r.mean_fidelity() == Approx(0.995).margin(2e-4));
}

TEST_CASE("two-leaf throttled tree matches the recursion within 15%") {
    PhysParams p;
    SwappingTree t = path_tree(2, kLat10, 10.0, p);
    SimConfig cfg;
    cfg.duration = 2500.0 * t.root_latency();
    cfg.seed = 3;
    SimResult r = simulate_waiting_tree(t, p, cfg);
    CHECK(r.ep_count >= 2000);
    CHECK(r.measured_rate == Approx(1.0 / t.root_latency()).epsilon(0.15));
}

TEST_CASE("sibling-wait factor approaches 3/2 for exponential-like leaves") {
    PhysParams p;
    p.p_ab = 1.0;
    p.t_ab = 0.0;
    p.t_cl = 0.0;
    SwappingTree t = path_tree(2, kLat10, 10.0, p);
    REQUIRE(t.root_latency() == Approx(1.5 * kLat10).epsilon(1e-12));
    SimConfig cfg;
    cfg.duration = 3000.0 * t.root_latency();
    cfg.seed = 5;
    SimResult r = simulate_waiting_tree(t, p, cfg);
    const double measured_ratio = (1.0 / r.measured_rate) / kLat10;
    CHECK(measured_ratio == Approx(1.5).epsilon(0.05));
}

TEST_CASE("no delivered pair carries an over-age qubit") {
    PhysParams p;
    // slow leaves and a tight discard threshold force the discard path
    SwappingTree t = path_tree(4, 50.0 * kLat10, 10.0, p);
    SimConfig cfg;
    cfg.duration = 4000.0 * t.root_latency();
    cfg.seed = 17;
    cfg.discard_age = 0.6 * t.root_latency();
    SimResult r = simulate_waiting_tree(t, p, cfg);
    CHECK(r.discard_count > 0);
    for (double age : r.qubit_ages) CHECK(age <= cfg.discard_age * (1.0 + 1e-9));
}

TEST_CASE("throttled and raw versions of a tree deliver at matching root rates") {
    // near-equalized siblings (what a fine usage grid produces); with gross
    // imbalance the raw tree legitimately outruns the 1.5*max recursion
    PhysParams p;
    std::vector<NodeId> path{0, 1, 2, 3, 4};
    std::vector<double> lat{kLat10, 1.04 * kLat10, 0.97 * kLat10, 1.02 * kLat10};
    SwappingTree raw = balanced_tree_over_path(path);
    for (int leaf : raw.leaves_in_order()) raw.verts[leaf].leaf_length_km = 10.0;
    annotate_tree_latency(raw, lat, p);
    SwappingTree th = throttle(raw, p);
    REQUIRE(th.root_latency() == Approx(raw.root_latency()).epsilon(1e-12));

    SimConfig cfg;
    cfg.seed = 23;
    cfg.duration = 3000.0 * raw.root_latency();
    SimResult r_raw = simulate_waiting_tree(raw, p, cfg, 1);
    SimResult r_th = simulate_waiting_tree(th, p, cfg, 1001);
    CHECK(r_raw.ep_count > 1500);
    CHECK(r_th.measured_rate == Approx(r_raw.measured_rate).epsilon(0.10));
}

TEST_CASE("waitless collapses on multi-hop paths") {
    PhysParams p;
    std::vector<double> lens(4, 10.0);
    SECTION("slot success probability matches the product formula") {
        const double p_slot = waitless_slot_success(lens, p);
        CHECK(p_slot == Approx(1.9490478970e-9).epsilon(1e-6));
        SimConfig cfg;
        cfg.duration = 1500.0;
        cfg.seed = 7;
        SimResult r = simulate_waitless(lens, p, cfg);
        const double mean = static_cast<double>(r.slots) * p_slot;
        const double sigma = std::sqrt(mean * (1.0 - p_slot));
        CHECK(std::fabs(static_cast<double>(r.ep_count) - mean) <= 3.0 * sigma + 1.0);
        CHECK(r.measured_rate < 1e-3);
    }
    SECTION("single-link waitless behaves like the waiting protocol") {
        std::vector<double> one{10.0};
        SimConfig cfg;
        cfg.duration = 50.0;
        cfg.seed = 29;
        SimResult wl = simulate_waitless(one, p, cfg);
        PhysParams q = p;
        SwappingTree t = path_tree(1, 1.0 / ((1.0 / (p.t_g + p.t_ob + p.t_ab + p.t_cl)) *
                                             link_success_prob(10.0, p)),
                                   10.0, q);
        SimResult wt = simulate_waiting_tree(t, q, cfg);
        // same per-attempt success probability, same attempt spacing
        CHECK(wl.measured_rate == Approx(wt.measured_rate).epsilon(0.10));
    }
}

TEST_CASE("waiting dominates waitless on every seed") {
    PhysParams p;
    for (int k : {3, 4, 6}) {
        std::vector<double> lens(k, 10.0);
        SwappingTree t = path_tree(k, kLat10, 10.0, p);
        for (uint64_t seed = 1; seed <= 10; ++seed) {
            SimConfig cfg;
            cfg.seed = seed;
            cfg.duration = 500.0 * t.root_latency();
            SimResult waiting = simulate_waiting_tree(t, p, cfg);
            SimConfig cfg2 = cfg;
            cfg2.duration = std::min(cfg.duration, 50.0);
            SimResult waitless = simulate_waitless(lens, p, cfg2);
            CHECK(waiting.measured_rate >= waitless.measured_rate);
        }
    }
}

TEST_CASE("operation-driven fidelity exponent ignores tree shape") {
    PhysParams p;
    // all 14 shapes over one 5-link path report identical (leaves, swaps)
    std::vector<double> leaf_lat(5, kLat10);
    SimConfig cfg;
    cfg.seed = 31;
    std::optional<double> op_fidelity;
    for (int shape = 0; shape < 14; ++shape) {
        // drive shape choice through the oracle's enumeration helper by
        // building all trees over the fixed path via balanced splits is not
        // possible; construct from the shape catalog instead
        SwappingTree t;
        const auto& shapes = detail_oracle::shapes_for(5);
        REQUIRE(shapes.size() == 14);
        const auto& sh = shapes[shape];
        std::vector<int> vmap(sh.nodes.size(), -1);
        for (size_t v = 0; v < sh.nodes.size(); ++v) {
            TreeVertex tv;
            if (sh.nodes[v].leaf_pos >= 0) {
                tv.a = sh.nodes[v].leaf_pos;
                tv.b = sh.nodes[v].leaf_pos + 1;
                tv.latency = leaf_lat[sh.nodes[v].leaf_pos];
                tv.leaf_length_km = 10.0;
            } else {
                tv.left = vmap[sh.nodes[v].left];
                tv.right = vmap[sh.nodes[v].right];
                tv.a = t.verts[tv.left].a;
                tv.b = t.verts[tv.right].b;
                tv.swap_node = t.verts[tv.left].b;
            }
            vmap[v] = static_cast<int>(t.verts.size());
            t.verts.push_back(tv);
        }
        t.root = vmap[sh.root];
        annotate_up(t, t.root, p);
        t = throttle(std::move(t), p);
        cfg.duration = 200.0 * t.root_latency();
        SimResult r = simulate_waiting_tree(t, p, cfg, 7000 + shape * 64);
        REQUIRE(r.ep_count > 10);
        // strip the decay part: recover the operation exponent from the
        // best (freshest) delivered pair
        const double w_op = std::pow(p.werner_gate, 4) * std::pow(p.werner_link, 5);
        for (double f : r.fidelities) {
            const double w = werner_for_fidelity(f);
            CHECK(w <= w_op * (1.0 + 1e-9));  // decay only reduces it
        }
        if (!op_fidelity) op_fidelity = w_op;
    }
}

TEST_CASE("independent generator pairs serve multiple requests on one link") {
    PhysParams p;
    std::vector<NodeInfo> nodes(2);
    nodes[0] = {0, 0.0, 0.0, 16, 50e-6};
    nodes[1] = {1, 10.0, 0.0, 16, 50e-6};
    NetworkGraph g(std::move(nodes), {Link{0, 1, 10.0}});
    // two trees each claiming half of the link
    SwappingTree half;
    TreeVertex leaf;
    leaf.a = 0;
    leaf.b = 1;
    leaf.leaf_length_km = 10.0;
    leaf.latency = 2.0 / ((1.0 / p.t_g) * link_success_prob(10.0, p));
    half.verts.push_back(leaf);
    half.root = 0;
    SimConfig cfg;
    cfg.duration = 60.0;
    cfg.seed = 12;
    std::vector<SimResult> rs = simulate_waiting({half, half}, g, p, cfg);
    REQUIRE(rs.size() == 2);
    for (const SimResult& r : rs)
        CHECK(r.measured_rate == Approx(1.0 / leaf.latency).epsilon(0.07));
    CHECK(rs[0].ep_count != rs[1].ep_count);  // independent streams
}

TEST_CASE("simulating infeasible resource claims fails upfront") {
    PhysParams p;
    std::vector<NodeInfo> nodes(3);
    for (int i = 0; i < 3; ++i) nodes[i] = {i, double(10 * i), 0.0, 16, 50e-6};
    NetworkGraph g(std::move(nodes), {Link{0, 1, 10.0}, Link{1, 2, 10.0}});
    ResidualState st = ResidualState::full(g);
    auto tree = throttled_balanced_tree(g, st, {0, 1, 2}, p);
    REQUIRE(tree);
    // two copies of the same tree exceed node 1's generation budget
    SimConfig cfg;
    cfg.duration = 1.0;
    std::vector<SwappingTree> both{*tree, *tree};
    // make the second copy demand full rates again
    CHECK_THROWS_AS(simulate_waiting(both, g, p, cfg), CapacityError);
}
