#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "qnet/graph.hpp"
#include "qnet/rng.hpp"

namespace qnet {

struct WaxmanOptions {
    double mem_lo = 15;  // memory slots drawn uniformly from [mem_lo, mem_hi]
    double mem_hi = 20;
    double gen_interval = 50e-6;
};

// Waxman topology: n nodes uniform in an area_km x area_km square, each
// eligible pair (distance <= max_link_km) linked with probability
// beta * exp(-d / (alpha * Lmax)). alpha is tuned by bisection and beta
// scaled so the expected link count equals density_frac * n(n-1)/2.
// Pure function of (seed, arguments).
inline NetworkGraph generate_waxman(int n, double area_km, double max_link_km,
                                    double density_frac, uint64_t seed,
                                    const WaxmanOptions& opt = {}) {
    if (n < 2) throw std::invalid_argument("generate_waxman: need n >= 2");
    if (density_frac <= 0.0 || density_frac > 1.0)
        throw std::invalid_argument("generate_waxman: density_frac must be in (0,1]");

    RngStream pos_rng(seed, 0);
    RngStream mem_rng(seed, 1);
    RngStream link_rng(seed, 2);

    std::vector<NodeInfo> nodes(n);
    for (int i = 0; i < n; ++i) {
        nodes[i].id = i;
        nodes[i].x_km = pos_rng.uniform(0.0, area_km);
        nodes[i].y_km = pos_rng.uniform(0.0, area_km);
        nodes[i].memory_slots = mem_rng.uniform_int(static_cast<int>(opt.mem_lo),
                                                    static_cast<int>(opt.mem_hi));
        nodes[i].gen_interval = opt.gen_interval;
    }

    struct Pair { int i, j; double d; };
    std::vector<Pair> eligible;
    double max_dist = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double d = std::hypot(nodes[i].x_km - nodes[j].x_km, nodes[i].y_km - nodes[j].y_km);
            max_dist = std::max(max_dist, d);
            if (d <= max_link_km) eligible.push_back({i, j, d});
        }

    const double target = density_frac * n * (n - 1) / 2.0;
    if (static_cast<double>(eligible.size()) < target) {
        std::ostringstream msg;
        msg << "generate_waxman: target density " << density_frac
            << " unreachable under max link length " << max_link_km
            << " km; achievable density is "
            << static_cast<double>(eligible.size()) / (n * (n - 1) / 2.0);
        throw std::runtime_error(msg.str());
    }

    const double scale = max_dist > 0 ? max_dist : 1.0;
    auto expected = [&](double alpha) {
        double s = 0.0;
        for (const Pair& pr : eligible) s += std::exp(-pr.d / (alpha * scale));
        return s;
    };

    // Bisect alpha so the raw expectation sits just above the target, then
    // scale beta to hit the target exactly.
    const double goal = std::min(1.5 * target, eligible.size() * (1.0 - 1e-9));
    double lo = 1e-6, hi = 1e9;
    for (int it = 0; it < 200 && expected(lo) > goal; ++it) lo /= 4.0;
    for (int it = 0; it < 200; ++it) {
        double mid = std::sqrt(lo * hi);
        (expected(mid) < goal ? lo : hi) = mid;
    }
    const double alpha = hi;
    const double beta = target / expected(alpha);

    std::vector<Link> links;
    for (const Pair& pr : eligible) {
        double prob = std::min(1.0, beta * std::exp(-pr.d / (alpha * scale)));
        if (prob >= 1.0 - 1e-9) prob = 1.0;
        if (link_rng.bernoulli(prob)) links.push_back({pr.i, pr.j, pr.d});
    }
    return NetworkGraph(std::move(nodes), std::move(links));
}

}  // namespace qnet
