#pragma once

#include <cmath>
#include <stdexcept>

namespace qnet {

// Speed of light in optical fiber, km/s. Used for classical-message and
// photon-transmission latencies derived from distances.
inline constexpr double kFiberKmPerSec = 2.0e5;

// Werner parameter w of a pair with fidelity F, from F = (1 + 3w)/4.
inline double werner_for_fidelity(double fidelity) {
    return (4.0 * fidelity - 1.0) / 3.0;
}

inline double fidelity_for_werner(double w) { return (1.0 + 3.0 * w) / 4.0; }

// Memory decay constant such that a stored pair of initial fidelity 1.0
// decays to `fidelity_at` after `seconds` of storage.
inline double decay_time_for_fidelity(double fidelity_at, double seconds) {
    return -seconds / std::log(werner_for_fidelity(fidelity_at));
}

// Physical-layer constants of the network hardware plus the per-query
// fidelity thresholds. Defaults follow the usual repeater-chain literature
// values: atomic BSM success 0.4 with optical BSM at half of that,
// atom-photon generation every 50us with success 0.33, 20km attenuation
// length. Classical per-hop latency defaults to a 10km hop at fiber speed.
struct PhysParams {
    double t_g  = 50e-6;   // atom-photon generation interval [s]
    double p_g  = 0.33;    // atom-photon generation success probability
    double p_ob = 0.2;     // optical (mid-link) BSM success probability
    double t_ob = 10e-6;   // optical BSM latency [s]
    double p_ab = 0.4;     // atomic (swap) BSM success probability
    double t_ab = 10e-6;   // atomic BSM latency [s]
    double t_cl = 10.0 / kFiberKmPerSec;  // classical message latency per hop [s]

    double attenuation_km = 20.0;  // channel attenuation length L [km]

    int    tau_l       = 8;    // max leaves per swapping tree
    double tau_d       = 1.0;  // expected-age (decoherence) threshold [s]
    double discard_age = 1.0;  // runtime qubit discard threshold [s]

    // Scalar Werner fidelity model. werner_link is calibrated so a fresh
    // link pair has fidelity 0.995; t_dec so a stored qubit's pair decays
    // from fidelity 1.0 to 0.90 over 60 seconds.
    double werner_link = werner_for_fidelity(0.995);
    double werner_gate = 0.99;
    double t_dec       = decay_time_for_fidelity(0.90, 60.0);

    void validate() const {
        auto prob = [](double p) { return p > 0.0 && p <= 1.0; };
        if (!prob(p_g) || !prob(p_ob) || !prob(p_ab) || !prob(werner_link) || !prob(werner_gate))
            throw std::invalid_argument("PhysParams: probabilities must lie in (0,1]");
        if (t_g < 0 || t_ob < 0 || t_ab < 0 || t_cl < 0 || tau_d < 0 || discard_age <= 0)
            throw std::invalid_argument("PhysParams: times must be non-negative");
        if (attenuation_km <= 0) throw std::invalid_argument("PhysParams: attenuation_km must be positive");
        if (tau_l < 1) throw std::invalid_argument("PhysParams: tau_l must be >= 1");
        if (t_dec <= 0) throw std::invalid_argument("PhysParams: t_dec must be positive");
    }
};

// Success probability of one attempt to herald a link pair over a channel
// of the given length: both atom-photon generations, both half-link photon
// transmissions (e^{-d/2L} each), and the optical BSM.
inline double link_success_prob(double length_km, const PhysParams& p) {
    if (length_km < 0) throw std::invalid_argument("link_success_prob: negative length");
    const double eps = std::exp(-length_km / (2.0 * p.attenuation_km));
    return p.p_g * p.p_g * eps * eps * p.p_ob;
}

// Expected latency of one heralded link pair when the two end nodes devote
// usage fractions u_i, u_j of generation rates rate_i, rate_j to this link.
// The slower committed side bounds the attempt rate.
inline double link_ep_latency_rates(double length_km, double rate_i, double rate_j,
                                    double usage_i, double usage_j, const PhysParams& p) {
    if (usage_i <= 0.0 || usage_j <= 0.0)
        throw std::invalid_argument("link_ep_latency: zero usage");
    const double attempts = std::min(usage_i * rate_i, usage_j * rate_j);
    if (attempts <= 0.0) throw std::invalid_argument("link_ep_latency: no generation capacity");
    return 1.0 / (attempts * link_success_prob(length_km, p));
}

// Photon transmission time for a link: each photon travels half the link.
inline double photon_transit_time(double length_km) {
    return (length_km / 2.0) / kFiberKmPerSec;
}

}  // namespace qnet
