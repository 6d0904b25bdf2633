#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qcd/network.hpp"
#include "qcd/parallel.hpp"

// Monte Carlo estimators for the operating characteristics: false alarm rate,
// detection delay, the worst-state delay proxy, and the pre-change duty cycle,
// plus the ladder-variable oracle that computes the duty cycle by an
// independent renewal-reward route.

namespace qcd {

// Purpose salts keep the substreams of different estimators disjoint while
// letting two policies evaluated under the same purpose share observation
// paths (common random numbers across thresholds and algorithms).
inline constexpr std::uint64_t kFarPurpose = 0xFA15EA1A11ULL;
inline constexpr std::uint64_t kCaddPurpose = 0xDE1A9ULL;
inline constexpr std::uint64_t kWaddPurpose = 0x30125ULL;
inline constexpr std::uint64_t kPdcPurpose = 0xD07C1ULL;
inline constexpr std::uint64_t kOraclePurpose = 0x1ADDE2ULL;
inline constexpr std::uint64_t kTrajectoryPurpose = 0x7237ULL;

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

inline MeanSe mean_se(std::span<const double> xs) {
    const double n = static_cast<double>(xs.size());
    if (xs.empty()) return {};
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    if (xs.size() == 1) return {mean, 0.0};
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

inline double combined_se(double a, double b) { return std::sqrt(a * a + b * b); }

struct UnsupportedPolicy : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// ---- false alarm rate -------------------------------------------------------

struct FarEstimate {
    double far = 0.0; // 1 / mean stopping time under f0; an upper bound when censored
    double se = 0.0;  // delta-method propagation of the mean's standard error
    double censored_fraction = 0.0;
    double mean_stop_time = 0.0;
    std::uint64_t trials = 0;
    bool quality_warning = false; // censored_fraction > 0.05
};

// Censored runs contribute max_steps, so the E[tau] estimate is a lower bound
// and the FAR estimate a conservative upper bound.
inline FarEstimate estimate_far(const NetworkPolicy& policy, std::uint64_t trials,
                                std::uint64_t max_steps, std::uint64_t seed) {
    policy.validate();
    if (trials < 1) throw std::invalid_argument("estimate_far: trials must be >= 1");
    std::vector<double> stops(trials);
    std::vector<std::uint8_t> censored(trials);
    parallel::for_each_index(trials, [&](std::uint64_t i) {
        const TrialRecord rec = run_network_trial(policy, kNeverChanges, seed, kFarPurpose, i, max_steps);
        stops[i] = static_cast<double>(rec.stop_time);
        censored[i] = rec.censored ? 1 : 0;
    });
    const MeanSe m = mean_se(stops);
    FarEstimate out;
    out.mean_stop_time = m.mean;
    out.far = 1.0 / m.mean;
    out.se = m.se / (m.mean * m.mean);
    out.censored_fraction =
        std::accumulate(censored.begin(), censored.end(), 0.0) / static_cast<double>(trials);
    out.trials = trials;
    out.quality_warning = out.censored_fraction > 0.05;
    return out;
}

// Default step budget for FAR runs: 50/alpha keeps the censoring inflation of
// the E[tau] lower bound under ~2% when the true FAR is near alpha.
inline std::uint64_t far_step_budget(double alpha) {
    return static_cast<std::uint64_t>(std::ceil(50.0 / alpha));
}

// ---- detection delay --------------------------------------------------------

enum class CaddMode {
    change_at_one,        // gamma = 1; exact worst case for CuSum-type policies
    stationary_prechange, // burn-in under f0 first; approximates sup over gamma for DE-type
};

struct CaddEstimate {
    double cadd = 0.0;
    double se = 0.0;
    std::uint64_t trials_used = 0;    // trials with tau >= gamma
    double survive_fraction = 1.0;    // fraction of trials with tau >= gamma
    double censored_fraction = 0.0;
    bool unreliable = false;          // stationary mode with < 50% survivors
};

// Pre-change phase long enough for the DE-CuSum state distribution to mix.
inline std::uint64_t default_burn_in(const NetworkPolicy& policy) {
    double slowest = std::numeric_limits<double>::infinity();
    for (const auto& s : policy.sensors) slowest = std::min(slowest, s.mu * s.pair.kl_f1_f0());
    return 10 * static_cast<std::uint64_t>(std::ceil(1.0 / slowest));
}

inline CaddMode default_cadd_mode(const NetworkPolicy& policy) {
    return policy.algorithm == Algorithm::de_all ? CaddMode::stationary_prechange
                                                 : CaddMode::change_at_one;
}

inline CaddEstimate estimate_cadd(const NetworkPolicy& policy, std::uint64_t trials,
                                  std::uint64_t seed, CaddMode mode, std::uint64_t burn_in,
                                  std::uint64_t max_steps) {
    policy.validate();
    if (trials < 1) throw std::invalid_argument("estimate_cadd: trials must be >= 1");
    const std::uint64_t gamma = mode == CaddMode::change_at_one ? 1 : burn_in + 1;
    if (max_steps <= gamma) throw std::invalid_argument("estimate_cadd: max_steps must exceed gamma");
    std::vector<double> delays(trials, -1.0); // -1 marks tau < gamma
    std::vector<std::uint8_t> censored(trials, 0);
    parallel::for_each_index(trials, [&](std::uint64_t i) {
        const TrialRecord rec = run_network_trial(policy, gamma, seed, kCaddPurpose, i, max_steps);
        censored[i] = rec.censored ? 1 : 0;
        if (rec.stop_time >= gamma) delays[i] = static_cast<double>(rec.stop_time - gamma);
    });
    std::vector<double> kept;
    kept.reserve(trials);
    for (double d : delays)
        if (d >= 0.0) kept.push_back(d);
    const MeanSe m = mean_se(kept);
    CaddEstimate out;
    out.cadd = m.mean;
    out.se = m.se;
    out.trials_used = kept.size();
    out.survive_fraction = static_cast<double>(kept.size()) / static_cast<double>(trials);
    out.censored_fraction =
        std::accumulate(censored.begin(), censored.end(), 0.0) / static_cast<double>(trials);
    out.unreliable = mode == CaddMode::stationary_prechange && out.survive_fraction < 0.5;
    return out;
}

// Worst-state delay proxy: every sensor starts at w_l = -h_l (deepest sleep)
// at the change point. The essential supremum itself is not Monte Carlo
// estimable; this initialization dominates the conditional means over the
// states a simulation can visit. Reported as a proxy, never as WADD itself.
inline CaddEstimate estimate_wadd_proxy(const NetworkPolicy& policy, std::uint64_t trials,
                                        std::uint64_t seed, std::uint64_t max_steps) {
    policy.validate();
    bool all_h_zero = true;
    for (const auto& s : policy.sensors) all_h_zero = all_h_zero && s.h == 0.0;
    if (policy.algorithm != Algorithm::de_all || all_h_zero) {
        // the worst pre-change state of a CuSum-type policy is statistic 0
        CaddEstimate out = estimate_cadd(policy, trials, seed, CaddMode::change_at_one, 0, max_steps);
        return out;
    }
    std::vector<double> starts;
    starts.reserve(policy.size());
    for (const auto& s : policy.sensors) {
        if (std::isinf(s.h))
            throw UnsupportedPolicy("estimate_wadd_proxy: no bounded worst state when h is infinite");
        starts.push_back(-s.h);
    }
    std::vector<double> delays(trials);
    std::vector<std::uint8_t> censored(trials, 0);
    parallel::for_each_index(trials, [&](std::uint64_t i) {
        TrialOptions opts;
        opts.initial_values = &starts;
        const TrialRecord rec = run_network_trial(policy, 1, seed, kWaddPurpose, i, max_steps, opts);
        censored[i] = rec.censored ? 1 : 0;
        delays[i] = static_cast<double>(rec.stop_time - 1);
    });
    const MeanSe m = mean_se(delays);
    CaddEstimate out;
    out.cadd = m.mean;
    out.se = m.se;
    out.trials_used = trials;
    out.survive_fraction = 1.0;
    out.censored_fraction =
        std::accumulate(censored.begin(), censored.end(), 0.0) / static_cast<double>(trials);
    return out;
}

// ---- pre-change duty cycle ----------------------------------------------------

struct PdcEstimate {
    double pdc = 0.0;
    double se = 0.0;
};

// Fraction of steps sampled per sensor over a pure f0 horizon with stopping
// disabled (the duty cycle is not a function of the threshold). The first 10%
// of the horizon is discarded to shed initialization bias.
inline std::vector<PdcEstimate> estimate_pdc(const NetworkPolicy& policy, std::uint64_t horizon,
                                             std::uint64_t trials, std::uint64_t seed) {
    policy.validate();
    if (horizon < 10) throw std::invalid_argument("estimate_pdc: horizon too short");
    if (trials < 1) throw std::invalid_argument("estimate_pdc: trials must be >= 1");
    const std::size_t L = policy.size();
    const std::uint64_t burn = horizon / 10;
    const double window = static_cast<double>(horizon - burn);

    std::vector<std::vector<double>> fractions(L, std::vector<double>(trials));
    parallel::for_each_index(trials, [&](std::uint64_t i) {
        std::vector<std::uint64_t> taken(L, 0);
        switch (policy.algorithm) {
            case Algorithm::centralized_cusum:
            case Algorithm::all:
                for (std::size_t l = 0; l < L; ++l) taken[l] = horizon - burn;
                break;
            case Algorithm::every_nth:
                for (std::uint64_t n = burn + 1; n <= horizon; ++n)
                    if ((n - 1) % policy.stride == 0)
                        for (std::size_t l = 0; l < L; ++l) taken[l] += 1;
                break;
            case Algorithm::fractional_all:
                for (std::size_t l = 0; l < L; ++l) {
                    const rng::Stream skip = skip_stream_for(seed, kPdcPurpose, i, l);
                    for (std::uint64_t n = burn + 1; n <= horizon; ++n)
                        if (!(skip.uniform(n) < policy.skip_prob)) taken[l] += 1;
                }
                break;
            case Algorithm::de_all:
                for (std::size_t l = 0; l < L; ++l) {
                    const auto& cfg = policy.sensors[l];
                    const ObservationStream stream(cfg.pair, kNeverChanges,
                                                   observation_stream_for(seed, kPdcPurpose, i, l));
                    const DeCuSumParams params{cfg.mu, cfg.h, 0.0};
                    DeCuSumState s = make_decusum_state();
                    for (std::uint64_t n = 1; n <= horizon; ++n) {
                        std::optional<double> obs;
                        if (s.next_takes_sample) obs = stream.draw(n);
                        s = decusum_step(s, params, obs, cfg.pair);
                        if (n > burn && obs) taken[l] += 1;
                    }
                }
                break;
        }
        for (std::size_t l = 0; l < L; ++l)
            fractions[l][i] = static_cast<double>(taken[l]) / window;
    });

    std::vector<PdcEstimate> out(L);
    for (std::size_t l = 0; l < L; ++l) {
        const MeanSe m = mean_se(fractions[l]);
        out[l] = {m.mean, m.se};
    }
    return out;
}

// ---- ladder-variable oracle --------------------------------------------------

// Independent route to the duty cycle: simulate the pre-change random walk of
// log-likelihood ratios to its first descent below zero (the ladder epoch),
// truncate the ladder height at -h, and apply the renewal-reward identity
//   pdc = E[tau_minus] / (E[tau_minus] + E[ceil(|height|/mu)]).
// Never touches the DE-CuSum state machine.
struct LadderEstimate {
    double mean_tau_minus = 0.0;
    double mean_sleep = 0.0;
    double pdc_formula_value = 0.0;
    double pdc_se = 0.0; // delta method, covariance included
    double se_tau_minus = 0.0;
    double se_sleep = 0.0;
    std::uint64_t trials = 0;
};

inline LadderEstimate ladder_oracle(const DistributionPair& pair, double mu, double h,
                                    std::uint64_t trials, std::uint64_t seed) {
    if (!(mu > 0.0)) throw std::invalid_argument("ladder_oracle: mu must be > 0");
    if (std::isnan(h) || h < 0.0) throw std::invalid_argument("ladder_oracle: h must be >= 0");
    if (trials < 1) throw std::invalid_argument("ladder_oracle: trials must be >= 1");
    constexpr std::uint64_t kWalkCap = 1u << 24; // tau_minus is a.s. finite under f0
    std::vector<double> taus(trials), sleeps(trials);
    parallel::for_each_index(trials, [&](std::uint64_t i) {
        const rng::Stream stream{rng::derive_key(seed, kOraclePurpose, i, 0)};
        double sum = 0.0;
        std::uint64_t n = 0;
        while (n < kWalkCap) {
            ++n;
            sum += pair.log_likelihood_ratio(pair.theta0() + pair.sigma() * stream.normal(n));
            if (sum < 0.0) break;
        }
        const double height = sum < -h ? -h : sum;
        taus[i] = static_cast<double>(n);
        sleeps[i] = std::ceil(std::abs(height) / mu);
    });
    const MeanSe mt = mean_se(taus);
    const MeanSe ms = mean_se(sleeps);
    double cov = 0.0;
    for (std::uint64_t i = 0; i < trials; ++i)
        cov += (taus[i] - mt.mean) * (sleeps[i] - ms.mean);
    cov /= trials > 1 ? static_cast<double>(trials - 1) * static_cast<double>(trials) : 1.0;

    LadderEstimate out;
    out.mean_tau_minus = mt.mean;
    out.mean_sleep = ms.mean;
    out.se_tau_minus = mt.se;
    out.se_sleep = ms.se;
    out.trials = trials;
    const double total = mt.mean + ms.mean;
    out.pdc_formula_value = mt.mean / total;
    const double var = (ms.mean * ms.mean * mt.se * mt.se + mt.mean * mt.mean * ms.se * ms.se -
                        2.0 * mt.mean * ms.mean * cov) /
                       (total * total * total * total);
    out.pdc_se = var > 0.0 ? std::sqrt(var) : 0.0;
    return out;
}

// ---- reference lines ----------------------------------------------------------

// |log alpha| / sum_l D(f1_l || f0_l): the delay floor any policy meeting the
// FAR constraint must respect asymptotically.
inline double theoretical_lower_bound(double alpha, std::span<const SensorConfig> sensors) {
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw std::invalid_argument("theoretical_lower_bound: alpha must be in (0,1]");
    double total = 0.0;
    for (const auto& s : sensors) total += s.pair.kl_f1_f0();
    return std::abs(std::log(alpha)) / total;
}

// ---- aggregated report ---------------------------------------------------------

struct MetricsReport {
    std::string algorithm;
    std::size_t num_sensors = 0;
    double threshold = 0.0;
    double alpha = 0.0; // 0 when the sweep was given raw thresholds
    FarEstimate far;
    CaddEstimate cadd;
    CaddEstimate wadd_proxy;
    bool wadd_supported = true;
    std::vector<PdcEstimate> pdc;
    double lower_bound = 0.0;
    std::uint64_t delay_trials = 0;
    std::uint64_t far_trials = 0;
    std::uint64_t pdc_trials = 0;
};

} // namespace qcd
