#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qcd/detector.hpp"
#include "qcd/model.hpp"
#include "qcd/rng.hpp"

// Decentralized network layer: L sensors on a shared discrete clock plus the
// fusion-center stopping rules. Transmissions arrive within the same slot;
// NULL transmissions count as zero at the fusion center.

namespace qcd {

enum class Algorithm {
    centralized_cusum, // raw observations fused into one CuSum
    all,               // local CuSums, alarm when every sensor transmits 1 at once
    de_all,            // local DE-CuSums, same fusion rule
    fractional_all,    // ALL with i.i.d. Bernoulli sample skipping per sensor
    every_nth,         // centralized CuSum fed every stride-th sample
};

inline const char* algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::centralized_cusum: return "centralized_cusum";
        case Algorithm::all: return "all";
        case Algorithm::de_all: return "de_all";
        case Algorithm::fractional_all: return "fractional_all";
        case Algorithm::every_nth: return "every_nth";
    }
    return "?";
}

inline std::optional<Algorithm> algorithm_from_name(const std::string& s) {
    if (s == "centralized_cusum") return Algorithm::centralized_cusum;
    if (s == "all") return Algorithm::all;
    if (s == "de_all") return Algorithm::de_all;
    if (s == "fractional_all") return Algorithm::fractional_all;
    if (s == "every_nth") return Algorithm::every_nth;
    return std::nullopt;
}

struct SensorConfig {
    DistributionPair pair;
    double mu = 0.2; // DE-CuSum ramp (used by de_all)
    double h = 0.0;  // DE-CuSum truncation depth
    double d = 1.0;  // share of the global threshold; local threshold is d*A
};

// KL-proportional threshold shares d_l = D(f1_l||f0_l) / sum_k D(f1_k||f0_k)
inline std::vector<double> kl_shares(std::span<const SensorConfig> sensors) {
    double total = 0.0;
    for (const auto& s : sensors) total += s.pair.kl_f1_f0();
    std::vector<double> out;
    out.reserve(sensors.size());
    for (const auto& s : sensors) out.push_back(s.pair.kl_f1_f0() / total);
    return out;
}

struct NetworkPolicy {
    Algorithm algorithm = Algorithm::centralized_cusum;
    std::vector<SensorConfig> sensors;
    double threshold = 0.0;   // global threshold A
    double skip_prob = 0.0;   // fractional_all only, in [0,1)
    std::uint64_t stride = 1; // every_nth only, >= 1
    bool allow_unnormalized_shares = false;

    std::size_t size() const noexcept { return sensors.size(); }

    // Hard contract violations throw; tolerated oddities come back as warnings.
    std::vector<std::string> validate() const {
        if (sensors.empty()) throw std::invalid_argument("NetworkPolicy: needs at least one sensor");
        if (std::isnan(threshold) || threshold < 0.0)
            throw std::invalid_argument("NetworkPolicy: threshold must be >= 0");
        if (!(skip_prob >= 0.0 && skip_prob < 1.0))
            throw std::invalid_argument("NetworkPolicy: skip_prob must be in [0,1)");
        if (stride < 1) throw std::invalid_argument("NetworkPolicy: stride must be >= 1");
        for (const auto& s : sensors) {
            if (!(s.mu > 0.0)) throw std::invalid_argument("NetworkPolicy: sensor mu must be > 0");
            if (std::isnan(s.h) || s.h < 0.0) throw std::invalid_argument("NetworkPolicy: sensor h must be >= 0");
            if (!(s.d > 0.0 && s.d <= 1.0)) throw std::invalid_argument("NetworkPolicy: sensor d must be in (0,1]");
        }
        std::vector<std::string> warnings;
        double sum_d = 0.0;
        for (const auto& s : sensors) sum_d += s.d;
        if (std::abs(sum_d - 1.0) > 1e-12) {
            if (!allow_unnormalized_shares)
                throw std::invalid_argument("NetworkPolicy: threshold shares sum to " + std::to_string(sum_d) +
                                            ", not 1; set allow_unnormalized_shares to keep them");
            warnings.push_back("threshold shares sum to " + std::to_string(sum_d) + " (not normalized)");
        }
        return warnings;
    }
};

// L identical sensors with KL-proportional (equal) shares.
inline NetworkPolicy make_homogeneous_policy(Algorithm algorithm, std::size_t num_sensors,
                                             const DistributionPair& pair, double mu, double h,
                                             double threshold, double skip_prob = 0.0,
                                             std::uint64_t stride = 1) {
    NetworkPolicy p;
    p.algorithm = algorithm;
    p.threshold = threshold;
    p.skip_prob = skip_prob;
    p.stride = stride;
    p.sensors.assign(num_sensors, SensorConfig{pair, mu, h, 1.0 / static_cast<double>(num_sensors)});
    return p;
}

// ---- per-step fusion rules -------------------------------------------------

// V' = max{0, V + sum_l llr_l}; stops iff V' > A
inline bool step_centralized(CuSumState& fused, double summed_llr, double threshold) noexcept {
    fused = cusum_step(fused, summed_llr);
    return fused.value > threshold;
}

// Y_l = [C_l > d_l*A] after updating every local CuSum; stops iff all Y_l = 1
inline bool step_all(std::span<CuSumState> states, std::span<const double> llrs,
                     std::span<const double> local_thresholds, std::span<std::uint8_t> transmissions) {
    bool all_one = true;
    for (std::size_t l = 0; l < states.size(); ++l) {
        states[l] = cusum_step(states[l], llrs[l]);
        const bool y = states[l].value > local_thresholds[l];
        transmissions[l] = y ? 1 : 0;
        all_one = all_one && y;
    }
    return all_one;
}

// DE-CuSum at each sensor; observations must be present exactly for the
// sensors whose control asked for a sample.
inline bool step_deall(std::span<DeCuSumState> states, std::span<const SensorConfig> sensors,
                       std::span<const std::optional<double>> observations,
                       std::span<const double> local_thresholds, std::span<std::uint8_t> transmissions) {
    bool all_one = true;
    for (std::size_t l = 0; l < states.size(); ++l) {
        DeCuSumParams params{sensors[l].mu, sensors[l].h, local_thresholds[l]};
        states[l] = decusum_step(states[l], params, observations[l], sensors[l].pair);
        const bool y = states[l].value > local_thresholds[l];
        transmissions[l] = y ? 1 : 0;
        all_one = all_one && y;
    }
    return all_one;
}

// ALL with exogenous skips: a skipped sensor holds its statistic unchanged
// and accumulates no likelihood.
inline bool step_fractional(std::span<CuSumState> states, std::span<const std::uint8_t> skip,
                            std::span<const double> llrs, std::span<const double> local_thresholds,
                            std::span<std::uint8_t> transmissions) {
    bool all_one = true;
    for (std::size_t l = 0; l < states.size(); ++l) {
        if (skip[l]) {
            states[l].steps += 1;
        } else {
            states[l] = cusum_step(states[l], llrs[l]);
        }
        const bool y = states[l].value > local_thresholds[l];
        transmissions[l] = y ? 1 : 0;
        all_one = all_one && y;
    }
    return all_one;
}

// ---- whole-trial driver ----------------------------------------------------

struct TrialRecord {
    std::uint64_t stop_time = 0;
    bool censored = false;
    std::uint64_t change_point = kNeverChanges;
    std::vector<std::uint64_t> samples_per_sensor;
    std::vector<std::uint64_t> ones_transmitted_per_sensor; // explicit 1s (binary uplink) or raw sends
    std::vector<std::uint64_t> pre_change_samples_per_sensor; // sum of S_{k,l} for k < gamma
};

struct TraceRow {
    std::uint64_t n = 0;
    std::uint32_t sensor = 0;
    double value = 0.0; // local W or C; for raw-uplink rules the fused V, repeated per sensor
    bool sampled = false;
    bool transmitted = false;
};

// Stream slots within a trial: observations use slot 2l, skip decisions 2l+1.
inline rng::Stream observation_stream_for(std::uint64_t master, std::uint64_t purpose,
                                          std::uint64_t trial, std::size_t sensor) {
    return {rng::derive_key(master, purpose, trial, 2 * static_cast<std::uint64_t>(sensor))};
}
inline rng::Stream skip_stream_for(std::uint64_t master, std::uint64_t purpose,
                                   std::uint64_t trial, std::size_t sensor) {
    return {rng::derive_key(master, purpose, trial, 2 * static_cast<std::uint64_t>(sensor) + 1)};
}

struct TrialOptions {
    const std::vector<double>* initial_values = nullptr; // per-sensor starting statistic (de_all only)
    std::vector<TraceRow>* trace = nullptr;
};

// Runs one seeded network trial to the stopping time (or the step budget).
// Deterministic in (policy, change_point, master, purpose, trial).
inline TrialRecord run_network_trial(const NetworkPolicy& policy, std::uint64_t change_point,
                                     std::uint64_t master_seed, std::uint64_t purpose,
                                     std::uint64_t trial, std::uint64_t max_steps,
                                     const TrialOptions& opts = {}) {
    const std::size_t L = policy.size();
    TrialRecord rec;
    rec.change_point = change_point;
    rec.samples_per_sensor.assign(L, 0);
    rec.ones_transmitted_per_sensor.assign(L, 0);
    rec.pre_change_samples_per_sensor.assign(L, 0);

    std::vector<ObservationStream> streams;
    streams.reserve(L);
    for (std::size_t l = 0; l < L; ++l)
        streams.emplace_back(policy.sensors[l].pair, change_point,
                             observation_stream_for(master_seed, purpose, trial, l));

    std::vector<double> local_thr(L);
    for (std::size_t l = 0; l < L; ++l) local_thr[l] = policy.sensors[l].d * policy.threshold;

    const auto note_sample = [&](std::size_t l, std::uint64_t n) {
        rec.samples_per_sensor[l] += 1;
        if (n < change_point) rec.pre_change_samples_per_sensor[l] += 1;
    };
    const auto trace_step = [&](std::uint64_t n, std::size_t l, double value, bool sampled, bool sent) {
        if (opts.trace) opts.trace->push_back({n, static_cast<std::uint32_t>(l), value, sampled, sent});
    };

    switch (policy.algorithm) {
        case Algorithm::centralized_cusum:
        case Algorithm::every_nth: {
            CuSumState fused;
            const std::uint64_t stride = policy.algorithm == Algorithm::every_nth ? policy.stride : 1;
            for (std::uint64_t n = 1; n <= max_steps; ++n) {
                const bool sampled = (n - 1) % stride == 0;
                if (sampled) {
                    double sum = 0.0;
                    for (std::size_t l = 0; l < L; ++l) {
                        sum += policy.sensors[l].pair.log_likelihood_ratio(streams[l].draw(n));
                        note_sample(l, n);
                        rec.ones_transmitted_per_sensor[l] += 1; // raw value sent upstream
                    }
                    if (step_centralized(fused, sum, policy.threshold)) {
                        for (std::size_t l = 0; l < L; ++l) trace_step(n, l, fused.value, true, true);
                        rec.stop_time = n;
                        return rec;
                    }
                }
                for (std::size_t l = 0; l < L; ++l) trace_step(n, l, fused.value, sampled, sampled);
            }
            break;
        }
        case Algorithm::all:
        case Algorithm::fractional_all: {
            std::vector<CuSumState> states(L);
            std::vector<double> llrs(L);
            std::vector<std::uint8_t> skip(L, 0), y(L, 0);
            std::vector<rng::Stream> skips;
            skips.reserve(L);
            for (std::size_t l = 0; l < L; ++l)
                skips.push_back(skip_stream_for(master_seed, purpose, trial, l));
            for (std::uint64_t n = 1; n <= max_steps; ++n) {
                for (std::size_t l = 0; l < L; ++l) {
                    skip[l] = policy.algorithm == Algorithm::fractional_all &&
                                      skips[l].uniform(n) < policy.skip_prob
                                  ? 1
                                  : 0;
                    if (!skip[l]) {
                        llrs[l] = policy.sensors[l].pair.log_likelihood_ratio(streams[l].draw(n));
                        note_sample(l, n);
                    } else {
                        llrs[l] = 0.0;
                    }
                }
                const bool stopped = step_fractional(states, skip, llrs, local_thr, y);
                for (std::size_t l = 0; l < L; ++l) {
                    if (y[l]) rec.ones_transmitted_per_sensor[l] += 1;
                    trace_step(n, l, states[l].value, !skip[l], y[l]);
                }
                if (stopped) {
                    rec.stop_time = n;
                    return rec;
                }
            }
            break;
        }
        case Algorithm::de_all: {
            std::vector<DeCuSumState> states;
            states.reserve(L);
            for (std::size_t l = 0; l < L; ++l) {
                double w0 = opts.initial_values ? (*opts.initial_values)[l] : 0.0;
                states.push_back(make_decusum_state(w0));
            }
            std::vector<std::optional<double>> obs(L);
            std::vector<std::uint8_t> y(L, 0);
            for (std::uint64_t n = 1; n <= max_steps; ++n) {
                for (std::size_t l = 0; l < L; ++l) {
                    obs[l].reset();
                    if (states[l].next_takes_sample) {
                        obs[l] = streams[l].draw(n);
                        note_sample(l, n);
                    }
                }
                const bool stopped = step_deall(states, policy.sensors, obs, local_thr, y);
                for (std::size_t l = 0; l < L; ++l) {
                    if (y[l]) rec.ones_transmitted_per_sensor[l] += 1;
                    trace_step(n, l, states[l].value, obs[l].has_value(), y[l]);
                }
                if (stopped) {
                    rec.stop_time = n;
                    return rec;
                }
            }
            break;
        }
    }
    rec.stop_time = max_steps;
    rec.censored = true;
    return rec;
}

} // namespace qcd
