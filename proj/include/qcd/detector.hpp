#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qcd/model.hpp"

// Single-stream sequential detectors as explicit step-wise state machines.
// CuSum accumulates log-likelihood ratios and resets at zero. DE-CuSum is the
// data-efficient variant: undershoots below zero are truncated at -h, the
// statistic then ramps back up in steps of mu while observations are skipped.

namespace qcd {

struct CuSumState {
    double value = 0.0;
    std::uint64_t steps = 0;
};

inline CuSumState cusum_step(CuSumState state, double llr) noexcept {
    const double v = state.value + llr;
    return {v > 0.0 ? v : 0.0, state.steps + 1};
}

struct DeCuSumParams {
    double mu = 0.0;        // ramp per skipped step, > 0
    double h = 0.0;         // truncation depth, >= 0; may be infinity (no truncation)
    double threshold = 0.0; // caller's stash for A or d_l*A; run functions take it explicitly

    void validate() const {
        if (!(mu > 0.0)) throw std::invalid_argument("DeCuSumParams: mu must be > 0");
        if (std::isnan(h) || h < 0.0) throw std::invalid_argument("DeCuSumParams: h must be >= 0");
        if (std::isnan(threshold) || threshold < 0.0)
            throw std::invalid_argument("DeCuSumParams: threshold must be >= 0");
    }
};

// Thrown when the caller feeds an observation while the detector asked to
// skip, or withholds one while it asked to sample.
struct ControlViolation : std::logic_error {
    using std::logic_error::logic_error;
};

struct DeCuSumState {
    double value = 0.0;
    std::uint64_t steps = 0;
    bool next_takes_sample = true; // S_{n+1}: sample is due iff value >= 0
    std::uint64_t samples_taken = 0;

    // Sleep ramp bookkeeping: the value after k skipped steps is computed as
    // min(entry + k*mu, 0) from the sleep entry point rather than by repeated
    // addition, so the number of skips equals ceil(|entry|/mu) exactly even
    // when |entry|/mu is an integer (truncation puts an atom at exactly -h).
    double sleep_entry = 0.0;
    std::uint64_t sleep_steps = 0;
};

inline DeCuSumState make_decusum_state(double initial_value = 0.0) {
    if (initial_value == 0.0) initial_value = 0.0; // clears -0.0
    DeCuSumState s;
    s.value = initial_value;
    s.next_takes_sample = initial_value >= 0.0;
    s.sleep_entry = initial_value;
    return s;
}

inline DeCuSumState decusum_step(const DeCuSumState& state, const DeCuSumParams& params,
                                 std::optional<double> observation, const DistributionPair& pair) {
    if (observation.has_value() != state.next_takes_sample)
        throw ControlViolation(observation ? "decusum_step: observation supplied on a skip step"
                                           : "decusum_step: observation missing on a sample step");
    DeCuSumState next = state;
    next.steps = state.steps + 1;
    if (observation) {
        double v = state.value + pair.log_likelihood_ratio(*observation);
        if (v < -params.h) v = -params.h;
        if (v == 0.0) v = 0.0; // normalize -0.0 so the h=0 reduction is bit-identical to CuSum
        next.value = v;
        next.samples_taken = state.samples_taken + 1;
        if (v < 0.0) {
            next.sleep_entry = v;
            next.sleep_steps = 0;
        }
    } else {
        const std::uint64_t k = state.sleep_steps + 1;
        double v = state.sleep_entry + static_cast<double>(k) * params.mu;
        if (v >= 0.0) v = 0.0;
        next.value = v;
        next.sleep_steps = k;
    }
    next.next_takes_sample = next.value >= 0.0;
    return next;
}

struct TrajectoryPoint {
    std::uint64_t n = 0;
    double value = 0.0;
    bool sampled = false;
};

struct RunResult {
    std::uint64_t stop_time = 0; // first n with statistic > threshold; max_steps if censored
    bool censored = false;
    std::uint64_t samples_taken = 0;
};

// Runs CuSum on the stream until the statistic strictly exceeds the
// threshold. Ties at exactly the threshold do not stop.
inline RunResult run_cusum_until_stop(const ObservationStream& stream, double threshold,
                                      std::uint64_t max_steps,
                                      std::vector<TrajectoryPoint>* trajectory = nullptr) {
    CuSumState s;
    for (std::uint64_t n = 1; n <= max_steps; ++n) {
        s = cusum_step(s, stream.pair().log_likelihood_ratio(stream.draw(n)));
        if (trajectory) trajectory->push_back({n, s.value, true});
        if (s.value > threshold) return {n, false, n};
    }
    return {max_steps, true, max_steps};
}

inline RunResult run_decusum_until_stop(const ObservationStream& stream, const DeCuSumParams& params,
                                        double threshold, std::uint64_t max_steps,
                                        std::vector<TrajectoryPoint>* trajectory = nullptr,
                                        double initial_value = 0.0) {
    params.validate();
    if (initial_value < -params.h)
        throw std::invalid_argument("run_decusum_until_stop: initial value below -h");
    DeCuSumState s = make_decusum_state(initial_value);
    for (std::uint64_t n = 1; n <= max_steps; ++n) {
        std::optional<double> obs;
        if (s.next_takes_sample) obs = stream.draw(n);
        const bool sampled = obs.has_value();
        s = decusum_step(s, params, obs, stream.pair());
        if (trajectory) trajectory->push_back({n, s.value, sampled});
        if (s.value > threshold) return {n, false, s.samples_taken};
    }
    return {max_steps, true, s.samples_taken};
}

} // namespace qcd
