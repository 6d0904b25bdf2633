#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qcd/csv.hpp"
#include "qcd/metrics.hpp"
#include "qcd/network.hpp"

// Experiment configuration: a human-editable JSON file plus command-line
// overrides (flags win). Keys are documented in the README; serialization is
// canonical so a config hash can stamp every output row.

namespace qcd {

struct SensorOverride {
    double theta0 = 0.0;
    double theta1 = 0.4;
    double sigma = 1.0;
    double mu = 0.2;
    double h = 20.0;
    double d = 0.0; // 0 = derive KL-proportional share

    friend bool operator==(const SensorOverride&, const SensorOverride&) = default;
};

// JSON has no infinity literal, so h serializes as the string "inf" when the
// truncation is disabled.
inline nlohmann::json h_to_json(double h) {
    return std::isinf(h) ? nlohmann::json("inf") : nlohmann::json(h);
}

inline double h_from_json(const nlohmann::json& v) {
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
        throw std::invalid_argument("h: expected a number or \"inf\"");
    }
    return v.get<double>();
}

inline double parse_h_text(const std::string& s) {
    if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    return std::stod(s);
}

struct ExperimentConfig {
    // policy
    std::string algorithm = "de_all"; // comma-separated list allowed in sweeps
    std::uint64_t sensors = 1;
    double theta0 = 0.0;
    double theta1 = 0.4;
    double sigma = 1.0;
    double mu = 0.2;
    double h = 20.0;
    double skip_prob = 0.0;
    std::uint64_t stride = 1;
    std::vector<SensorOverride> sensor_overrides; // heterogeneous networks; overrides the scalars
    bool allow_unnormalized_shares = false;

    // grids (sweeps take exactly one of the two)
    std::vector<double> alpha_grid;
    std::vector<double> threshold_grid;

    // budgets
    std::uint64_t trials = 20000;    // delay estimates
    std::uint64_t far_trials = 2000; // false alarm runs are long; fewer trials
    std::uint64_t pdc_trials = 1000;
    std::uint64_t horizon = 100000; // duty-cycle horizon
    std::uint64_t max_steps = 0;    // 0 = per-estimator default
    std::uint64_t burn_in = 0;      // 0 = automatic for stationary delay runs

    // single-run knobs
    double threshold = 7.0;          // used when no grid applies
    std::uint64_t change_point = 40; // trajectory command

    std::string cadd_mode = "default"; // default | change_at_one | stationary
    std::optional<std::uint64_t> seed;
    std::string out;
    unsigned threads = 0; // 0 = hardware concurrency

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

inline void to_json(nlohmann::json& j, const SensorOverride& s) {
    j = nlohmann::json{{"theta0", s.theta0}, {"theta1", s.theta1}, {"sigma", s.sigma},
                       {"mu", s.mu},         {"h", h_to_json(s.h)}, {"d", s.d}};
}

inline void from_json(const nlohmann::json& j, SensorOverride& s) {
    s.theta0 = j.value("theta0", 0.0);
    s.theta1 = j.value("theta1", 0.4);
    s.sigma = j.value("sigma", 1.0);
    s.mu = j.value("mu", 0.2);
    if (j.contains("h")) s.h = h_from_json(j.at("h"));
    s.d = j.value("d", 0.0);
}

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    j = nlohmann::json{
        {"algorithm", c.algorithm},
        {"sensors", c.sensors},
        {"theta0", c.theta0},
        {"theta1", c.theta1},
        {"sigma", c.sigma},
        {"mu", c.mu},
        {"h", h_to_json(c.h)},
        {"skip_prob", c.skip_prob},
        {"stride", c.stride},
        {"sensor_overrides", c.sensor_overrides},
        {"allow_unnormalized_shares", c.allow_unnormalized_shares},
        {"alpha_grid", c.alpha_grid},
        {"threshold_grid", c.threshold_grid},
        {"trials", c.trials},
        {"far_trials", c.far_trials},
        {"pdc_trials", c.pdc_trials},
        {"horizon", c.horizon},
        {"max_steps", c.max_steps},
        {"burn_in", c.burn_in},
        {"threshold", c.threshold},
        {"change_point", c.change_point},
        {"cadd_mode", c.cadd_mode},
        {"seed", c.seed ? nlohmann::json(*c.seed) : nlohmann::json(nullptr)},
        {"out", c.out},
        {"threads", c.threads},
    };
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
    c = ExperimentConfig{};
    c.algorithm = j.value("algorithm", c.algorithm);
    c.sensors = j.value("sensors", c.sensors);
    c.theta0 = j.value("theta0", c.theta0);
    c.theta1 = j.value("theta1", c.theta1);
    c.sigma = j.value("sigma", c.sigma);
    c.mu = j.value("mu", c.mu);
    if (j.contains("h")) c.h = h_from_json(j.at("h"));
    c.skip_prob = j.value("skip_prob", c.skip_prob);
    c.stride = j.value("stride", c.stride);
    if (j.contains("sensor_overrides"))
        c.sensor_overrides = j.at("sensor_overrides").get<std::vector<SensorOverride>>();
    c.allow_unnormalized_shares = j.value("allow_unnormalized_shares", false);
    c.alpha_grid = j.value("alpha_grid", std::vector<double>{});
    c.threshold_grid = j.value("threshold_grid", std::vector<double>{});
    c.trials = j.value("trials", c.trials);
    c.far_trials = j.value("far_trials", c.far_trials);
    c.pdc_trials = j.value("pdc_trials", c.pdc_trials);
    c.horizon = j.value("horizon", c.horizon);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.burn_in = j.value("burn_in", c.burn_in);
    c.threshold = j.value("threshold", c.threshold);
    c.change_point = j.value("change_point", c.change_point);
    c.cadd_mode = j.value("cadd_mode", c.cadd_mode);
    if (j.contains("seed") && !j.at("seed").is_null()) c.seed = j.at("seed").get<std::uint64_t>();
    c.out = j.value("out", c.out);
    c.threads = j.value("threads", c.threads);
}

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::string serialize_config(const ExperimentConfig& c) {
    nlohmann::json j = c;
    return j.dump(2);
}

inline ExperimentConfig parse_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    try {
        return j.get<ExperimentConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }
}

inline ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

// Stable stamp of the exact configuration that produced a row.
inline std::string config_hash(const ExperimentConfig& c) {
    nlohmann::json j = c;
    return csv::hex64(csv::fnv1a(j.dump()));
}

// Splits the (possibly comma-separated) algorithm field.
inline std::vector<Algorithm> parse_algorithms(const std::string& field) {
    std::vector<Algorithm> out;
    std::stringstream ss(field);
    std::string token;
    while (std::getline(ss, token, ',')) {
        if (token.empty()) continue;
        const auto a = algorithm_from_name(token);
        if (!a) throw ConfigError("unknown algorithm: " + token);
        out.push_back(*a);
    }
    if (out.empty()) throw ConfigError("no algorithm given");
    return out;
}

// Builds the network for one algorithm from the config's policy fields.
inline NetworkPolicy to_policy(const ExperimentConfig& c, Algorithm algorithm, double threshold) {
    NetworkPolicy p;
    p.algorithm = algorithm;
    p.threshold = threshold;
    p.skip_prob = algorithm == Algorithm::fractional_all ? c.skip_prob : 0.0;
    p.stride = c.stride;
    p.allow_unnormalized_shares = c.allow_unnormalized_shares;
    if (!c.sensor_overrides.empty()) {
        for (const auto& o : c.sensor_overrides)
            p.sensors.push_back(SensorConfig{DistributionPair(o.theta0, o.theta1, o.sigma), o.mu, o.h, o.d});
        const auto shares = kl_shares(p.sensors);
        for (std::size_t l = 0; l < p.sensors.size(); ++l)
            if (p.sensors[l].d == 0.0) p.sensors[l].d = shares[l];
    } else {
        if (c.sensors < 1) throw ConfigError("sensors must be >= 1");
        const DistributionPair pair(c.theta0, c.theta1, c.sigma);
        p.sensors.assign(c.sensors, SensorConfig{pair, c.mu, c.h, 1.0 / static_cast<double>(c.sensors)});
    }
    p.validate();
    return p;
}

inline CaddMode resolve_cadd_mode(const ExperimentConfig& c, const NetworkPolicy& policy) {
    if (c.cadd_mode == "change_at_one") return CaddMode::change_at_one;
    if (c.cadd_mode == "stationary") return CaddMode::stationary_prechange;
    if (c.cadd_mode == "default") return default_cadd_mode(policy);
    throw ConfigError("cadd_mode must be default, change_at_one or stationary");
}

} // namespace qcd
