#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "qcd/config.hpp"
#include "qcd/csv.hpp"
#include "qcd/metrics.hpp"

// Sweep orchestration: one CSV row per (algorithm, threshold), thresholds
// derived from the alpha grid via A = |log alpha| when alphas are given.
// Rows are flushed as they are produced so an interrupted sweep keeps its
// partial output.

namespace qcd {

struct SweepPoint {
    double alpha = 0.0; // 0 when the grid was raw thresholds
    double threshold = 0.0;
};

inline std::vector<SweepPoint> sweep_points(const ExperimentConfig& c) {
    const bool has_alpha = !c.alpha_grid.empty();
    const bool has_thr = !c.threshold_grid.empty();
    if (has_alpha == has_thr)
        throw ConfigError("exactly one of alpha_grid / threshold_grid must be given");
    std::vector<SweepPoint> pts;
    if (has_alpha) {
        for (double a : c.alpha_grid) {
            if (!(a > 0.0 && a < 1.0)) throw ConfigError("alpha values must lie in (0,1)");
            pts.push_back({a, std::abs(std::log(a))});
        }
    } else {
        for (double t : c.threshold_grid) {
            if (!(t >= 0.0)) throw ConfigError("thresholds must be >= 0");
            pts.push_back({0.0, t});
        }
    }
    return pts;
}

inline std::uint64_t resolve_far_budget(const ExperimentConfig& c, double alpha) {
    if (c.max_steps > 0) return c.max_steps;
    return far_step_budget(alpha > 0.0 ? alpha : 1e-3);
}

inline std::uint64_t resolve_delay_budget(const ExperimentConfig& c, std::uint64_t burn_in) {
    if (c.max_steps > 0) return c.max_steps > burn_in ? c.max_steps : burn_in + 1;
    return burn_in + 100000;
}

// One fully-evaluated grid point.
inline MetricsReport evaluate_point(const ExperimentConfig& c, Algorithm algorithm,
                                    const SweepPoint& pt, std::uint64_t seed) {
    const NetworkPolicy policy = to_policy(c, algorithm, pt.threshold);
    MetricsReport r;
    r.algorithm = algorithm_name(algorithm);
    r.num_sensors = policy.size();
    r.threshold = pt.threshold;
    r.alpha = pt.alpha;
    r.delay_trials = c.trials;
    r.far_trials = c.far_trials;
    r.pdc_trials = c.pdc_trials;

    r.far = estimate_far(policy, c.far_trials, resolve_far_budget(c, pt.alpha), seed);

    const CaddMode mode = resolve_cadd_mode(c, policy);
    const std::uint64_t burn =
        mode == CaddMode::stationary_prechange ? (c.burn_in > 0 ? c.burn_in : default_burn_in(policy)) : 0;
    r.cadd = estimate_cadd(policy, c.trials, seed, mode, burn, resolve_delay_budget(c, burn));

    try {
        r.wadd_proxy = estimate_wadd_proxy(policy, c.trials, seed, resolve_delay_budget(c, 0));
    } catch (const UnsupportedPolicy&) {
        r.wadd_supported = false;
    }

    r.pdc = estimate_pdc(policy, c.horizon, c.pdc_trials, seed);
    r.lower_bound = pt.alpha > 0.0 ? theoretical_lower_bound(pt.alpha, policy.sensors) : 0.0;
    return r;
}

inline std::string sweep_csv_header(std::size_t num_sensors) {
    std::string h =
        "# qcd sweep csv v1: delays and duty cycles per (algorithm, threshold); "
        "far is an upper bound when censored_fraction > 0\n";
    h += "algorithm,threshold,alpha,far,far_se,abs_log_far,censored_fraction,cadd,cadd_se,"
         "wadd_proxy,wadd_proxy_se";
    for (std::size_t l = 1; l <= num_sensors; ++l) h += ",pdc_" + std::to_string(l);
    for (std::size_t l = 1; l <= num_sensors; ++l) h += ",pdc_se_" + std::to_string(l);
    h += ",trials,far_trials,pdc_trials,lower_bound,seed,config_hash\n";
    return h;
}

inline std::string sweep_csv_row(const MetricsReport& r, std::uint64_t seed, const std::string& hash) {
    using csv::format_double;
    using csv::format_u64;
    std::string row = r.algorithm;
    row += ',' + format_double(r.threshold);
    row += ',' + format_double(r.alpha);
    row += ',' + format_double(r.far.far);
    row += ',' + format_double(r.far.se);
    row += ',' + format_double(std::abs(std::log(r.far.far)));
    row += ',' + format_double(r.far.censored_fraction);
    row += ',' + format_double(r.cadd.cadd);
    row += ',' + format_double(r.cadd.se);
    if (r.wadd_supported) {
        row += ',' + format_double(r.wadd_proxy.cadd);
        row += ',' + format_double(r.wadd_proxy.se);
    } else {
        row += ",nan,nan";
    }
    for (const auto& p : r.pdc) row += ',' + format_double(p.pdc);
    for (const auto& p : r.pdc) row += ',' + format_double(p.se);
    row += ',' + format_u64(r.delay_trials);
    row += ',' + format_u64(r.far_trials);
    row += ',' + format_u64(r.pdc_trials);
    row += ',' + format_double(r.lower_bound);
    row += ',' + format_u64(seed);
    row += ',' + hash;
    row += '\n';
    return row;
}

// Runs the whole grid; rows go to `out` (flushed one by one) and to the
// optional callback for in-process consumers.
inline std::vector<MetricsReport> run_sweep(const ExperimentConfig& c, std::ostream& out,
                                            const std::function<void(const MetricsReport&)>& on_row = {}) {
    if (!c.seed) throw ConfigError("sweeps need an explicit seed");
    const auto algorithms = parse_algorithms(c.algorithm);
    const auto points = sweep_points(c);
    const std::string hash = config_hash(c);
    const std::size_t L = c.sensor_overrides.empty() ? c.sensors : c.sensor_overrides.size();
    out << sweep_csv_header(L);
    out.flush();
    std::vector<MetricsReport> rows;
    for (const Algorithm a : algorithms) {
        for (const auto& pt : points) {
            MetricsReport r = evaluate_point(c, a, pt, *c.seed);
            out << sweep_csv_row(r, *c.seed, hash);
            out.flush();
            if (on_row) on_row(r);
            rows.push_back(std::move(r));
        }
    }
    return rows;
}

// ---- bundled reference experiment -------------------------------------------
// Ten identical sensors, N(0,1) -> N(0.4,1), mu = 0.2, h = 20, fractional
// skipping at 0.35 to match the 0.65 duty-cycle budget. The grid spans two
// decades of small false-alarm rates: the data-efficient scheme overtakes
// blind fractional skipping only once the thresholds leave the small-A
// regime. Delay modes are the per-algorithm defaults: change at the first
// sample for the CuSum-type schemes (their worst case) and a stationary
// pre-change start for DE-All.

inline ExperimentConfig fig2_config(std::uint64_t seed) {
    ExperimentConfig c;
    c.algorithm = "all,de_all,fractional_all";
    c.sensors = 10;
    c.theta0 = 0.0;
    c.theta1 = 0.4;
    c.sigma = 1.0;
    c.mu = 0.2;
    c.h = 20.0;
    c.skip_prob = 0.35;
    c.alpha_grid = {1e-3, std::pow(10.0, -3.5), 1e-4, 1e-5};
    c.trials = 5000;
    c.far_trials = 64;
    c.pdc_trials = 96;
    c.horizon = 100000;
    c.max_steps = 100000; // caps false-alarm runs; censoring keeps them upper bounds
    c.cadd_mode = "default";
    c.seed = seed;
    return c;
}

struct Fig2Result {
    std::vector<MetricsReport> rows;
    std::string csv_text;
    std::string summary;
    std::vector<std::string> failures;
    bool pass = false;
};

inline const MetricsReport& fig2_row(const std::vector<MetricsReport>& rows, const std::string& alg,
                                     double alpha) {
    for (const auto& r : rows)
        if (r.algorithm == alg && r.alpha == alpha) return r;
    throw std::logic_error("fig2 row missing: " + alg);
}

inline Fig2Result run_fig2(std::uint64_t seed) {
    const ExperimentConfig c = fig2_config(seed);
    std::ostringstream csv;
    Fig2Result result;
    result.rows = run_sweep(c, csv);
    result.csv_text = csv.str();

    std::ostringstream s;
    std::vector<std::string>& bad = result.failures;
    const auto check = [&](bool ok, const std::string& what) {
        s << (ok ? "  [ok]   " : "  [FAIL] ") << what << '\n';
        if (!ok) bad.push_back(what);
    };

    s << "reference experiment (L=10, N(0,1)->N(0.4,1), mu=0.2, h=20, skip=0.35)\n";
    s << "seed " << seed << ", config hash " << config_hash(c) << "\n\n";

    // duty-cycle budget: every DE-All sensor within 2 se of the 0.65 cap
    const auto& de_any = fig2_row(result.rows, "de_all", c.alpha_grid.front());
    const LadderEstimate oracle =
        ladder_oracle(DistributionPair(c.theta0, c.theta1, c.sigma), c.mu, c.h, 2000000, seed);
    s << "duty cycle: ladder-formula reference " << oracle.pdc_formula_value << " +- " << oracle.pdc_se
      << "\n";
    bool any_pdc_fail = false;
    for (std::size_t l = 0; l < de_any.pdc.size(); ++l) {
        const auto& p = de_any.pdc[l];
        std::ostringstream what;
        what << "pdc_" << (l + 1) << " = " << p.pdc << " +- " << p.se << " <= 0.65 + 2se";
        const bool ok = p.pdc <= 0.65 + 2.0 * p.se;
        any_pdc_fail = any_pdc_fail || !ok;
        check(ok, what.str());
    }
    if (any_pdc_fail)
        s << "  note: simulation and the independent ladder formula both place the duty cycle\n"
             "  near 0.6517 for mu=0.2, h=20, so these parameters exceed the 0.65 budget by\n"
             "  about 0.3% rather than satisfying it exactly.\n";

    // delay ordering at every grid point, matched threshold
    s << "\ndelay ordering (change at first sample):\n";
    for (double a : c.alpha_grid) {
        const auto& all = fig2_row(result.rows, "all", a);
        const auto& de = fig2_row(result.rows, "de_all", a);
        const auto& fr = fig2_row(result.rows, "fractional_all", a);
        s << "  alpha " << a << ": all " << all.cadd.cadd << "  de_all " << de.cadd.cadd
          << "  fractional " << fr.cadd.cadd << '\n';
        {
            std::ostringstream what;
            what << "alpha " << a << ": cadd_all <= cadd_de_all (2 combined se)";
            check(all.cadd.cadd <= de.cadd.cadd + 2.0 * combined_se(all.cadd.se, de.cadd.se), what.str());
        }
        {
            std::ostringstream what;
            what << "alpha " << a << ": cadd_de_all <= cadd_fractional (2 combined se)";
            check(de.cadd.cadd <= fr.cadd.cadd + 2.0 * combined_se(de.cadd.se, fr.cadd.se), what.str());
        }
    }

    // headline gain at the tightest false-alarm constraint; the 1.1 floor is a
    // desk-scale proxy for "significant gain"
    {
        const double a_min = *std::min_element(c.alpha_grid.begin(), c.alpha_grid.end());
        const auto& de = fig2_row(result.rows, "de_all", a_min);
        const auto& fr = fig2_row(result.rows, "fractional_all", a_min);
        const double ratio = fr.cadd.cadd / de.cadd.cadd;
        std::ostringstream what;
        what << "fractional/de_all delay ratio " << ratio << " >= 1.1 at alpha " << a_min
             << " (desk-scale proxy)";
        check(ratio >= 1.1, what.str());
    }

    result.pass = bad.empty();
    s << "\n" << (result.pass ? "all assertions passed" : "ASSERTIONS FAILED") << " ("
      << bad.size() << " failures)\n";
    result.summary = s.str();
    return result;
}

} // namespace qcd
