// Command-line front end: seeded experiment orchestration and plot-ready CSV
// emission. Exit codes: 0 success, 2 configuration error, 3 assertion
// failure, 4 censoring-quality failure, 1 anything unexpected.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qcd/config.hpp"
#include "qcd/csv.hpp"
#include "qcd/experiment.hpp"
#include "qcd/metrics.hpp"
#include "qcd/parallel.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitAssertion = 3;
constexpr int kExitCensoring = 4;

struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> trials;
    std::optional<std::uint64_t> far_trials;
    std::optional<std::uint64_t> pdc_trials;
    std::optional<std::uint64_t> horizon;
    std::optional<std::uint64_t> max_steps;
    std::optional<std::uint64_t> burn_in;
    std::optional<std::string> out;
    std::optional<std::string> algorithm;
    std::vector<double> alpha_grid;
    std::vector<double> threshold_grid;
    std::optional<std::uint64_t> sensors;
    std::optional<double> theta0, theta1, sigma, mu;
    std::optional<std::string> h;
    std::optional<double> skip_prob;
    std::optional<std::uint64_t> stride;
    std::optional<double> threshold;
    std::optional<double> alpha;
    std::optional<std::uint64_t> change_point;
    std::optional<std::string> cadd_mode;
    std::optional<unsigned> threads;
    std::string trace_out;
};

void add_common_flags(CLI::App* cmd, Overrides& ov) {
    cmd->set_help_flag("--help", "print help"); // frees -h / --h for the truncation depth
    cmd->add_option("--config", ov.config_path, "configuration file (JSON)");
    cmd->add_option("--seed", ov.seed, "master seed; mandatory for batch commands");
    cmd->add_option("--trials", ov.trials, "trials for delay estimates");
    cmd->add_option("--far-trials", ov.far_trials, "trials for false-alarm runs");
    cmd->add_option("--pdc-trials", ov.pdc_trials, "trials for duty-cycle estimates");
    cmd->add_option("--horizon", ov.horizon, "duty-cycle horizon (steps)");
    cmd->add_option("--max-steps", ov.max_steps, "step budget per trial (0 = automatic)");
    cmd->add_option("--burn-in", ov.burn_in, "pre-change steps for stationary delay runs (0 = automatic)");
    cmd->add_option("--out", ov.out, "output path");
    cmd->add_option("--algorithm", ov.algorithm,
                    "centralized_cusum | all | de_all | fractional_all | every_nth (comma list for sweeps)");
    cmd->add_option("--alpha-grid", ov.alpha_grid, "false-alarm constraints, comma separated")
        ->delimiter(',');
    cmd->add_option("--threshold-grid", ov.threshold_grid, "raw thresholds, comma separated")
        ->delimiter(',');
    cmd->add_option("--sensors", ov.sensors, "number of identical sensors L");
    cmd->add_option("--theta0", ov.theta0, "pre-change mean");
    cmd->add_option("--theta1", ov.theta1, "post-change mean");
    cmd->add_option("--sigma", ov.sigma, "common standard deviation");
    cmd->add_option("--mu", ov.mu, "DE-CuSum ramp per skipped step");
    cmd->add_option("--h", ov.h, "DE-CuSum truncation depth (number or 'inf')");
    cmd->add_option("--skip-prob", ov.skip_prob, "fractional sampling skip probability");
    cmd->add_option("--stride", ov.stride, "every-nth sampling stride");
    cmd->add_option("--threshold", ov.threshold, "single-run threshold A");
    cmd->add_option("--alpha", ov.alpha, "single-run false-alarm constraint; sets A = |log alpha|");
    cmd->add_option("--change-point", ov.change_point, "change point for trajectory runs");
    cmd->add_option("--cadd-mode", ov.cadd_mode, "default | change_at_one | stationary");
    cmd->add_option("--threads", ov.threads, "worker threads (0 = hardware)");
    cmd->add_option("--trace-out", ov.trace_out, "dump the first trial's per-step network trace (delay)");
}

qcd::ExperimentConfig resolve(const Overrides& ov, qcd::ExperimentConfig base) {
    if (!ov.config_path.empty()) base = qcd::load_config_file(ov.config_path);
    if (ov.seed) base.seed = *ov.seed;
    if (ov.trials) base.trials = *ov.trials;
    if (ov.far_trials) base.far_trials = *ov.far_trials;
    if (ov.pdc_trials) base.pdc_trials = *ov.pdc_trials;
    if (ov.horizon) base.horizon = *ov.horizon;
    if (ov.max_steps) base.max_steps = *ov.max_steps;
    if (ov.burn_in) base.burn_in = *ov.burn_in;
    if (ov.out) base.out = *ov.out;
    if (ov.algorithm) base.algorithm = *ov.algorithm;
    if (!ov.alpha_grid.empty()) base.alpha_grid = ov.alpha_grid;
    if (!ov.threshold_grid.empty()) base.threshold_grid = ov.threshold_grid;
    if (ov.sensors) base.sensors = *ov.sensors;
    if (ov.theta0) base.theta0 = *ov.theta0;
    if (ov.theta1) base.theta1 = *ov.theta1;
    if (ov.sigma) base.sigma = *ov.sigma;
    if (ov.mu) base.mu = *ov.mu;
    if (ov.h) base.h = qcd::parse_h_text(*ov.h);
    if (ov.skip_prob) base.skip_prob = *ov.skip_prob;
    if (ov.stride) base.stride = *ov.stride;
    if (ov.threshold) base.threshold = *ov.threshold;
    if (ov.alpha) {
        if (!(*ov.alpha > 0.0 && *ov.alpha < 1.0)) throw qcd::ConfigError("--alpha must be in (0,1)");
        base.threshold = std::abs(std::log(*ov.alpha));
    }
    if (ov.change_point) base.change_point = *ov.change_point;
    if (ov.cadd_mode) base.cadd_mode = *ov.cadd_mode;
    if (ov.threads) base.threads = *ov.threads;
    qcd::parallel::set_max_threads(base.threads);
    return base;
}

std::uint64_t require_seed(const qcd::ExperimentConfig& c) {
    if (!c.seed) throw qcd::ConfigError("this command needs --seed (or a seed in the config)");
    return *c.seed;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw qcd::ConfigError("cannot open output file: " + path);
    return f;
}

qcd::Algorithm single_algorithm(const qcd::ExperimentConfig& c) {
    const auto list = qcd::parse_algorithms(c.algorithm);
    if (list.size() != 1) throw qcd::ConfigError("this command takes exactly one algorithm");
    return list.front();
}

std::uint64_t single_run_far_budget(const qcd::ExperimentConfig& c) {
    if (c.max_steps > 0) return c.max_steps;
    // single-run default: same 50/alpha rule with alpha read off the threshold
    return qcd::far_step_budget(std::exp(-c.threshold));
}

// ---- trajectory -------------------------------------------------------------

int cmd_trajectory(const qcd::ExperimentConfig& c) {
    if (!c.sensor_overrides.empty() || c.sensors != 1)
        throw qcd::ConfigError("trajectory is a single-sensor command");
    if (c.change_point == qcd::kNeverChanges || c.change_point == 0)
        throw qcd::ConfigError("trajectory needs a finite change point >= 1");
    const std::uint64_t seed = require_seed(c);
    const qcd::DistributionPair pair(c.theta0, c.theta1, c.sigma);
    const qcd::ObservationStream stream(pair, c.change_point,
                                        qcd::observation_stream_for(seed, qcd::kTrajectoryPurpose, 0, 0));
    const qcd::DeCuSumParams params{c.mu, c.h, c.threshold};
    params.validate();

    const std::uint64_t cap = c.max_steps > 0 ? c.max_steps : 100000;
    std::string text = "# qcd trajectory csv v1: CuSum and DE-CuSum on one seeded path\n";
    text += "n,cusum,decusum,sampled\n";
    qcd::CuSumState cs;
    qcd::DeCuSumState ds = qcd::make_decusum_state();
    // both statistics evolve on the same sample path until each has crossed A
    for (std::uint64_t n = 1; n <= cap; ++n) {
        std::optional<double> obs;
        if (ds.next_takes_sample) obs = stream.draw(n);
        const bool sampled = obs.has_value();
        cs = qcd::cusum_step(cs, pair.log_likelihood_ratio(stream.draw(n)));
        ds = qcd::decusum_step(ds, params, obs, pair);
        text += qcd::csv::format_u64(n) + ',' + qcd::csv::format_double(cs.value) + ',' +
                qcd::csv::format_double(ds.value) + ',' + (sampled ? "1" : "0") + '\n';
        if (cs.value > c.threshold && ds.value > c.threshold) break;
    }
    if (c.out.empty()) {
        std::cout << text;
    } else {
        auto f = open_out(c.out);
        f << text;
    }
    return kExitOk;
}

// ---- single-metric commands ---------------------------------------------------

int cmd_far(const qcd::ExperimentConfig& c) {
    const std::uint64_t seed = require_seed(c);
    const auto policy = qcd::to_policy(c, single_algorithm(c), c.threshold);
    const auto est = qcd::estimate_far(policy, c.far_trials, single_run_far_budget(c), seed);
    std::cout << "algorithm " << qcd::algorithm_name(policy.algorithm) << " A "
              << qcd::csv::format_double(c.threshold) << "\n"
              << "far " << qcd::csv::format_double(est.far) << " se " << qcd::csv::format_double(est.se)
              << "\nmean_stop " << qcd::csv::format_double(est.mean_stop_time) << " trials "
              << est.trials << " censored_fraction " << qcd::csv::format_double(est.censored_fraction)
              << "\n";
    if (est.quality_warning) {
        std::cerr << "warning: censored fraction exceeds 5%; the FAR value is an upper bound\n";
        return kExitCensoring;
    }
    return kExitOk;
}

int cmd_delay(const qcd::ExperimentConfig& c, const std::string& trace_out) {
    const std::uint64_t seed = require_seed(c);
    const auto policy = qcd::to_policy(c, single_algorithm(c), c.threshold);
    const auto mode = qcd::resolve_cadd_mode(c, policy);
    const std::uint64_t burn = mode == qcd::CaddMode::stationary_prechange
                                   ? (c.burn_in > 0 ? c.burn_in : qcd::default_burn_in(policy))
                                   : 0;
    if (!trace_out.empty()) {
        std::vector<qcd::TraceRow> trace;
        qcd::TrialOptions opts;
        opts.trace = &trace;
        qcd::run_network_trial(policy, burn + 1, seed, qcd::kCaddPurpose, 0,
                               qcd::resolve_delay_budget(c, burn), opts);
        auto f = open_out(trace_out);
        f << "n,sensor,value,sampled,transmitted\n";
        for (const auto& row : trace)
            f << row.n << ',' << row.sensor + 1 << ',' << qcd::csv::format_double(row.value) << ','
              << (row.sampled ? 1 : 0) << ',' << (row.transmitted ? 1 : 0) << '\n';
    }
    const auto est = qcd::estimate_cadd(policy, c.trials, seed, mode, burn, qcd::resolve_delay_budget(c, burn));
    std::cout << "algorithm " << qcd::algorithm_name(policy.algorithm) << " A "
              << qcd::csv::format_double(c.threshold) << " mode "
              << (mode == qcd::CaddMode::change_at_one ? "change_at_one" : "stationary") << " burn_in "
              << burn << "\n"
              << "cadd " << qcd::csv::format_double(est.cadd) << " se " << qcd::csv::format_double(est.se)
              << " survive_fraction " << qcd::csv::format_double(est.survive_fraction) << (est.unreliable ? " UNRELIABLE" : "")
              << "\n";
    try {
        const auto wadd = qcd::estimate_wadd_proxy(policy, c.trials, seed, qcd::resolve_delay_budget(c, 0));
        std::cout << "wadd_proxy " << qcd::csv::format_double(wadd.cadd) << " se "
                  << qcd::csv::format_double(wadd.se) << "\n";
    } catch (const qcd::UnsupportedPolicy& e) {
        std::cout << "wadd_proxy unsupported: " << e.what() << "\n";
    }
    if (est.censored_fraction > 0.05) {
        std::cerr << "warning: censored fraction exceeds 5%\n";
        return kExitCensoring;
    }
    return kExitOk;
}

int cmd_pdc(const qcd::ExperimentConfig& c) {
    const std::uint64_t seed = require_seed(c);
    const auto policy = qcd::to_policy(c, single_algorithm(c), c.threshold);
    const auto est = qcd::estimate_pdc(policy, c.horizon, c.pdc_trials, seed);
    std::string text = "sensor,pdc,se\n";
    for (std::size_t l = 0; l < est.size(); ++l)
        text += std::to_string(l + 1) + ',' + qcd::csv::format_double(est[l].pdc) + ',' +
                qcd::csv::format_double(est[l].se) + '\n';
    if (c.out.empty()) {
        std::cout << text;
    } else {
        auto f = open_out(c.out);
        f << text;
    }
    return kExitOk;
}

int cmd_oracle(const qcd::ExperimentConfig& c) {
    const std::uint64_t seed = require_seed(c);
    const qcd::DistributionPair pair(c.theta0, c.theta1, c.sigma);
    const auto est = qcd::ladder_oracle(pair, c.mu, c.h, c.pdc_trials, seed);
    std::cout << "record,mu,h,mean_tau_minus,mean_sleep,pdc_formula_value,pdc_se,trials\n"
              << "oracle," << qcd::csv::format_double(c.mu) << ',' << qcd::csv::format_double(c.h) << ','
              << qcd::csv::format_double(est.mean_tau_minus) << ',' << qcd::csv::format_double(est.mean_sleep)
              << ',' << qcd::csv::format_double(est.pdc_formula_value) << ','
              << qcd::csv::format_double(est.pdc_se) << ',' << est.trials << "\n";
    return kExitOk;
}

// ---- batch commands -------------------------------------------------------------

int cmd_sweep(const qcd::ExperimentConfig& c) {
    require_seed(c);
    if (c.out.empty()) {
        qcd::run_sweep(c, std::cout);
    } else {
        auto f = open_out(c.out);
        qcd::run_sweep(c, f);
        std::cout << "wrote " << c.out << "\n";
    }
    return kExitOk;
}

const char* kGnuplotScript =
    "# gnuplot script for the trade-off curves\n"
    "set datafile separator ','\n"
    "set xlabel '|log far|'\n"
    "set ylabel 'cadd'\n"
    "set key left top\n"
    "plot 'fig2_curves.csv' using 6:(strcol(1) eq 'all' ? $8 : 1/0) with linespoints title 'all', \\\n"
    "     '' using 6:(strcol(1) eq 'de_all' ? $8 : 1/0) with linespoints title 'de-all', \\\n"
    "     '' using 6:(strcol(1) eq 'fractional_all' ? $8 : 1/0) with linespoints title 'fractional'\n";

int cmd_reproduce_fig2(std::uint64_t seed, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const auto result = qcd::run_fig2(seed);
    {
        auto f = open_out((fs::path(out_dir) / "fig2_curves.csv").string());
        f << result.csv_text;
    }
    {
        auto f = open_out((fs::path(out_dir) / "fig2_summary.txt").string());
        f << result.summary;
    }
    {
        auto f = open_out((fs::path(out_dir) / "fig2_plot.gp").string());
        f << kGnuplotScript;
    }
    std::cout << result.summary;
    return result.pass ? kExitOk : kExitAssertion;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"sequential change detection simulator for decentralized sensor networks"};
    app.require_subcommand(1);

    Overrides ov;

    auto* trajectory = app.add_subcommand(
        "trajectory", "dump CuSum and DE-CuSum statistics on one seeded single-sensor path");
    auto* sweep = app.add_subcommand("sweep", "trade-off curves over an alpha or threshold grid (CSV)");
    auto* fig2 = app.add_subcommand("reproduce-fig2",
                                    "run the bundled 10-sensor reference experiment and check its claims");
    auto* pdc = app.add_subcommand("pdc", "pre-change duty cycle per sensor");
    auto* far = app.add_subcommand("far", "false alarm rate at one threshold");
    auto* delay = app.add_subcommand("delay", "detection delay at one threshold");
    auto* oracle = app.add_subcommand("oracle", "ladder-variable duty-cycle formula (independent route)");
    for (auto* cmd : {trajectory, sweep, fig2, pdc, far, delay, oracle}) add_common_flags(cmd, ov);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (trajectory->parsed()) {
            qcd::ExperimentConfig base; // single-sensor evolution-plot defaults
            base.sensors = 1;
            base.theta1 = 0.75;
            base.mu = 0.05;
            base.h = 0.5;
            base.threshold = 7.0;
            base.change_point = 40;
            base.seed = 1;
            return cmd_trajectory(resolve(ov, base));
        }
        if (sweep->parsed()) return cmd_sweep(resolve(ov, {}));
        if (fig2->parsed()) {
            qcd::ExperimentConfig base;
            base.seed = 1;
            const auto c = resolve(ov, base);
            return cmd_reproduce_fig2(*c.seed, c.out.empty() ? "." : c.out);
        }
        qcd::ExperimentConfig base;
        if (pdc->parsed()) return cmd_pdc(resolve(ov, base));
        if (far->parsed()) return cmd_far(resolve(ov, base));
        if (delay->parsed()) return cmd_delay(resolve(ov, base), ov.trace_out);
        if (oracle->parsed()) return cmd_oracle(resolve(ov, base));
    } catch (const qcd::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitConfig;
}
