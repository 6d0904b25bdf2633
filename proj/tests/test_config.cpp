#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <limits>

#include "qcd/config.hpp"
#include "qcd/csv.hpp"
#include "qcd/experiment.hpp"

using namespace qcd;

TEST_CASE("config round trips through its serialization") {
    ExperimentConfig c;
    CHECK(parse_config(serialize_config(c)) == c);

    c.algorithm = "all,de_all";
    c.sensors = 10;
    c.theta1 = 0.75;
    c.mu = 0.05;
    c.h = std::numeric_limits<double>::infinity();
    c.skip_prob = 0.35;
    c.alpha_grid = {0.01, 0.001};
    c.seed = 99;
    c.out = "curves.csv";
    c.cadd_mode = "stationary";
    c.sensor_overrides = {{0.0, 0.4, 1.0, 0.2, 20.0, 0.5}, {0.0, 0.75, 2.0, 0.1, 0.5, 0.5}};
    const ExperimentConfig back = parse_config(serialize_config(c));
    CHECK(back == c);
    CHECK(std::isinf(back.h));
}

TEST_CASE("config hash is stable and sensitive") {
    ExperimentConfig a, b;
    CHECK(config_hash(a) == config_hash(b));
    b.trials += 1;
    CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("malformed configs are reported as config errors") {
    CHECK_THROWS_AS(parse_config("{nope"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"sensors": "many"})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"h": "huge"})"), std::exception);
    CHECK_THROWS_AS(load_config_file("/nonexistent/config.json"), ConfigError);
    CHECK(parse_config(R"({"h": "inf"})").h == std::numeric_limits<double>::infinity());
}

TEST_CASE("algorithm lists") {
    const auto list = parse_algorithms("all,de_all,fractional_all");
    REQUIRE(list.size() == 3);
    CHECK(list[0] == Algorithm::all);
    CHECK(list[2] == Algorithm::fractional_all);
    CHECK_THROWS_AS(parse_algorithms("cusum_but_better"), ConfigError);
    CHECK_THROWS_AS(parse_algorithms(""), ConfigError);
}

TEST_CASE("policies built from configs") {
    ExperimentConfig c;
    c.sensors = 4;
    const auto p = to_policy(c, Algorithm::de_all, 3.0);
    REQUIRE(p.size() == 4);
    CHECK(p.sensors[0].d == Catch::Approx(0.25));
    CHECK(p.threshold == 3.0);

    // per-sensor overrides with derived shares
    ExperimentConfig het;
    het.sensor_overrides = {{0.0, 0.4, 1.0, 0.2, 20.0, 0.0}, {0.0, 0.75, 1.0, 0.2, 20.0, 0.0}};
    const auto hp = to_policy(het, Algorithm::all, 2.0);
    CHECK(hp.sensors[0].d + hp.sensors[1].d == Catch::Approx(1.0).margin(1e-12));
    CHECK(hp.sensors[1].d > hp.sensors[0].d);

    // skip probability only applies to the fractional scheme
    ExperimentConfig fr;
    fr.skip_prob = 0.35;
    CHECK(to_policy(fr, Algorithm::fractional_all, 1.0).skip_prob == 0.35);
    CHECK(to_policy(fr, Algorithm::all, 1.0).skip_prob == 0.0);
}

TEST_CASE("sweep grids") {
    ExperimentConfig c;
    c.alpha_grid = {0.01};
    const auto pts = sweep_points(c);
    REQUIRE(pts.size() == 1);
    CHECK(pts[0].threshold == Catch::Approx(std::abs(std::log(0.01))));

    c.threshold_grid = {1.0};
    CHECK_THROWS_AS(sweep_points(c), ConfigError); // both grids given
    c.alpha_grid.clear();
    CHECK(sweep_points(c)[0].threshold == 1.0);
    c.threshold_grid.clear();
    CHECK_THROWS_AS(sweep_points(c), ConfigError); // neither
    c.alpha_grid = {1.5};
    CHECK_THROWS_AS(sweep_points(c), ConfigError); // alpha out of range
}

TEST_CASE("cadd mode resolution") {
    ExperimentConfig c;
    const auto de = to_policy(c, Algorithm::de_all, 1.0);
    const auto all = to_policy(c, Algorithm::all, 1.0);
    CHECK(resolve_cadd_mode(c, de) == CaddMode::stationary_prechange);
    CHECK(resolve_cadd_mode(c, all) == CaddMode::change_at_one);
    c.cadd_mode = "change_at_one";
    CHECK(resolve_cadd_mode(c, de) == CaddMode::change_at_one);
    c.cadd_mode = "whatever";
    CHECK_THROWS_AS(resolve_cadd_mode(c, de), ConfigError);
}

TEST_CASE("csv doubles round trip exactly") {
    for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 8.634694098727671, 0.0, -0.0, 1e308}) {
        const std::string s = csv::format_double(x);
        CHECK(std::strtod(s.c_str(), nullptr) == x);
    }
    CHECK(csv::format_u64(18446744073709551615ULL) == "18446744073709551615");
}

TEST_CASE("fnv hash reference values") {
    CHECK(csv::fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(csv::fnv1a("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(csv::hex64(0xdeadbeefULL) == "00000000deadbeef");
}
