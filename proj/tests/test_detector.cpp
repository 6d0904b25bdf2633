#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <vector>

#include "qcd/detector.hpp"

using namespace qcd;

namespace {
// (-0.5, 0.5, 1) makes the log-likelihood ratio the identity map, so detector
// arithmetic can be checked exactly.
const DistributionPair kIdentity(-0.5, 0.5, 1.0);

DeCuSumState feed_sample(const DeCuSumState& s, const DeCuSumParams& p, double llr) {
    return decusum_step(s, p, llr, kIdentity);
}
} // namespace

TEST_CASE("cusum recursion resets at zero") {
    CHECK(cusum_step({0.0, 0}, -0.08).value == 0.0);
    CHECK(cusum_step({1.0, 4}, 0.32).value == Catch::Approx(1.32).margin(1e-15));
    CHECK(cusum_step({1.0, 4}, 0.32).steps == 5);

    // never negative along any path
    CuSumState s;
    const rng::Stream r{rng::derive_key(3, 3, 3, 0)};
    for (std::uint64_t n = 1; n <= 5000; ++n) {
        s = cusum_step(s, r.normal(n) - 0.1);
        REQUIRE(s.value >= 0.0);
    }
}

TEST_CASE("decusum step follows the sampling control") {
    const DeCuSumParams p{0.05, 0.5, 0.0};

    DeCuSumState s = make_decusum_state();
    CHECK(s.next_takes_sample);

    // undershoot above -h: no truncation, sampling turns off
    s = feed_sample(s, p, -0.3);
    CHECK(s.value == -0.3);
    CHECK_FALSE(s.next_takes_sample);
    CHECK(s.samples_taken == 1);

    // sleep ramp: -0.3 -> -0.25, still skipping
    s = decusum_step(s, p, std::nullopt, kIdentity);
    CHECK(s.value == Catch::Approx(-0.25).margin(1e-15));
    CHECK_FALSE(s.next_takes_sample);
    CHECK(s.samples_taken == 1);

    // deep undershoot truncates at -h
    DeCuSumState t = feed_sample(make_decusum_state(), p, -0.9);
    CHECK(t.value == -0.5);

    // ramp re-entry clamps at zero and resumes sampling
    DeCuSumState u = feed_sample(make_decusum_state(), p, -0.04);
    u = decusum_step(u, p, std::nullopt, kIdentity);
    CHECK(u.value == 0.0);
    CHECK(u.next_takes_sample);
}

TEST_CASE("control violations are rejected") {
    const DeCuSumParams p{0.05, 0.5, 0.0};
    DeCuSumState sleeping = feed_sample(make_decusum_state(), p, -0.3);
    CHECK_THROWS_AS(decusum_step(sleeping, p, 1.0, kIdentity), ControlViolation);
    CHECK_THROWS_AS(decusum_step(make_decusum_state(), p, std::nullopt, kIdentity), ControlViolation);
}

TEST_CASE("truncated undershoot sleeps exactly ceil(h/mu) steps") {
    const DeCuSumParams p{0.05, 0.5, 0.0};
    DeCuSumState s = feed_sample(make_decusum_state(), p, -3.0);
    REQUIRE(s.value == -0.5);
    int skips = 0;
    while (!s.next_takes_sample) {
        s = decusum_step(s, p, std::nullopt, kIdentity);
        ++skips;
        REQUIRE(skips < 100);
    }
    CHECK(skips == 10); // ceil(0.5 / 0.05)
    CHECK(s.value == 0.0);
}

TEST_CASE("invalid parameters are rejected") {
    CHECK_THROWS_AS(DeCuSumParams({0.0, 1.0, 0.0}).validate(), std::invalid_argument);
    CHECK_THROWS_AS(DeCuSumParams({-0.1, 1.0, 0.0}).validate(), std::invalid_argument);
    CHECK_THROWS_AS(DeCuSumParams({0.1, -1.0, 0.0}).validate(), std::invalid_argument);
    CHECK_NOTHROW(DeCuSumParams({0.1, std::numeric_limits<double>::infinity(), 0.0}).validate());
}

TEST_CASE("run stops on strict threshold crossings only") {
    const DistributionPair pair(0.0, 0.4, 1.0);
    for (std::uint64_t key = 1; key <= 10; ++key) {
        const ObservationStream s(pair, 1, rng::Stream{rng::derive_key(key, 0, 0, 0)});
        const RunResult r = run_cusum_until_stop(s, 0.0, 10000);
        // threshold zero stops at the first positive excursion
        const bool first_positive = pair.log_likelihood_ratio(s.draw(1)) > 0.0;
        if (first_positive) CHECK(r.stop_time == 1);
        else CHECK(r.stop_time > 1);
    }
}

TEST_CASE("budget exhaustion reports a censored run") {
    const DistributionPair pair(0.0, 0.4, 1.0);
    const ObservationStream s(pair, kNeverChanges, rng::Stream{rng::derive_key(4, 4, 4, 0)});
    const RunResult r = run_cusum_until_stop(s, 1e9, 500);
    CHECK(r.censored);
    CHECK(r.stop_time == 500);
}

TEST_CASE("h=0 reduces DE-CuSum to CuSum bit for bit") {
    const DistributionPair pair(0.0, 0.4, 1.0);
    const DeCuSumParams p{0.2, 0.0, 0.0};
    for (std::uint64_t key = 0; key < 50; ++key) {
        const ObservationStream s(pair, 200, rng::Stream{rng::derive_key(key, 1, 0, 0)});
        std::vector<TrajectoryPoint> tc, tw;
        const RunResult rc = run_cusum_until_stop(s, 4.0, 4000, &tc);
        const RunResult rw = run_decusum_until_stop(s, p, 4.0, 4000, &tw);
        REQUIRE(rc.stop_time == rw.stop_time);
        REQUIRE(rc.censored == rw.censored);
        REQUIRE(tc.size() == tw.size());
        for (std::size_t i = 0; i < tc.size(); ++i) {
            REQUIRE(std::memcmp(&tc[i].value, &tw[i].value, sizeof(double)) == 0);
            REQUIRE(tw[i].sampled);
        }
    }
}

TEST_CASE("cusum dominates decusum on a shared path") {
    const DistributionPair pair(0.0, 0.4, 1.0);
    const DeCuSumParams p{0.05, 0.5, 0.0};
    for (std::uint64_t key = 0; key < 200; ++key) {
        const ObservationStream s(pair, 150, rng::Stream{rng::derive_key(key, 2, 0, 0)});
        CuSumState c;
        DeCuSumState w = make_decusum_state();
        for (std::uint64_t n = 1; n <= 400; ++n) {
            std::optional<double> obs;
            if (w.next_takes_sample) obs = s.draw(n);
            c = cusum_step(c, pair.log_likelihood_ratio(s.draw(n)));
            w = decusum_step(w, p, obs, pair);
            REQUIRE(c.value >= w.value);
        }
    }
}

TEST_CASE("sampling indicator tracks the sign of the statistic") {
    const DistributionPair pair(0.0, 0.4, 1.0);
    const DeCuSumParams p{0.1, 2.0, 0.0};
    const ObservationStream s(pair, kNeverChanges, rng::Stream{rng::derive_key(8, 8, 8, 0)});
    DeCuSumState w = make_decusum_state();
    for (std::uint64_t n = 1; n <= 20000; ++n) {
        std::optional<double> obs;
        if (w.next_takes_sample) obs = s.draw(n);
        w = decusum_step(w, p, obs, pair);
        REQUIRE(w.next_takes_sample == (w.value >= 0.0));
        REQUIRE(w.value >= -2.0);
    }
}

TEST_CASE("skip runs never exceed ceil(h/mu)+1") {
    const DistributionPair pair(0.0, 0.4, 1.0);
    const double mu = 0.05, h = 0.5;
    const std::uint64_t bound = static_cast<std::uint64_t>(std::ceil(h / mu)) + 1;
    const DeCuSumParams p{mu, h, 0.0};
    for (std::uint64_t key = 0; key < 50; ++key) {
        const ObservationStream s(pair, kNeverChanges, rng::Stream{rng::derive_key(key, 3, 0, 0)});
        std::vector<TrajectoryPoint> traj;
        run_decusum_until_stop(s, p, 1e9, 5000, &traj);
        std::uint64_t run = 0;
        for (const auto& pt : traj) {
            run = pt.sampled ? 0 : run + 1;
            REQUIRE(run <= bound);
        }
    }
}

TEST_CASE("stop time is monotone in the threshold") {
    const DistributionPair pair(0.0, 0.4, 1.0);
    const DeCuSumParams p{0.2, 5.0, 0.0};
    for (std::uint64_t key = 0; key < 30; ++key) {
        const ObservationStream s(pair, 1, rng::Stream{rng::derive_key(key, 5, 0, 0)});
        std::uint64_t prev = 0;
        for (double threshold : {0.5, 1.0, 2.0, 4.0, 8.0}) {
            const RunResult r = run_decusum_until_stop(s, p, threshold, 100000);
            REQUIRE(r.stop_time >= prev);
            prev = r.stop_time;
        }
    }
}

TEST_CASE("infinite h disables truncation") {
    const DeCuSumParams p{0.5, std::numeric_limits<double>::infinity(), 0.0};
    DeCuSumState s = feed_sample(make_decusum_state(), p, -7.25);
    CHECK(s.value == -7.25);
    // ramps back in ceil(7.25/0.5) = 15 skips
    int skips = 0;
    while (!s.next_takes_sample) {
        s = decusum_step(s, p, std::nullopt, kIdentity);
        ++skips;
    }
    CHECK(skips == 15);
}
