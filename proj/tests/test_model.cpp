#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "qcd/model.hpp"

using namespace qcd;

namespace {
double log_gaussian_pdf(double x, double mean, double sigma) {
    const double z = (x - mean) / sigma;
    return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * M_PI);
}
} // namespace

TEST_CASE("llr closed form for the experiment pair") {
    const DistributionPair pair(0.0, 0.4, 1.0);
    CHECK(pair.log_likelihood_ratio(0.0) == Catch::Approx(-0.08).margin(1e-15));
    CHECK(pair.log_likelihood_ratio(0.2) == Catch::Approx(0.0).margin(1e-15)); // midpoint of the means
}

TEST_CASE("llr agrees with the naive two-density route") {
    const DistributionPair pair(-0.3, 1.1, 0.7);
    for (double x : {-3.0, -0.5, 0.0, 0.31, 1.7, 4.2}) {
        const double naive = log_gaussian_pdf(x, 1.1, 0.7) - log_gaussian_pdf(x, -0.3, 0.7);
        CHECK(pair.log_likelihood_ratio(x) == Catch::Approx(naive).margin(1e-12));
    }
}

TEST_CASE("llr is monotone in x when theta1 > theta0") {
    const DistributionPair pair(0.0, 0.4, 1.0);
    double prev = pair.log_likelihood_ratio(-5.0);
    for (double x = -4.8; x < 5.0; x += 0.2) {
        const double cur = pair.log_likelihood_ratio(x);
        CHECK(cur > prev);
        prev = cur;
    }
}

TEST_CASE("kl divergences") {
    const DistributionPair a(0.0, 0.4, 1.0);
    CHECK(a.kl_f1_f0() == Catch::Approx(0.08).margin(1e-15));
    CHECK(a.kl_f0_f1() == Catch::Approx(0.08).margin(1e-15));
    const DistributionPair b(0.0, 0.75, 1.0);
    CHECK(b.kl_f1_f0() == Catch::Approx(0.28125).margin(1e-15));
    CHECK(b.kl_f1_f0() == b.kl_f0_f1()); // mean-shift symmetry
    CHECK(a.kl_f1_f0() > 0.0);
}

TEST_CASE("degenerate pairs are rejected at construction") {
    CHECK_THROWS_AS(DistributionPair(0.0, 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(DistributionPair(0.3, 0.3, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(DistributionPair(0.0, 0.4, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(DistributionPair(0.0, 0.4, -1.0), std::invalid_argument);
}

TEST_CASE("monte carlo mean of the llr recovers both divergences") {
    const DistributionPair pair(0.0, 0.4, 1.0);
    const std::uint64_t n = 1000000;
    // LLR has sd (theta1-theta0)/sigma = 0.4, so 4 se = 1.6e-3 at 1e6 draws
    const double four_se = 4.0 * 0.4 / std::sqrt(static_cast<double>(n));

    const ObservationStream post(pair, 1, rng::Stream{rng::derive_key(77, 1, 0, 0)});
    double sum = 0.0;
    for (std::uint64_t i = 1; i <= n; ++i) sum += pair.log_likelihood_ratio(post.draw(i));
    CHECK(sum / static_cast<double>(n) == Catch::Approx(pair.kl_f1_f0()).margin(four_se));

    const ObservationStream pre(pair, kNeverChanges, rng::Stream{rng::derive_key(77, 2, 0, 0)});
    sum = 0.0;
    for (std::uint64_t i = 1; i <= n; ++i) sum -= pair.log_likelihood_ratio(pre.draw(i));
    CHECK(sum / static_cast<double>(n) == Catch::Approx(pair.kl_f0_f1()).margin(four_se));
}

TEST_CASE("observation streams are reproducible and honor the change point") {
    const DistributionPair pair(0.0, 0.4, 1.0);
    const ObservationStream s(pair, 100, rng::Stream{rng::derive_key(5, 5, 5, 0)});
    CHECK(s.draw(1) == s.draw(1)); // drawing twice gives the identical value
    CHECK(s.draw(7) == s.draw(7));

    // empirical means across many streams: X_50 is pre-change, X_100 post-change
    const std::uint64_t reps = 100000;
    double pre = 0.0, post = 0.0;
    for (std::uint64_t k = 0; k < reps; ++k) {
        const ObservationStream t(pair, 100, rng::Stream{rng::derive_key(9, 0, k, 0)});
        pre += t.draw(50);
        post += t.draw(100);
    }
    const double three_se = 3.0 / std::sqrt(static_cast<double>(reps));
    CHECK(pre / static_cast<double>(reps) == Catch::Approx(0.0).margin(three_se));
    CHECK(post / static_cast<double>(reps) == Catch::Approx(0.4).margin(three_se));
}

TEST_CASE("change point at one makes every draw post-change") {
    const DistributionPair pair(0.0, 0.4, 1.0);
    const std::uint64_t reps = 100000;
    double sum = 0.0;
    for (std::uint64_t k = 0; k < reps; ++k) {
        const ObservationStream t(pair, 1, rng::Stream{rng::derive_key(11, 0, k, 0)});
        sum += t.draw(1);
    }
    CHECK(sum / static_cast<double>(reps) == Catch::Approx(0.4).margin(3.0 / std::sqrt(double(reps))));
}
