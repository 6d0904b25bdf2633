#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>

#include "qcd/rng.hpp"

namespace qcd {

// Change point value meaning "the change never happens" (pure pre-change runs).
inline constexpr std::uint64_t kNeverChanges = std::numeric_limits<std::uint64_t>::max();

enum class Family { gaussian_mean_shift };

// Pre-/post-change observation model of one sensor. Only the Gaussian
// mean-shift family is implemented; the tag leaves room for other families
// without touching the call sites.
class DistributionPair {
  public:
    DistributionPair(double theta0, double theta1, double sigma)
        : theta0_(theta0), theta1_(theta1), sigma_(sigma) {
        if (!(sigma > 0.0))
            throw std::invalid_argument("DistributionPair: sigma must be > 0");
        if (theta0 == theta1)
            throw std::invalid_argument("DistributionPair: theta1 == theta0 makes the change undetectable");
    }

    Family kind() const noexcept { return Family::gaussian_mean_shift; }
    double theta0() const noexcept { return theta0_; }
    double theta1() const noexcept { return theta1_; }
    double sigma() const noexcept { return sigma_; }

    // log[f1(x)/f0(x)] in closed form; evaluating and dividing two densities
    // would underflow for extreme x.
    double log_likelihood_ratio(double x) const noexcept {
        const double s2 = sigma_ * sigma_;
        return ((theta1_ - theta0_) * x - 0.5 * (theta1_ * theta1_ - theta0_ * theta0_)) / s2;
    }

    // D(f1 || f0), strictly positive for a valid pair
    double kl_f1_f0() const noexcept {
        const double d = theta1_ - theta0_;
        return d * d / (2.0 * sigma_ * sigma_);
    }

    // D(f0 || f1); equal to kl_f1_f0 for the mean-shift family but kept as a
    // separate quantity since the duty-cycle bound depends on this direction
    double kl_f0_f1() const noexcept {
        const double d = theta0_ - theta1_;
        return d * d / (2.0 * sigma_ * sigma_);
    }

    friend bool operator==(const DistributionPair&, const DistributionPair&) = default;

  private:
    double theta0_;
    double theta1_;
    double sigma_;
};

// One sensor's observation sequence: X_n ~ f0 for n < gamma and X_n ~ f1 for
// n >= gamma. Draws are random access, so draw(n) is reproducible regardless
// of which indices were consumed before.
class ObservationStream {
  public:
    ObservationStream(DistributionPair pair, std::uint64_t change_point, rng::Stream stream)
        : pair_(pair), change_point_(change_point), stream_(stream) {
        if (change_point == 0)
            throw std::invalid_argument("ObservationStream: change point must be >= 1");
    }

    const DistributionPair& pair() const noexcept { return pair_; }
    std::uint64_t change_point() const noexcept { return change_point_; }

    double draw(std::uint64_t n) const {
        const double mean = (n >= change_point_) ? pair_.theta1() : pair_.theta0();
        return mean + pair_.sigma() * stream_.normal(n);
    }

  private:
    DistributionPair pair_;
    std::uint64_t change_point_;
    rng::Stream stream_;
};

} // namespace qcd
