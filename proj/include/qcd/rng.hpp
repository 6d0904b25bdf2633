#pragma once

#include <cmath>
#include <cstdint>

// Counter-based random number generation. Every observation is addressable as
// (stream key, index), so sample paths are reproducible bit-for-bit no matter
// how trials are scheduled across threads, and skipped observations never
// perturb the draws that follow them.

namespace qcd::rng {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stream keys are derived from a master seed by feed-forward mixing. The
// derivation is the reproducibility contract: a trial's streams depend only
// on (master, purpose, trial, slot), never on execution order.
constexpr std::uint64_t derive_key(std::uint64_t master, std::uint64_t purpose,
                                   std::uint64_t trial, std::uint64_t slot) noexcept {
    std::uint64_t k = mix64(master + kGolden);
    k = mix64(k + purpose);
    k = mix64(k + trial);
    return mix64(k + slot);
}

// Inverse of the standard normal CDF, algorithm AS 241 (PPND16). Pure
// arithmetic, no libm dispersion beyond log/sqrt; |error| < 1e-15 over the
// open unit interval.
inline double inverse_normal_cdf(double p) {
    const double q = p - 0.5;
    if (q >= -0.425 && q <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                     6.7265770927008700853e4) * r +
                    4.5921953931549871457e4) * r +
                   1.3731693765509461125e4) * r +
                  1.9715909503065514427e3) * r +
                 1.3314166789178437745e2) * r +
                3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                     3.9307895800092710610e4) * r +
                    2.1213794301586595867e4) * r +
                   5.3941960214247511077e3) * r +
                  6.8718700749205790830e2) * r +
                 4.2313330701600911252e1) * r +
                1.0);
    }
    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double z;
    if (r <= 5.0) {
        r -= 1.6;
        z = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r +
                 1.27045825245236838258e0) * r +
                3.64784832476320460504e0) * r +
               5.76949722146069140550e0) * r +
              4.63033784615654529590e0) * r +
             1.42343711074968357734e0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r +
                 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r +
               1.67638483018380384940e0) * r +
              2.05319162663775882187e0) * r +
             1.0);
    } else {
        r -= 5.0;
        z = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r +
                 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r +
               1.78482653991729133580e0) * r +
              5.46378491116411436990e0) * r +
             6.65790464350110377720e0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r +
                 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r +
               1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r +
             1.0);
    }
    return (q < 0.0) ? -z : z;
}

// Random-access stream: value n is a pure function of (key, n).
struct Stream {
    std::uint64_t key = 0;

    constexpr std::uint64_t bits(std::uint64_t n) const noexcept {
        return mix64(key + n * kGolden);
    }

    // uniform on the open interval (0,1); never returns an endpoint
    double uniform(std::uint64_t n) const noexcept {
        return static_cast<double>(bits(n) >> 11) * 0x1.0p-53 + 0x1.0p-54;
    }

    double normal(std::uint64_t n) const { return inverse_normal_cdf(uniform(n)); }
};

} // namespace qcd::rng
