#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "stratcomm/errors.hpp"

namespace stratcomm {

// Counter-based random numbers: every variate is a pure function of
// (seed, stream, index), so concurrent shards draw from reproducible
// independent streams and any sharding of the index range is bit-exact.
//
// The generator (Philox4x32-10) and the normal transform (inverse CDF,
// algorithm AS 241, PPND16) are pinned permanently: changing either would
// silently invalidate every recorded simulation fixture.

namespace detail {

inline void philox_round(std::array<std::uint32_t, 4>& ctr, const std::array<std::uint32_t, 2>& key) {
    const std::uint64_t p0 = std::uint64_t(0xD2511F53u) * ctr[0];
    const std::uint64_t p1 = std::uint64_t(0xCD9E8D57u) * ctr[2];
    const std::uint32_t hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
    const std::uint32_t hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

}  // namespace detail

/// Philox4x32-10 block: 128 bits of output for a (seed, stream, index) triple.
inline std::array<std::uint32_t, 4> philox_block(std::uint64_t seed, std::uint64_t stream,
                                                 std::uint64_t index) {
    std::array<std::uint32_t, 4> ctr = {std::uint32_t(index), std::uint32_t(index >> 32),
                                        std::uint32_t(stream), std::uint32_t(stream >> 32)};
    std::array<std::uint32_t, 2> key = {std::uint32_t(seed), std::uint32_t(seed >> 32)};
    for (int round = 0; round < 10; ++round) {
        detail::philox_round(ctr, key);
        key[0] += 0x9E3779B9u;
        key[1] += 0xBB67AE85u;
    }
    return ctr;
}

/// Uniform double strictly inside (0, 1) with 53 random bits.
inline double uniform_double(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    const auto block = philox_block(seed, stream, index);
    const std::uint64_t mantissa =
        (std::uint64_t(block[0] >> 5) << 26) | std::uint64_t(block[1] >> 6);
    return (double(mantissa) + 0.5) * 0x1.0p-53;
}

/// Inverse of the standard normal CDF (algorithm AS 241, PPND16 variant);
/// relative accuracy near machine precision over (0, 1).
inline double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("inverse_normal_cdf requires p in (0, 1)");
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        const double num =
            (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                  6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
              1.3314166789178437745e2) * r + 3.3871328727963666080e0);
        const double den =
            (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                  3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
              4.2313330701600911252e1) * r + 1.0);
        return q * num / den;
    }
    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double value;
    if (r <= 5.0) {
        r -= 1.6;
        const double num =
            (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
              4.63033784615654529590e0) * r + 1.42343711074968357734e0);
        const double den =
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
              2.05319162663775882187e0) * r + 1.0);
        value = num / den;
    } else {
        r -= 5.0;
        const double num =
            (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
              5.46378491116411436990e0) * r + 6.65790464350110377720e0);
        const double den =
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
        value = num / den;
    }
    return (q < 0.0) ? -value : value;
}

/// Standard normal variate as a pure function of (seed, stream, index).
inline double standard_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    return inverse_normal_cdf(uniform_double(seed, stream, index));
}

}  // namespace stratcomm
