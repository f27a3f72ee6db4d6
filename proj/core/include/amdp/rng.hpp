#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace amdp {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to decorrelate seed/stream pairs.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Independent generator for (seed, stream). Streams with the same seed but
/// different indices do not overlap in any test we run at desk scale.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    return Rng(mix64(mix64(seed) ^ mix64(stream)));
}

inline double uniform01(Rng& rng) {
    // 53-bit mantissa draw, identical across platforms for a given engine state.
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double normal(Rng& rng) {
    // Box-Muller; avoids the unspecified state consumption of
    // std::normal_distribution.
    double u1 = uniform01(rng);
    double u2 = uniform01(rng);
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

/// Random interior point of the probability simplex (Dirichlet-flavored,
/// floored away from the boundary).
inline Eigen::VectorXd random_simplex_point(int n, Rng& rng, double floor = 1e-3) {
    Eigen::VectorXd p(n);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        p[i] = floor - std::log(std::max(uniform01(rng), 1e-300));
        sum += p[i];
    }
    return p / sum;
}

/// Samples an index from a probability row via inverse-CDF walk.
inline int sample_index(const Eigen::Ref<const Eigen::VectorXd>& probs, Rng& rng) {
    const double u = uniform01(rng);
    double acc = 0.0;
    const int n = static_cast<int>(probs.size());
    for (int i = 0; i < n; ++i) {
        acc += probs[i];
        if (u < acc) return i;
    }
    return n - 1;
}

} // namespace amdp
