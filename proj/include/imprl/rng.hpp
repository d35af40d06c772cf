#pragma once

#include <cstdint>
#include <random>
#include <span>

#include <Eigen/Core>

namespace imprl {

using Rng = std::mt19937_64;

/// Stream roles used when deriving per-trial generators.
enum class StreamRole : std::uint64_t {
    learner = 1,
    environment = 2,
    rollout = 3,
    perturbation = 4,
    evaluation = 5,
    instance = 6,
};

std::uint64_t splitmix64(std::uint64_t x);

/// Pure function of (master, trial, role).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t trial, StreamRole role);

inline Rng make_rng(std::uint64_t master, std::uint64_t trial, StreamRole role) {
    return Rng(derive_seed(master, trial, role));
}

inline double uniform01(Rng& rng) {
    // 53 random bits -> [0,1)
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

/// Inverse-CDF draw from a probability vector; the last index absorbs round-off.
int sample_categorical(std::span<const double> probs, Rng& rng);
int sample_categorical(const Eigen::Ref<const Eigen::VectorXd>& probs, Rng& rng);

double standard_normal(Rng& rng);

/// Uniform direction on the unit sphere in R^n (normalized Gaussian vector).
Eigen::VectorXd unit_sphere(int n, Rng& rng);

}  // namespace imprl
