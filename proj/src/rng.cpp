#include "imprl/rng.hpp"

#include <cmath>

namespace imprl {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t trial, StreamRole role) {
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ (trial + 0x632be59bd9b4e019ULL));
    h = splitmix64(h ^ static_cast<std::uint64_t>(role));
    return h;
}

int sample_categorical(std::span<const double> probs, Rng& rng) {
    const double u = uniform01(rng);
    double acc = 0.0;
    int last_positive = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] <= 0.0) continue;
        acc += probs[i];
        last_positive = static_cast<int>(i);
        if (u < acc) return last_positive;
    }
    return last_positive;
}

int sample_categorical(const Eigen::Ref<const Eigen::VectorXd>& probs, Rng& rng) {
    return sample_categorical(std::span<const double>(probs.data(), static_cast<std::size_t>(probs.size())), rng);
}

double standard_normal(Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    return dist(rng);
}

Eigen::VectorXd unit_sphere(int n, Rng& rng) {
    Eigen::VectorXd u(n);
    double norm = 0.0;
    while (norm < 1e-12) {
        for (int i = 0; i < n; ++i) u(i) = standard_normal(rng);
        norm = u.norm();
    }
    return u / norm;
}

}  // namespace imprl
