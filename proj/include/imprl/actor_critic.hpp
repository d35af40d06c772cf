#pragma once

#include <functional>

#include "imprl/environments.hpp"
#include "imprl/mixture.hpp"
#include "imprl/trace.hpp"

namespace imprl {

struct FeatureMap {
    int dim = 0;
    std::function<VectorXd(const State&)> map;

    VectorXd operator()(const State& s) const { return map(s); }
};

/// q / (cap * sqrt(N)), so every reachable state has norm at most 1.
FeatureMap queue_features(int n_queues, int cap);
/// e_s for tabular states.
FeatureMap one_hot_features(int n_states);

enum class AcMode { ac, nac };

AcMode ac_mode_from_string(const std::string& s);
std::string to_string(AcMode mode);

struct AcilConfig {
    double actor_step = 1e-4;
    double critic_step = 1e-3;
    double regularization = 0.1;
    int actor_batch = 50;
    int critic_inner = 30;
    int critic_outer = 20;
    long outer_steps = 1000;
    AcMode mode = AcMode::nac;
    double discount = 0.9;
    std::uint64_t seed = 0;
    /// Start each critic call from the previous critic instead of zero.
    bool warm_start_critic = false;
    long record_every = 1;

    void validate() const;
};

/// Expected one-step reward of controller m in state s.
double tilde_reward(const FiniteMdp& mdp, const ControllerSet& controllers, int s, int m);
/// Reward of one action drawn from K_m(s, .).
double tilde_reward_sample(const FiniteMdp& mdp, const ControllerSet& controllers, int s, int m, Rng& rng);

struct BarStep {
    State tilde_next;  // successor under the controller-marginal kernel
    State next;        // successor under the restart kernel
    double reward = 0.0;
    bool reset = false;
};

/// From the environment's current state: one controller step (a ~ K_m), then with probability
/// 1 - gamma a restart from the start distribution. The environment ends at `next`.
BarStep sample_bar_kernel(Environment& env, const ControllerSet& controllers, int m, double discount, Rng& rng);

double td_error(const VectorXd& w, const FeatureMap& phi, double discount, double reward, const State& s,
                const State& next);

struct CriticResult {
    VectorXd w;
    State last_state;
    double td_error_mean = 0.0;
};

/// Batched semi-gradient TD(0) along one trajectory starting at s_init; no resets.
CriticResult critic_td(Environment& env, const ControllerSet& controllers, const VectorXd& pi, const FeatureMap& phi,
                       double critic_step, int outer, int inner, double discount, const State& s_init,
                       const VectorXd& w0, Rng& rng);

/// (F + lambda I)^{-1} rhs by Cholesky.
VectorXd fisher_regularized_solve(const MatrixXd& f, double lambda, const VectorXd& rhs);

/// Hash of a state, exactly representable as a double.
double state_hash(const State& s);

/// Single-trajectory actor-critic. Extras: w_norm, td_error_mean, fisher_min_eig, resets, path_in, path_out.
RunTrace run_acil(Environment& env, const ControllerSet& controllers, const FeatureMap& phi, const AcilConfig& cfg);

}  // namespace imprl
