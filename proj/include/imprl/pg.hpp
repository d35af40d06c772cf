#pragma once

#include <functional>
#include <optional>

#include "imprl/environments.hpp"
#include "imprl/mdp.hpp"
#include "imprl/mixture.hpp"
#include "imprl/trace.hpp"

namespace imprl {

struct PgConfig {
    double learning_rate = 1e-4;
    long horizon = 1000;
    std::optional<VectorXd> init_theta;  // all ones when unset
    std::uint64_t seed = 0;
    VectorXd start_dist;  // empty: the mdp's own start distribution
    long record_every = 1;

    void validate() const;
};

enum class GradScale { none, normalize_to_10 };

struct SpsaConfig {
    double perturbation = 0.31622776601683794;  // 1/sqrt(runs)
    int runs = 10;
    int rollouts_per_run = 10;
    int rollout_len = 30;
    GradScale grad_scale = GradScale::none;
    bool baseline_subtract = false;
    /// Rollout k of every run (and of the baseline) replays the same random stream.
    bool common_random_numbers = false;

    void validate() const;
};

/// Step size from the smoothness constant, (1-gamma)^2 / (7 gamma^2 + 4 gamma + 5).
double theorem_step_size(double discount);

/// Exact-gradient softmax ascent. Trace value is V^{pi_t}(mu).
RunTrace run_softmax_pg(const FiniteMdp& mdp, const ControllerSet& controllers, const PgConfig& cfg);

/// Returns one discounted, truncated return sample for mixture weights pi.
using ReturnOracle = std::function<double(const VectorXd& pi, int rollout_len, Rng& rng)>;

struct GradEstimate {
    VectorXd gradient;
    double mean_return = 0.0;  // average of the perturbed mean returns
};

GradEstimate grad_est(const ReturnOracle& oracle, const VectorXd& theta, const SpsaConfig& spsa, Rng& rng);

/// Plays the mixture from a fresh start state for rollout_len steps.
double mixture_rollout(Environment& env, const ControllerSet& controllers, const VectorXd& pi, int rollout_len,
                       double discount, Rng& rng);

/// SPGE on a black-box environment. env is advanced along the main trajectory.
RunTrace run_spge(Environment& env, const ControllerSet& controllers, double discount, const PgConfig& cfg,
                  const SpsaConfig& spsa);

double bandit_value(const BanditInstance& inst, const VectorXd& pi);

/// eta = 2(1-gamma)/5 from uniform weights. Extras: suboptimality, regret.
RunTrace run_bandit_pg_exact(const BanditInstance& inst, long horizon, long record_every = 1);

/// Leader-relative noisy update with per-controller step alpha * pi(m)^2. Extras: suboptimality, regret.
RunTrace run_bandit_projection_free(const BanditInstance& inst, double alpha, long horizon, Rng& rng,
                                    long record_every = 1);

/// Index of the largest entry, lowest index on ties.
int leader_index(const VectorXd& v);

}  // namespace imprl
