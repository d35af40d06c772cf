#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "imprl/mdp.hpp"
#include "imprl/mixture.hpp"
#include "imprl/rng.hpp"

namespace imprl {

/// Stepwise simulator. step() returns the reward of (current state, action) and moves on.
class Environment {
  public:
    virtual ~Environment() = default;
    virtual int n_actions() const = 0;
    virtual const State& state() const = 0;
    virtual void set_state(const State& s) = 0;
    /// Draws a fresh state from the start distribution.
    virtual void reset(Rng& rng) = 0;
    virtual double step(int action, Rng& rng) = 0;
    virtual std::unique_ptr<Environment> clone() const = 0;
    /// Global step index used by time-varying environments.
    virtual void set_clock(long t) { (void)t; }
    virtual long clock() const { return 0; }
};

/// Samples a FiniteMdp. State is {s}.
class TabularEnv : public Environment {
  public:
    explicit TabularEnv(FiniteMdp mdp);
    int n_actions() const override { return mdp_.n_actions; }
    const State& state() const override { return state_; }
    void set_state(const State& s) override;
    void reset(Rng& rng) override;
    double step(int action, Rng& rng) override;
    std::unique_ptr<Environment> clone() const override { return std::make_unique<TabularEnv>(*this); }
    const FiniteMdp& mdp() const { return mdp_; }

  private:
    FiniteMdp mdp_;
    State state_{0};
};

// ---------------------------------------------------------------- queues

enum class RewardMode { normalized_backlog, backlog };

RewardMode reward_mode_from_string(const std::string& s);
std::string to_string(RewardMode mode);

struct RateChange {
    long step = 0;
    std::vector<double> rates;
};

struct QueueEnvConfig {
    int n_queues = 2;
    std::vector<double> arrival_rates{0.49, 0.49};
    int cap = 1000;
    RewardMode reward_mode = RewardMode::normalized_backlog;
    std::vector<RateChange> schedule;  // sorted by step

    void validate() const;
    const std::vector<double>& rates_at(long t) const;
};

/// Reward of a queue-length vector under a reward mode.
double backlog_reward(const State& q, int cap, RewardMode mode);

/// One server, at most one packet per slot. Action 0 idles, action i serves queue i-1.
class QueueEnv : public Environment {
  public:
    explicit QueueEnv(QueueEnvConfig cfg);
    int n_actions() const override { return cfg_.n_queues + 1; }
    const State& state() const override { return q_; }
    void set_state(const State& s) override;
    void reset(Rng& rng) override;
    double step(int action, Rng& rng) override;
    std::unique_ptr<Environment> clone() const override { return std::make_unique<QueueEnv>(*this); }
    void set_clock(long t) override { clock_ = t; }
    long clock() const override { return clock_; }

    /// Decision vector D with D_i in {0,1}; more than one served queue is an argument error.
    double step_decision(const std::vector<int>& decision, Rng& rng);
    /// Deterministic recursion with given arrivals, Q <- min(cap, (Q - D)^+ + A).
    double apply(const std::vector<int>& decision, const std::vector<int>& arrivals);
    const QueueEnvConfig& config() const { return cfg_; }

  private:
    QueueEnvConfig cfg_;
    State q_;
    std::vector<int> arrivals_;
    long clock_ = 0;
};

/// Exact two-queue chain for small caps (cap <= 30). State index q1*(cap+1)+q2, actions as QueueEnv.
FiniteMdp queue_tabular_mdp(const QueueEnvConfig& cfg, double discount);
State queue_state_from_index(int index, int cap);
int queue_index(const State& q, int cap);

struct PathGraphConfig {
    int n = 4;
    std::vector<std::vector<int>> independent_sets;  // 0-based node indices
    std::vector<double> arrival_rates;
    int cap = 1000;
    RewardMode reward_mode = RewardMode::normalized_backlog;

    void validate() const;
};

/// Path graph on n nodes with the listed independent sets; default n=4 lists all 8 sets.
PathGraphConfig default_path_graph(double rate = 0.495, int cap = 1000);

class PathGraphEnv : public Environment {
  public:
    explicit PathGraphEnv(PathGraphConfig cfg);
    int n_actions() const override { return static_cast<int>(cfg_.independent_sets.size()); }
    const State& state() const override { return q_; }
    void set_state(const State& s) override;
    void reset(Rng& rng) override;
    double step(int action, Rng& rng) override;
    std::unique_ptr<Environment> clone() const override { return std::make_unique<PathGraphEnv>(*this); }
    void set_clock(long t) override { clock_ = t; }
    long clock() const override { return clock_; }

    /// Serves one packet from every nonempty queue of the set, without arrivals.
    void serve(int action);
    const PathGraphConfig& config() const { return cfg_; }

  private:
    PathGraphConfig cfg_;
    State q_;
    long clock_ = 0;
};

/// Controllers by string id: serve_queue_<i>, lqf, mw, mer, fixed:{1,3}, chain_k1, chain_k2, ...
/// Queue ids use 1-based queue labels.
ActionSampler queue_controller(const std::string& id, const QueueEnvConfig& cfg);
ActionSampler path_graph_controller(const std::string& id, const PathGraphConfig& cfg);
ControllerSet queue_controllers(const std::vector<std::string>& ids, const QueueEnvConfig& cfg);
ControllerSet path_graph_controllers(const std::vector<std::string>& ids, const PathGraphConfig& cfg);
/// Tabular versions for the small-cap projection.
MatrixXd queue_controller_matrix(const std::string& id, const QueueEnvConfig& cfg);

/// Per-packet FIFO delay of a fixed controller over a horizon from empty queues. Packets
/// still queued at the horizon count with their age at the horizon.
double path_graph_mean_delay(const PathGraphConfig& cfg, const std::string& controller, long horizon, Rng& rng);

// ---------------------------------------------------------------- tabular instances

struct ChainInstance {
    FiniteMdp mdp;
    ControllerSet controllers;
};

/// 10-state chain; action 0 ("left") advances toward the absorbing end s10, action 1 steps back.
ChainInstance chain_mdp(double discount = 0.9);

struct Counterexample {
    std::string name;
    FiniteMdp mdp;
    ControllerSet controllers;
};

/// 5 states (s1..s5 -> 0..4), actions right/up/null; reward r on s2 --up--> s4; s3..s5 absorbing.
FiniteMdp counterexample_mdp(double r, double discount);
Counterexample nonconcavity_instance(double r = 1.0, double discount = 0.9);
Counterexample nonmonotonicity_instance(double r = 1.0, double discount = 0.9);

/// Random instance for fuzzing: Dirichlet-like rows, rewards in [0,1], full-support start.
FiniteMdp random_mdp(int states, int actions, double discount, Rng& rng);
ControllerSet random_controllers(int count, int states, int actions, Rng& rng);
VectorXd random_distribution(int n, Rng& rng);

// ---------------------------------------------------------------- EPLS

using Eigen::Matrix4d;
using Eigen::Vector4d;

struct CartpoleParams {
    double gravity = 9.8;
    double pole_mass = 0.1;
    double half_length = 1.0;
    double cart_mass = 1.0;
};

struct EplsSystem {
    Matrix4d a_open = Matrix4d::Zero();
    Vector4d b = Vector4d::Zero();
    std::vector<Vector4d> gains;
    double noise = 0.0;
    /// 0 uses x(t+1) = (A_open - b K^T) x(t); dt > 0 uses I + dt (A_open - b K^T).
    double dt = 0.0;

    Matrix4d closed_loop(int i) const;
    void validate() const;
};

EplsSystem cartpole_system(const CartpoleParams& params = {}, std::vector<Vector4d> gains = {}, double dt = 0.0);
/// Reference LQR gain (state weight I, input weight 1) for the default cartpole constants.
Vector4d cartpole_reference_gain(double dt);

nlohmann::json epls_to_json(const EplsSystem& sys);
EplsSystem epls_from_json(const nlohmann::json& j);

struct EplsTrajectory {
    std::vector<Vector4d> states;  // horizon + 1 entries
    std::vector<int> controllers;  // horizon entries
};

EplsTrajectory cartpole_epls(const EplsSystem& sys, const VectorXd& probs, int horizon, const Vector4d& x0, Rng& rng);

struct FallStats {
    double mean_rounds = 0.0;
    int fall_count = 0;
};

/// Pole angle is state component 2. Initial states uniform in [-init_scale, init_scale]^4.
FallStats fall_statistics(const EplsSystem& sys, const VectorXd& probs, int trials, int horizon,
                          double fall_threshold, double init_scale, std::uint64_t seed);

// ---------------------------------------------------------------- bandits

struct BanditInstance {
    VectorXd arm_means;
    MatrixXd controllers;  // M x A, rows are arm distributions
    double discount = 0.9;

    int m_count() const { return static_cast<int>(controllers.rows()); }
    VectorXd controller_means() const { return controllers * arm_means; }
    int best_controller() const;
    /// Smallest positive gap to the best controller mean (0 when tied).
    double min_gap() const;
    void validate() const;
};

/// Identity controllers over the given arm means.
BanditInstance bandit_from_means(const VectorXd& controller_means, double discount = 0.9);

class BanditEnv {
  public:
    explicit BanditEnv(BanditInstance inst) : inst_(std::move(inst)) { inst_.validate(); }
    /// Pull controller m: a ~ K_m, reward ~ Bernoulli(mu_a).
    double pull(int m, Rng& rng) const;
    const BanditInstance& instance() const { return inst_; }

  private:
    BanditInstance inst_;
};

/// Identity controllers with means uniform in [0,1], redrawn until the best leads every other by min_gap.
BanditInstance random_bandit(int m_count, double min_gap, double discount, Rng& rng);

/// S=1 embedding with A = number of arms.
FiniteMdp bandit_as_mdp(const BanditInstance& inst);
ControllerSet bandit_controller_set(const BanditInstance& inst);

}  // namespace imprl
