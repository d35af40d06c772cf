#pragma once

#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace imprl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kStochasticTol = 1e-12;
constexpr double kSolveTol = 1e-10;

/// Tabular MDP. Transition rows are stored as P(s*A + a, s').
struct FiniteMdp {
    int n_states = 0;
    int n_actions = 0;
    MatrixXd transition;  // (S*A) x S
    MatrixXd reward;      // S x A
    double discount = 0.9;
    VectorXd start_dist;  // S
    bool allow_costs = false;

    FiniteMdp() = default;
    FiniteMdp(int states, int actions, double gamma);

    double& p(int s, int a, int next) { return transition(s * n_actions + a, next); }
    double p(int s, int a, int next) const { return transition(s * n_actions + a, next); }
    auto row(int s, int a) const { return transition.row(s * n_actions + a); }

    /// Throws std::invalid_argument on a broken invariant. Rewards outside [0,1]
    /// are rejected unless allow_costs is set.
    void validate() const;
};

/// pi(s, a); rows are distributions.
using PolicyMatrix = MatrixXd;

struct VisitationMeasure {
    VectorXd d;
    VectorXd anchor_dist;
};

bool is_distribution(const Eigen::Ref<const VectorXd>& v, double tol = kStochasticTol);
void check_distribution(const Eigen::Ref<const VectorXd>& v, const char* what, double tol = kStochasticTol);
void check_policy(const FiniteMdp& mdp, const PolicyMatrix& policy);

/// P_pi (S x S) and r_pi (S).
MatrixXd policy_transition(const FiniteMdp& mdp, const PolicyMatrix& policy);
VectorXd policy_reward(const FiniteMdp& mdp, const PolicyMatrix& policy);

/// Solves (I - gamma P_pi) V = r_pi by dense LU.
VectorXd evaluate_policy(const FiniteMdp& mdp, const PolicyMatrix& policy);

/// Q(s,a) = r(s,a) + gamma sum_s' P(s'|s,a) V(s').
MatrixXd q_values(const FiniteMdp& mdp, const VectorXd& values);

/// Solves (I - gamma P_pi^T) d = (1 - gamma) mu.
VisitationMeasure visitation_measure(const FiniteMdp& mdp, const PolicyMatrix& policy, const VectorXd& mu);

double scalar_value(const VectorXd& values, const VectorXd& dist);

nlohmann::json mdp_to_json(const FiniteMdp& mdp);
FiniteMdp mdp_from_json(const nlohmann::json& j);

}  // namespace imprl
