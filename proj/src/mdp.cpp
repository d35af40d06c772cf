#include "imprl/mdp.hpp"

#include <cmath>
#include <string>

#include "imprl/errors.hpp"

namespace imprl {

FiniteMdp::FiniteMdp(int states, int actions, double gamma)
    : n_states(states),
      n_actions(actions),
      transition(MatrixXd::Zero(states * actions, states)),
      reward(MatrixXd::Zero(states, actions)),
      discount(gamma),
      start_dist(VectorXd::Zero(states)) {}

bool is_distribution(const Eigen::Ref<const VectorXd>& v, double tol) {
    if (!v.allFinite() || (v.array() < 0.0).any()) return false;
    return std::abs(v.sum() - 1.0) <= tol;
}

void check_distribution(const Eigen::Ref<const VectorXd>& v, const char* what, double tol) {
    if (!is_distribution(v, tol)) throw std::invalid_argument(std::string(what) + " is not a probability distribution");
}

void FiniteMdp::validate() const {
    if (n_states < 1 || n_actions < 1) throw std::invalid_argument("mdp needs at least one state and one action");
    if (transition.rows() != n_states * n_actions || transition.cols() != n_states)
        throw std::invalid_argument("transition shape mismatch");
    if (reward.rows() != n_states || reward.cols() != n_actions) throw std::invalid_argument("reward shape mismatch");
    if (start_dist.size() != n_states) throw std::invalid_argument("start_dist size mismatch");
    if (!(discount > 0.0 && discount < 1.0)) throw std::invalid_argument("discount must lie in (0,1)");
    for (int r = 0; r < transition.rows(); ++r) {
        if (!is_distribution(transition.row(r).transpose()))
            throw std::invalid_argument("transition row " + std::to_string(r) + " is not a distribution");
    }
    check_distribution(start_dist, "start_dist");
    if (!reward.allFinite()) throw std::invalid_argument("reward has non-finite entries");
    if (!allow_costs && ((reward.array() < 0.0).any() || (reward.array() > 1.0).any()))
        throw std::invalid_argument("reward outside [0,1]; set allow_costs for cost environments");
}

void check_policy(const FiniteMdp& mdp, const PolicyMatrix& policy) {
    if (policy.rows() != mdp.n_states || policy.cols() != mdp.n_actions)
        throw std::invalid_argument("policy shape does not match mdp");
    for (int s = 0; s < mdp.n_states; ++s) {
        if (!is_distribution(policy.row(s).transpose()))
            throw std::invalid_argument("policy row " + std::to_string(s) + " is not a distribution");
    }
}

MatrixXd policy_transition(const FiniteMdp& mdp, const PolicyMatrix& policy) {
    MatrixXd p = MatrixXd::Zero(mdp.n_states, mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a)
            if (policy(s, a) != 0.0) p.row(s) += policy(s, a) * mdp.row(s, a);
    return p;
}

VectorXd policy_reward(const FiniteMdp& mdp, const PolicyMatrix& policy) {
    return policy.cwiseProduct(mdp.reward).rowwise().sum();
}

VectorXd evaluate_policy(const FiniteMdp& mdp, const PolicyMatrix& policy) {
    if (policy.rows() != mdp.n_states || policy.cols() != mdp.n_actions)
        throw std::invalid_argument("policy shape does not match mdp");
    if (!policy.allFinite() || !mdp.transition.allFinite() || !mdp.reward.allFinite())
        throw NumericError("non-finite input to policy evaluation");
    check_policy(mdp, policy);
    const MatrixXd lhs = MatrixXd::Identity(mdp.n_states, mdp.n_states) - mdp.discount * policy_transition(mdp, policy);
    const VectorXd rhs = policy_reward(mdp, policy);
    Eigen::PartialPivLU<MatrixXd> lu(lhs);
    VectorXd v = lu.solve(rhs);
    // one step of iterative refinement keeps the residual well under tolerance
    v += lu.solve(rhs - lhs * v);
    if (!v.allFinite()) throw NumericError("policy evaluation produced non-finite values");
    return v;
}

MatrixXd q_values(const FiniteMdp& mdp, const VectorXd& values) {
    if (values.size() != mdp.n_states) throw std::invalid_argument("value vector size mismatch");
    const VectorXd next = mdp.transition * values;  // (S*A)
    MatrixXd q(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a) q(s, a) = mdp.reward(s, a) + mdp.discount * next(s * mdp.n_actions + a);
    return q;
}

VisitationMeasure visitation_measure(const FiniteMdp& mdp, const PolicyMatrix& policy, const VectorXd& mu) {
    if (mu.size() != mdp.n_states) throw std::invalid_argument("mu size mismatch");
    check_distribution(mu, "mu");
    if (policy.rows() != mdp.n_states || policy.cols() != mdp.n_actions)
        throw std::invalid_argument("policy shape does not match mdp");
    const MatrixXd lhs =
        MatrixXd::Identity(mdp.n_states, mdp.n_states) - mdp.discount * policy_transition(mdp, policy).transpose();
    const VectorXd rhs = (1.0 - mdp.discount) * mu;
    Eigen::PartialPivLU<MatrixXd> lu(lhs);
    VectorXd d = lu.solve(rhs);
    d += lu.solve(rhs - lhs * d);
    if (!d.allFinite()) throw NumericError("visitation measure produced non-finite values");
    return {d, mu};
}

double scalar_value(const VectorXd& values, const VectorXd& dist) {
    if (values.size() != dist.size()) throw std::invalid_argument("distribution size mismatch");
    check_distribution(dist, "dist");
    return dist.dot(values);
}

nlohmann::json mdp_to_json(const FiniteMdp& mdp) {
    nlohmann::json j;
    j["n_states"] = mdp.n_states;
    j["n_actions"] = mdp.n_actions;
    nlohmann::json trans = nlohmann::json::array();
    for (int s = 0; s < mdp.n_states; ++s) {
        nlohmann::json per_action = nlohmann::json::array();
        for (int a = 0; a < mdp.n_actions; ++a) {
            std::vector<double> row(mdp.n_states);
            for (int n = 0; n < mdp.n_states; ++n) row[n] = mdp.p(s, a, n);
            per_action.push_back(row);
        }
        trans.push_back(per_action);
    }
    j["transition"] = trans;
    nlohmann::json rew = nlohmann::json::array();
    for (int s = 0; s < mdp.n_states; ++s) {
        std::vector<double> row(mdp.n_actions);
        for (int a = 0; a < mdp.n_actions; ++a) row[a] = mdp.reward(s, a);
        rew.push_back(row);
    }
    j["reward"] = rew;
    j["discount"] = mdp.discount;
    j["start_dist"] = std::vector<double>(mdp.start_dist.data(), mdp.start_dist.data() + mdp.start_dist.size());
    if (mdp.allow_costs) j["allow_costs"] = true;
    return j;
}

FiniteMdp mdp_from_json(const nlohmann::json& j) {
    const int s_count = j.at("n_states").get<int>();
    const int a_count = j.at("n_actions").get<int>();
    FiniteMdp mdp(s_count, a_count, j.at("discount").get<double>());
    const auto& trans = j.at("transition");
    if (static_cast<int>(trans.size()) != s_count) throw std::invalid_argument("transition has wrong state count");
    for (int s = 0; s < s_count; ++s) {
        if (static_cast<int>(trans[s].size()) != a_count) throw std::invalid_argument("transition has wrong action count");
        for (int a = 0; a < a_count; ++a) {
            const auto row = trans[s][a].get<std::vector<double>>();
            if (static_cast<int>(row.size()) != s_count) throw std::invalid_argument("transition row has wrong length");
            for (int n = 0; n < s_count; ++n) mdp.p(s, a, n) = row[n];
        }
    }
    const auto& rew = j.at("reward");
    if (static_cast<int>(rew.size()) != s_count) throw std::invalid_argument("reward has wrong state count");
    for (int s = 0; s < s_count; ++s) {
        const auto row = rew[s].get<std::vector<double>>();
        if (static_cast<int>(row.size()) != a_count) throw std::invalid_argument("reward row has wrong length");
        for (int a = 0; a < a_count; ++a) mdp.reward(s, a) = row[a];
    }
    const auto start = j.at("start_dist").get<std::vector<double>>();
    if (static_cast<int>(start.size()) != s_count) throw std::invalid_argument("start_dist has wrong length");
    for (int s = 0; s < s_count; ++s) mdp.start_dist(s) = start[s];
    mdp.allow_costs = j.value("allow_costs", false);
    mdp.validate();
    return mdp;
}

}  // namespace imprl
