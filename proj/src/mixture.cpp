#include "imprl/mixture.hpp"

#include <cmath>
#include <string>

#include "imprl/errors.hpp"

namespace imprl {

ControllerSet ControllerSet::tabular(std::vector<MatrixXd> matrices, std::vector<std::string> names) {
    if (matrices.empty()) throw std::invalid_argument("controller set needs at least one controller");
    ControllerSet set;
    for (std::size_t m = 0; m < matrices.size(); ++m) {
        if (matrices[m].rows() != matrices[0].rows() || matrices[m].cols() != matrices[0].cols())
            throw std::invalid_argument("controller matrices differ in shape");
        for (int s = 0; s < matrices[m].rows(); ++s)
            if (!is_distribution(matrices[m].row(s).transpose()))
                throw std::invalid_argument("controller " + std::to_string(m) + " row " + std::to_string(s) +
                                            " is not a distribution");
    }
    set.matrices_ = std::move(matrices);
    if (names.empty())
        for (std::size_t m = 0; m < set.matrices_.size(); ++m) names.push_back("K" + std::to_string(m + 1));
    if (names.size() != set.matrices_.size()) throw std::invalid_argument("controller names size mismatch");
    set.names_ = std::move(names);
    return set;
}

ControllerSet ControllerSet::black_box(std::vector<ActionSampler> samplers, std::vector<std::string> names) {
    if (samplers.empty()) throw std::invalid_argument("controller set needs at least one controller");
    ControllerSet set;
    set.samplers_ = std::move(samplers);
    if (names.empty())
        for (std::size_t m = 0; m < set.samplers_.size(); ++m) names.push_back("K" + std::to_string(m + 1));
    if (names.size() != set.samplers_.size()) throw std::invalid_argument("controller names size mismatch");
    set.names_ = std::move(names);
    return set;
}

int ControllerSet::sample(int m, const State& state, Rng& rng) const {
    if (is_tabular()) {
        const VectorXd row = matrices_[static_cast<std::size_t>(m)].row(state.at(0)).transpose();
        return sample_categorical(row, rng);
    }
    return samplers_[static_cast<std::size_t>(m)](state, rng);
}

const MatrixXd& ControllerSet::matrix(int m) const {
    if (!is_tabular()) throw UnsupportedError("black-box controllers have no matrix form");
    return matrices_.at(static_cast<std::size_t>(m));
}

const std::vector<MatrixXd>& ControllerSet::matrices() const {
    if (!is_tabular()) throw UnsupportedError("black-box controllers have no matrix form");
    return matrices_;
}

void ControllerSet::validate(int n_states, int n_actions) const {
    if (size() < 1) throw std::invalid_argument("controller set is empty");
    if (!is_tabular()) return;
    for (const auto& k : matrices_)
        if (k.rows() != n_states || k.cols() != n_actions)
            throw std::invalid_argument("controller shape does not match the mdp");
}

VectorXd softmax(const VectorXd& theta) {
    if (theta.size() == 0) throw std::invalid_argument("empty parameter vector");
    if (theta.hasNaN()) throw NumericError("softmax of NaN parameters");
    const double c = theta.maxCoeff();
    VectorXd e = (theta.array() - c).exp();
    return e / e.sum();
}

PolicyMatrix induced_policy(const ControllerSet& controllers, const VectorXd& pi) {
    const auto& mats = controllers.matrices();
    if (pi.size() != controllers.size()) throw std::invalid_argument("mixture weights size mismatch");
    PolicyMatrix out = MatrixXd::Zero(mats[0].rows(), mats[0].cols());
    for (int m = 0; m < controllers.size(); ++m) out += pi(m) * mats[static_cast<std::size_t>(m)];
    return out;
}

VectorXd score_from_weights(const VectorXd& pi, int m) {
    if (m < 0 || m >= pi.size()) throw std::invalid_argument("controller index out of range");
    VectorXd psi = -pi;
    psi(m) += 1.0;
    return psi;
}

VectorXd score(const VectorXd& theta, int m) {
    if (m < 0 || m >= theta.size()) throw std::invalid_argument("controller index out of range");
    return score_from_weights(softmax(theta), m);
}

TildeQ tilde_q_advantage(const FiniteMdp& mdp, const ControllerSet& controllers, const VectorXd& pi) {
    controllers.validate(mdp.n_states, mdp.n_actions);
    const PolicyMatrix policy = induced_policy(controllers, pi);
    TildeQ out;
    out.values = evaluate_policy(mdp, policy);
    const MatrixXd q = q_values(mdp, out.values);
    const int M = controllers.size();
    out.q.resize(mdp.n_states, M);
    for (int m = 0; m < M; ++m) out.q.col(m) = controllers.matrix(m).cwiseProduct(q).rowwise().sum();
    // pairwise differences keep the advantage exactly zero when controllers coincide
    out.advantage = MatrixXd::Zero(mdp.n_states, M);
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < M; ++k)
            if (k != m) out.advantage.col(m) += pi(k) * (out.q.col(m) - out.q.col(k));
    return out;
}

VectorXd exact_value_gradient(const FiniteMdp& mdp, const ControllerSet& controllers, const VectorXd& theta,
                              const VectorXd& mu) {
    if (theta.size() != controllers.size()) throw std::invalid_argument("theta size mismatch");
    const VectorXd pi = softmax(theta);
    const TildeQ tq = tilde_q_advantage(mdp, controllers, pi);
    const VisitationMeasure d = visitation_measure(mdp, induced_policy(controllers, pi), mu);
    VectorXd g = (tq.advantage.transpose() * d.d).cwiseProduct(pi) / (1.0 - mdp.discount);
    if (!g.allFinite()) throw NumericError("non-finite gradient");
    return g;
}

double weights_value(const FiniteMdp& mdp, const ControllerSet& controllers, const VectorXd& pi, const VectorXd& dist) {
    return dist.dot(evaluate_policy(mdp, induced_policy(controllers, pi)));
}

double mixture_value(const FiniteMdp& mdp, const ControllerSet& controllers, const VectorXd& theta, const VectorXd& mu) {
    return weights_value(mdp, controllers, softmax(theta), mu);
}

VectorXd finite_difference_gradient(const FiniteMdp& mdp, const ControllerSet& controllers, const VectorXd& theta,
                                    const VectorXd& mu, double h) {
    VectorXd g(theta.size());
    for (int m = 0; m < theta.size(); ++m) {
        VectorXd up = theta, down = theta;
        up(m) += h;
        down(m) -= h;
        g(m) = (mixture_value(mdp, controllers, up, mu) - mixture_value(mdp, controllers, down, mu)) / (2.0 * h);
    }
    return g;
}

}  // namespace imprl
