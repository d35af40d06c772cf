#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "imprl/mdp.hpp"
#include "imprl/rng.hpp"

namespace imprl {

/// Environment state as seen by controllers: a tabular index {s} or a vector of queue lengths.
using State = std::vector<int>;
using ActionSampler = std::function<int(const State&, Rng&)>;

/// M base controllers. Tabular controllers carry K_m(s,a); black-box ones only sample.
class ControllerSet {
  public:
    ControllerSet() = default;

    static ControllerSet tabular(std::vector<MatrixXd> matrices, std::vector<std::string> names = {});
    static ControllerSet black_box(std::vector<ActionSampler> samplers, std::vector<std::string> names = {});

    int size() const { return static_cast<int>(names_.size()); }
    bool is_tabular() const { return !matrices_.empty(); }
    const MatrixXd& matrix(int m) const;
    const std::vector<MatrixXd>& matrices() const;
    const std::string& name(int m) const { return names_.at(static_cast<std::size_t>(m)); }
    const std::vector<std::string>& names() const { return names_; }
    int sample(int m, const State& state, Rng& rng) const;

    /// Checks rows, shapes and M >= 1 against an action count (tabular only checks shapes when states > 0).
    void validate(int n_states, int n_actions) const;

  private:
    std::vector<MatrixXd> matrices_;
    std::vector<ActionSampler> samplers_;
    std::vector<std::string> names_;
};

/// Max-shifted softmax. Throws NumericError on NaN.
VectorXd softmax(const VectorXd& theta);

/// pi(a|s) = sum_m pi_m K_m(s,a).
PolicyMatrix induced_policy(const ControllerSet& controllers, const VectorXd& pi);

/// e_m - softmax(theta).
VectorXd score(const VectorXd& theta, int m);
/// Same, with the softmax image already at hand.
VectorXd score_from_weights(const VectorXd& pi, int m);

struct TildeQ {
    MatrixXd q;         // S x M
    MatrixXd advantage; // S x M
    VectorXd values;    // S
};

TildeQ tilde_q_advantage(const FiniteMdp& mdp, const ControllerSet& controllers, const VectorXd& pi);

/// g(m) = 1/(1-gamma) sum_s d_mu(s) pi_m A~(s,m).
VectorXd exact_value_gradient(const FiniteMdp& mdp, const ControllerSet& controllers, const VectorXd& theta,
                              const VectorXd& mu);

/// theta -> V^{pi_theta}(mu) through softmax, induced_policy and evaluate_policy only.
double mixture_value(const FiniteMdp& mdp, const ControllerSet& controllers, const VectorXd& theta, const VectorXd& mu);

/// Central differences of mixture_value with step h.
VectorXd finite_difference_gradient(const FiniteMdp& mdp, const ControllerSet& controllers, const VectorXd& theta,
                                    const VectorXd& mu, double h = 1e-5);

/// Value of a simplex point (no softmax), used by brute-force search and lemma checks.
double weights_value(const FiniteMdp& mdp, const ControllerSet& controllers, const VectorXd& pi, const VectorXd& dist);

}  // namespace imprl
