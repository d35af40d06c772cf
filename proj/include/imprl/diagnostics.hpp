#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "imprl/environments.hpp"
#include "imprl/mdp.hpp"
#include "imprl/mixture.hpp"
#include "imprl/trace.hpp"

namespace imprl {

struct LemmaReport {
    LemmaReport() = default;
    explicit LemmaReport(std::string name) : lemma(std::move(name)) {}

    std::string lemma;
    long instances = 0;
    long skipped = 0;
    /// Largest violation seen; negative means every instance passed with slack.
    double max_violation = -std::numeric_limits<double>::infinity();
    nlohmann::json witness;

    bool passed() const { return max_violation <= 0.0; }
    void record(double violation, const nlohmann::json& where);
};

nlohmann::json report_to_json(const LemmaReport& r);

struct OptimalMixture {
    VectorXd pi;
    double value = 0.0;
};

/// Simplex grid at the given resolution, then coordinate-pair refinement around the best point. M <= 4.
OptimalMixture brute_force_optimal_mixture(const FiniteMdp& mdp, const ControllerSet& controllers, const VectorXd& rho,
                                           double grid_resolution = 1.0 / 200.0);

struct LojasiewiczCheck {
    bool assumption_holds = false;
    bool rejected = false;  // visitation ratio undefined
    double lhs = 0.0;
    double rhs = 0.0;
    double slack() const { return lhs - rhs; }
};

/// ||grad V(mu)|| >= (1/sqrt M) min_{supported m} pi_m ||d_rho^{pi*} / d_mu^theta||_inf^{-1} (V*(rho) - V^theta(rho)).
LojasiewiczCheck check_lojasiewicz(const FiniteMdp& mdp, const ControllerSet& controllers, const VectorXd& theta,
                                   const VectorXd& pi_star, const VectorXd& rho, const VectorXd& mu);

/// Largest |second directional derivative| over random unit directions, by central second differences.
double max_second_derivative(const FiniteMdp& mdp, const ControllerSet& controllers, const VectorXd& theta,
                             const VectorXd& mu, int probes, Rng& rng, double h = 1e-3);
/// (7 gamma^2 + 4 gamma + 5) / (2 (1 - gamma)^3).
double smoothness_bound(double discount);

struct ValueDifference {
    double direct = 0.0;
    double via_advantage = 0.0;  // first identity, advantage of pi weighted by pi'
    double via_q = 0.0;          // second identity, Q~ of pi' weighted by pi' - pi
    double discrepancy() const;
};

ValueDifference check_value_difference(const FiniteMdp& mdp, const ControllerSet& controllers, const VectorXd& pi,
                                       const VectorXd& pi_prime, int s);

/// max_s |sum_m pi_m A~(s, m)|.
double advantage_centering_error(const FiniteMdp& mdp, const ControllerSet& controllers, const VectorXd& pi);

/// Cumulative sum of v_star - value over the trace rows.
std::vector<double> regret(const RunTrace& trace, double v_star);
std::vector<double> regret(const std::vector<double>& values, double v_star);
/// min{5 M^2 log T / (1-gamma), M sqrt(5 T / (1-gamma))}.
double bandit_regret_envelope(int m_count, double discount, long t);

struct CtSeries {
    std::vector<std::vector<double>> per_trial;
    std::vector<double> mean;
    double global_min = 0.0;
};

CtSeries ct_series(const std::vector<std::vector<VectorXd>>& pi_per_trial, const VectorXd& pi_star,
                   double support_threshold = 1e-6);
CtSeries ct_series(const std::vector<RunTrace>& traces, const VectorXd& pi_star, double support_threshold = 1e-6);

double lyapunov_bound(const EplsSystem& sys, const VectorXd& probs);

struct LyapunovEstimate {
    double exponent = 0.0;
    bool clamped = false;
};

LyapunovEstimate empirical_lyapunov(const std::vector<Vector4d>& states);

/// Noise-free exponent (1/T) log(|x_T| / |x_0|) accumulated with per-step renormalization.
double renormalized_lyapunov(const EplsSystem& sys, const VectorXd& probs, int horizon, const Vector4d& x0, Rng& rng);

/// Full lemma suite on seeded random instances plus the counterexamples.
std::vector<LemmaReport> run_lemma_suite(std::uint64_t seed);

}  // namespace imprl
