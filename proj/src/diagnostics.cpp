#include "imprl/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "imprl/errors.hpp"

namespace imprl {

void LemmaReport::record(double violation, const nlohmann::json& where) {
    ++instances;
    if (violation > max_violation) {
        max_violation = violation;
        witness = where;
    }
}

nlohmann::json report_to_json(const LemmaReport& r) {
    return {{"lemma", r.lemma},
            {"instances", r.instances},
            {"skipped", r.skipped},
            {"max_violation", r.max_violation},
            {"passed", r.passed()},
            {"witness", r.witness}};
}

// ---------------------------------------------------------------- brute force

static void for_each_composition(int parts, int total, std::vector<int>& buf, int idx, int left,
                                 const std::function<void(const std::vector<int>&)>& f) {
    if (idx == parts - 1) {
        buf[static_cast<std::size_t>(idx)] = left;
        f(buf);
        return;
    }
    for (int k = 0; k <= left; ++k) {
        buf[static_cast<std::size_t>(idx)] = k;
        for_each_composition(parts, total, buf, idx + 1, left - k, f);
    }
}

OptimalMixture brute_force_optimal_mixture(const FiniteMdp& mdp, const ControllerSet& controllers, const VectorXd& rho,
                                           double grid_resolution) {
    const int M = controllers.size();
    if (M > 4) throw UnsupportedError("brute-force mixture search supports at most 4 controllers");
    if (!(grid_resolution > 0.0 && grid_resolution <= 1.0)) throw std::invalid_argument("grid resolution must lie in (0,1]");
    check_distribution(rho, "rho");
    OptimalMixture best;
    if (M == 1) {
        best.pi = VectorXd::Ones(1);
        best.value = weights_value(mdp, controllers, best.pi, rho);
        return best;
    }
    const int n = static_cast<int>(std::lround(1.0 / grid_resolution));
    std::vector<int> buf(static_cast<std::size_t>(M));
    best.value = -std::numeric_limits<double>::infinity();
    VectorXd pi(M);
    for_each_composition(M, n, buf, 0, n, [&](const std::vector<int>& c) {
        for (int m = 0; m < M; ++m) pi(m) = static_cast<double>(c[static_cast<std::size_t>(m)]) / n;
        const double v = weights_value(mdp, controllers, pi, rho);
        if (v > best.value) {
            best.value = v;
            best.pi = pi;
        }
    });
    // pairwise mass transfers with a shrinking step
    for (double step = grid_resolution / 2.0; step > 1e-10; step /= 2.0) {
        bool improved = true;
        while (improved) {
            improved = false;
            for (int i = 0; i < M; ++i)
                for (int j = 0; j < M; ++j) {
                    if (i == j) continue;
                    const double move = std::min(step, best.pi(i));
                    if (move <= 0.0) continue;
                    VectorXd cand = best.pi;
                    cand(i) -= move;
                    cand(j) += move;
                    const double v = weights_value(mdp, controllers, cand, rho);
                    if (v > best.value + 1e-15) {
                        best.value = v;
                        best.pi = cand;
                        improved = true;
                    }
                }
        }
    }
    return best;
}

// ---------------------------------------------------------------- Lojasiewicz

LojasiewiczCheck check_lojasiewicz(const FiniteMdp& mdp, const ControllerSet& controllers, const VectorXd& theta,
                                   const VectorXd& pi_star, const VectorXd& rho, const VectorXd& mu) {
    LojasiewiczCheck out;
    const int M = controllers.size();
    const VectorXd pi = softmax(theta);
    const TildeQ tq = tilde_q_advantage(mdp, controllers, pi);
    const VectorXd weighted = tq.advantage * pi_star;
    out.assumption_holds = weighted.minCoeff() >= -1e-10;
    if (!out.assumption_holds) return out;

    const VectorXd d_mu = visitation_measure(mdp, induced_policy(controllers, pi), mu).d;
    const VectorXd d_star = visitation_measure(mdp, induced_policy(controllers, pi_star), rho).d;
    double ratio = 0.0;
    for (int s = 0; s < mdp.n_states; ++s) {
        if (d_star(s) <= 0.0) continue;
        if (d_mu(s) <= 0.0) {
            out.rejected = true;
            return out;
        }
        ratio = std::max(ratio, d_star(s) / d_mu(s));
    }
    double min_supported = 1.0;
    for (int m = 0; m < M; ++m)
        if (pi_star(m) > 1e-6) min_supported = std::min(min_supported, pi(m));
    // suboptimality through the advantage of pi_theta weighted by pi_star
    const double gap = d_star.dot(weighted) / (1.0 - mdp.discount);
    out.lhs = exact_value_gradient(mdp, controllers, theta, mu).norm();
    out.rhs = ratio > 0.0 ? min_supported / (std::sqrt(static_cast<double>(M)) * ratio) * gap : 0.0;
    return out;
}

// ---------------------------------------------------------------- smoothness

double smoothness_bound(double discount) {
    const double g = discount;
    return (7.0 * g * g + 4.0 * g + 5.0) / (2.0 * std::pow(1.0 - g, 3));
}

double max_second_derivative(const FiniteMdp& mdp, const ControllerSet& controllers, const VectorXd& theta,
                             const VectorXd& mu, int probes, Rng& rng, double h) {
    const double center = mixture_value(mdp, controllers, theta, mu);
    double worst = 0.0;
    for (int k = 0; k < probes; ++k) {
        const VectorXd u = unit_sphere(static_cast<int>(theta.size()), rng);
        const double up = mixture_value(mdp, controllers, theta + h * u, mu);
        const double down = mixture_value(mdp, controllers, theta - h * u, mu);
        worst = std::max(worst, std::abs(up - 2.0 * center + down) / (h * h));
    }
    return worst;
}

// ---------------------------------------------------------------- value difference

double ValueDifference::discrepancy() const {
    return std::max(std::abs(direct - via_advantage), std::abs(direct - via_q));
}

ValueDifference check_value_difference(const FiniteMdp& mdp, const ControllerSet& controllers, const VectorXd& pi,
                                       const VectorXd& pi_prime, int s) {
    if (s < 0 || s >= mdp.n_states) throw std::invalid_argument("state out of range");
    const double scale = 1.0 / (1.0 - mdp.discount);
    const TildeQ base = tilde_q_advantage(mdp, controllers, pi);
    const TildeQ other = tilde_q_advantage(mdp, controllers, pi_prime);
    VectorXd e_s = VectorXd::Zero(mdp.n_states);
    e_s(s) = 1.0;
    const VectorXd d_other = visitation_measure(mdp, induced_policy(controllers, pi_prime), e_s).d;
    const VectorXd d_base = visitation_measure(mdp, induced_policy(controllers, pi), e_s).d;
    ValueDifference out;
    out.direct = other.values(s) - base.values(s);
    out.via_advantage = scale * d_other.dot(base.advantage * pi_prime);
    out.via_q = scale * d_base.dot(other.q * (pi_prime - pi));
    return out;
}

double advantage_centering_error(const FiniteMdp& mdp, const ControllerSet& controllers, const VectorXd& pi) {
    const TildeQ tq = tilde_q_advantage(mdp, controllers, pi);
    return (tq.advantage * pi).cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------- run metrics

std::vector<double> regret(const std::vector<double>& values, double v_star) {
    std::vector<double> out;
    out.reserve(values.size());
    double acc = 0.0;
    for (double v : values) {
        acc += v_star - v;
        out.push_back(acc);
    }
    return out;
}

std::vector<double> regret(const RunTrace& trace, double v_star) {
    std::vector<double> values;
    for (const auto& row : trace.rows) {
        if (!std::isfinite(row.value)) throw UnsupportedError("trace carries no exact values");
        values.push_back(row.value);
    }
    return regret(values, v_star);
}

double bandit_regret_envelope(int m_count, double discount, long t) {
    const double M = m_count;
    const double T = static_cast<double>(t);
    return std::min(5.0 * M * M * std::log(T) / (1.0 - discount), M * std::sqrt(5.0 * T / (1.0 - discount)));
}

CtSeries ct_series(const std::vector<std::vector<VectorXd>>& pi_per_trial, const VectorXd& pi_star,
                   double support_threshold) {
    std::vector<int> support;
    for (int m = 0; m < pi_star.size(); ++m)
        if (pi_star(m) > support_threshold) support.push_back(m);
    if (support.empty()) throw std::invalid_argument("optimal mixture has empty support");
    if (pi_per_trial.empty()) throw std::invalid_argument("no trials");
    CtSeries out;
    std::size_t len = pi_per_trial[0].size();
    for (const auto& trial : pi_per_trial) len = std::min(len, trial.size());
    out.global_min = std::numeric_limits<double>::infinity();
    for (const auto& trial : pi_per_trial) {
        std::vector<double> series;
        series.reserve(len);
        double running = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < len; ++t) {
            for (int m : support) running = std::min(running, trial[t](m));
            series.push_back(running);
        }
        if (!series.empty()) out.global_min = std::min(out.global_min, series.back());
        out.per_trial.push_back(std::move(series));
    }
    out.mean.assign(len, 0.0);
    for (const auto& series : out.per_trial)
        for (std::size_t t = 0; t < len; ++t) out.mean[t] += series[t] / static_cast<double>(out.per_trial.size());
    return out;
}

CtSeries ct_series(const std::vector<RunTrace>& traces, const VectorXd& pi_star, double support_threshold) {
    std::vector<std::vector<VectorXd>> pis;
    for (const auto& tr : traces) {
        std::vector<VectorXd> one;
        for (const auto& row : tr.rows) one.push_back(row.pi);
        pis.push_back(std::move(one));
    }
    return ct_series(pis, pi_star, support_threshold);
}

double lyapunov_bound(const EplsSystem& sys, const VectorXd& probs) {
    if (probs.size() != static_cast<int>(sys.gains.size())) throw std::invalid_argument("mixing probabilities size mismatch");
    check_distribution(probs, "mixing probabilities");
    double out = 0.0;
    for (int i = 0; i < probs.size(); ++i) {
        if (probs(i) == 0.0) continue;
        const double norm = Eigen::JacobiSVD<Matrix4d>(sys.closed_loop(i)).singularValues()(0);
        out += probs(i) * std::log(norm);
    }
    return out;
}

LyapunovEstimate empirical_lyapunov(const std::vector<Vector4d>& states) {
    if (states.size() < 2) throw std::invalid_argument("trajectory needs at least two states");
    const double start = states.front().norm();
    if (!(start > 0.0)) throw std::invalid_argument("initial state must be nonzero");
    LyapunovEstimate out;
    double end = states.back().norm();
    if (end < 1e-300) {
        end = 1e-300;
        out.clamped = true;
    }
    out.exponent = std::log(end / start) / static_cast<double>(states.size() - 1);
    return out;
}

double renormalized_lyapunov(const EplsSystem& sys, const VectorXd& probs, int horizon, const Vector4d& x0, Rng& rng) {
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    check_distribution(probs, "mixing probabilities");
    std::vector<Matrix4d> a;
    for (std::size_t i = 0; i < sys.gains.size(); ++i) a.push_back(sys.closed_loop(static_cast<int>(i)));
    double log_norm = 0.0;
    Vector4d x = x0 / x0.norm();
    for (int t = 0; t < horizon; ++t) {
        x = a[static_cast<std::size_t>(sample_categorical(probs, rng))] * x;
        const double n = x.norm();
        if (n == 0.0) return -std::numeric_limits<double>::infinity();
        log_norm += std::log(n);
        x /= n;
    }
    return log_norm / horizon;
}

}  // namespace imprl
