#include "imprl/pg.hpp"

#include <cmath>
#include <string>

#include "imprl/errors.hpp"

namespace imprl {

int RunTrace::extra_index(const std::string& name) const {
    for (std::size_t i = 0; i < extra_columns.size(); ++i)
        if (extra_columns[i] == name) return static_cast<int>(i);
    return -1;
}

void PgConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    if (record_every < 1) throw std::invalid_argument("record_every must be >= 1");
    if (init_theta && !init_theta->allFinite()) throw std::invalid_argument("initial theta must be finite");
}

void SpsaConfig::validate() const {
    if (!(perturbation > 0.0 && perturbation < 1.0)) throw std::invalid_argument("perturbation must lie in (0,1)");
    if (runs < 1 || rollouts_per_run < 1 || rollout_len < 1) throw std::invalid_argument("SPSA counts must be >= 1");
}

double theorem_step_size(double discount) {
    const double g = discount;
    return (1.0 - g) * (1.0 - g) / (7.0 * g * g + 4.0 * g + 5.0);
}

int leader_index(const VectorXd& v) {
    int best = 0;
    for (int i = 1; i < v.size(); ++i)
        if (v(i) > v(best)) best = i;
    return best;
}

static bool should_record(long t, long horizon, long every) { return t % every == 0 || t == horizon; }

RunTrace run_softmax_pg(const FiniteMdp& mdp, const ControllerSet& controllers, const PgConfig& cfg) {
    cfg.validate();
    mdp.validate();
    controllers.validate(mdp.n_states, mdp.n_actions);
    const int M = controllers.size();
    VectorXd theta = cfg.init_theta.value_or(VectorXd::Ones(M));
    if (theta.size() != M) throw std::invalid_argument("initial theta size mismatch");
    const VectorXd mu = cfg.start_dist.size() > 0 ? cfg.start_dist : mdp.start_dist;
    check_distribution(mu, "start distribution");

    RunTrace trace;
    trace.seed = cfg.seed;
    Rng rng = make_rng(cfg.seed, 0, StreamRole::environment);
    TabularEnv env(mdp);
    env.reset(rng);

    VectorXd g = exact_value_gradient(mdp, controllers, theta, mu);
    for (long t = 1; t <= cfg.horizon; ++t) {
        // Sampling line of the algorithm; the exact-gradient update does not consume it.
        const VectorXd pi_now = softmax(theta);
        const int m = sample_categorical(pi_now, rng);
        env.step(controllers.sample(m, env.state(), rng), rng);

        theta += cfg.learning_rate * g;
        g = exact_value_gradient(mdp, controllers, theta, mu);
        if (!g.allFinite()) throw NumericError("non-finite gradient at step " + std::to_string(t));
        if (should_record(t, cfg.horizon, cfg.record_every)) {
            const VectorXd pi = softmax(theta);
            trace.rows.push_back({t, pi, weights_value(mdp, controllers, pi, mu), g.norm(), theta, {}});
        }
    }
    return trace;
}

GradEstimate grad_est(const ReturnOracle& oracle, const VectorXd& theta, const SpsaConfig& spsa, Rng& rng) {
    spsa.validate();
    const int M = static_cast<int>(theta.size());
    std::vector<std::uint64_t> streams;
    if (spsa.common_random_numbers)
        for (int k = 0; k < spsa.rollouts_per_run; ++k) streams.push_back(rng());
    auto mean_return = [&](const VectorXd& pi, int run) {
        double acc = 0.0;
        for (int k = 0; k < spsa.rollouts_per_run; ++k) {
            try {
                if (spsa.common_random_numbers) {
                    Rng shared(streams[static_cast<std::size_t>(k)]);
                    acc += oracle(pi, spsa.rollout_len, shared);
                } else {
                    acc += oracle(pi, spsa.rollout_len, rng);
                }
            } catch (const std::exception& e) {
                throw std::runtime_error("return oracle failed in run " + std::to_string(run) + ", rollout " +
                                         std::to_string(k) + ": " + e.what());
            }
        }
        return acc / spsa.rollouts_per_run;
    };
    const double base = spsa.baseline_subtract ? mean_return(softmax(theta), -1) : 0.0;
    GradEstimate out;
    out.gradient = VectorXd::Zero(M);
    for (int i = 0; i < spsa.runs; ++i) {
        const VectorXd u = unit_sphere(M, rng);
        const double mr = mean_return(softmax(theta + spsa.perturbation * u), i);
        out.mean_return += mr;
        out.gradient += (mr - base) * u;
    }
    out.gradient *= static_cast<double>(M) / (spsa.perturbation * spsa.runs);
    out.mean_return /= spsa.runs;
    return out;
}

double mixture_rollout(Environment& env, const ControllerSet& controllers, const VectorXd& pi, int rollout_len,
                       double discount, Rng& rng) {
    env.reset(rng);
    double ret = 0.0, weight = 1.0;
    for (int k = 0; k < rollout_len; ++k) {
        const int m = sample_categorical(pi, rng);
        ret += weight * env.step(controllers.sample(m, env.state(), rng), rng);
        weight *= discount;
    }
    return ret;
}

RunTrace run_spge(Environment& env, const ControllerSet& controllers, double discount, const PgConfig& cfg,
                  const SpsaConfig& spsa) {
    cfg.validate();
    spsa.validate();
    const int M = controllers.size();
    VectorXd theta = cfg.init_theta.value_or(VectorXd::Ones(M));
    if (theta.size() != M) throw std::invalid_argument("initial theta size mismatch");

    RunTrace trace;
    trace.seed = cfg.seed;
    Rng learner = make_rng(cfg.seed, 0, StreamRole::learner);
    Rng env_rng = make_rng(cfg.seed, 0, StreamRole::environment);
    Rng rollout_rng = make_rng(cfg.seed, 0, StreamRole::rollout);
    auto rollout_env = env.clone();
    const ReturnOracle oracle = [&](const VectorXd& pi, int len, Rng& rng) {
        rollout_env->set_clock(env.clock());
        return mixture_rollout(*rollout_env, controllers, pi, len, discount, rng);
    };

    env.reset(env_rng);
    long t = 1;
    try {
        for (; t <= cfg.horizon; ++t) {
            const VectorXd pi = softmax(theta);
            const int m = sample_categorical(pi, learner);
            env.step(controllers.sample(m, env.state(), env_rng), env_rng);

            const GradEstimate est = grad_est(oracle, theta, spsa, rollout_rng);
            VectorXd g = est.gradient;
            const double raw_norm = g.norm();
            if (spsa.grad_scale == GradScale::normalize_to_10 && raw_norm > 0.0) g *= 10.0 / raw_norm;
            theta += cfg.learning_rate * g;
            if (!theta.allFinite()) throw NumericError("non-finite parameters");
            if (should_record(t, cfg.horizon, cfg.record_every))
                trace.rows.push_back({t, softmax(theta), est.mean_return, raw_norm, theta, {}});
        }
    } catch (const std::exception& e) {
        trace.failed = true;
        trace.error = "step " + std::to_string(t) + ": " + e.what();
    }
    return trace;
}

double bandit_value(const BanditInstance& inst, const VectorXd& pi) {
    if (pi.size() != inst.m_count()) throw std::invalid_argument("mixture weights size mismatch");
    return pi.dot(inst.controller_means()) / (1.0 - inst.discount);
}

RunTrace run_bandit_pg_exact(const BanditInstance& inst, long horizon, long record_every) {
    inst.validate();
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    const int M = inst.m_count();
    const VectorXd r = inst.controller_means();
    const double gamma = inst.discount;
    const double eta = 2.0 * (1.0 - gamma) / 5.0;
    const double v_star = r.maxCoeff() / (1.0 - gamma);

    RunTrace trace;
    trace.extra_columns = {"suboptimality", "regret"};
    if (M > 1 && inst.min_gap() <= 0.0) trace.warnings.push_back("tied optimal controllers; rate theory assumes a unique best");
    VectorXd theta = VectorXd::Constant(M, 1.0 / M);
    double regret = 0.0;
    for (long t = 1; t <= horizon; ++t) {
        const VectorXd pi = softmax(theta);
        const double v = bandit_value(inst, pi);
        const double gap = v_star - v;
        regret += gap;
        const VectorXd g = pi.cwiseProduct((r.array() - pi.dot(r)).matrix()) / (1.0 - gamma);
        if (should_record(t, horizon, record_every)) trace.rows.push_back({t, pi, v, g.norm(), theta, {gap, regret}});
        theta += eta * g;
    }
    return trace;
}

RunTrace run_bandit_projection_free(const BanditInstance& inst, double alpha, long horizon, Rng& rng,
                                    long record_every) {
    inst.validate();
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
    const int M = inst.m_count();
    const VectorXd r = inst.controller_means();
    const double v_star = r.maxCoeff() / (1.0 - inst.discount);

    RunTrace trace;
    trace.extra_columns = {"suboptimality", "regret"};
    if (M > 1) {
        const double gap = inst.min_gap();
        const double limit = gap / (r.maxCoeff() - gap);
        if (!(alpha < limit))
            trace.warnings.push_back("alpha " + std::to_string(alpha) + " outside the admissible range (0, " +
                                     std::to_string(limit) + ")");
    }
    const BanditEnv env(inst);
    VectorXd pi = VectorXd::Constant(M, 1.0 / M);
    VectorXd next(M);
    double regret = 0.0;
    for (long t = 1; t <= horizon; ++t) {
        const double v = bandit_value(inst, pi);
        regret += v_star - v;
        if (should_record(t, horizon, record_every)) trace.rows.push_back({t, pi, v, 0.0, VectorXd(), {v_star - v, regret}});

        const int leader = leader_index(pi);
        const int played = sample_categorical(pi, rng);
        const double reward = env.pull(played, rng);
        const double leader_term = (played == leader) ? reward / pi(leader) : 0.0;
        double others = 0.0;
        for (int m = 0; m < M; ++m) {
            if (m == leader) continue;
            const double own = (played == m) ? reward / pi(m) : 0.0;
            next(m) = pi(m) + alpha * pi(m) * pi(m) * (own - leader_term);
            others += next(m);
        }
        next(leader) = 1.0 - others;
        if (next.minCoeff() < 0.0 || std::abs(next.sum() - 1.0) > 1e-12 || !next.allFinite())
            throw NumericError("projection-free update left the simplex at step " + std::to_string(t));
        pi = next;
    }
    return trace;
}

}  // namespace imprl
