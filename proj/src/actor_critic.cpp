#include "imprl/actor_critic.hpp"

#include <cmath>
#include <string>

#include "imprl/errors.hpp"

namespace imprl {

FeatureMap queue_features(int n_queues, int cap) {
    const double scale = 1.0 / (cap * std::sqrt(static_cast<double>(n_queues)));
    return {n_queues, [n_queues, scale](const State& q) {
                VectorXd out(n_queues);
                for (int i = 0; i < n_queues; ++i) out(i) = q[static_cast<std::size_t>(i)] * scale;
                return out;
            }};
}

FeatureMap one_hot_features(int n_states) {
    return {n_states, [n_states](const State& s) {
                VectorXd out = VectorXd::Zero(n_states);
                out(s.at(0)) = 1.0;
                return out;
            }};
}

AcMode ac_mode_from_string(const std::string& s) {
    if (s == "ac") return AcMode::ac;
    if (s == "nac") return AcMode::nac;
    throw std::invalid_argument("mode must be ac or nac, got " + s);
}

std::string to_string(AcMode mode) { return mode == AcMode::ac ? "ac" : "nac"; }

void AcilConfig::validate() const {
    if (!(actor_step > 0.0 && critic_step > 0.0)) throw std::invalid_argument("step sizes must be positive");
    if (mode == AcMode::nac && !(regularization > 0.0)) throw std::invalid_argument("NAC needs lambda > 0");
    if (actor_batch < 1 || critic_inner < 1 || critic_outer < 1 || outer_steps < 1)
        throw std::invalid_argument("counts must be >= 1");
    if (!(discount > 0.0 && discount < 1.0)) throw std::invalid_argument("discount must lie in (0,1)");
    if (record_every < 1) throw std::invalid_argument("record_every must be >= 1");
}

double tilde_reward(const FiniteMdp& mdp, const ControllerSet& controllers, int s, int m) {
    return controllers.matrix(m).row(s).dot(mdp.reward.row(s));
}

double tilde_reward_sample(const FiniteMdp& mdp, const ControllerSet& controllers, int s, int m, Rng& rng) {
    const int a = controllers.sample(m, State{s}, rng);
    return mdp.reward(s, a);
}

BarStep sample_bar_kernel(Environment& env, const ControllerSet& controllers, int m, double discount, Rng& rng) {
    BarStep out;
    const int a = controllers.sample(m, env.state(), rng);
    out.reward = env.step(a, rng);
    out.tilde_next = env.state();
    out.reset = !bernoulli(rng, discount);
    if (out.reset) env.reset(rng);
    out.next = env.state();
    return out;
}

double td_error(const VectorXd& w, const FeatureMap& phi, double discount, double reward, const State& s,
                const State& next) {
    if (w.size() != phi.dim) throw std::invalid_argument("critic dimension mismatch");
    return reward + (discount * phi(next) - phi(s)).dot(w);
}

CriticResult critic_td(Environment& env, const ControllerSet& controllers, const VectorXd& pi, const FeatureMap& phi,
                       double critic_step, int outer, int inner, double discount, const State& s_init,
                       const VectorXd& w0, Rng& rng) {
    if (w0.size() != phi.dim) throw std::invalid_argument("critic dimension mismatch");
    env.set_state(s_init);
    CriticResult out;
    out.w = w0;
    VectorXd acc(phi.dim);
    double err_sum = 0.0;
    State s = env.state();
    VectorXd phi_s = phi(s);
    for (int k = 0; k < outer; ++k) {
        acc.setZero();
        for (int j = 0; j < inner; ++j) {
            const int m = sample_categorical(pi, rng);
            const double r = env.step(controllers.sample(m, s, rng), rng);
            const State& next = env.state();
            const VectorXd phi_next = phi(next);
            const double err = r + (discount * phi_next - phi_s).dot(out.w);
            acc += err * phi_s;
            err_sum += err;
            s = next;
            phi_s = phi_next;
        }
        out.w += (critic_step / inner) * acc;
        if (!out.w.allFinite() || out.w.norm() > 1e8)
            throw NumericError("critic diverged (|w| > 1e8) at iteration " + std::to_string(k));
    }
    out.last_state = env.state();
    out.td_error_mean = err_sum / (static_cast<double>(outer) * inner);
    return out;
}

VectorXd fisher_regularized_solve(const MatrixXd& f, double lambda, const VectorXd& rhs) {
    if (!(lambda > 0.0)) throw std::invalid_argument("regularization must be positive");
    if (f.rows() != f.cols() || f.rows() != rhs.size()) throw std::invalid_argument("dimension mismatch");
    const MatrixXd g = f + lambda * MatrixXd::Identity(f.rows(), f.cols());
    Eigen::LLT<MatrixXd> llt(g);
    if (llt.info() != Eigen::Success) throw NumericError("regularized Fisher matrix is not positive definite");
    VectorXd x = llt.solve(rhs);
    x += llt.solve(rhs - g * x);
    if (!x.allFinite()) throw NumericError("non-finite natural-gradient step");
    return x;
}

double state_hash(const State& s) {
    std::uint64_t h = 0x84222325cbf29ce4ULL;
    for (int v : s) h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(v)));
    return static_cast<double>(h >> 12);
}

RunTrace run_acil(Environment& env, const ControllerSet& controllers, const FeatureMap& phi, const AcilConfig& cfg) {
    cfg.validate();
    const int M = controllers.size();
    RunTrace trace;
    trace.seed = cfg.seed;
    trace.extra_columns = {"w_norm", "td_error_mean", "fisher_min_eig", "resets", "path_in", "path_out"};
    Rng rng = make_rng(cfg.seed, 0, StreamRole::learner);
    const long t_hat = 1 + static_cast<long>(uniform01(rng) * static_cast<double>(cfg.outer_steps));

    VectorXd theta = VectorXd::Ones(M);
    VectorXd w = VectorXd::Zero(phi.dim);
    env.reset(rng);
    State s_init = env.state();
    MatrixXd fisher(M, M);
    VectorXd weighted(M);
    long t = 0;
    try {
        for (; t < cfg.outer_steps; ++t) {
            const VectorXd pi = softmax(theta);
            const double path_in = state_hash(s_init);
            const VectorXd w0 = cfg.warm_start_critic ? w : VectorXd::Zero(phi.dim);
            const CriticResult critic =
                critic_td(env, controllers, pi, phi, cfg.critic_step, cfg.critic_outer, cfg.critic_inner, cfg.discount,
                          s_init, w0, rng);
            w = critic.w;
            const double value_estimate = phi(critic.last_state).dot(w);

            fisher.setZero();
            weighted.setZero();
            int resets = 0;
            State s = critic.last_state;
            for (int i = 0; i < cfg.actor_batch; ++i) {
                const int m = sample_categorical(pi, rng);
                const BarStep step = sample_bar_kernel(env, controllers, m, cfg.discount, rng);
                const double err = td_error(w, phi, cfg.discount, step.reward, s, step.tilde_next);
                const VectorXd psi = score_from_weights(pi, m);
                fisher.noalias() += psi * psi.transpose() / cfg.actor_batch;
                weighted += err * psi;
                resets += step.reset ? 1 : 0;
                s = step.next;
            }
            const double min_eig = Eigen::SelfAdjointEigenSolver<MatrixXd>(fisher, Eigen::EigenvaluesOnly).eigenvalues()(0);
            if ((fisher - fisher.transpose()).cwiseAbs().maxCoeff() > 1e-12 || min_eig < -1e-10)
                throw NumericError("Fisher estimate is not symmetric positive semidefinite");
            const VectorXd rhs = (cfg.actor_step / cfg.actor_batch) * weighted;
            const VectorXd step = cfg.mode == AcMode::nac ? fisher_regularized_solve(fisher, cfg.regularization, rhs) : rhs;
            theta += step;
            if (!theta.allFinite()) throw NumericError("non-finite parameters");
            s_init = s;
            if (t + 1 == t_hat) trace.output_theta = theta;
            if ((t + 1) % cfg.record_every == 0 || t + 1 == cfg.outer_steps)
                trace.rows.push_back({t + 1, softmax(theta), value_estimate, step.norm(), theta,
                                      {w.norm(), critic.td_error_mean, min_eig, static_cast<double>(resets), path_in,
                                       state_hash(s_init)}});
        }
    } catch (const std::exception& e) {
        trace.failed = true;
        trace.error = "outer step " + std::to_string(t + 1) + ": " + e.what();
    }
    return trace;
}

}  // namespace imprl
