#include <cmath>

#include "imprl/diagnostics.hpp"
#include "imprl/errors.hpp"

namespace imprl {

namespace {

struct Instance {
    FiniteMdp mdp;
    ControllerSet controllers;
};

int uniform_int(Rng& rng, int lo, int hi) { return lo + static_cast<int>(uniform01(rng) * (hi - lo + 1)); }

Instance fuzz_instance(Rng& rng, int max_states, int max_actions, int min_m, int max_m) {
    const int S = uniform_int(rng, 2, max_states);
    const int A = uniform_int(rng, 2, max_actions);
    const int M = uniform_int(rng, min_m, max_m);
    const double gamma = uniform01(rng) < 0.5 ? 0.5 : 0.9;
    FiniteMdp mdp = random_mdp(S, A, gamma, rng);
    return {mdp, random_controllers(M, S, A, rng)};
}

VectorXd random_theta(int M, Rng& rng, double scale) {
    VectorXd theta(M);
    for (int m = 0; m < M; ++m) theta(m) = scale * standard_normal(rng);
    return theta;
}

std::vector<double> as_vec(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

std::vector<LemmaReport> run_lemma_suite(std::uint64_t seed) {
    std::vector<LemmaReport> out;

    {
        LemmaReport r{"gradient_matches_finite_differences"};
        Rng rng = make_rng(seed, 1, StreamRole::instance);
        for (int k = 0; k < 100; ++k) {
            const Instance inst = fuzz_instance(rng, 8, 4, 1, 4);
            const VectorXd theta = random_theta(inst.controllers.size(), rng, 1.5);
            const VectorXd mu = random_distribution(inst.mdp.n_states, rng);
            const VectorXd g = exact_value_gradient(inst.mdp, inst.controllers, theta, mu);
            const VectorXd fd = finite_difference_gradient(inst.mdp, inst.controllers, theta, mu, 1e-5);
            r.record((g - fd).cwiseAbs().maxCoeff() - 1e-4, {{"case", k}, {"theta", as_vec(theta)}});
        }
        out.push_back(r);
    }

    {
        LemmaReport r{"advantage_centering"};
        Rng rng = make_rng(seed, 2, StreamRole::instance);
        for (int k = 0; k < 100; ++k) {
            const Instance inst = fuzz_instance(rng, 8, 4, 1, 4);
            const VectorXd pi = softmax(random_theta(inst.controllers.size(), rng, 2.0));
            r.record(advantage_centering_error(inst.mdp, inst.controllers, pi) - 1e-10, {{"case", k}, {"pi", as_vec(pi)}});
        }
        out.push_back(r);
    }

    {
        LemmaReport r{"value_difference"};
        Rng rng = make_rng(seed, 3, StreamRole::instance);
        for (int k = 0; k < 200; ++k) {
            const Instance inst = fuzz_instance(rng, 8, 4, 1, 4);
            const int M = inst.controllers.size();
            const VectorXd pi = softmax(random_theta(M, rng, 2.0));
            const VectorXd pi_prime = softmax(random_theta(M, rng, 2.0));
            const int s = uniform_int(rng, 0, inst.mdp.n_states - 1);
            const ValueDifference vd = check_value_difference(inst.mdp, inst.controllers, pi, pi_prime, s);
            r.record(vd.discrepancy() - 1e-9, {{"case", k}, {"state", s}, {"direct", vd.direct}});
        }
        const Counterexample ce = nonconcavity_instance();
        VectorXd e1(2), e2(2);
        e1 << 1, 0;
        e2 << 0, 1;
        const ValueDifference vd = check_value_difference(ce.mdp, ce.controllers, e1, e2, 0);
        r.record(vd.discrepancy() - 1e-9, {{"case", "nonconcavity"}, {"direct", vd.direct}});
        out.push_back(r);
    }

    {
        LemmaReport r{"lojasiewicz"};
        Rng rng = make_rng(seed, 4, StreamRole::instance);
        long passing = 0;
        for (int k = 0; k < 2000 && passing < 200; ++k) {
            const Instance inst = fuzz_instance(rng, 6, 3, 2, 3);
            const int M = inst.controllers.size();
            const VectorXd rho = random_distribution(inst.mdp.n_states, rng);
            const VectorXd mu = random_distribution(inst.mdp.n_states, rng);
            const OptimalMixture best = brute_force_optimal_mixture(inst.mdp, inst.controllers, rho);
            for (int j = 0; j < 10 && passing < 200; ++j) {
                const VectorXd theta = random_theta(M, rng, 1.5);
                const LojasiewiczCheck c = check_lojasiewicz(inst.mdp, inst.controllers, theta, best.pi, rho, mu);
                if (!c.assumption_holds || c.rejected) {
                    ++r.skipped;
                    continue;
                }
                ++passing;
                r.record(-c.slack() - 1e-10,
                         {{"case", k}, {"theta", as_vec(theta)}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"pi_star", as_vec(best.pi)}});
            }
        }
        if (passing < 200) r.record(1.0, {{"reason", "fewer than 200 assumption-passing cases"}, {"found", passing}});
        out.push_back(r);
    }

    {
        LemmaReport r{"smoothness"};
        Rng rng = make_rng(seed, 5, StreamRole::instance);
        for (int k = 0; k < 100; ++k) {
            const Instance inst = fuzz_instance(rng, 8, 4, 1, 4);
            const VectorXd theta = random_theta(inst.controllers.size(), rng, 1.5);
            const VectorXd mu = random_distribution(inst.mdp.n_states, rng);
            const double worst = max_second_derivative(inst.mdp, inst.controllers, theta, mu, 16, rng);
            r.record(worst - smoothness_bound(inst.mdp.discount) - 1e-3, {{"case", k}, {"second_derivative", worst}});
        }
        // bandit embedding against 5 / (2 (1 - gamma))
        for (int k = 0; k < 50; ++k) {
            const int M = uniform_int(rng, 2, 6);
            VectorXd means(M);
            for (int m = 0; m < M; ++m) means(m) = uniform01(rng);
            const BanditInstance inst = bandit_from_means(means, uniform01(rng) < 0.5 ? 0.5 : 0.9);
            const FiniteMdp mdp = bandit_as_mdp(inst);
            const ControllerSet ctrl = bandit_controller_set(inst);
            const VectorXd theta = random_theta(M, rng, 1.5);
            const double worst = max_second_derivative(mdp, ctrl, theta, mdp.start_dist, 16, rng);
            r.record(worst - 5.0 / (2.0 * (1.0 - inst.discount)) - 1e-3, {{"case", "bandit"}, {"index", k}});
        }
        out.push_back(r);
    }

    {
        LemmaReport r{"nonconcavity_witness"};
        const Counterexample ce = nonconcavity_instance();
        auto v = [&](const VectorXd& pi) { return weights_value(ce.mdp, ce.controllers, pi, ce.mdp.start_dist); };
        VectorXd e1(2), e2(2), half(2);
        e1 << 1, 0;
        e2 << 0, 1;
        half << 0.5, 0.5;
        r.record(-(0.5 * v(e1) + 0.5 * v(e2) - v(half) - 1e-12), {{"parameterization", "direct"}});
        const double eps = 0.1;
        VectorXd t1(2), t2(2);
        t1 << std::log(1 - eps), std::log(eps);
        t2 << std::log(eps), std::log(1 - eps);
        const double mid = v(softmax(0.5 * (t1 + t2)));
        r.record(-(0.5 * v(softmax(t1)) + 0.5 * v(softmax(t2)) - mid - 1e-12), {{"parameterization", "softmax"}});
        out.push_back(r);
    }

    {
        LemmaReport r{"nonmonotonicity_witness"};
        const Counterexample ce = nonmonotonicity_instance();
        VectorXd e1(2), half(2);
        e1 << 1, 0;
        half << 0.5, 0.5;
        const VectorXd v1 = evaluate_policy(ce.mdp, induced_policy(ce.controllers, e1));
        const VectorXd vs = evaluate_policy(ce.mdp, induced_policy(ce.controllers, half));
        r.record(-(vs(0) - v1(0)), {{"state", "s1"}});
        r.record(-(v1(1) - vs(1)), {{"state", "s2"}});
        out.push_back(r);
    }
    return out;
}

}  // namespace imprl
