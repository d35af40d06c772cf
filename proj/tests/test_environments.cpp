#include <cmath>

#include <doctest.h>

#include "imprl/diagnostics.hpp"
#include "imprl/environments.hpp"
#include "imprl/mixture.hpp"

using namespace imprl;

TEST_CASE("idle queues stay empty") {
    QueueEnvConfig cfg;
    cfg.arrival_rates = {0.0, 0.0};
    QueueEnv env(cfg);
    Rng rng(1);
    for (int t = 0; t < 100; ++t) {
        CHECK(env.step(0, rng) == 0.0);
        CHECK(env.state() == State{0, 0});
    }
}

TEST_CASE("saturating arrivals fill to the cap") {
    QueueEnvConfig cfg;
    cfg.cap = 5;
    QueueEnv env(cfg);
    for (int t = 1; t <= 8; ++t) {
        env.apply({0, 0}, {1, 1});
        CHECK(env.state() == State{std::min(t, 5), std::min(t, 5)});
    }
    CHECK_THROWS_AS(env.apply({1, 1}, {0, 0}), std::invalid_argument);
}

TEST_CASE("queue configuration is validated") {
    QueueEnvConfig cfg;
    cfg.arrival_rates = {1.0, 0.2};
    CHECK_THROWS_AS(QueueEnv{cfg}, std::invalid_argument);
    cfg.arrival_rates = {0.2, 0.2};
    cfg.cap = 0;
    CHECK_THROWS_AS(QueueEnv{cfg}, std::invalid_argument);
}

TEST_CASE("serving one queue leaves the other growing at its arrival rate") {
    QueueEnvConfig cfg;
    cfg.reward_mode = RewardMode::backlog;
    const double gamma = 0.9;
    const double bound = 0.49 * gamma / ((1 - gamma) * (1 - gamma));
    const auto serve1 = queue_controller("serve_queue_1", cfg);
    Rng rng(12);
    const int episodes = 20000;
    double sum = 0.0, sum2 = 0.0;
    for (int e = 0; e < episodes; ++e) {
        QueueEnv env(cfg);
        double cost = 0.0, w = 1.0;
        for (int t = 0; t < 300; ++t) {
            const int q2 = env.state()[1];
            env.step(serve1(env.state(), rng), rng);
            cost += w * q2;
            w *= gamma;
        }
        sum += cost;
        sum2 += cost * cost;
    }
    const double mean = sum / episodes;
    const double se = std::sqrt((sum2 / episodes - mean * mean) / episodes);
    CHECK(mean <= bound + 3 * se);
    CHECK(std::abs(mean - bound) <= 3 * se + 1e-9);
}

TEST_CASE("queue controllers") {
    QueueEnvConfig cfg;
    Rng rng(0);
    CHECK(queue_controller("lqf", cfg)({3, 7}, rng) == 2);
    CHECK(queue_controller("serve_queue_1", cfg)({0, 9}, rng) == 1);
    CHECK(queue_controller("serve_queue_2", cfg)({4, 0}, rng) == 2);
    CHECK(queue_controller("lqf", cfg)({4, 4}, rng) == 1);
    CHECK_THROWS_AS(queue_controller("nope", cfg), std::invalid_argument);
}

TEST_CASE("tabular queue chain matches the simulator's transition law") {
    QueueEnvConfig cfg;
    cfg.cap = 3;
    cfg.arrival_rates = {0.5, 0.25};
    const auto mdp = queue_tabular_mdp(cfg, 0.9);
    const int from = queue_index({1, 0}, 3);
    CHECK(std::abs(mdp.p(from, 1, queue_index({0, 0}, 3)) - 0.5 * 0.75) < 1e-15);
    CHECK(std::abs(mdp.p(from, 1, queue_index({1, 1}, 3)) - 0.5 * 0.25) < 1e-15);
    CHECK(std::abs(mdp.p(from, 0, queue_index({2, 0}, 3)) - 0.5 * 0.75) < 1e-15);
    CHECK(queue_state_from_index(queue_index({2, 3}, 3), 3) == State{2, 3});
}

TEST_CASE("path graph service") {
    const auto cfg = default_path_graph();
    PathGraphEnv env(cfg);
    env.set_state({1, 1, 1, 1});
    env.serve(5);  // {1,3}
    CHECK(env.state() == State{0, 1, 0, 1});
    for (const auto& set : cfg.independent_sets)
        for (std::size_t i = 0; i + 1 < set.size(); ++i) CHECK(set[i + 1] - set[i] >= 2);
    auto bad = cfg;
    bad.independent_sets.push_back({0, 1});
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("path graph controllers pick by weight, lowest index on ties") {
    const auto cfg = default_path_graph();
    Rng rng(0);
    const auto mw = path_graph_controller("mw", cfg);
    const auto mer = path_graph_controller("mer", cfg);
    CHECK(mw({5, 1, 1, 5}, rng) == 7);
    CHECK(mer({5, 1, 1, 5}, rng) == 5);
    CHECK(mw({0, 0, 0, 0}, rng) == 0);
    CHECK(path_graph_controller("fixed:{2,4}", cfg)({0, 0, 0, 0}, rng) == 6);
}

TEST_CASE("chain values") {
    const auto chain = chain_mdp(0.9);
    const auto& m = chain.mdp;
    const double k1 = evaluate_policy(m, chain.controllers.matrix(0))(0);
    const double k2 = evaluate_policy(m, chain.controllers.matrix(1))(0);
    const double mix = weights_value(m, chain.controllers, VectorXd::Constant(2, 0.5), m.start_dist);
    CHECK(std::abs(k1 - 0.1588439889298894) < 1e-12);
    CHECK(std::abs(k2 - 0.15884398892988938) < 1e-12);
    CHECK(std::abs(mix - 0.2993306845008909) < 1e-12);
    CHECK(mix > k1);
    CHECK(chain.controllers.matrix(0)(4, 0) == 0.1);
    CHECK(chain.controllers.matrix(1)(5, 0) == 0.1);
}

TEST_CASE("counterexample values") {
    const double r = 1.0, g = 0.9;
    const auto nc = nonconcavity_instance(r, g);
    const auto v1 = evaluate_policy(nc.mdp, nc.controllers.matrix(0));
    const auto v2 = evaluate_policy(nc.mdp, nc.controllers.matrix(1));
    const auto vm = evaluate_policy(nc.mdp, induced_policy(nc.controllers, VectorXd::Constant(2, 0.5)));
    CHECK(std::abs(v1(0) - g * r / 16) < 1e-12);
    CHECK(std::abs(v2(0) - g * 9 * r / 16) < 1e-12);
    CHECK(std::abs(vm(0) - g * r / 4) < 1e-12);
    CHECK(0.5 * (v1(0) + v2(0)) > vm(0));

    const auto nm = nonmonotonicity_instance(r, g);
    const auto best = evaluate_policy(nm.mdp, induced_policy(nm.controllers, VectorXd::Constant(2, 0.5)));
    const auto k1 = evaluate_policy(nm.mdp, nm.controllers.matrix(0));
    CHECK(std::abs(best(1) - r / 2) < 1e-12);
    CHECK(std::abs(k1(1) - 3 * r / 4) < 1e-12);
    CHECK(best(1) < k1(1));
}

TEST_CASE("random instances pass validation") {
    Rng rng(7);
    for (int k = 0; k < 50; ++k) {
        const auto m = random_mdp(1 + k % 8, 1 + k % 4, 0.9, rng);
        CHECK_NOTHROW(m.validate());
        CHECK_NOTHROW(random_controllers(3, m.n_states, m.n_actions, rng).validate(m.n_states, m.n_actions));
    }
}

TEST_CASE("bandit pulls") {
    VectorXd means(3);
    means << 0.0, 1.0, 0.3;
    BanditEnv env(bandit_from_means(means));
    Rng rng(5);
    for (int k = 0; k < 1000; ++k) {
        CHECK(env.pull(0, rng) == 0.0);
        CHECK(env.pull(1, rng) == 1.0);
    }
    const int n = 100000;
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += env.pull(2, rng);
    CHECK(std::abs(s / n - 0.3) <= 3 * std::sqrt(0.3 * 0.7 / n));

    Rng r2(1);
    const auto inst = random_bandit(5, 0.1, 0.9, r2);
    CHECK(inst.min_gap() >= 0.1);
}

namespace {

/// a_open = diag(1.2, 0.5, 0.5, 0.5), b = e1, so gain k e1 sets the top-left entry to 1.2 - k.
EplsSystem diagonal_pair(double second_top) {
    EplsSystem sys;
    sys.a_open = Vector4d(1.2, 0.5, 0.5, 0.5).asDiagonal();
    sys.b = Vector4d::UnitX();
    sys.gains = {Vector4d::Zero(), Vector4d(1.2 - second_top, 0, 0, 0)};
    return sys;
}

}  // namespace

TEST_CASE("EPLS single stable gain stays under its norm envelope") {
    auto sys = diagonal_pair(0.6);
    VectorXd p(2);
    p << 0.0, 1.0;
    Rng rng(2);
    const Vector4d x0(1, -1, 0.5, 2);
    const auto traj = cartpole_epls(sys, p, 50, x0, rng);
    const double a = Eigen::JacobiSVD<Matrix4d>(sys.closed_loop(1)).singularValues()(0);
    Vector4d x = x0;
    for (int t = 0; t <= 50; ++t) {
        CHECK(traj.states[static_cast<std::size_t>(t)].norm() <= std::pow(a, t) * x0.norm() * (1 + 1e-12));
        CHECK((traj.states[static_cast<std::size_t>(t)] - x).norm() == 0.0);
        x = sys.closed_loop(1) * x;
    }
}

TEST_CASE("EPLS mixture with negative bound decays") {
    const double second = std::exp(-0.2) / 1.2;
    const auto sys = diagonal_pair(second);
    const VectorXd p = VectorXd::Constant(2, 0.5);
    CHECK(std::abs(lyapunov_bound(sys, p) + 0.1) < 1e-12);
    int good = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        const auto traj = cartpole_epls(sys, p, 2000, Vector4d(1, 1, 1, 1), rng);
        if (empirical_lyapunov(traj.states).exponent <= -0.05) ++good;
    }
    CHECK(good >= 90);
}

TEST_CASE("fall statistics at the extremes") {
    auto stable = diagonal_pair(0.6);
    stable.noise = 1e-4;
    VectorXd p(2);
    p << 0.0, 1.0;
    CHECK(fall_statistics(stable, p, 100, 500, 0.2, 0.05, 1).fall_count == 0);

    EplsSystem unstable;
    unstable.a_open = Matrix4d::Identity() * 1.1;
    unstable.gains = {Vector4d::Zero()};
    VectorXd one = VectorXd::Ones(1);
    CHECK(fall_statistics(unstable, one, 100, 500, 0.2, 0.05, 1).fall_count == 100);
}

TEST_CASE("cartpole system and json round trip") {
    auto sys = cartpole_system({}, {cartpole_reference_gain(0.02)}, 0.02);
    sys.noise = 0.01;
    const auto back = epls_from_json(epls_to_json(sys));
    CHECK(back.a_open == sys.a_open);
    CHECK(back.b == sys.b);
    CHECK(back.gains[0] == sys.gains[0]);
    CHECK(back.noise == sys.noise);
    CHECK(back.dt == sys.dt);
    // the reference gain stabilizes the sampled system
    const auto eig = sys.closed_loop(0).eigenvalues();
    CHECK(eig.cwiseAbs().maxCoeff() < 1.0);
}

TEST_CASE("packet delay counts departure minus arrival time") {
    PathGraphConfig cfg;
    cfg.n = 1;
    cfg.independent_sets = {{}, {0}};
    cfg.arrival_rates = {0.5};
    Rng rng(3);
    // every packet is served in the slot after it arrives
    const double d = path_graph_mean_delay(cfg, "mw", 10000, rng);
    CHECK(d <= 1.0);
    CHECK(d > 0.999);
}
