#include <cmath>

#include <doctest.h>

#include "fixtures.hpp"
#include "imprl/environments.hpp"
#include "imprl/errors.hpp"
#include "imprl/mixture.hpp"
#include "imprl/pg.hpp"

using namespace imprl;

TEST_CASE("softmax of equal parameters is uniform") {
    const VectorXd pi = softmax(VectorXd::Zero(4));
    for (int m = 0; m < 4; ++m) CHECK(pi(m) == 0.25);
    const VectorXd half = softmax(VectorXd::Ones(2));
    CHECK(half(0) == 0.5);
    CHECK(half(1) == 0.5);
}

TEST_CASE("softmax survives large parameters") {
    VectorXd t(2);
    t << 700.0, 0.0;
    const VectorXd pi = softmax(t);
    CHECK(std::isfinite(pi(1)));
    CHECK(pi(0) == 1.0);
    CHECK(pi(1) > 0.0);
    CHECK(std::abs(std::log(pi(1)) + 700.0) < 1e-9);
}

TEST_CASE("softmax is shift invariant and rejects NaN") {
    Rng rng(3);
    for (int k = 0; k < 100; ++k) {
        VectorXd t(5);
        // dyadic entries keep the shifted input exactly representable
        for (int i = 0; i < 5; ++i) t(i) = std::round(1024.0 * 10.0 * standard_normal(rng)) / 1024.0;
        const VectorXd a = softmax(t);
        const VectorXd b = softmax((t.array() + 123.0).matrix());
        CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-15);
        CHECK(std::abs(a.sum() - 1.0) <= 1e-12);
        CHECK(a.minCoeff() > 0.0);
    }
    VectorXd bad(2);
    bad << 0.0, std::nan("");
    CHECK_THROWS_AS(softmax(bad), NumericError);
}

TEST_CASE("induced policy") {
    const auto inst = nonconcavity_instance();
    const auto pol = induced_policy(inst.controllers, VectorXd::Constant(2, 0.5));
    CHECK(pol(0, 0) == 0.5);
    CHECK(pol(0, 1) == 0.5);
    CHECK(pol(0, 2) == 0.0);

    const auto single = ControllerSet::tabular({inst.controllers.matrix(0)});
    CHECK(induced_policy(single, VectorXd::Ones(1)) == inst.controllers.matrix(0));

    Rng rng(5);
    for (int k = 0; k < 50; ++k) {
        const auto ctrl = random_controllers(3, 6, 4, rng);
        const auto p = induced_policy(ctrl, random_distribution(3, rng));
        for (int s = 0; s < 6; ++s) CHECK(std::abs(p.row(s).sum() - 1.0) <= 1e-12);
    }
}

TEST_CASE("score vector") {
    const VectorXd sc = score(VectorXd::Zero(2), 0);
    CHECK(sc(0) == 0.5);
    CHECK(sc(1) == -0.5);

    Rng rng(8);
    const double h = 1e-6;
    for (int k = 0; k < 30; ++k) {
        VectorXd t(4);
        for (int i = 0; i < 4; ++i) t(i) = standard_normal(rng);
        const int m = k % 4;
        const VectorXd s = score(t, m);
        CHECK(std::abs(s.sum()) < 1e-14);
        for (int i = 0; i < 4; ++i) {
            VectorXd up = t, dn = t;
            up(i) += h;
            dn(i) -= h;
            const double fd = (std::log(softmax(up)(m)) - std::log(softmax(dn)(m))) / (2 * h);
            CHECK(std::abs(fd - s(i)) < 1e-6);
        }
        // the score lies in a ball of radius sqrt(2)
        CHECK(s.norm() <= std::sqrt(2.0) + 1e-12);
    }
}

TEST_CASE("controller-level Q on the fixed instance") {
    const auto m = fixture::small_mdp();
    const auto ctrl = fixture::small_controllers();
    const VectorXd pi = softmax(fixture::small_theta());
    const auto tq = tilde_q_advantage(m, ctrl, pi);
    const double ref[3][3] = {{3.995370235156367, 2.9869576616885496, 3.491163948422458},
                              {3.737279395230378, 3.401466595229877, 3.065653795229376},
                              {3.1122834946490716, 3.0019141998736885, 3.2226527894244543}};
    for (int s = 0; s < 3; ++s) {
        for (int k = 0; k < 3; ++k) CHECK(std::abs(tq.q(s, k) - ref[s][k]) < 1e-12);
        CHECK(std::abs(tq.q.row(s).dot(pi) - tq.values(s)) < 1e-10);
        CHECK(std::abs(tq.advantage.row(s).dot(pi)) < 1e-10);
    }
}

TEST_CASE("controller-level Q on the counterexample") {
    const auto inst = nonconcavity_instance(1.0);
    VectorXd e1 = VectorXd::Zero(2);
    e1(0) = 1.0;
    const auto tq = tilde_q_advantage(inst.mdp, inst.controllers, e1);
    CHECK(std::abs(tq.q(1, 1) - 0.75) < 1e-14);

    const auto same = ControllerSet::tabular({inst.controllers.matrix(0), inst.controllers.matrix(0)});
    const auto flat = tilde_q_advantage(inst.mdp, same, VectorXd::Constant(2, 0.5));
    CHECK(flat.advantage.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("exact gradient on the fixed instance") {
    const auto m = fixture::small_mdp();
    const auto ctrl = fixture::small_controllers();
    const VectorXd g = exact_value_gradient(m, ctrl, fixture::small_theta(), m.start_dist);
    const double ref[] = {0.5585443347833063, -0.4654819405480737, -0.09306239379114345};
    for (int k = 0; k < 3; ++k) CHECK(std::abs(g(k) - ref[k]) < 1e-8);
    // gradient of a softmax-parameterized function sums to zero
    CHECK(std::abs(g.sum()) < 1e-12);
}

TEST_CASE("exact gradient is zero for identical controllers") {
    const auto m = fixture::small_mdp();
    const auto k = fixture::small_controllers().matrix(0);
    const auto ctrl = ControllerSet::tabular({k, k, k});
    const VectorXd g = exact_value_gradient(m, ctrl, fixture::small_theta(), m.start_dist);
    CHECK(g.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("bandit gradient has the closed form") {
    VectorXd means(3);
    means << 0.8, 0.3, 0.5;
    const auto inst = bandit_from_means(means, 0.9);
    const auto mdp = bandit_as_mdp(inst);
    const auto ctrl = bandit_controller_set(inst);
    VectorXd t(3);
    t << 0.2, 1.1, -0.4;
    const VectorXd pi = softmax(t);
    const VectorXd g = exact_value_gradient(mdp, ctrl, t, mdp.start_dist);
    const double avg = pi.dot(means);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(g(k) - pi(k) * (means(k) - avg) / 0.1) < 1e-12);
}

TEST_CASE("exact gradient matches finite differences on random instances") {
    Rng rng(21);
    for (int k = 0; k < 20; ++k) {
        const auto m = random_mdp(5, 3, 0.9, rng);
        const auto ctrl = random_controllers(4, 5, 3, rng);
        VectorXd t(4);
        for (int i = 0; i < 4; ++i) t(i) = standard_normal(rng);
        const VectorXd g = exact_value_gradient(m, ctrl, t, m.start_dist);
        const VectorXd fd = finite_difference_gradient(m, ctrl, t, m.start_dist, 1e-5);
        CHECK((g - fd).cwiseAbs().maxCoeff() <= 1e-4);
    }
}

TEST_CASE("controller validation") {
    MatrixXd bad(2, 2);
    bad << 0.5, 0.6, 1.0, 0.0;
    CHECK_THROWS_AS(ControllerSet::tabular({bad}).validate(2, 2), std::invalid_argument);
    CHECK_THROWS_AS(ControllerSet::tabular({}).validate(2, 2), std::invalid_argument);
}
