#pragma once

#include "imprl/mdp.hpp"
#include "imprl/mixture.hpp"

namespace fixture {

/// Fixed 3-state, 2-action, 3-controller instance. Reference numbers come from
/// tests/oracles/tabular_oracle.py.
inline imprl::FiniteMdp small_mdp() {
    imprl::FiniteMdp m(3, 2, 0.9);
    const double p[3][2][3] = {
        {{0.5, 0.5, 0.0}, {0.1, 0.0, 0.9}},
        {{0.0, 0.2, 0.8}, {1.0, 0.0, 0.0}},
        {{0.3, 0.3, 0.4}, {0.0, 0.0, 1.0}},
    };
    for (int s = 0; s < 3; ++s)
        for (int a = 0; a < 2; ++a)
            for (int t = 0; t < 3; ++t) m.p(s, a, t) = p[s][a][t];
    m.reward << 1.0, 0.0, 0.2, 0.7, 0.0, 0.4;
    m.start_dist << 0.6, 0.3, 0.1;
    m.validate();
    return m;
}

inline imprl::ControllerSet small_controllers() {
    imprl::MatrixXd k1(3, 2), k2(3, 2), k3(3, 2);
    k1 << 0.9, 0.1, 0.2, 0.8, 0.5, 0.5;
    k2 << 0.1, 0.9, 0.6, 0.4, 1.0, 0.0;
    k3 << 0.5, 0.5, 1.0, 0.0, 0.0, 1.0;
    return imprl::ControllerSet::tabular({k1, k2, k3});
}

inline imprl::VectorXd small_theta() {
    imprl::VectorXd t(3);
    t << 0.3, -0.2, 0.5;
    return t;
}

}  // namespace fixture
