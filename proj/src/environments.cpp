#include "imprl/environments.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <sstream>

#include "imprl/errors.hpp"

namespace imprl {

// ---------------------------------------------------------------- tabular

TabularEnv::TabularEnv(FiniteMdp mdp) : mdp_(std::move(mdp)) { mdp_.validate(); }

void TabularEnv::set_state(const State& s) {
    if (s.size() != 1 || s[0] < 0 || s[0] >= mdp_.n_states) throw std::invalid_argument("invalid tabular state");
    state_ = s;
}

void TabularEnv::reset(Rng& rng) { state_[0] = sample_categorical(mdp_.start_dist, rng); }

double TabularEnv::step(int action, Rng& rng) {
    if (action < 0 || action >= mdp_.n_actions) throw std::invalid_argument("action out of range");
    const int s = state_[0];
    const double r = mdp_.reward(s, action);
    const auto row = mdp_.row(s, action);
    VectorXd tmp = row.transpose();
    state_[0] = sample_categorical(tmp, rng);
    return r;
}

// ---------------------------------------------------------------- queues

RewardMode reward_mode_from_string(const std::string& s) {
    if (s == "negative-normalized-backlog") return RewardMode::normalized_backlog;
    if (s == "negative-backlog") return RewardMode::backlog;
    throw std::invalid_argument("unknown reward mode: " + s);
}

std::string to_string(RewardMode mode) {
    return mode == RewardMode::normalized_backlog ? "negative-normalized-backlog" : "negative-backlog";
}

double backlog_reward(const State& q, int cap, RewardMode mode) {
    const double total = std::accumulate(q.begin(), q.end(), 0.0);
    if (mode == RewardMode::backlog) return -total;
    return -total / (static_cast<double>(q.size()) * cap);
}

static void check_rates(const std::vector<double>& rates, int n) {
    if (static_cast<int>(rates.size()) != n) throw std::invalid_argument("arrival rate count mismatch");
    for (double r : rates)
        if (!(r >= 0.0 && r < 1.0)) throw std::invalid_argument("arrival rates must lie in [0,1)");
}

void QueueEnvConfig::validate() const {
    if (n_queues < 1) throw std::invalid_argument("need at least one queue");
    if (cap < 1) throw std::invalid_argument("cap must be >= 1");
    check_rates(arrival_rates, n_queues);
    long prev = -1;
    for (const auto& c : schedule) {
        check_rates(c.rates, n_queues);
        if (c.step <= prev) throw std::invalid_argument("schedule steps must increase");
        prev = c.step;
    }
}

const std::vector<double>& QueueEnvConfig::rates_at(long t) const {
    const std::vector<double>* out = &arrival_rates;
    for (const auto& c : schedule) {
        if (c.step > t) break;
        out = &c.rates;
    }
    return *out;
}

QueueEnv::QueueEnv(QueueEnvConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    q_.assign(static_cast<std::size_t>(cfg_.n_queues), 0);
    arrivals_.assign(static_cast<std::size_t>(cfg_.n_queues), 0);
}

void QueueEnv::set_state(const State& s) {
    if (static_cast<int>(s.size()) != cfg_.n_queues) throw std::invalid_argument("queue state size mismatch");
    for (int v : s)
        if (v < 0 || v > cfg_.cap) throw std::invalid_argument("queue length outside [0, cap]");
    q_ = s;
}

void QueueEnv::reset(Rng&) { std::fill(q_.begin(), q_.end(), 0); }

double QueueEnv::apply(const std::vector<int>& decision, const std::vector<int>& arrivals) {
    if (static_cast<int>(decision.size()) != cfg_.n_queues || static_cast<int>(arrivals.size()) != cfg_.n_queues)
        throw std::invalid_argument("decision/arrival size mismatch");
    int served = 0;
    for (int d : decision) {
        if (d != 0 && d != 1) throw std::invalid_argument("decision entries must be 0 or 1");
        served += d;
    }
    if (served > 1) throw std::invalid_argument("the server can drain at most one packet per slot");
    const double r = backlog_reward(q_, cfg_.cap, cfg_.reward_mode);
    for (int i = 0; i < cfg_.n_queues; ++i) {
        const auto k = static_cast<std::size_t>(i);
        q_[k] = std::min(cfg_.cap, std::max(q_[k] - decision[k], 0) + arrivals[k]);
    }
    ++clock_;
    return r;
}

double QueueEnv::step_decision(const std::vector<int>& decision, Rng& rng) {
    const auto& rates = cfg_.rates_at(clock_);
    for (int i = 0; i < cfg_.n_queues; ++i)
        arrivals_[static_cast<std::size_t>(i)] = bernoulli(rng, rates[static_cast<std::size_t>(i)]) ? 1 : 0;
    return apply(decision, arrivals_);
}

double QueueEnv::step(int action, Rng& rng) {
    if (action < 0 || action > cfg_.n_queues) throw std::invalid_argument("queue action out of range");
    const double r = backlog_reward(q_, cfg_.cap, cfg_.reward_mode);
    if (action > 0) {
        auto& q = q_[static_cast<std::size_t>(action - 1)];
        if (q > 0) --q;
    }
    const auto& rates = cfg_.rates_at(clock_);
    for (int i = 0; i < cfg_.n_queues; ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (bernoulli(rng, rates[k]) && q_[k] < cfg_.cap) ++q_[k];
    }
    ++clock_;
    return r;
}

int queue_index(const State& q, int cap) { return q[0] * (cap + 1) + q[1]; }

State queue_state_from_index(int index, int cap) { return {index / (cap + 1), index % (cap + 1)}; }

FiniteMdp queue_tabular_mdp(const QueueEnvConfig& cfg, double discount) {
    cfg.validate();
    if (cfg.n_queues != 2) throw UnsupportedError("tabular projection exists for two queues only");
    if (cfg.cap > 30) throw UnsupportedError("tabular projection needs cap <= 30");
    const int side = cfg.cap + 1;
    FiniteMdp mdp(side * side, 3, discount);
    mdp.allow_costs = true;
    const double l1 = cfg.arrival_rates[0], l2 = cfg.arrival_rates[1];
    for (int s = 0; s < mdp.n_states; ++s) {
        const State q = queue_state_from_index(s, cfg.cap);
        for (int a = 0; a < 3; ++a) {
            mdp.reward(s, a) = backlog_reward(q, cfg.cap, cfg.reward_mode);
            State base = q;
            if (a > 0 && base[static_cast<std::size_t>(a - 1)] > 0) --base[static_cast<std::size_t>(a - 1)];
            for (int a1 = 0; a1 < 2; ++a1)
                for (int a2 = 0; a2 < 2; ++a2) {
                    const double p = (a1 ? l1 : 1.0 - l1) * (a2 ? l2 : 1.0 - l2);
                    if (p == 0.0) continue;
                    const State next{std::min(cfg.cap, base[0] + a1), std::min(cfg.cap, base[1] + a2)};
                    mdp.p(s, a, queue_index(next, cfg.cap)) += p;
                }
        }
    }
    mdp.start_dist(0) = 1.0;
    mdp.validate();
    return mdp;
}

PathGraphConfig default_path_graph(double rate, int cap) {
    PathGraphConfig cfg;
    cfg.n = 4;
    cfg.independent_sets = {{}, {0}, {1}, {2}, {3}, {0, 2}, {1, 3}, {0, 3}};
    cfg.arrival_rates.assign(4, rate);
    cfg.cap = cap;
    return cfg;
}

void PathGraphConfig::validate() const {
    if (n < 1) throw std::invalid_argument("path graph needs at least one node");
    if (cap < 1) throw std::invalid_argument("cap must be >= 1");
    check_rates(arrival_rates, n);
    if (independent_sets.empty()) throw std::invalid_argument("no action sets");
    for (const auto& set : independent_sets) {
        for (std::size_t i = 0; i < set.size(); ++i) {
            if (set[i] < 0 || set[i] >= n) throw std::invalid_argument("action set refers to a missing node");
            for (std::size_t j = 0; j < set.size(); ++j)
                if (i != j && (std::abs(set[i] - set[j]) <= 1))
                    throw std::invalid_argument("action set is not independent in the path graph");
        }
    }
}

PathGraphEnv::PathGraphEnv(PathGraphConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    q_.assign(static_cast<std::size_t>(cfg_.n), 0);
}

void PathGraphEnv::set_state(const State& s) {
    if (static_cast<int>(s.size()) != cfg_.n) throw std::invalid_argument("queue state size mismatch");
    for (int v : s)
        if (v < 0 || v > cfg_.cap) throw std::invalid_argument("queue length outside [0, cap]");
    q_ = s;
}

void PathGraphEnv::reset(Rng&) { std::fill(q_.begin(), q_.end(), 0); }

void PathGraphEnv::serve(int action) {
    if (action < 0 || action >= n_actions()) throw std::invalid_argument("path graph action out of range");
    for (int j : cfg_.independent_sets[static_cast<std::size_t>(action)]) {
        auto& q = q_[static_cast<std::size_t>(j)];
        if (q > 0) --q;
    }
}

double PathGraphEnv::step(int action, Rng& rng) {
    const double r = backlog_reward(q_, cfg_.cap, cfg_.reward_mode);
    serve(action);
    for (int i = 0; i < cfg_.n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (bernoulli(rng, cfg_.arrival_rates[k]) && q_[k] < cfg_.cap) ++q_[k];
    }
    ++clock_;
    return r;
}

// ---------------------------------------------------------------- controllers

static int parse_index_suffix(const std::string& id, const std::string& prefix) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(id.substr(prefix.size()), &used);
        if (used + prefix.size() != id.size()) throw std::invalid_argument(id);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("malformed controller id: " + id);
    }
}

ActionSampler queue_controller(const std::string& id, const QueueEnvConfig& cfg) {
    const int n = cfg.n_queues;
    if (id.rfind("serve_queue_", 0) == 0) {
        const int i = parse_index_suffix(id, "serve_queue_");
        if (i < 1 || i > n) throw std::invalid_argument("queue index out of range in " + id);
        return [i](const State&, Rng&) { return i; };
    }
    if (id == "lqf") {
        return [](const State& q, Rng&) {
            return static_cast<int>(std::max_element(q.begin(), q.end()) - q.begin()) + 1;
        };
    }
    if (id == "idle") return [](const State&, Rng&) { return 0; };
    throw std::invalid_argument("unknown queue controller: " + id + " (known: serve_queue_<i>, lqf, idle)");
}

MatrixXd queue_controller_matrix(const std::string& id, const QueueEnvConfig& cfg) {
    if (cfg.n_queues != 2 || cfg.cap > 30) throw UnsupportedError("tabular controllers need the small-cap projection");
    const ActionSampler f = queue_controller(id, cfg);
    const int side = cfg.cap + 1;
    MatrixXd k = MatrixXd::Zero(side * side, 3);
    Rng unused(0);
    for (int s = 0; s < side * side; ++s) k(s, f(queue_state_from_index(s, cfg.cap), unused)) = 1.0;
    return k;
}

ControllerSet queue_controllers(const std::vector<std::string>& ids, const QueueEnvConfig& cfg) {
    std::vector<ActionSampler> samplers;
    for (const auto& id : ids) samplers.push_back(queue_controller(id, cfg));
    return ControllerSet::black_box(std::move(samplers), ids);
}

static std::vector<int> parse_set_label(const std::string& body) {
    // "{1,3}" with 1-based labels
    if (body.size() < 2 || body.front() != '{' || body.back() != '}') throw std::invalid_argument("malformed set: " + body);
    std::vector<int> out;
    std::stringstream ss(body.substr(1, body.size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stoi(item) - 1);
    }
    std::sort(out.begin(), out.end());
    return out;
}

ActionSampler path_graph_controller(const std::string& id, const PathGraphConfig& cfg) {
    const auto sets = cfg.independent_sets;
    if (id == "mw" || id == "mer") {
        const bool egress = id == "mer";
        return [sets, egress](const State& q, Rng&) {
            int best = 0;
            long best_score = -1;
            for (std::size_t k = 0; k < sets.size(); ++k) {
                long score = 0;
                for (int j : sets[k]) score += egress ? (q[static_cast<std::size_t>(j)] > 0) : q[static_cast<std::size_t>(j)];
                if (score > best_score) {
                    best_score = score;
                    best = static_cast<int>(k);
                }
            }
            return best;
        };
    }
    if (id.rfind("fixed:", 0) == 0) {
        const auto wanted = parse_set_label(id.substr(6));
        for (std::size_t k = 0; k < sets.size(); ++k) {
            auto s = sets[k];
            std::sort(s.begin(), s.end());
            if (s == wanted) {
                const int action = static_cast<int>(k);
                return [action](const State&, Rng&) { return action; };
            }
        }
        throw std::invalid_argument("set " + id + " is not among the action sets");
    }
    throw std::invalid_argument("unknown path-graph controller: " + id + " (known: mw, mer, fixed:{i,j})");
}

ControllerSet path_graph_controllers(const std::vector<std::string>& ids, const PathGraphConfig& cfg) {
    std::vector<ActionSampler> samplers;
    for (const auto& id : ids) samplers.push_back(path_graph_controller(id, cfg));
    return ControllerSet::black_box(std::move(samplers), ids);
}

double path_graph_mean_delay(const PathGraphConfig& cfg, const std::string& controller, long horizon, Rng& rng) {
    cfg.validate();
    const ActionSampler pick = path_graph_controller(controller, cfg);
    std::vector<std::deque<long>> stamps(static_cast<std::size_t>(cfg.n));
    State q(static_cast<std::size_t>(cfg.n), 0);
    double delay_sum = 0.0;
    long packets = 0;
    for (long t = 0; t < horizon; ++t) {
        for (int i = 0; i < cfg.n; ++i) q[static_cast<std::size_t>(i)] = static_cast<int>(stamps[static_cast<std::size_t>(i)].size());
        const int action = pick(q, rng);
        for (int j : cfg.independent_sets[static_cast<std::size_t>(action)]) {
            auto& fifo = stamps[static_cast<std::size_t>(j)];
            if (fifo.empty()) continue;
            // arrival stamps are end-of-slot times; departure happens at the end of slot t
            delay_sum += static_cast<double>(t + 1 - fifo.front());
            fifo.pop_front();
            ++packets;
        }
        for (int i = 0; i < cfg.n; ++i) {
            auto& fifo = stamps[static_cast<std::size_t>(i)];
            if (bernoulli(rng, cfg.arrival_rates[static_cast<std::size_t>(i)]) && static_cast<int>(fifo.size()) < cfg.cap)
                fifo.push_back(t + 1);
        }
    }
    for (const auto& fifo : stamps)
        for (long stamp : fifo) {
            delay_sum += static_cast<double>(horizon - stamp);
            ++packets;
        }
    return packets == 0 ? 0.0 : delay_sum / static_cast<double>(packets);
}

// ---------------------------------------------------------------- tabular instances

ChainInstance chain_mdp(double discount) {
    constexpr int S = 10;
    FiniteMdp mdp(S, 2, discount);
    for (int j = 0; j < S - 1; ++j) {
        mdp.p(j, 0, j + 1) = 1.0;
        mdp.p(j, 1, std::max(j - 1, 0)) = 1.0;
    }
    mdp.p(S - 1, 0, S - 1) = 1.0;
    mdp.p(S - 1, 1, S - 1) = 1.0;
    mdp.reward(S - 2, 0) = 1.0;
    mdp.start_dist(0) = 1.0;
    mdp.validate();

    auto make = [&](int sticky) {
        MatrixXd k(S, 2);
        for (int j = 0; j < S - 1; ++j) {
            const double left = (j == sticky) ? 0.1 : 1.0;
            k(j, 0) = left;
            k(j, 1) = 1.0 - left;
        }
        k(S - 1, 0) = 0.0;
        k(S - 1, 1) = 1.0;
        return k;
    };
    return {mdp, ControllerSet::tabular({make(4), make(5)}, {"chain_k1", "chain_k2"})};
}

FiniteMdp counterexample_mdp(double r, double discount) {
    FiniteMdp mdp(5, 3, discount);
    mdp.allow_costs = (r < 0.0 || r > 1.0);
    // s1: right -> s2, up -> s3; s2: right -> s5, up -> s4 (reward r)
    mdp.p(0, 0, 1) = 1.0;
    mdp.p(0, 1, 2) = 1.0;
    mdp.p(0, 2, 0) = 1.0;
    mdp.p(1, 0, 4) = 1.0;
    mdp.p(1, 1, 3) = 1.0;
    mdp.p(1, 2, 1) = 1.0;
    for (int s = 2; s < 5; ++s)
        for (int a = 0; a < 3; ++a) mdp.p(s, a, s) = 1.0;
    mdp.reward(1, 1) = r;
    mdp.start_dist(0) = 1.0;
    mdp.validate();
    return mdp;
}

static MatrixXd two_row_controller(double right_s1, double right_s2) {
    MatrixXd k = MatrixXd::Zero(5, 3);
    k(0, 0) = right_s1;
    k(0, 1) = 1.0 - right_s1;
    k(1, 0) = right_s2;
    k(1, 1) = 1.0 - right_s2;
    for (int s = 2; s < 5; ++s) k(s, 2) = 1.0;
    return k;
}

Counterexample nonconcavity_instance(double r, double discount) {
    return {"nonconcavity", counterexample_mdp(r, discount),
            ControllerSet::tabular({two_row_controller(0.25, 0.75), two_row_controller(0.75, 0.25)})};
}

Counterexample nonmonotonicity_instance(double r, double discount) {
    return {"nonmonotonicity", counterexample_mdp(r, discount),
            ControllerSet::tabular({two_row_controller(0.25, 0.25), two_row_controller(0.75, 0.75)})};
}

VectorXd random_distribution(int n, Rng& rng) {
    VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = -std::log(1.0 - uniform01(rng));
    return v / v.sum();
}

FiniteMdp random_mdp(int states, int actions, double discount, Rng& rng) {
    FiniteMdp mdp(states, actions, discount);
    for (int s = 0; s < states; ++s)
        for (int a = 0; a < actions; ++a) {
            mdp.transition.row(s * actions + a) = random_distribution(states, rng).transpose();
            mdp.reward(s, a) = uniform01(rng);
        }
    mdp.start_dist = random_distribution(states, rng);
    mdp.validate();
    return mdp;
}

ControllerSet random_controllers(int count, int states, int actions, Rng& rng) {
    std::vector<MatrixXd> mats;
    for (int m = 0; m < count; ++m) {
        MatrixXd k(states, actions);
        for (int s = 0; s < states; ++s) k.row(s) = random_distribution(actions, rng).transpose();
        mats.push_back(k);
    }
    return ControllerSet::tabular(std::move(mats));
}

// ---------------------------------------------------------------- EPLS

Matrix4d EplsSystem::closed_loop(int i) const {
    const Matrix4d a = a_open - b * gains.at(static_cast<std::size_t>(i)).transpose();
    if (dt > 0.0) return Matrix4d::Identity() + dt * a;
    return a;
}

void EplsSystem::validate() const {
    if (gains.empty()) throw std::invalid_argument("EPLS needs at least one gain");
    if (!a_open.allFinite() || !b.allFinite()) throw std::invalid_argument("EPLS matrices must be finite");
    if (noise < 0.0 || dt < 0.0) throw std::invalid_argument("noise and dt must be nonnegative");
}

EplsSystem cartpole_system(const CartpoleParams& p, std::vector<Vector4d> gains, double dt) {
    const double denom = p.half_length * (4.0 / 3.0 - p.pole_mass / (p.pole_mass + p.cart_mass));
    const double tilt = p.gravity / denom;
    EplsSystem sys;
    sys.a_open << 0, 1, 0, 0,  //
        0, 0, tilt, 0,         //
        0, 0, 0, 1,            //
        0, 0, tilt, 0;
    sys.b << 0, 1.0 / (p.pole_mass + p.cart_mass), 0, 1.0 / denom;
    sys.gains = std::move(gains);
    sys.dt = dt;
    return sys;
}

Vector4d cartpole_reference_gain(double dt) {
    // Solved offline from the discrete Riccati equation of the default constants.
    if (dt == 0.0) return Vector4d(0.0, 0.0, 9.623880689299943, 0.0);
    if (dt == 0.02) return Vector4d(-0.9407891065878785, -5.176218860378315, 23.809607178524736, 13.415440098104837);
    throw std::invalid_argument("reference gain is tabulated for dt = 0 and dt = 0.02 only");
}

static std::vector<double> to_vec(const Eigen::Ref<const VectorXd>& v) { return {v.data(), v.data() + v.size()}; }

nlohmann::json epls_to_json(const EplsSystem& sys) {
    nlohmann::json j;
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < 4; ++i) rows.push_back(to_vec(sys.a_open.row(i).transpose()));
    j["a_open"] = rows;
    j["b"] = to_vec(sys.b);
    nlohmann::json gains = nlohmann::json::array();
    for (const auto& k : sys.gains) gains.push_back(to_vec(k));
    j["gains"] = gains;
    j["noise"] = sys.noise;
    j["dt"] = sys.dt;
    return j;
}

EplsSystem epls_from_json(const nlohmann::json& j) {
    EplsSystem sys;
    const auto rows = j.at("a_open").get<std::vector<std::vector<double>>>();
    if (rows.size() != 4) throw std::invalid_argument("a_open must be 4x4");
    for (int i = 0; i < 4; ++i) {
        if (rows[static_cast<std::size_t>(i)].size() != 4) throw std::invalid_argument("a_open must be 4x4");
        for (int c = 0; c < 4; ++c) sys.a_open(i, c) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
    }
    const auto b = j.at("b").get<std::vector<double>>();
    if (b.size() != 4) throw std::invalid_argument("b must have 4 entries");
    for (int i = 0; i < 4; ++i) sys.b(i) = b[static_cast<std::size_t>(i)];
    for (const auto& g : j.at("gains").get<std::vector<std::vector<double>>>()) {
        if (g.size() != 4) throw std::invalid_argument("gains must have 4 entries");
        sys.gains.emplace_back(g[0], g[1], g[2], g[3]);
    }
    sys.noise = j.value("noise", 0.0);
    sys.dt = j.value("dt", 0.0);
    sys.validate();
    return sys;
}

EplsTrajectory cartpole_epls(const EplsSystem& sys, const VectorXd& probs, int horizon, const Vector4d& x0, Rng& rng) {
    sys.validate();
    if (probs.size() != static_cast<int>(sys.gains.size())) throw std::invalid_argument("mixing probabilities size mismatch");
    check_distribution(probs, "mixing probabilities");
    EplsTrajectory traj;
    if (horizon <= 0) return traj;
    std::vector<Matrix4d> a;
    for (std::size_t i = 0; i < sys.gains.size(); ++i) a.push_back(sys.closed_loop(static_cast<int>(i)));
    traj.states.reserve(static_cast<std::size_t>(horizon) + 1);
    traj.controllers.reserve(static_cast<std::size_t>(horizon));
    Vector4d x = x0;
    traj.states.push_back(x);
    for (int t = 0; t < horizon; ++t) {
        const int i = sample_categorical(probs, rng);
        x = a[static_cast<std::size_t>(i)] * x;
        if (sys.noise > 0.0)
            for (int c = 0; c < 4; ++c) x(c) += sys.noise * standard_normal(rng);
        traj.states.push_back(x);
        traj.controllers.push_back(i);
    }
    return traj;
}

FallStats fall_statistics(const EplsSystem& sys, const VectorXd& probs, int trials, int horizon, double fall_threshold,
                          double init_scale, std::uint64_t seed) {
    FallStats out;
    double rounds = 0.0;
    for (int k = 0; k < trials; ++k) {
        Rng rng = make_rng(seed, static_cast<std::uint64_t>(k), StreamRole::environment);
        Vector4d x0;
        for (int c = 0; c < 4; ++c) x0(c) = init_scale * (2.0 * uniform01(rng) - 1.0);
        const EplsTrajectory traj = cartpole_epls(sys, probs, horizon, x0, rng);
        int survived = horizon;
        for (int t = 1; t <= horizon; ++t) {
            if (std::abs(traj.states[static_cast<std::size_t>(t)](2)) > fall_threshold) {
                survived = t;
                ++out.fall_count;
                break;
            }
        }
        rounds += survived;
    }
    out.mean_rounds = trials > 0 ? rounds / trials : 0.0;
    return out;
}

// ---------------------------------------------------------------- bandits

int BanditInstance::best_controller() const {
    const VectorXd r = controller_means();
    int best = 0;
    for (int m = 1; m < r.size(); ++m)
        if (r(m) > r(best)) best = m;
    return best;
}

double BanditInstance::min_gap() const {
    const VectorXd r = controller_means();
    const int best = best_controller();
    double gap = std::numeric_limits<double>::infinity();
    for (int m = 0; m < r.size(); ++m)
        if (m != best) gap = std::min(gap, r(best) - r(m));
    return std::isinf(gap) ? 0.0 : gap;
}

void BanditInstance::validate() const {
    if (arm_means.size() < 1 || controllers.rows() < 1) throw std::invalid_argument("empty bandit instance");
    if (controllers.cols() != arm_means.size()) throw std::invalid_argument("controller rows must cover every arm");
    if ((arm_means.array() < 0.0).any() || (arm_means.array() > 1.0).any())
        throw std::invalid_argument("arm means must lie in [0,1]");
    for (int m = 0; m < controllers.rows(); ++m) check_distribution(controllers.row(m).transpose(), "controller row");
    if (!(discount > 0.0 && discount < 1.0)) throw std::invalid_argument("discount must lie in (0,1)");
}

BanditInstance bandit_from_means(const VectorXd& controller_means, double discount) {
    BanditInstance inst;
    inst.arm_means = controller_means;
    inst.controllers = MatrixXd::Identity(controller_means.size(), controller_means.size());
    inst.discount = discount;
    inst.validate();
    return inst;
}

BanditInstance random_bandit(int m_count, double min_gap, double discount, Rng& rng) {
    if (m_count < 1) throw std::invalid_argument("need at least one controller");
    if (!(min_gap >= 0.0 && min_gap * (m_count - 1) < 1.0)) throw std::invalid_argument("min_gap too large for [0,1] means");
    VectorXd means(m_count);
    for (int attempt = 0; attempt < 100000; ++attempt) {
        for (int m = 0; m < m_count; ++m) means(m) = uniform01(rng);
        BanditInstance inst = bandit_from_means(means, discount);
        if (m_count == 1 || inst.min_gap() >= min_gap) return inst;
    }
    throw NumericError("could not draw a bandit instance with the requested gap");
}

double BanditEnv::pull(int m, Rng& rng) const {
    if (m < 0 || m >= inst_.m_count()) throw std::invalid_argument("controller index out of range");
    const VectorXd row = inst_.controllers.row(m).transpose();
    const int a = sample_categorical(row, rng);
    return bernoulli(rng, inst_.arm_means(a)) ? 1.0 : 0.0;
}

FiniteMdp bandit_as_mdp(const BanditInstance& inst) {
    const int arms = static_cast<int>(inst.arm_means.size());
    FiniteMdp mdp(1, arms, inst.discount);
    for (int a = 0; a < arms; ++a) {
        mdp.p(0, a, 0) = 1.0;
        mdp.reward(0, a) = inst.arm_means(a);
    }
    mdp.start_dist(0) = 1.0;
    mdp.validate();
    return mdp;
}

ControllerSet bandit_controller_set(const BanditInstance& inst) {
    std::vector<MatrixXd> mats;
    for (int m = 0; m < inst.m_count(); ++m) mats.push_back(inst.controllers.row(m));
    return ControllerSet::tabular(std::move(mats));
}

}  // namespace imprl
