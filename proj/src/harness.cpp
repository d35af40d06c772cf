#include "imprl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "imprl/actor_critic.hpp"
#include "imprl/diagnostics.hpp"
#include "imprl/environments.hpp"
#include "imprl/errors.hpp"
#include "imprl/pg.hpp"

namespace imprl {

using nlohmann::json;

// ---------------------------------------------------------------- formatting

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

static double parse_double(const std::string& s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw std::invalid_argument("bad number in csv: " + s);
    return v;
}

std::string table_to_csv(const TrialTable& table) {
    std::string out;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        if (c) out += ',';
        out += table.columns[c];
    }
    out += '\n';
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += ',';
            out += format_double(row[c]);
        }
        out += '\n';
    }
    return out;
}

TrialTable table_from_csv(const std::string& text) {
    TrialTable t;
    std::istringstream in(text);
    std::string line;
    auto split = [](const std::string& l) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(l);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        return cells;
    };
    if (!std::getline(in, line)) return t;
    t.columns = split(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        for (const auto& cell : split(line)) row.push_back(parse_double(cell));
        if (row.size() != t.columns.size()) throw std::invalid_argument("ragged csv row");
        t.rows.push_back(std::move(row));
    }
    return t;
}

// ---------------------------------------------------------------- config

static const std::set<std::string> kConfigKeys{"experiment", "algorithm", "environment", "params",
                                               "trials",     "seed",      "out_dir"};

json config_to_json(const ExperimentConfig& cfg) {
    return {{"experiment", cfg.experiment}, {"algorithm", cfg.algorithm}, {"environment", cfg.environment},
            {"params", cfg.params},         {"trials", cfg.trials},       {"seed", cfg.seed},
            {"out_dir", cfg.out_dir}};
}

ExperimentConfig config_from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!kConfigKeys.count(key)) throw std::invalid_argument("unknown config key: " + key);
    ExperimentConfig cfg;
    cfg.experiment = j.value("experiment", std::string());
    cfg.algorithm = j.at("algorithm").get<std::string>();
    cfg.environment = j.value("environment", json::object());
    cfg.params = j.value("params", json::object());
    cfg.trials = j.value("trials", 20);
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.out_dir = j.value("out_dir", std::string());
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::invalid_argument("malformed config " + path + ": " + e.what());
    }
    return config_from_json(j);
}

namespace {

/// Reads keys from a JSON object and rejects any key that was never asked for.
class Fields {
  public:
    Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw std::invalid_argument(where_ + " must be a JSON object");
    }

    template <class T>
    T get(const std::string& key, const T& fallback) {
        seen_.insert(key);
        if (!j_.contains(key)) return fallback;
        try {
            return j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw std::invalid_argument(where_ + "." + key + ": " + e.what());
        }
    }

    template <class T>
    T require(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key)) throw std::invalid_argument(where_ + " is missing '" + key + "'");
        return get<T>(key, T{});
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    void finish() const {
        for (const auto& [key, _] : j_.items())
            if (!seen_.count(key)) throw std::invalid_argument("unknown key " + where_ + "." + key);
    }

  private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

VectorXd to_vector(const std::vector<double>& v) { return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())); }
std::vector<double> to_std(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// ---------------------------------------------------------------- environments

QueueEnvConfig queue_config(Fields& f) {
    QueueEnvConfig q;
    q.arrival_rates = f.get("arrival_rates", q.arrival_rates);
    q.n_queues = f.get("n_queues", static_cast<int>(q.arrival_rates.size()));
    q.cap = f.get("cap", q.cap);
    q.reward_mode = reward_mode_from_string(f.get("reward_mode", to_string(q.reward_mode)));
    if (f.has("schedule"))
        for (const auto& c : f.raw("schedule")) {
            Fields cf(c, "environment.schedule[]");
            q.schedule.push_back({cf.require<long>("step"), cf.require<std::vector<double>>("rates")});
            cf.finish();
        }
    q.validate();
    return q;
}

PathGraphConfig path_config(Fields& f) {
    PathGraphConfig g = default_path_graph(f.get("rate", 0.495), f.get("cap", 1000));
    if (f.has("arrival_rates")) g.arrival_rates = f.get("arrival_rates", g.arrival_rates);
    g.reward_mode = reward_mode_from_string(f.get("reward_mode", to_string(g.reward_mode)));
    g.validate();
    return g;
}

/// A learner problem built from the environment section: either tabular (exact) or black-box.
struct Problem {
    std::string kind;
    std::optional<FiniteMdp> mdp;
    ControllerSet controllers;
    std::function<std::unique_ptr<Environment>()> make_env;
    QueueEnvConfig queue;
    PathGraphConfig path;
    double discount = 0.9;
};

Problem tabular_problem(const json& env, double discount) {
    Fields f(env, "environment");
    Problem p;
    p.kind = f.require<std::string>("kind");
    p.discount = discount;
    if (p.kind == "chain") {
        ChainInstance c = chain_mdp(discount);
        p.mdp = c.mdp;
        p.controllers = c.controllers;
    } else if (p.kind == "nonconcavity" || p.kind == "nonmonotonicity") {
        const double r = f.get("r", 1.0);
        Counterexample c = p.kind == "nonconcavity" ? nonconcavity_instance(r, discount) : nonmonotonicity_instance(r, discount);
        p.mdp = c.mdp;
        p.controllers = c.controllers;
    } else if (p.kind == "queues-tabular") {
        QueueEnvConfig q = queue_config(f);
        p.mdp = queue_tabular_mdp(q, discount);
        std::vector<MatrixXd> mats;
        const auto ids = f.require<std::vector<std::string>>("controllers");
        for (const auto& id : ids) mats.push_back(queue_controller_matrix(id, q));
        p.controllers = ControllerSet::tabular(std::move(mats), ids);
    } else {
        throw std::invalid_argument("unknown tabular environment kind: " + p.kind +
                                    " (known: chain, nonconcavity, nonmonotonicity, queues-tabular)");
    }
    if (f.has("start_dist")) {
        const VectorXd mu = to_vector(f.get("start_dist", std::vector<double>{}));
        if (mu.size() != p.mdp->n_states) throw std::invalid_argument("start_dist size mismatch");
        check_distribution(mu, "start_dist");
        p.mdp->start_dist = mu;
    }
    f.finish();
    return p;
}

Problem simulator_problem(const json& env) {
    Fields f(env, "environment");
    Problem p;
    p.kind = f.require<std::string>("kind");
    const auto ids = f.require<std::vector<std::string>>("controllers");
    if (p.kind == "queues") {
        p.queue = queue_config(f);
        p.controllers = queue_controllers(ids, p.queue);
        const QueueEnvConfig q = p.queue;
        p.make_env = [q] { return std::make_unique<QueueEnv>(q); };
    } else if (p.kind == "path-graph") {
        p.path = path_config(f);
        p.controllers = path_graph_controllers(ids, p.path);
        const PathGraphConfig g = p.path;
        p.make_env = [g] { return std::make_unique<PathGraphEnv>(g); };
    } else {
        throw std::invalid_argument("unknown simulator kind: " + p.kind + " (known: queues, path-graph)");
    }
    f.finish();
    return p;
}

BanditInstance bandit_instance(const json& env, std::uint64_t seed, int trial) {
    Fields f(env, "environment");
    const auto kind = f.require<std::string>("kind");
    const double discount = f.get("discount", 0.9);
    BanditInstance inst;
    if (kind == "bandit") {
        inst = bandit_from_means(to_vector(f.require<std::vector<double>>("controller_means")), discount);
    } else if (kind == "random-bandit") {
        Rng rng = make_rng(seed, static_cast<std::uint64_t>(trial), StreamRole::instance);
        inst = random_bandit(f.require<int>("controllers"), f.get("min_gap", 0.1), discount, rng);
    } else {
        throw std::invalid_argument("unknown bandit kind: " + kind + " (known: bandit, random-bandit)");
    }
    f.finish();
    return inst;
}

FeatureMap feature_map(const json& j, int n_queues, int cap) {
    Fields f(j, "params.features");
    const auto kind = f.get<std::string>("kind", "normalized");
    FeatureMap out;
    if (kind == "normalized") {
        out = queue_features(n_queues, cap);
    } else if (kind == "scaled") {
        const double scale = f.require<double>("scale");
        if (!(scale > 0.0)) throw std::invalid_argument("feature scale must be positive");
        out = {n_queues, [n_queues, scale](const State& q) {
                   VectorXd v(n_queues);
                   for (int i = 0; i < n_queues; ++i) v(i) = q[static_cast<std::size_t>(i)] / scale;
                   return v;
               }};
    } else {
        throw std::invalid_argument("unknown feature kind: " + kind + " (known: normalized, scaled)");
    }
    f.finish();
    return out;
}

// ---------------------------------------------------------------- trace tables

TrialTable trace_table(const RunTrace& trace, int trial, const std::optional<VectorXd>& pi_star) {
    TrialTable t;
    const int M = trace.rows.empty() ? 0 : static_cast<int>(trace.rows.front().pi.size());
    t.columns = {"trial", "step"};
    for (int m = 0; m < M; ++m) t.columns.push_back("pi_" + std::to_string(m));
    t.columns.push_back("value");
    t.columns.push_back("grad_norm");
    if (pi_star) t.columns.push_back("c_bar");
    for (const auto& c : trace.extra_columns) t.columns.push_back(c);
    std::vector<int> support;
    if (pi_star)
        for (int m = 0; m < pi_star->size(); ++m)
            if ((*pi_star)(m) > 1e-6) support.push_back(m);
    double running = std::numeric_limits<double>::infinity();
    for (const auto& r : trace.rows) {
        std::vector<double> row{static_cast<double>(trial), static_cast<double>(r.step)};
        for (int m = 0; m < M; ++m) row.push_back(r.pi(m));
        row.push_back(r.value);
        row.push_back(r.grad_norm);
        if (pi_star) {
            for (int m : support) running = std::min(running, r.pi(m));
            row.push_back(running);
        }
        for (double e : r.extra) row.push_back(e);
        t.rows.push_back(std::move(row));
    }
    return t;
}

TrialOutput from_trace(RunTrace trace, int trial, const std::optional<VectorXd>& pi_star) {
    TrialOutput out;
    out.table = trace_table(trace, trial, pi_star);
    out.failed = trace.failed;
    out.error = trace.error;
    out.warnings = trace.warnings;
    if (trace.output_theta.size() > 0) out.info["output_theta"] = to_std(trace.output_theta);
    out.trace = std::move(trace);
    return out;
}

std::optional<VectorXd> reference_mixture(Fields& f, int M, const Problem* tabular) {
    if (!f.has("reference_mixture")) return std::nullopt;
    const json& j = f.raw("reference_mixture");
    if (j.is_string()) {
        if (j.get<std::string>() != "optimal") throw std::invalid_argument("reference_mixture must be a list or \"optimal\"");
        if (!tabular || !tabular->mdp) throw std::invalid_argument("\"optimal\" reference needs a tabular environment");
        return brute_force_optimal_mixture(*tabular->mdp, tabular->controllers, tabular->mdp->start_dist).pi;
    }
    const VectorXd pi = to_vector(j.get<std::vector<double>>());
    if (pi.size() != M) throw std::invalid_argument("reference_mixture size mismatch");
    check_distribution(pi, "reference_mixture");
    return pi;
}

// ---------------------------------------------------------------- runners

class Runner {
  public:
    virtual ~Runner() = default;
    virtual TrialOutput run_trial(int trial) const = 0;
    /// Algorithm-specific summary fields.
    virtual json summarize(const std::vector<TrialOutput>& trials) const {
        (void)trials;
        return json::object();
    }
    virtual std::vector<std::string> controller_names() const { return {}; }
    virtual bool single_trial() const { return false; }
    virtual std::vector<LemmaReport> lemmas() const { return {}; }
};

std::uint64_t trial_seed(std::uint64_t master, int trial) { return derive_seed(master, static_cast<std::uint64_t>(trial), StreamRole::learner); }

class SoftmaxPgRunner : public Runner {
  public:
    SoftmaxPgRunner(const ExperimentConfig& cfg) : seed_(cfg.seed) {
        Fields f(cfg.params, "params");
        const double discount = f.get("discount", 0.9);
        problem_ = tabular_problem(cfg.environment, discount);
        const json& step = f.has("learning_rate") ? f.raw("learning_rate") : json(1e-4);
        pg_.learning_rate = step.is_string() && step.get<std::string>() == "theorem" ? theorem_step_size(discount)
                                                                                       : step.get<double>();
        pg_.horizon = f.get("horizon", 1000L);
        pg_.record_every = f.get("record_every", 1L);
        if (f.has("init_theta")) pg_.init_theta = to_vector(f.get("init_theta", std::vector<double>{}));
        pi_star_ = reference_mixture(f, problem_.controllers.size(), &problem_);
        f.finish();
        pg_.validate();
    }

    TrialOutput run_trial(int trial) const override {
        PgConfig c = pg_;
        c.seed = trial_seed(seed_, trial);
        RunTrace trace;
        try {
            trace = run_softmax_pg(*problem_.mdp, problem_.controllers, c);
        } catch (const std::exception& e) {
            trace.failed = true;
            trace.error = e.what();
        }
        return from_trace(std::move(trace), trial, pi_star_);
    }

    json summarize(const std::vector<TrialOutput>&) const override {
        json j;
        if (problem_.controllers.size() <= 4) {
            const OptimalMixture best =
                brute_force_optimal_mixture(*problem_.mdp, problem_.controllers, problem_.mdp->start_dist);
            j["optimal_mixture"] = to_std(best.pi);
            j["optimal_value"] = best.value;
        }
        j["learning_rate"] = pg_.learning_rate;
        return j;
    }

    std::vector<std::string> controller_names() const override { return problem_.controllers.names(); }

  private:
    std::uint64_t seed_;
    Problem problem_;
    PgConfig pg_;
    std::optional<VectorXd> pi_star_;
};

GradScale grad_scale_from_string(const std::string& s) {
    if (s == "none") return GradScale::none;
    if (s == "normalize-to-10") return GradScale::normalize_to_10;
    throw std::invalid_argument("grad_scale must be none or normalize-to-10, got " + s);
}

class SpgeRunner : public Runner {
  public:
    SpgeRunner(const ExperimentConfig& cfg) : seed_(cfg.seed) {
        problem_ = simulator_problem(cfg.environment);
        Fields f(cfg.params, "params");
        discount_ = f.get("discount", 0.9);
        pg_.learning_rate = f.get("learning_rate", 1e-4);
        pg_.horizon = f.get("horizon", 10000L);
        pg_.record_every = f.get("record_every", 1L);
        if (f.has("init_theta")) pg_.init_theta = to_vector(f.get("init_theta", std::vector<double>{}));
        spsa_.runs = f.get("runs", spsa_.runs);
        spsa_.perturbation = f.get("perturbation", 1.0 / std::sqrt(static_cast<double>(spsa_.runs)));
        spsa_.rollouts_per_run = f.get("rollouts_per_run", spsa_.rollouts_per_run);
        spsa_.rollout_len = f.get("rollout_len", spsa_.rollout_len);
        spsa_.grad_scale = grad_scale_from_string(f.get<std::string>("grad_scale", "none"));
        spsa_.baseline_subtract = f.get("baseline_subtract", false);
        spsa_.common_random_numbers = f.get("common_random_numbers", false);
        pi_star_ = reference_mixture(f, problem_.controllers.size(), nullptr);
        delay_horizon_ = f.get("delay_horizon", 0L);
        delay_runs_ = f.get("delay_runs", 20);
        f.finish();
        if (!(discount_ > 0.0 && discount_ < 1.0)) throw std::invalid_argument("discount must lie in (0,1)");
        if (delay_horizon_ > 0 && problem_.kind != "path-graph") throw std::invalid_argument("delay table needs path-graph");
        pg_.validate();
        spsa_.validate();
    }

    TrialOutput run_trial(int trial) const override {
        PgConfig c = pg_;
        c.seed = trial_seed(seed_, trial);
        auto env = problem_.make_env();
        return from_trace(run_spge(*env, problem_.controllers, discount_, c, spsa_), trial, pi_star_);
    }

    json summarize(const std::vector<TrialOutput>&) const override {
        json j;
        if (delay_horizon_ > 0) {
            json table = json::array();
            for (int m = 0; m < problem_.controllers.size(); ++m) {
                const std::string& name = problem_.controllers.name(m);
                std::vector<double> delays;
                for (int k = 0; k < delay_runs_; ++k) {
                    Rng rng = make_rng(seed_, static_cast<std::uint64_t>(k), StreamRole::evaluation);
                    delays.push_back(path_graph_mean_delay(problem_.path, name, delay_horizon_, rng));
                }
                double mean = 0.0, var = 0.0;
                for (double d : delays) mean += d / delays.size();
                for (double d : delays) var += (d - mean) * (d - mean) / delays.size();
                table.push_back({{"controller", name}, {"mean_delay", mean}, {"std_delay", std::sqrt(var)}});
            }
            j["delay_table"] = table;
            j["delay_horizon"] = delay_horizon_;
        }
        return j;
    }

    std::vector<std::string> controller_names() const override { return problem_.controllers.names(); }

  private:
    std::uint64_t seed_;
    Problem problem_;
    double discount_ = 0.9;
    PgConfig pg_;
    SpsaConfig spsa_;
    std::optional<VectorXd> pi_star_;
    long delay_horizon_ = 0;
    int delay_runs_ = 20;
};

class BanditRunner : public Runner {
  public:
    BanditRunner(const ExperimentConfig& cfg, bool exact) : env_(cfg.environment), seed_(cfg.seed), exact_(exact) {
        bandit_instance(env_, seed_, 0);  // validates the environment section
        Fields f(cfg.params, "params");
        horizon_ = f.get("horizon", exact ? 10000L : 100000L);
        record_every_ = f.get("record_every", 1L);
        if (!exact) alpha_ = f.require<double>("alpha");
        f.finish();
        if (horizon_ < 1 || record_every_ < 1) throw std::invalid_argument("horizon and record_every must be >= 1");
    }

    TrialOutput run_trial(int trial) const override {
        const BanditInstance inst = bandit_instance(env_, seed_, trial);
        RunTrace trace;
        try {
            if (exact_) {
                trace = run_bandit_pg_exact(inst, horizon_, record_every_);
            } else {
                Rng rng = make_rng(seed_, static_cast<std::uint64_t>(trial), StreamRole::learner);
                trace = run_bandit_projection_free(inst, alpha_, horizon_, rng, record_every_);
            }
        } catch (const std::exception& e) {
            trace.failed = true;
            trace.error = e.what();
        }
        VectorXd star = VectorXd::Zero(inst.m_count());
        star(inst.best_controller()) = 1.0;
        TrialOutput out = from_trace(std::move(trace), trial, star);
        const int M = inst.m_count();
        out.info["controller_means"] = to_std(inst.controller_means());
        out.info["best_controller"] = inst.best_controller();
        out.info["min_gap"] = inst.min_gap();
        const double gamma = inst.discount;
        if (exact_ && !out.trace.rows.empty()) {
            double worst = -std::numeric_limits<double>::infinity();
            for (const auto& r : out.trace.rows)
                worst = std::max(worst, r.extra[0] - 5.0 * M * M / ((1.0 - gamma) * r.step));
            out.info["max_rate_violation"] = worst;
            const auto& last = out.trace.last();
            out.info["regret"] = last.extra[1];
            out.info["regret_envelope"] = bandit_regret_envelope(M, gamma, last.step);
        }
        return out;
    }

  private:
    json env_;
    std::uint64_t seed_;
    bool exact_;
    long horizon_ = 0;
    long record_every_ = 1;
    double alpha_ = 0.0;
};

class AcilRunner : public Runner {
  public:
    AcilRunner(const ExperimentConfig& cfg) : seed_(cfg.seed) {
        problem_ = simulator_problem(cfg.environment);
        if (problem_.kind != "queues") throw std::invalid_argument("acil runs on the queues environment");
        Fields f(cfg.params, "params");
        ac_.actor_step = f.get("actor_step", ac_.actor_step);
        ac_.critic_step = f.get("critic_step", ac_.critic_step);
        ac_.regularization = f.get("regularization", ac_.regularization);
        ac_.actor_batch = f.get("actor_batch", ac_.actor_batch);
        ac_.critic_inner = f.get("critic_inner", ac_.critic_inner);
        ac_.critic_outer = f.get("critic_outer", ac_.critic_outer);
        ac_.outer_steps = f.get("outer_steps", ac_.outer_steps);
        ac_.mode = ac_mode_from_string(f.get("mode", to_string(ac_.mode)));
        ac_.discount = f.get("discount", ac_.discount);
        ac_.warm_start_critic = f.get("warm_start_critic", ac_.warm_start_critic);
        ac_.record_every = f.get("record_every", ac_.record_every);
        features_ = f.has("features") ? f.raw("features") : json::object();
        phi_ = feature_map(features_, problem_.queue.n_queues, problem_.queue.cap);
        pi_star_ = reference_mixture(f, problem_.controllers.size(), nullptr);
        f.finish();
        ac_.validate();
    }

    TrialOutput run_trial(int trial) const override {
        AcilConfig c = ac_;
        c.seed = trial_seed(seed_, trial);
        auto env = problem_.make_env();
        return from_trace(run_acil(*env, problem_.controllers, phi_, c), trial, pi_star_);
    }

    std::vector<std::string> controller_names() const override { return problem_.controllers.names(); }

  private:
    std::uint64_t seed_;
    Problem problem_;
    AcilConfig ac_;
    json features_;
    FeatureMap phi_;
    std::optional<VectorXd> pi_star_;
};

EplsSystem epls_system(const json& env) {
    Fields f(env, "environment");
    const auto kind = f.require<std::string>("kind");
    if (kind == "epls") {
        EplsSystem sys = epls_from_json(f.raw("system"));
        f.finish();
        return sys;
    }
    if (kind != "cartpole") throw std::invalid_argument("unknown EPLS kind: " + kind + " (known: cartpole, epls)");
    CartpoleParams p;
    p.gravity = f.get("gravity", p.gravity);
    p.pole_mass = f.get("pole_mass", p.pole_mass);
    p.half_length = f.get("half_length", p.half_length);
    p.cart_mass = f.get("cart_mass", p.cart_mass);
    const double dt = f.get("dt", 0.0);
    Vector4d base;
    const json& g = f.has("base_gain") ? f.raw("base_gain") : json("reference");
    if (g.is_string()) {
        if (g.get<std::string>() != "reference") throw std::invalid_argument("base_gain must be a list or \"reference\"");
        base = cartpole_reference_gain(dt);
    } else {
        const auto v = g.get<std::vector<double>>();
        if (v.size() != 4) throw std::invalid_argument("base_gain needs 4 entries");
        base = Vector4d(v[0], v[1], v[2], v[3]);
    }
    // K_opt + delta and K_opt - delta, delta entries iid normal with the given std
    const double delta_std = f.get("delta_std", 0.1);
    Rng rng = make_rng(f.get("delta_seed", std::uint64_t{1}), 0, StreamRole::instance);
    Vector4d delta;
    for (int c = 0; c < 4; ++c) delta(c) = delta_std * standard_normal(rng);
    EplsSystem sys = cartpole_system(p, {base + delta, base - delta}, dt);
    sys.noise = f.get("noise", 0.0);
    f.finish();
    sys.validate();
    return sys;
}

class EplsRunner : public Runner {
  public:
    EplsRunner(const ExperimentConfig& cfg) : seed_(cfg.seed) {
        sys_ = epls_system(cfg.environment);
        Fields f(cfg.params, "params");
        for (const auto& m : f.require<std::vector<std::vector<double>>>("mixtures")) {
            const VectorXd p = to_vector(m);
            if (p.size() != static_cast<int>(sys_.gains.size())) throw std::invalid_argument("mixture size mismatch");
            check_distribution(p, "mixture");
            mixtures_.push_back(p);
        }
        horizon_ = f.get("horizon", 500);
        threshold_ = f.get("fall_threshold", 12.0 * M_PI / 180.0);
        init_scale_ = f.get("init_scale", 0.05);
        f.finish();
        if (mixtures_.empty() || horizon_ < 1) throw std::invalid_argument("need mixtures and horizon >= 1");
    }

    /// One row per mixture: same initial state, fall time, final norm, empirical exponent.
    TrialOutput run_trial(int trial) const override {
        TrialOutput out;
        out.table.columns = {"trial", "step"};
        for (std::size_t i = 0; i < sys_.gains.size(); ++i) out.table.columns.push_back("p_" + std::to_string(i));
        for (const char* c : {"survived", "fell", "final_norm", "lyapunov"}) out.table.columns.push_back(c);
        for (std::size_t j = 0; j < mixtures_.size(); ++j) {
            Rng rng = make_rng(seed_, static_cast<std::uint64_t>(trial), StreamRole::environment);
            Vector4d x0;
            for (int c = 0; c < 4; ++c) x0(c) = init_scale_ * (2.0 * uniform01(rng) - 1.0);
            const EplsTrajectory traj = cartpole_epls(sys_, mixtures_[j], horizon_, x0, rng);
            int survived = horizon_;
            bool fell = false;
            for (int t = 1; t <= horizon_; ++t)
                if (std::abs(traj.states[static_cast<std::size_t>(t)](2)) > threshold_) {
                    survived = t;
                    fell = true;
                    break;
                }
            std::vector<double> row{static_cast<double>(trial), static_cast<double>(j)};
            for (int i = 0; i < mixtures_[j].size(); ++i) row.push_back(mixtures_[j](i));
            row.push_back(survived);
            row.push_back(fell ? 1.0 : 0.0);
            row.push_back(traj.states.back().norm());
            row.push_back(x0.norm() > 0.0 ? empirical_lyapunov(traj.states).exponent : 0.0);
            out.table.rows.push_back(std::move(row));
        }
        return out;
    }

    json summarize(const std::vector<TrialOutput>& trials) const override {
        json table = json::array();
        for (std::size_t j = 0; j < mixtures_.size(); ++j) {
            double rounds = 0.0;
            int falls = 0;
            for (const auto& t : trials) {
                const auto& row = t.table.rows[j];
                rounds += row[2 + sys_.gains.size()];
                falls += row[3 + sys_.gains.size()] > 0.5 ? 1 : 0;
            }
            table.push_back({{"mixture", to_std(mixtures_[j])},
                             {"mean_rounds", rounds / static_cast<double>(trials.size())},
                             {"fall_count", falls},
                             {"lyapunov_bound", lyapunov_bound(sys_, mixtures_[j])}});
        }
        return {{"falls", table}, {"system", epls_to_json(sys_)}, {"horizon", horizon_}, {"fall_threshold", threshold_}};
    }

  private:
    std::uint64_t seed_;
    EplsSystem sys_;
    std::vector<VectorXd> mixtures_;
    int horizon_ = 500;
    double threshold_ = 0.0;
    double init_scale_ = 0.05;
};

class LemmaRunner : public Runner {
  public:
    LemmaRunner(const ExperimentConfig& cfg) : seed_(cfg.seed) {
        Fields(cfg.environment, "environment").finish();
        Fields(cfg.params, "params").finish();
    }

    TrialOutput run_trial(int trial) const override {
        TrialOutput out;
        out.table.columns = {"trial", "step", "instances", "skipped", "max_violation", "passed"};
        reports_ = run_lemma_suite(seed_);
        long i = 0;
        for (const auto& r : reports_)
            out.table.rows.push_back({static_cast<double>(trial), static_cast<double>(i++), static_cast<double>(r.instances),
                                      static_cast<double>(r.skipped), r.max_violation, r.passed() ? 1.0 : 0.0});
        return out;
    }

    json summarize(const std::vector<TrialOutput>&) const override {
        json j = json::array();
        for (const auto& r : reports_) j.push_back(report_to_json(r));
        return {{"lemmas", j}};
    }

    bool single_trial() const override { return true; }
    std::vector<LemmaReport> lemmas() const override { return reports_; }

  private:
    std::uint64_t seed_;
    mutable std::vector<LemmaReport> reports_;
};

std::unique_ptr<Runner> make_runner(const ExperimentConfig& cfg) {
    if (cfg.algorithm == "softmax-pg") return std::make_unique<SoftmaxPgRunner>(cfg);
    if (cfg.algorithm == "spge") return std::make_unique<SpgeRunner>(cfg);
    if (cfg.algorithm == "bandit-pg-exact") return std::make_unique<BanditRunner>(cfg, true);
    if (cfg.algorithm == "bandit-projection-free") return std::make_unique<BanditRunner>(cfg, false);
    if (cfg.algorithm == "acil") return std::make_unique<AcilRunner>(cfg);
    if (cfg.algorithm == "epls-falls") return std::make_unique<EplsRunner>(cfg);
    if (cfg.algorithm == "lemma-suite") return std::make_unique<LemmaRunner>(cfg);
    std::string known;
    for (const auto& a : algorithm_ids()) known += (known.empty() ? "" : ", ") + a;
    throw std::invalid_argument("unknown algorithm '" + cfg.algorithm + "' (known: " + known + ")");
}

}  // namespace

const std::vector<std::string>& algorithm_ids() {
    static const std::vector<std::string> ids{"softmax-pg", "spge",       "bandit-pg-exact", "bandit-projection-free",
                                              "acil",       "epls-falls", "lemma-suite"};
    return ids;
}

void ExperimentConfig::validate() const {
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    make_runner(*this);
}

// ---------------------------------------------------------------- presets

namespace {

struct PresetEntry {
    std::string id;
    std::string description;
    std::function<ExperimentConfig()> make;
};

json spsa_defaults() {
    return {{"learning_rate", 1e-4},   {"discount", 0.9},      {"runs", 10},
            {"rollouts_per_run", 10},  {"rollout_len", 30},    {"perturbation", 1.0 / std::sqrt(10.0)},
            {"grad_scale", "none"},    {"baseline_subtract", false}};
}

json acil_defaults() {
    return {{"actor_step", 1e-4}, {"critic_step", 1e-3}, {"regularization", 0.1}, {"actor_batch", 50},
            {"critic_inner", 30}, {"critic_outer", 20},  {"mode", "nac"},         {"discount", 0.9},
            {"warm_start_critic", true}};
}

ExperimentConfig base(const std::string& id, const std::string& algorithm) {
    ExperimentConfig c;
    c.experiment = id;
    c.algorithm = algorithm;
    c.trials = 20;
    c.seed = 0;
    c.out_dir = "runs/" + id;
    return c;
}

const std::vector<PresetEntry>& presets() {
    static const std::vector<PresetEntry> list{
        {"queue-equal-rates", "SPGE on two queues, arrival rates (0.49, 0.49), serve-queue-1 vs serve-queue-2",
         [] {
             auto c = base("queue-equal-rates", "spge");
             c.environment = {{"kind", "queues"},
                              {"arrival_rates", {0.49, 0.49}},
                              {"cap", 1000},
                              {"reward_mode", "negative-normalized-backlog"},
                              {"controllers", {"serve_queue_1", "serve_queue_2"}}};
             c.params = spsa_defaults();
             c.params["horizon"] = 10000;
             c.params["record_every"] = 100;
             c.params["reference_mixture"] = {0.5, 0.5};
             return c;
         }},
        {"path-graph-5", "SPGE on the 4-node path graph with MW, MER and three fixed independent sets",
         [] {
             auto c = base("path-graph-5", "spge");
             c.environment = {{"kind", "path-graph"},
                              {"rate", 0.495},
                              {"cap", 1000},
                              {"reward_mode", "negative-normalized-backlog"},
                              {"controllers", {"mw", "mer", "fixed:{1,3}", "fixed:{2,4}", "fixed:{1,4}"}}};
             c.params = spsa_defaults();
             c.params["horizon"] = 20000;
             c.params["record_every"] = 100;
             c.params["grad_scale"] = "normalize-to-10";
             c.params["baseline_subtract"] = true;
             c.params["common_random_numbers"] = true;
             c.params["reference_mixture"] = {0.0, 1.0, 0.0, 0.0, 0.0};
             c.params["delay_horizon"] = 5000;
             c.params["delay_runs"] = 20;
             return c;
         }},
        {"chain-pg", "Exact-gradient softmax PG on the 10-state chain with two sticky controllers",
         [] {
             auto c = base("chain-pg", "softmax-pg");
             c.environment = {{"kind", "chain"}};
             c.params = {{"learning_rate", 1e-4},
                         {"discount", 0.9},
                         {"horizon", 5000},
                         {"record_every", 10},
                         {"reference_mixture", "optimal"}};
             return c;
         }},
        {"nonconcavity-pg", "Exact-gradient softmax PG with the smoothness step size on the non-concavity MDP",
         [] {
             auto c = base("nonconcavity-pg", "softmax-pg");
             c.environment = {{"kind", "nonconcavity"}, {"r", 1.0}};
             c.params = {{"learning_rate", "theorem"}, {"discount", 0.9}, {"horizon", 200}, {"record_every", 1}};
             c.trials = 1;
             return c;
         }},
        {"bandit-exact", "Exact-gradient softmax PG on random 5-controller bandits with gap >= 0.1",
         [] {
             auto c = base("bandit-exact", "bandit-pg-exact");
             c.environment = {{"kind", "random-bandit"}, {"controllers", 5}, {"min_gap", 0.1}, {"discount", 0.9}};
             c.params = {{"horizon", 10000}, {"record_every", 10}};
             return c;
         }},
        {"bandit-noisy", "Projection-free noisy PG on the two-controller bandit with means (0.9, 0.5)",
         [] {
             auto c = base("bandit-noisy", "bandit-projection-free");
             c.environment = {{"kind", "bandit"}, {"controller_means", {0.9, 0.5}}, {"discount", 0.9}};
             c.params = {{"alpha", 0.5}, {"horizon", 100000}, {"record_every", 100}};
             return c;
         }},
        {"nacil-queues", "NACIL on two queues, arrival rates (0.4, 0.4), serve-queue-1 vs serve-queue-2",
         [] {
             auto c = base("nacil-queues", "acil");
             c.environment = {{"kind", "queues"},
                              {"arrival_rates", {0.4, 0.4}},
                              {"cap", 1000},
                              {"reward_mode", "negative-backlog"},
                              {"controllers", {"serve_queue_1", "serve_queue_2"}}};
             c.params = acil_defaults();
             c.params["outer_steps"] = 30000;
             c.params["record_every"] = 100;
             c.params["features"] = {{"kind", "scaled"}, {"scale", 1.0}};
             c.params["reference_mixture"] = {0.5, 0.5};
             return c;
         }},
        {"nacil-lqf", "NACIL on two queues, arrival rates (0.35, 0.35), with LQF as a third controller",
         [] {
             auto c = base("nacil-lqf", "acil");
             c.environment = {{"kind", "queues"},
                              {"arrival_rates", {0.35, 0.35}},
                              {"cap", 1000},
                              {"reward_mode", "negative-backlog"},
                              {"controllers", {"serve_queue_1", "serve_queue_2", "lqf"}}};
             c.params = acil_defaults();
             c.params["outer_steps"] = 50000;
             c.params["record_every"] = 100;
             c.params["features"] = {{"kind", "scaled"}, {"scale", 1.0}};
             c.params["reference_mixture"] = {0.0, 0.0, 1.0};
             return c;
         }},
        {"nacil-transition", "NACIL on two queues whose rates switch (0.3, 0.6) -> (0.6, 0.3) -> (0.49, 0.49)",
         [] {
             auto c = base("nacil-transition", "acil");
             // 650 environment steps per outer step; switches after outer steps 10000 and 20000
             c.environment = {{"kind", "queues"},
                              {"arrival_rates", {0.3, 0.6}},
                              {"cap", 1000},
                              {"reward_mode", "negative-backlog"},
                              {"schedule",
                               {{{"step", 6500000}, {"rates", {0.6, 0.3}}}, {{"step", 13000000}, {"rates", {0.49, 0.49}}}}},
                              {"controllers", {"serve_queue_1", "serve_queue_2"}}};
             c.params = acil_defaults();
             c.params["outer_steps"] = 30000;
             c.params["record_every"] = 100;
             // cap * sqrt(n * critic_step): keeps critic_step * |phi|^2 <= 1 on the whole buffer
             c.params["features"] = {{"kind", "scaled"}, {"scale", 1000.0 * std::sqrt(2.0 * 1e-3)}};
             return c;
         }},
        {"cartpole-epls", "Linearized cartpole driven by K+D, K-D and the (0.53, 0.47) mixture; falls over 500 rounds",
         [] {
             auto c = base("cartpole-epls", "epls-falls");
             c.environment = {{"kind", "cartpole"}, {"gravity", 9.8},   {"pole_mass", 0.1},
                              {"half_length", 1.0}, {"cart_mass", 1.0}, {"dt", 0.02},
                              {"base_gain", "reference"}, {"delta_std", 0.1}, {"delta_seed", 1},
                              {"noise", 0.0125}};
             c.params = {{"mixtures", {{1.0, 0.0}, {0.0, 1.0}, {0.53, 0.47}}},
                         {"horizon", 500},
                         {"fall_threshold", 12.0 * M_PI / 180.0},
                         {"init_scale", 0.05}};
             c.trials = 100;
             return c;
         }},
        {"validate-lemmas", "Lemma suite on seeded random instances plus the counterexamples",
         [] {
             auto c = base("validate-lemmas", "lemma-suite");
             c.trials = 1;
             return c;
         }},
    };
    return list;
}

}  // namespace

const std::vector<std::string>& preset_ids() {
    static const std::vector<std::string> ids = [] {
        std::vector<std::string> out;
        for (const auto& p : presets()) out.push_back(p.id);
        return out;
    }();
    return ids;
}

static const PresetEntry& find_preset(const std::string& id) {
    for (const auto& p : presets())
        if (p.id == id) return p;
    std::string known;
    for (const auto& p : presets()) known += (known.empty() ? "" : ", ") + p.id;
    throw std::invalid_argument("unknown preset '" + id + "'; available: " + known);
}

ExperimentConfig preset(const std::string& id) { return find_preset(id).make(); }
std::string preset_description(const std::string& id) { return find_preset(id).description; }

// ---------------------------------------------------------------- aggregation and output

int AggregateResult::column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return static_cast<int>(i);
    throw std::invalid_argument("no aggregate column " + name);
}

double AggregateResult::final_mean(const std::string& name) const {
    if (mean.empty()) throw std::runtime_error("empty aggregate");
    return mean.back()[static_cast<std::size_t>(column(name))];
}

/// Identifier columns, left out of the aggregate.
static const std::set<std::string> skip_columns{"trial", "path_in", "path_out"};

void aggregate_tables(const std::vector<TrialTable>& tables, AggregateResult& out) {
    out.columns.clear();
    out.steps.clear();
    out.mean.clear();
    out.std.clear();
    if (tables.empty()) return;
    const auto& cols = tables.front().columns;
    for (const auto& t : tables)
        if (t.columns != cols) throw std::runtime_error("trial tables disagree on columns");
    const auto step_it = std::find(cols.begin(), cols.end(), "step");
    if (step_it == cols.end()) throw std::runtime_error("trial table has no step column");
    const auto step_col = static_cast<std::size_t>(step_it - cols.begin());
    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < cols.size(); ++c)
        if (c != step_col && !skip_columns.count(cols[c])) {
            keep.push_back(c);
            out.columns.push_back(cols[c]);
        }
    std::size_t len = tables.front().rows.size();
    for (const auto& t : tables) len = std::min(len, t.rows.size());
    const double n = static_cast<double>(tables.size());
    for (std::size_t r = 0; r < len; ++r) {
        const double step = tables.front().rows[r][step_col];
        for (const auto& t : tables)
            if (t.rows[r][step_col] != step) throw std::runtime_error("trial tables disagree on steps");
        std::vector<double> mean(keep.size(), 0.0), sd(keep.size(), 0.0);
        for (std::size_t k = 0; k < keep.size(); ++k) {
            double s = 0.0;
            for (const auto& t : tables) s += t.rows[r][keep[k]];
            mean[k] = s / n;
            double v = 0.0;
            for (const auto& t : tables) {
                const double d = t.rows[r][keep[k]] - mean[k];
                v += d * d;
            }
            sd[k] = std::sqrt(v / n);
        }
        out.steps.push_back(step);
        out.mean.push_back(std::move(mean));
        out.std.push_back(std::move(sd));
    }
}

static std::string aggregate_csv(const AggregateResult& agg) {
    TrialTable t;
    t.columns = {"step"};
    for (const auto& c : agg.columns) {
        t.columns.push_back(c + "_mean");
        t.columns.push_back(c + "_std");
    }
    for (std::size_t r = 0; r < agg.steps.size(); ++r) {
        std::vector<double> row{agg.steps[r]};
        for (std::size_t k = 0; k < agg.columns.size(); ++k) {
            row.push_back(agg.mean[r][k]);
            row.push_back(agg.std[r][k]);
        }
        t.rows.push_back(std::move(row));
    }
    return table_to_csv(t);
}

static void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

static json final_summary(const AggregateResult& agg, const std::vector<TrialOutput>& trials) {
    json j;
    std::vector<double> pi_mean, pi_std;
    for (std::size_t k = 0; k < agg.columns.size(); ++k)
        if (agg.columns[k].rfind("pi_", 0) == 0 && !agg.mean.empty()) {
            pi_mean.push_back(agg.mean.back()[k]);
            pi_std.push_back(agg.std.back()[k]);
        }
    if (!pi_mean.empty()) {
        j["final_pi_mean"] = pi_mean;
        j["final_pi_std"] = pi_std;
    }
    for (const char* name : {"value", "c_bar"}) {
        const auto it = std::find(agg.columns.begin(), agg.columns.end(), name);
        if (it == agg.columns.end() || agg.mean.empty()) continue;
        const auto k = static_cast<std::size_t>(it - agg.columns.begin());
        j[std::string("final_") + name + "_mean"] = agg.mean.back()[k];
    }
    // global minimum of the running minimum, over trials
    double c_min = std::numeric_limits<double>::infinity();
    bool any = false;
    for (const auto& t : trials) {
        const auto it = std::find(t.table.columns.begin(), t.table.columns.end(), "c_bar");
        if (it == t.table.columns.end() || t.table.rows.empty()) continue;
        any = true;
        c_min = std::min(c_min, t.table.rows.back()[static_cast<std::size_t>(it - t.table.columns.begin())]);
    }
    if (any) j["c_bar_global_min"] = c_min;
    j["steps"] = agg.steps.size();
    return j;
}

AggregateResult run_experiment(const ExperimentConfig& cfg, int jobs) {
    if (cfg.trials < 1) throw std::invalid_argument("trials must be >= 1");
    if (jobs < 1) throw std::invalid_argument("jobs must be >= 1");
    const auto runner = make_runner(cfg);
    const int trials = runner->single_trial() ? 1 : cfg.trials;

    AggregateResult agg;
    agg.trials.resize(static_cast<std::size_t>(trials));
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int k = next++; k < trials; k = next++) {
            TrialOutput out;
            try {
                out = runner->run_trial(k);
            } catch (const std::exception& e) {
                out.failed = true;
                out.error = e.what();
            }
            agg.trials[static_cast<std::size_t>(k)] = std::move(out);
        }
    };
    const int workers = std::min(jobs, trials);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::vector<TrialTable> tables;
    json errors = json::array();
    json warnings = json::array();
    json infos = json::array();
    for (int k = 0; k < trials; ++k) {
        const auto& t = agg.trials[static_cast<std::size_t>(k)];
        if (t.failed) {
            agg.failed = true;
            errors.push_back({{"trial", k}, {"error", t.error}});
        }
        for (const auto& w : t.warnings) warnings.push_back({{"trial", k}, {"warning", w}});
        if (!t.info.empty()) infos.push_back(t.info);
        if (!t.table.columns.empty()) tables.push_back(t.table);
    }
    try {
        aggregate_tables(tables, agg);
    } catch (const std::exception& e) {
        agg.failed = true;
        errors.push_back({{"trial", -1}, {"error", std::string("aggregation: ") + e.what()}});
    }

    json summary = config_to_json(cfg);
    summary.erase("out_dir");
    summary["trials"] = trials;
    summary["failed"] = agg.failed;
    summary["errors"] = errors;
    summary["warnings"] = warnings;
    const auto names = runner->controller_names();
    if (!names.empty()) summary["controllers"] = names;
    summary["result"] = final_summary(agg, agg.trials);
    if (!infos.empty()) summary["trial_info"] = infos;
    try {
        summary["details"] = runner->summarize(agg.trials);
    } catch (const std::exception& e) {
        agg.failed = true;
        summary["failed"] = true;
        summary["errors"].push_back({{"trial", -1}, {"error", std::string("summary: ") + e.what()}});
    }
    agg.lemmas = runner->lemmas();
    for (const auto& r : agg.lemmas)
        if (!r.passed()) agg.violation = true;
    if (!agg.lemmas.empty()) summary["violation"] = agg.violation;
    agg.summary = summary;

    if (!cfg.out_dir.empty()) {
        const std::filesystem::path dir(cfg.out_dir);
        std::filesystem::create_directories(dir);
        for (int k = 0; k < trials; ++k)
            write_file(dir / ("trial_" + std::to_string(k) + ".csv"), table_to_csv(agg.trials[static_cast<std::size_t>(k)].table));
        write_file(dir / "aggregate.csv", aggregate_csv(agg));
        write_file(dir / "summary.json", summary.dump(2) + "\n");
        if (!agg.lemmas.empty()) {
            json lj = json::array();
            for (const auto& r : agg.lemmas) lj.push_back(report_to_json(r));
            write_file(dir / "lemma_report.json", lj.dump(2) + "\n");
        }
    }
    return agg;
}

}  // namespace imprl
