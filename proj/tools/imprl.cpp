#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "imprl/harness.hpp"
#include "imprl/mixture.hpp"
#include "imprl/pg.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kRunFailure = 1;
constexpr int kViolation = 2;

imprl::ExperimentConfig resolve(const std::string& target) {
    if (std::filesystem::exists(target)) return imprl::load_config(target);
    return imprl::preset(target);
}

void print_result(const imprl::AggregateResult& agg) {
    const auto& result = agg.summary.at("result");
    std::cout << agg.summary.at("experiment").get<std::string>() << ": " << agg.trials.size() << " trial(s)";
    if (result.contains("final_pi_mean")) {
        std::cout << ", final pi mean [";
        bool first = true;
        for (double p : result.at("final_pi_mean")) {
            std::cout << (first ? "" : ", ") << imprl::format_double(p);
            first = false;
        }
        std::cout << "]";
    }
    if (result.contains("c_bar_global_min"))
        std::cout << ", c_bar min " << imprl::format_double(result.at("c_bar_global_min").get<double>());
    std::cout << (agg.failed ? ", FAILED" : "") << "\n";
    for (const auto& e : agg.summary.at("errors")) std::cerr << "trial " << e.at("trial") << ": " << e.at("error").get<std::string>() << "\n";
    for (const auto& r : agg.lemmas)
        std::cout << "  " << (r.passed() ? "ok  " : "FAIL") << " " << r.lemma << " (" << r.instances << " checked, " << r.skipped
                  << " skipped, max violation " << imprl::format_double(r.max_violation) << ")\n";
}

int exit_code(const imprl::AggregateResult& agg) {
    if (agg.failed) return kRunFailure;
    if (agg.violation) return kViolation;
    return kOk;
}

template <class F>
double seconds(F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int bench(long steps) {
    using namespace imprl;
    Rng rng = make_rng(0, 0, StreamRole::environment);
    double sink = 0.0;

    auto queue = QueueEnvConfig{};
    QueueEnv qenv(queue);
    const double tq = seconds([&] {
        for (long t = 0; t < steps; ++t) sink += qenv.step(1 + static_cast<int>(t & 1), rng);
    });
    std::cout << "two-queue step        " << tq / steps * 1e9 << " ns\n";

    const auto graph = default_path_graph();
    PathGraphEnv penv(graph);
    const auto ctrl = path_graph_controllers({"mw", "mer", "fixed:{1,3}", "fixed:{2,4}", "fixed:{1,4}"}, graph);
    const VectorXd pi = VectorXd::Constant(5, 0.2);
    const long rollouts = std::max(1L, steps / 30);
    const double tp = seconds([&] {
        for (long k = 0; k < rollouts; ++k) sink += mixture_rollout(penv, ctrl, pi, 30, 0.9, rng);
    });
    std::cout << "path-graph rollout    " << tp / (rollouts * 30.0) * 1e9 << " ns/step\n";

    const auto chain = chain_mdp(0.9);
    const VectorXd theta = VectorXd::Ones(2);
    const long grads = std::max(1L, steps / 1000);
    const double tg = seconds([&] {
        for (long k = 0; k < grads; ++k) sink += exact_value_gradient(chain.mdp, chain.controllers, theta, chain.mdp.start_dist)(0);
    });
    std::cout << "chain exact gradient  " << tg / grads * 1e6 << " us\n";
    volatile double keep = sink;
    (void)keep;
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Improper policy-gradient and actor-critic experiments over mixtures of base controllers"};
    app.require_subcommand(1);

    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    int jobs = 1;
    std::string out;
    std::string mode;
    std::string target;
    bool dry_run = false;

    auto* run = app.add_subcommand("run", "Run a preset or a JSON config file");
    run->add_option("target", target, "Preset id or config file")->required();
    run->add_option("--seed", seed, "Master seed");
    run->add_option("--trials", trials, "Number of trials")->check(CLI::PositiveNumber);
    run->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    run->add_option("--out", out, "Output directory");
    run->add_option("--mode", mode, "Actor-critic mode")->check(CLI::IsMember({"ac", "nac"}));
    run->add_flag("--dry-run", dry_run, "Print the resolved config and exit");

    auto* list = app.add_subcommand("list-presets", "List experiment presets");

    std::string validate_out;
    std::optional<std::uint64_t> validate_seed;
    auto* validate = app.add_subcommand("validate", "Run the lemma suite");
    validate->add_option("--seed", validate_seed, "Master seed");
    validate->add_option("--out", validate_out, "Output directory");

    long bench_steps = 3000000;
    auto* bench_cmd = app.add_subcommand("bench", "Time the inner loops");
    bench_cmd->add_option("--steps", bench_steps, "Environment steps per measurement")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? kOk : kRunFailure;
    }

    try {
        if (*list) {
            for (const auto& id : imprl::preset_ids()) std::cout << id << "\t" << imprl::preset_description(id) << "\n";
            return kOk;
        }
        if (*bench_cmd) return bench(bench_steps);

        imprl::ExperimentConfig cfg;
        if (*validate) {
            cfg = imprl::preset("validate-lemmas");
            if (validate_seed) cfg.seed = *validate_seed;
            cfg.out_dir = validate_out;
            jobs = 1;
        } else {
            cfg = resolve(target);
            if (seed) cfg.seed = *seed;
            if (trials) cfg.trials = *trials;
            if (!out.empty()) cfg.out_dir = out;
            if (!mode.empty()) {
                if (cfg.algorithm != "acil") throw std::invalid_argument("--mode applies to actor-critic experiments only");
                cfg.params["mode"] = mode;
            }
        }
        cfg.validate();
        if (dry_run) {
            std::cout << imprl::config_to_json(cfg).dump(2) << "\n";
            return kOk;
        }
        const auto agg = imprl::run_experiment(cfg, jobs);
        print_result(agg);
        if (!cfg.out_dir.empty()) std::cout << "wrote " << cfg.out_dir << "\n";
        return exit_code(agg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRunFailure;
    }
}
