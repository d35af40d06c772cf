#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "imprl/diagnostics.hpp"
#include "imprl/trace.hpp"

namespace imprl {

/// One experiment: which algorithm on which environment, with what settings.
/// `environment` and `params` are algorithm-specific objects; validate() parses them.
struct ExperimentConfig {
    std::string experiment;
    std::string algorithm;
    nlohmann::json environment = nlohmann::json::object();
    nlohmann::json params = nlohmann::json::object();
    int trials = 20;
    std::uint64_t seed = 0;
    std::string out_dir;

    void validate() const;
};

nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

const std::vector<std::string>& algorithm_ids();
const std::vector<std::string>& preset_ids();
/// Unknown ids throw std::invalid_argument listing the known ones.
ExperimentConfig preset(const std::string& id);
std::string preset_description(const std::string& id);

/// Rows of one trial, as written to trial_<k>.csv.
struct TrialTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

struct TrialOutput {
    TrialTable table;
    bool failed = false;
    std::string error;
    std::vector<std::string> warnings;
    nlohmann::json info = nlohmann::json::object();
    RunTrace trace;
};

struct AggregateResult {
    /// Column names of the per-trial tables that are averaged (step column excluded).
    std::vector<std::string> columns;
    std::vector<double> steps;
    std::vector<std::vector<double>> mean;  // steps x columns
    std::vector<std::vector<double>> std;
    std::vector<TrialOutput> trials;
    nlohmann::json summary;
    std::vector<LemmaReport> lemmas;
    bool failed = false;
    bool violation = false;

    int column(const std::string& name) const;
    /// Mean of a column at the last common step.
    double final_mean(const std::string& name) const;
};

/// Population mean and std over trials, row by row, in trial order.
void aggregate_tables(const std::vector<TrialTable>& tables, AggregateResult& out);

/// Runs all trials (jobs worker threads) and, when cfg.out_dir is set, writes
/// trial_<k>.csv, aggregate.csv, summary.json and lemma_report.json.
AggregateResult run_experiment(const ExperimentConfig& cfg, int jobs = 1);

/// Shortest round-trip decimal form.
std::string format_double(double v);
std::string table_to_csv(const TrialTable& table);
TrialTable table_from_csv(const std::string& text);

}  // namespace imprl
