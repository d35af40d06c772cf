#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace imprl {

struct TraceRow {
    long step = 0;
    Eigen::VectorXd pi;
    double value = 0.0;
    double grad_norm = 0.0;
    Eigen::VectorXd theta;
    std::vector<double> extra;  // one entry per RunTrace::extra_columns
};

struct RunTrace {
    std::vector<std::string> extra_columns;
    std::vector<TraceRow> rows;
    std::uint64_t seed = 0;
    std::vector<std::string> warnings;
    /// Parameter returned by learners that output a randomly chosen iterate.
    Eigen::VectorXd output_theta;
    bool failed = false;
    std::string error;

    const TraceRow& last() const { return rows.back(); }
    int extra_index(const std::string& name) const;
};

}  // namespace imprl
