#pragma once

#include <string>
#include <vector>

#include "csf/config.hpp"
#include "csf/filters.hpp"
#include "csf/linalg.hpp"

namespace csf {

/// RMSE over runs and steps: sqrt(mean ||estimate - truth||^2). Each run is a
/// steps x d matrix; all runs must agree in shape.
double rmse(const std::vector<Matrix>& estimates, const std::vector<Matrix>& truths);

struct StepRecord {
    std::vector<double> truth;
    std::vector<double> estimate;
    double seconds = 0.0;
};

struct RunResult {
    uint64_t seed = 0;
    bool diverged = false;
    std::vector<StepRecord> steps;
    double run_rmse = 0.0;
};

struct FilterReport {
    std::string filter;
    std::vector<RunResult> runs;
    double aggregate_rmse = 0.0;      // over non-diverged runs
    double mean_step_seconds = 0.0;
    int diverged_runs = 0;
};

struct RunReport {
    std::string task;
    std::string config_echo;
    bool reproducible = false;
    std::vector<FilterReport> filters;
};

/// Runs the configured filters over bench.runs seeded realizations of the
/// configured model. Per-step timing wraps the filter-step call only; in
/// reproducible mode recorded times are zeroed so reports are byte-stable.
RunReport run_benchmark(const Config& cfg, const std::string& checkpoint_override = "");

/// Single-filter single-seed online run (the `filter` subcommand).
FilterReport run_single(const Config& cfg, const std::string& filter_name,
                        const std::string& checkpoint_path, uint64_t seed);

enum class ReportFormat { kCsv, kJson };

/// kCsv writes summary.csv plus one per-step CSV per filter; kJson writes
/// summary.json carrying the verbatim config echo.
void export_report(const RunReport& report, const std::string& out_dir, ReportFormat format);

/// Recomputes a filter's aggregate RMSE from an exported per-step CSV.
double rmse_from_step_csv(const std::string& path);

}  // namespace csf
