#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "d2k/orchestrator/benchmark.hpp"

namespace d2k::orchestrator {

/// One row of runs.csv.
struct RunRow {
  std::string setup;
  int run_index = 0;
  std::string config_id;
  double wall_seconds = 0.0;
  double cross_validation_loss = 0.0;
  double final_validation_mae = 0.0;
  int trainable_groups = 0;
  int unchanged_groups = 0;
  bool accepted = false;
};

/// One row of mae_trend.csv.
struct TrendRow {
  std::string setup;
  int run_index = 0;
  int epoch = 0;  ///< 1-based
  double validation_mae = 0.0;
};

/// One row of summary.csv.
struct SummaryRow {
  std::string setup;
  int runs = 0;
  double total_wall_seconds = 0.0;
  double mean_wall_seconds = 0.0;
  double first_run_validation_mae = 0.0;
  double best_validation_mae = 0.0;
  double theoretical_max_mae = 0.0;
  double sensor_floor = 0.0;
  double noise_sigma = 0.0;
};

struct ReportTables {
  std::vector<RunRow> runs;
  std::vector<TrendRow> trend;
  std::vector<SummaryRow> summary;
};

ReportTables tables_from(const BenchmarkReport& r);

/// runs.csv, mae_trend.csv, summary.csv and benchmark.json in `dir`.
void write_benchmark_artifacts(const BenchmarkReport& r, const std::filesystem::path& dir);
/// Reads the three CSV files; throws ValidationError("artifacts") when a
/// file is missing or has no rows.
ReportTables read_tables(const std::filesystem::path& dir);

/// Wall-time boxplot per setup on a log-scaled axis.
std::string render_runtime_boxplot(const ReportTables& t);
/// Validation MAE per epoch of each setup's best run, on a 0..theoretical
/// max axis, with a zoomed inset listing the final values.
std::string render_mae_trend(const ReportTables& t);

/// Renders runtime_boxplot.svg and mae_trend.svg from the CSV files in `dir`.
/// Returns the written paths.
std::vector<std::filesystem::path> render_report(const std::filesystem::path& dir);

/// Quantile with linear interpolation between order statistics.
double quantile(std::vector<double> v, double p);

}  // namespace d2k::orchestrator
