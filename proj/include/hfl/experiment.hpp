#pragma once

// Seeded multi-trial experiments over the formation game, with tidy CSV
// output and a digest manifest.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hfl/coalition_game.hpp"
#include "hfl/instance_generator.hpp"

namespace hfl {

enum class Scenario {
  Convergence,
  IntervalSweep,
  DeviceSweepLowCost,
  DeviceSweepHighCost,
  ServerUtilities,
  SinglePartitionDemo,
};

std::string_view to_string(Scenario s);
Scenario parse_scenario(std::string_view name);

/// Raised for malformed or out-of-range experiment specs.
struct SpecError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ExperimentSpec {
  Scenario scenario = Scenario::Convergence;
  int trials = 200;
  std::uint64_t seed = 1;
  std::vector<PreferenceRule> rules{PreferenceRule::Altruistic, PreferenceRule::Selfish,
                                    PreferenceRule::Pareto, PreferenceRule::BandwidthOnly};
  ParameterRanges ranges;
  FormationConfig formation;
  std::vector<double> axis_values;  ///< empty: scenario default
  int workers = 1;
  double max_nonconvergence = 0.01; ///< fraction of runs; above it the CLI exits 2
  bool trace_gp = false;

  /// Throws SpecError.
  void validate() const;
};

ExperimentSpec spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentSpec& spec);

/// "none", "cloud_interval" or "devices".
std::string_view axis_name(Scenario s);
std::vector<double> default_axis(Scenario s);
std::vector<double> axis_values(const ExperimentSpec& spec);
/// Ranges with the scenario's fixed values and the axis value applied.
ParameterRanges ranges_for(const ExperimentSpec& spec, double axis_value);

struct MetricRow {
  std::size_t axis_index = 0;
  double axis_value = 0.0;
  std::size_t rule_index = 0;
  PreferenceRule rule = PreferenceRule::Altruistic;
  int trial = 0;
  std::string metric;
  double value = 0.0;
};

struct TrajectoryRow {
  double axis_value = 0.0;
  PreferenceRule rule = PreferenceRule::Altruistic;
  int trial = 0;
  std::size_t accepted_index = 0;  ///< 0 is the initial partition
  std::int64_t attempt = 0;        ///< switch attempts made so far
  double potential = 0.0;
};

struct GPTraceRow {
  double axis_value = 0.0;
  PreferenceRule rule = PreferenceRule::Altruistic;
  int trial = 0;
  gp::TracePoint point;
};

struct RuleOutcome {
  PreferenceRule rule = PreferenceRule::Altruistic;
  FormationResult formation;
  double total_utility = 0.0;
  double cloud_utility = 0.0;
  double wall_seconds = 0.0;
};

struct TrialResult {
  std::size_t axis_index = 0;
  double axis_value = 0.0;
  int trial = 0;
  std::string instance_digest;
  std::vector<RuleOutcome> outcomes;  ///< in spec.rules order
  std::vector<MetricRow> metrics;
  std::vector<TrajectoryRow> trajectory;
  std::vector<GPTraceRow> gp_trace;
};

/// Runs one trial: generates the instance from (seed, trial), draws the
/// shared initial assignment, runs every rule with the same switch stream.
TrialResult run_trial(const ExperimentSpec& spec, std::size_t axis_index, int trial);

/// Instance of one trial, exactly as run_trial builds it.
NetworkInstance trial_instance(const ExperimentSpec& spec, double axis_value, int trial,
                               std::vector<std::size_t>* assignment = nullptr);

struct SummaryRow {
  double axis_value = 0.0;
  PreferenceRule rule = PreferenceRule::Altruistic;
  std::string metric;
  std::size_t n = 0;
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t excluded = 0;  ///< non-converged runs left out of the mean
};

struct ExperimentResult {
  ExperimentSpec spec;
  std::vector<MetricRow> rows;
  std::vector<TrajectoryRow> trajectory;
  std::vector<GPTraceRow> gp_trace;
  std::vector<SummaryRow> summary;
  std::vector<double> wall_seconds;  ///< per (trial, rule) run, diagnostics only
  std::size_t runs = 0;
  std::size_t nonconverged = 0;

  double nonconvergence_fraction() const {
    return runs == 0 ? 0.0 : static_cast<double>(nonconverged) / static_cast<double>(runs);
  }
};

/// Runs all trials (concurrently up to spec.workers) and aggregates.
ExperimentResult run_experiment(const ExperimentSpec& spec);

/// Means and normal-approximation 95% intervals per (axis value, rule,
/// metric); runs with converged == 0 are excluded and counted.
std::vector<SummaryRow> aggregate(const std::vector<MetricRow>& rows);

/// Writes results.csv, summary.csv, trajectory.csv (if any), gp_trace.csv
/// (if traced), spec.json, diagnostics.json and manifest.json into `dir`.
/// Files are written under temporary names and renamed at the end; on any
/// error the temporaries are removed and std::runtime_error is thrown.
void emit(const ExperimentResult& result, const std::filesystem::path& dir);

/// CSV text of the tidy per-trial table (header included).
std::string results_csv(const ExperimentResult& result);
std::string summary_csv(const ExperimentResult& result);

/// Library version string (git describe when available).
std::string_view version();

}  // namespace hfl
