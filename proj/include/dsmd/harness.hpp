#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "dsmd/algorithms.hpp"

namespace dsmd {

enum class Algorithm { Dsmd, EpochDsmd, Dsps };
enum class Constraint { Simplex, Box };
// Auto picks negative entropy on the simplex and Euclidean on the box; Dsps
// is always Euclidean.
enum class GeometryChoice { Auto, Euclidean, Entropic };

std::string to_string(Algorithm a);
std::string to_string(Constraint c);
std::string to_string(GeometryChoice g);
Algorithm algorithm_from_string(const std::string& s);
Constraint constraint_from_string(const std::string& s);
GeometryChoice geometry_from_string(const std::string& s);

struct ExperimentConfig {
  Algorithm algorithm = Algorithm::Dsmd;
  Constraint constraint = Constraint::Box;
  GeometryChoice geometry = GeometryChoice::Auto;
  int m = 40;
  int d = 10;
  double sigma = 0.25;
  long T = 4096;
  int realizations = 50;
  double activation = 0.5;
  int B = 2;
  std::uint64_t master_seed = 1;
  std::vector<long> checkpoints;  // empty = defaults, see effective_checkpoints
  std::string output;             // CSV path; summary lands next to it; empty = no files
  double box_lower = -1.0;
  double box_upper = 1.0;
};

nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& j);  // rejects unknown keys
ExperimentConfig load_config(const std::string& path);

// Every problem with the config, or empty when it is runnable.
std::vector<std::string> validate(const ExperimentConfig& config);

MirrorGeometry resolve_geometry(const ExperimentConfig& config);
ConstraintSet make_constraint(const ExperimentConfig& config);

// Explicit checkpoints pass through; otherwise powers of two up to T (plus T
// itself), or for epoch runs the epoch-end horizons 4(2^k - 1).
std::vector<long> effective_checkpoints(const ExperimentConfig& config);

struct MetricRecord {
  int realization = 0;
  long t = 0;
  int node = 0;
  double avg_error_sq = 0.0;   // ||xhat_{node,t} - x*||^2
  double last_error_sq = 0.0;  // ||x_{node,t} - x*||^2
  double disagreement = 0.0;   // sum_i ||x_{i,t} - x_{node,t}||
  double eta = 0.0;
};

struct CheckpointStats {
  long t = 0;
  double mean = 0.0;       // across realizations of the per-realization node mean
  double std_error = 0.0;
  double theorem_bound = 0.0;  // NaN when the bound does not apply at this t
};

struct ExperimentResult {
  std::vector<MetricRecord> records;  // sorted by (realization, t, node)
  std::vector<CheckpointStats> stats;
  TheoremConstants constants;
  double runtime_seconds = 0.0;
  nlohmann::json summary;
};

// Monte Carlo study over config.realizations independent runs. Writes the
// records as CSV to config.output and the summary JSON next to it (skipped
// when output is empty). Throws with the full error list on invalid configs
// and on any aborted realization.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Exact CSV form of the records; header
// realization,t,node,avg_error_sq,last_error_sq,disagreement,eta.
// Doubles print in shortest round-trip form, so equal inputs give equal bytes.
std::string render_csv(const std::vector<MetricRecord>& records);

std::string summary_path(const std::string& csv_path);

enum class RateModel { LnTOverT, OneOverT };

struct RateFit {
  RateModel model = RateModel::OneOverT;
  double a = 0.0;  // leading coefficient: a ln(T)/T + b/T, or a/T
  double b = 0.0;  // zero for the one-over-T model
  double r_squared = 0.0;
  // max over checkpoints of error * T (one-over-T) or error * T / ln T;
  // bounded values support the corresponding rate claim.
  double max_ratio = 0.0;
};

// Least squares fit of mean error against the model curve. Needs at least 4
// checkpoints spanning 2 octaves of T.
RateFit rate_fit(const std::vector<long>& ts, const std::vector<double>& means,
                 RateModel model);

struct DisagreementReport {
  double lhs = 0.0;    // mean over realizations of the worst per-node
                       // cumulative disagreement sum_t sum_i ||x_i - x_j||
  double rhs = 0.0;    // theoretical bound from the mixing constants
  double ratio = 0.0;  // lhs / rhs, expected <= 1
};

// Reruns the config with per-round disagreement tracking (no file output)
// and compares the cumulative disagreement against its theoretical bound.
DisagreementReport disagreement_report(const ExperimentConfig& config);

}  // namespace dsmd
