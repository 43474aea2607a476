#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dpp/benchmarks.hpp"
#include "dpp/fapprox.hpp"
#include "dpp/mdp.hpp"
#include "dpp/rl.hpp"
#include "dpp/trajectory.hpp"

namespace dpp {

/// Version of the results.csv / summary.csv / replacement.csv layouts.
inline constexpr int kCsvSchemaVersion = 1;

enum class BenchmarkId { Linear, CombinationLock, GridWorld, Random };

/// "linear", "lock" (or "combination-lock"), "grid", "random".
BenchmarkId parse_benchmark(std::string_view text);
std::string to_string(BenchmarkId id);

struct BenchmarkSpec {
  BenchmarkId id = BenchmarkId::Linear;
  /// States for linear/lock/random; free-cell side length for grid.
  std::size_t size = 500;
  double gamma = 0.995;
  /// Random benchmark only.
  std::size_t n_actions = 2;
  std::uint64_t seed = 0;
};

TabularMdp make_benchmark(const BenchmarkSpec& spec);

enum class AlgorithmId { DppRl, QLearning, ModelBasedVi };

struct AlgorithmSpec {
  AlgorithmId id = AlgorithmId::DppRl;
  InverseTemperature eta = InverseTemperature::infinity();
  double omega = 0.51;
  /// Value-iteration tolerance on the fitted model (relative to V_max).
  double vi_tol = 1e-8;

  /// "dpp-rl", "ql", "vi".
  std::string name() const;
  /// "eta=inf", "omega=0.51", "vi_tol=1e-08".
  std::string params() const;
};

/// "dpp-rl", "dpp-rl:eta=10", "ql", "ql:omega=0.75", "vi", "vi:tol=1e-6".
AlgorithmSpec parse_algorithm(std::string_view text);

struct ExperimentConfig {
  BenchmarkSpec benchmark;
  std::vector<AlgorithmSpec> algorithms;
  std::size_t n_runs = 1;
  /// Samples per state-action pair; also the iteration count of DPP-RL and QL.
  std::size_t samples_per_pair = 10000;
  std::uint64_t seed_base = 0;
  /// Loss cadence; 0 selects max(1, K/200).
  std::size_t loss_every = 0;
  std::optional<double> budget_seconds;
  std::size_t jobs = 1;
  GenerativeSampleSet::Storage storage = GenerativeSampleSet::Storage::Materialized;
  /// Residual tolerance of policy evaluation when measuring losses.
  double eval_tol = 1e-9;

  std::size_t effective_loss_every() const;
};

/// Throws ConfigError for an unrunnable configuration.
void validate(const ExperimentConfig& cfg);

nlohmann::json config_to_json(const ExperimentConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& doc);

struct RunRecord {
  std::string benchmark;
  std::string algorithm;
  std::string params;
  std::size_t run = 0;
  std::uint64_t seed = 0;
  std::vector<LossPoint> trajectory;
  double final_loss = 0.0;
};

/// Seed of run r: base XOR r.
inline std::uint64_t run_seed(std::uint64_t base, std::size_t run) {
  return base ^ static_cast<std::uint64_t>(run);
}

/// Every run draws one sample set from its own seed and hands it to every
/// algorithm, together with one initial table uniform in [-V_max, V_max].
/// Records are ordered algorithm-major, then by run index, regardless of
/// `jobs`.
std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg);

/// Same, on a caller-supplied MDP with its precomputed Q*.
std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg, const TabularMdp& mdp,
                                      const QTable& q_star);

struct MeanStd {
  double mean = 0.0;
  /// Sample standard deviation (n-1); 0 when n = 1.
  double std = 0.0;
  std::size_t n = 0;
};

/// Throws AggregationError when `values` is empty.
MeanStd mean_std(std::span<const double> values);

struct CheckpointStats {
  std::size_t iteration = 0;
  MeanStd loss;
};

struct Aggregate {
  std::vector<CheckpointStats> checkpoints;
  MeanStd final;
  /// True for a single record (the standard deviation is undefined and reported as 0).
  bool std_undefined = false;
};

/// Per-checkpoint statistics. Throws AggregationError when the records are
/// empty or their checkpoints differ.
Aggregate aggregate(std::span<const RunRecord> records);

/// Statistics of the final losses only; needs no alignment.
MeanStd aggregate_final(std::span<const RunRecord> records);

/// results.csv: benchmark,algorithm,params,run,seed,iteration,cpu_seconds,loss.
/// cpu_seconds is written as 0 unless `record_cpu`, keeping the file
/// byte-reproducible.
void write_results_csv(const std::filesystem::path& path, std::span<const RunRecord> records,
                       bool record_cpu);
/// timing.csv: benchmark,algorithm,params,run,iteration,cpu_seconds.
void write_timing_csv(const std::filesystem::path& path, std::span<const RunRecord> records);
/// summary.csv: benchmark,algorithm,params,mean_final,std_final,n_runs, one
/// row per (benchmark, algorithm, params) in order of first appearance.
void write_summary_csv(const std::filesystem::path& path, std::span<const RunRecord> records);
void write_manifest(const std::filesystem::path& path, const ExperimentConfig& cfg,
                    bool record_cpu);

/// Writes results.csv, summary.csv, timing.csv and manifest.json into `dir`.
void write_experiment(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                      std::span<const RunRecord> records, bool record_cpu);

/// Row of the single-run trajectory CSV used by the solve/rl commands.
struct TrajectoryRow {
  std::string run_id;
  std::string algorithm;
  std::uint64_t seed = 0;
  LossPoint point;
};

/// run_id,algorithm,seed,iteration,cpu_seconds,loss
void write_trajectory_csv(const std::filesystem::path& path, std::span<const TrajectoryRow> rows);

// ---------------------------------------------------------------------------
// Exact-DPP loss bound check.

struct BoundCheckResult {
  std::size_t checks = 0;
  std::size_t violations = 0;
  /// max_k loss_k / bound_k.
  double worst_ratio = 0.0;
};

/// Runs exact DPP for K iterations, measuring the loss at every k, and
/// compares it with exact_dpp_loss_bound.
BoundCheckResult check_exact_dpp_bound(const TabularMdp& mdp, const QTable& q_star,
                                       InverseTemperature eta, std::size_t iterations,
                                       const Preferences& psi0, double eval_tol = 1e-9);

// ---------------------------------------------------------------------------
// Optimal replacement experiments.

struct ReplacementConfig {
  ReplacementEnv env;
  FittedAlgorithm algorithm = FittedAlgorithm::Sadpp;
  std::size_t n_samples = 500;
  std::size_t iterations = 100;
  std::size_t n_runs = 20;
  std::uint64_t seed_base = 0;
  InverseTemperature eta{1.0};
  double alpha = 1e-3;
  /// RBF centers per action, evenly spaced on [0, x_max].
  std::size_t n_centers = 10;
  std::size_t n_bins = 100;
  std::size_t jobs = 1;
};

void validate(const ReplacementConfig& cfg);
std::string to_string(FittedAlgorithm algorithm);
FittedAlgorithm parse_fitted_algorithm(std::string_view text);
FeatureMap replacement_features(const ReplacementConfig& cfg);

struct ReplacementRecord {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  /// Policy error at iterations 0..K.
  std::vector<double> errors;
  LinearModel final_model;
};

/// theta_0 uniform in [-1,1], then `iterations` fitted iterations with fresh
/// samples each time; run r uses seed base XOR r.
std::vector<ReplacementRecord> run_replacement(const ReplacementConfig& cfg);

struct ReplacementSummary {
  std::vector<MeanStd> per_iteration;
  /// Averages over iterations >= post_transient_start of the per-iteration mean and std.
  double post_transient_mean = 0.0;
  double post_transient_std = 0.0;
};

ReplacementSummary summarize_replacement(std::span<const ReplacementRecord> records,
                                         std::size_t post_transient_start);

/// iteration,error,seed,algorithm,N
void write_replacement_csv(const std::filesystem::path& path, const ReplacementConfig& cfg,
                           std::span<const ReplacementRecord> records);
/// iteration,mean,std,algorithm,N
void write_replacement_summary_csv(const std::filesystem::path& path, const ReplacementConfig& cfg,
                                   const ReplacementSummary& summary);
/// {algorithm, N, eta, alpha, runs: [{run, seed, theta: [...]}]}
void write_theta_checkpoints(const std::filesystem::path& path, const ReplacementConfig& cfg,
                             std::span<const ReplacementRecord> records);

struct TuningRow {
  InverseTemperature eta{1.0};
  double alpha = 0.0;
  double score = 0.0;
};

struct TuningResult {
  std::vector<TuningRow> rows;
  TuningRow best;
};

/// Grid search over (eta, alpha) scored by the mean post-transient error
/// (second half of the iterations) on `base`'s seeds. Ties keep the first
/// grid point.
TuningResult tune_replacement(const ReplacementConfig& base,
                              std::span<const InverseTemperature> etas,
                              std::span<const double> alphas);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace dpp
