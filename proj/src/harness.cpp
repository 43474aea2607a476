#include "dpp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

#include "dpp/csv.hpp"
#include "dpp/errors.hpp"
#include "dpp/exact.hpp"
#include "dpp/random.hpp"

namespace dpp {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

double parse_number(std::string_view text, const char* what) {
  const std::string s(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError(std::string("cannot parse ") + what + " '" + s + "'");
  }
  if (used != s.size()) throw ConfigError(std::string("cannot parse ") + what + " '" + s + "'");
  return v;
}

}  // namespace

BenchmarkId parse_benchmark(std::string_view text) {
  const std::string t = lower(text);
  if (t == "linear") return BenchmarkId::Linear;
  if (t == "lock" || t == "combination-lock" || t == "combination_lock") {
    return BenchmarkId::CombinationLock;
  }
  if (t == "grid" || t == "grid-world" || t == "gridworld") return BenchmarkId::GridWorld;
  if (t == "random") return BenchmarkId::Random;
  throw ConfigError("unknown benchmark '" + std::string(text) + "'");
}

std::string to_string(BenchmarkId id) {
  switch (id) {
    case BenchmarkId::Linear: return "linear";
    case BenchmarkId::CombinationLock: return "lock";
    case BenchmarkId::GridWorld: return "grid";
    case BenchmarkId::Random: return "random";
  }
  return "?";
}

TabularMdp make_benchmark(const BenchmarkSpec& spec) {
  switch (spec.id) {
    case BenchmarkId::Linear: return make_linear_mdp(spec.size, spec.gamma);
    case BenchmarkId::CombinationLock: return make_combination_lock(spec.size, spec.gamma);
    case BenchmarkId::GridWorld: return make_grid_world(spec.size, spec.gamma);
    case BenchmarkId::Random:
      if (spec.size == 0 || spec.n_actions == 0) throw ConfigError("random MDP needs S, A >= 1");
      return make_random_mdp(spec.size, spec.n_actions, spec.gamma, spec.seed);
  }
  throw ConfigError("unknown benchmark");
}

std::string AlgorithmSpec::name() const {
  switch (id) {
    case AlgorithmId::DppRl: return "dpp-rl";
    case AlgorithmId::QLearning: return "ql";
    case AlgorithmId::ModelBasedVi: return "vi";
  }
  return "?";
}

std::string AlgorithmSpec::params() const {
  switch (id) {
    case AlgorithmId::DppRl: return "eta=" + eta.to_string();
    case AlgorithmId::QLearning: return "omega=" + format_double(omega);
    case AlgorithmId::ModelBasedVi: return "vi_tol=" + format_double(vi_tol);
  }
  return "";
}

AlgorithmSpec parse_algorithm(std::string_view text) {
  const auto colon = text.find(':');
  const std::string head = lower(text.substr(0, colon));
  AlgorithmSpec spec;
  if (head == "dpp-rl" || head == "dpprl" || head == "dpp") {
    spec.id = AlgorithmId::DppRl;
  } else if (head == "ql" || head == "q-learning") {
    spec.id = AlgorithmId::QLearning;
  } else if (head == "vi" || head == "model-vi") {
    spec.id = AlgorithmId::ModelBasedVi;
  } else {
    throw ConfigError("unknown algorithm '" + std::string(text) + "'");
  }
  std::string_view rest = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = rest.substr(0, comma);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw ConfigError("algorithm option '" + std::string(item) + "' lacks '='");
    const std::string key = lower(item.substr(0, eq));
    const std::string_view value = item.substr(eq + 1);
    if (key == "eta" && spec.id == AlgorithmId::DppRl) {
      try {
        spec.eta = InverseTemperature::parse(value);
      } catch (const InvalidInput& e) {
        throw ConfigError(e.what());
      }
    } else if (key == "omega" && spec.id == AlgorithmId::QLearning) {
      spec.omega = parse_number(value, "omega");
    } else if (key == "tol" && spec.id == AlgorithmId::ModelBasedVi) {
      spec.vi_tol = parse_number(value, "tol");
    } else {
      throw ConfigError("option '" + key + "' does not apply to " + spec.name());
    }
  }
  if (spec.id == AlgorithmId::QLearning) validate(QlConfig{spec.omega});
  if (spec.id == AlgorithmId::ModelBasedVi && !(spec.vi_tol > 0.0)) {
    throw ConfigError("vi tolerance must be positive");
  }
  return spec;
}

std::size_t ExperimentConfig::effective_loss_every() const {
  return loss_every != 0 ? loss_every : std::max<std::size_t>(1, samples_per_pair / 200);
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.algorithms.empty()) throw ConfigError("experiment lists no algorithms");
  if (cfg.n_runs == 0) throw ConfigError("experiment needs at least one run");
  if (cfg.jobs == 0) throw ConfigError("jobs must be at least 1");
  if (!(cfg.benchmark.gamma >= 0.0 && cfg.benchmark.gamma < 1.0)) throw ConfigError("gamma must lie in [0,1)");
  if (cfg.budget_seconds && !(*cfg.budget_seconds > 0.0)) throw ConfigError("budget must be positive");
  if (!(cfg.eval_tol > 0.0)) throw ConfigError("evaluation tolerance must be positive");
  for (const auto& a : cfg.algorithms) {
    if (a.id == AlgorithmId::QLearning) validate(QlConfig{a.omega});
  }
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json algos = nlohmann::json::array();
  for (const auto& a : cfg.algorithms) {
    std::string s = a.name() + ":" + a.params();
    if (a.id == AlgorithmId::ModelBasedVi) s = a.name() + ":tol=" + format_double(a.vi_tol);
    algos.push_back(s);
  }
  nlohmann::json doc = {
      {"benchmark",
       {{"id", to_string(cfg.benchmark.id)},
        {"size", cfg.benchmark.size},
        {"gamma", cfg.benchmark.gamma},
        {"n_actions", cfg.benchmark.n_actions},
        {"seed", cfg.benchmark.seed}}},
      {"algorithms", algos},
      {"n_runs", cfg.n_runs},
      {"samples_per_pair", cfg.samples_per_pair},
      {"seed_base", cfg.seed_base},
      {"loss_every", cfg.effective_loss_every()},
      {"jobs", cfg.jobs},
      {"storage", cfg.storage == GenerativeSampleSet::Storage::Streaming ? "streaming" : "materialized"},
      {"eval_tol", cfg.eval_tol},
  };
  doc["budget_seconds"] = cfg.budget_seconds ? nlohmann::json(*cfg.budget_seconds) : nlohmann::json(nullptr);
  return doc;
}

ExperimentConfig config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig cfg;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "benchmark") {
        if (value.is_string()) {
          cfg.benchmark.id = parse_benchmark(value.get<std::string>());
          continue;
        }
        for (const auto& [bk, bv] : value.items()) {
          if (bk == "id") cfg.benchmark.id = parse_benchmark(bv.get<std::string>());
          else if (bk == "size") cfg.benchmark.size = bv.get<std::size_t>();
          else if (bk == "gamma") cfg.benchmark.gamma = bv.get<double>();
          else if (bk == "n_actions") cfg.benchmark.n_actions = bv.get<std::size_t>();
          else if (bk == "seed") cfg.benchmark.seed = bv.get<std::uint64_t>();
          else throw ConfigError("unknown benchmark key '" + bk + "'");
        }
      } else if (key == "algorithms") {
        for (const auto& a : value) cfg.algorithms.push_back(parse_algorithm(a.get<std::string>()));
      } else if (key == "n_runs") {
        cfg.n_runs = value.get<std::size_t>();
      } else if (key == "samples_per_pair") {
        cfg.samples_per_pair = value.get<std::size_t>();
      } else if (key == "seed_base") {
        cfg.seed_base = value.get<std::uint64_t>();
      } else if (key == "loss_every") {
        cfg.loss_every = value.get<std::size_t>();
      } else if (key == "budget_seconds") {
        if (!value.is_null()) cfg.budget_seconds = value.get<double>();
      } else if (key == "jobs") {
        cfg.jobs = value.get<std::size_t>();
      } else if (key == "storage") {
        const std::string s = value.get<std::string>();
        if (s == "materialized") cfg.storage = GenerativeSampleSet::Storage::Materialized;
        else if (s == "streaming") cfg.storage = GenerativeSampleSet::Storage::Streaming;
        else throw ConfigError("storage must be 'materialized' or 'streaming'");
      } else if (key == "eval_tol") {
        cfg.eval_tol = value.get<double>();
      } else {
        throw ConfigError("unknown config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

// ---------------------------------------------------------------------------

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

namespace {

RunRecord make_record(const ExperimentConfig& cfg, const AlgorithmSpec& algo, std::size_t run,
                      std::vector<LossPoint> trajectory) {
  RunRecord rec;
  rec.benchmark = to_string(cfg.benchmark.id);
  rec.algorithm = algo.name();
  rec.params = algo.params();
  rec.run = run;
  rec.seed = run_seed(cfg.seed_base, run);
  rec.final_loss = trajectory.empty() ? std::numeric_limits<double>::quiet_NaN()
                                      : trajectory.back().loss;
  rec.trajectory = std::move(trajectory);
  return rec;
}

std::vector<LossPoint> run_one(const ExperimentConfig& cfg, const AlgorithmSpec& algo,
                               const TabularMdp& mdp, const QTable& q_star,
                               const GenerativeSampleSet& samples, const StateActionTable& init) {
  TrackingOptions tracking;
  tracking.q_star = &q_star;
  tracking.loss_every = cfg.effective_loss_every();
  tracking.eval_tol = cfg.eval_tol;
  tracking.budget_seconds = cfg.budget_seconds;
  switch (algo.id) {
    case AlgorithmId::DppRl:
      return dpp_rl_run(mdp, Preferences(init), algo.eta, samples, tracking).losses;
    case AlgorithmId::QLearning:
      return q_learning_sync_run(mdp, QlConfig{algo.omega}, QTable(init), samples, tracking).losses;
    case AlgorithmId::ModelBasedVi: {
      // VI spends the whole sample budget before it produces a policy, so it
      // has two checkpoints: the untrained greedy policy and the final one.
      tracking.loss_every = std::numeric_limits<std::size_t>::max();
      tracking.budget_seconds.reset();
      auto result = model_based_vi_run(mdp, samples, std::numeric_limits<std::size_t>::max() / 2,
                                       algo.vi_tol * std::max(mdp.v_max(), 1e-300), tracking);
      std::vector<LossPoint> points;
      if (result.losses.empty()) return points;
      points.push_back({0, 0.0, result.losses.front().loss});
      points.push_back({cfg.samples_per_pair, result.losses.back().cpu_seconds,
                        result.losses.back().loss});
      return points;
    }
  }
  throw ConfigError("unknown algorithm");
}

// Zero-sample budget: only the starting policy is scored.
std::vector<LossPoint> initial_only(const ExperimentConfig& cfg, const AlgorithmSpec& algo,
                                    const TabularMdp& mdp, const QTable& q_star,
                                    const StateActionTable& init) {
  PolicyLossEvaluator loss(mdp, q_star, cfg.eval_tol);
  switch (algo.id) {
    case AlgorithmId::DppRl:
      return {{0, 0.0, loss(softmax_policy(Preferences(init), algo.eta))}};
    case AlgorithmId::QLearning:
      return {{0, 0.0, loss(greedy_policy(init))}};
    case AlgorithmId::ModelBasedVi:
      return {{0, 0.0, loss(greedy_policy(StateActionTable(mdp.n_states(), mdp.n_actions(), 0.0)))}};
  }
  throw ConfigError("unknown algorithm");
}

}  // namespace

std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg, const TabularMdp& mdp,
                                      const QTable& q_star) {
  validate(cfg);
  const std::size_t n_algos = cfg.algorithms.size();
  std::vector<RunRecord> records(n_algos * cfg.n_runs);
  parallel_for(cfg.n_runs, cfg.jobs, [&](std::size_t run) {
    const std::uint64_t seed = run_seed(cfg.seed_base, run);
    Rng init_rng(mix64(seed ^ 0x5EEDF00DULL));
    const double v = mdp.v_max();
    const StateActionTable init = uniform_table(mdp.n_states(), mdp.n_actions(), -v, v, init_rng);
    if (cfg.samples_per_pair == 0) {
      for (std::size_t i = 0; i < n_algos; ++i) {
        const AlgorithmSpec& algo = cfg.algorithms[i];
        records[i * cfg.n_runs + run] =
            make_record(cfg, algo, run, initial_only(cfg, algo, mdp, q_star, init));
      }
      return;
    }
    const GenerativeSampleSet samples(mdp, cfg.samples_per_pair, seed, cfg.storage);
    for (std::size_t i = 0; i < n_algos; ++i) {
      const AlgorithmSpec& algo = cfg.algorithms[i];
      records[i * cfg.n_runs + run] =
          make_record(cfg, algo, run, run_one(cfg, algo, mdp, q_star, samples, init));
    }
  });
  return records;
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  const TabularMdp mdp = make_benchmark(cfg.benchmark);
  const QTable q_star = optimal_q(mdp);
  return run_experiment(cfg, mdp, q_star);
}

// ---------------------------------------------------------------------------

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw AggregationError("cannot aggregate zero values");
  MeanStd out;
  out.n = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(out.n);
  if (out.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(out.n - 1));
  }
  return out;
}

Aggregate aggregate(std::span<const RunRecord> records) {
  if (records.empty()) throw AggregationError("no records to aggregate");
  const auto& ref = records.front().trajectory;
  for (const auto& r : records) {
    if (r.trajectory.size() != ref.size()) throw AggregationError("records have different checkpoint counts");
    for (std::size_t i = 0; i < ref.size(); ++i) {
      if (r.trajectory[i].iteration != ref[i].iteration) {
        throw AggregationError("records have misaligned checkpoints");
      }
    }
  }
  Aggregate out;
  out.std_undefined = records.size() == 1;
  std::vector<double> column(records.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    for (std::size_t r = 0; r < records.size(); ++r) column[r] = records[r].trajectory[i].loss;
    out.checkpoints.push_back({ref[i].iteration, mean_std(column)});
  }
  out.final = aggregate_final(records);
  return out;
}

MeanStd aggregate_final(std::span<const RunRecord> records) {
  if (records.empty()) throw AggregationError("no records to aggregate");
  std::vector<double> finals;
  finals.reserve(records.size());
  for (const auto& r : records) finals.push_back(r.final_loss);
  return mean_std(finals);
}

void write_results_csv(const std::filesystem::path& path, std::span<const RunRecord> records,
                       bool record_cpu) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : records) {
    for (const auto& p : r.trajectory) {
      rows.push_back({r.benchmark, r.algorithm, r.params, std::to_string(r.run),
                      std::to_string(r.seed), std::to_string(p.iteration),
                      record_cpu ? format_double(p.cpu_seconds) : "0", format_double(p.loss)});
    }
  }
  write_csv(path, {"benchmark", "algorithm", "params", "run", "seed", "iteration", "cpu_seconds", "loss"},
            rows);
}

void write_timing_csv(const std::filesystem::path& path, std::span<const RunRecord> records) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : records) {
    for (const auto& p : r.trajectory) {
      rows.push_back({r.benchmark, r.algorithm, r.params, std::to_string(r.run),
                      std::to_string(p.iteration), format_double(p.cpu_seconds)});
    }
  }
  write_csv(path, {"benchmark", "algorithm", "params", "run", "iteration", "cpu_seconds"}, rows);
}

void write_summary_csv(const std::filesystem::path& path, std::span<const RunRecord> records) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<RunRecord>> groups;
  for (const auto& r : records) {
    const std::string key = r.benchmark + '\x1f' + r.algorithm + '\x1f' + r.params;
    auto& g = groups[key];
    if (g.empty()) order.push_back(key);
    g.push_back(r);
  }
  std::vector<std::vector<std::string>> rows;
  for (const auto& key : order) {
    const auto& g = groups[key];
    const MeanStd s = aggregate_final(g);
    if (s.n == 1) {
      std::cerr << "warning: " << g.front().algorithm
                << " has a single run; its standard deviation is reported as 0\n";
    }
    rows.push_back({g.front().benchmark, g.front().algorithm, g.front().params,
                    format_double(s.mean), format_double(s.std), std::to_string(s.n)});
  }
  write_csv(path, {"benchmark", "algorithm", "params", "mean_final", "std_final", "n_runs"}, rows);
}

void write_manifest(const std::filesystem::path& path, const ExperimentConfig& cfg,
                    bool record_cpu) {
  nlohmann::json doc = {{"schema_version", kCsvSchemaVersion},
                        {"config", config_to_json(cfg)},
                        {"record_cpu", record_cpu},
                        {"results_columns",
                         {"benchmark", "algorithm", "params", "run", "seed", "iteration",
                          "cpu_seconds", "loss"}},
                        {"summary_columns",
                         {"benchmark", "algorithm", "params", "mean_final", "std_final", "n_runs"}}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

void write_experiment(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                      std::span<const RunRecord> records, bool record_cpu) {
  std::filesystem::create_directories(dir);
  write_results_csv(dir / "results.csv", records, record_cpu);
  write_summary_csv(dir / "summary.csv", records);
  write_timing_csv(dir / "timing.csv", records);
  write_manifest(dir / "manifest.json", cfg, record_cpu);
}

void write_trajectory_csv(const std::filesystem::path& path, std::span<const TrajectoryRow> rows) {
  std::vector<std::vector<std::string>> out;
  for (const auto& r : rows) {
    out.push_back({r.run_id, r.algorithm, std::to_string(r.seed), std::to_string(r.point.iteration),
                   format_double(r.point.cpu_seconds), format_double(r.point.loss)});
  }
  write_csv(path, {"run_id", "algorithm", "seed", "iteration", "cpu_seconds", "loss"}, out);
}

// ---------------------------------------------------------------------------

BoundCheckResult check_exact_dpp_bound(const TabularMdp& mdp, const QTable& q_star,
                                       InverseTemperature eta, std::size_t iterations,
                                       const Preferences& psi0, double eval_tol) {
  TrackingOptions tracking;
  tracking.q_star = &q_star;
  tracking.loss_every = 1;
  tracking.eval_tol = eval_tol;
  const ExactRunResult run = dpp_run(mdp, psi0, eta, iterations, tracking);
  BoundCheckResult out;
  for (const LossPoint& p : run.losses) {
    const double bound = exact_dpp_loss_bound(mdp.v_max(), mdp.n_actions(), eta, mdp.gamma(), p.iteration);
    ++out.checks;
    if (p.loss > bound) ++out.violations;
    if (bound > 0.0) out.worst_ratio = std::max(out.worst_ratio, p.loss / bound);
    else if (p.loss > 0.0) out.worst_ratio = std::numeric_limits<double>::infinity();
  }
  return out;
}

// ---------------------------------------------------------------------------

void validate(const ReplacementConfig& cfg) {
  cfg.env.validate();
  if (cfg.n_samples == 0) throw ConfigError("replacement: N must be positive");
  if (cfg.n_runs == 0) throw ConfigError("replacement: need at least one run");
  if (cfg.n_centers < 2) throw ConfigError("replacement: need at least two RBF centers");
  if (cfg.n_bins == 0) throw ConfigError("replacement: need at least one bin");
  if (cfg.jobs == 0) throw ConfigError("jobs must be at least 1");
  if (!(cfg.alpha >= 0.0)) throw ConfigError("replacement: alpha must be >= 0");
}

std::string to_string(FittedAlgorithm algorithm) {
  return algorithm == FittedAlgorithm::Sadpp ? "sadpp" : "rfqi";
}

FittedAlgorithm parse_fitted_algorithm(std::string_view text) {
  const std::string t = lower(text);
  if (t == "sadpp") return FittedAlgorithm::Sadpp;
  if (t == "rfqi") return FittedAlgorithm::Rfqi;
  throw ConfigError("unknown fitted algorithm '" + std::string(text) + "'");
}

FeatureMap replacement_features(const ReplacementConfig& cfg) {
  return FeatureMap::evenly_spaced_rbf(0.0, cfg.env.x_max, cfg.n_centers, 2);
}

std::vector<ReplacementRecord> run_replacement(const ReplacementConfig& cfg) {
  validate(cfg);
  const FeatureMap map = replacement_features(cfg);
  const TransitionSampler sampler = replacement_sampler(cfg.env);
  const ThresholdPolicy threshold = optimal_threshold(cfg.env);
  const std::vector<double> xs = bin_centers(cfg.env.x_max, cfg.n_bins);
  const SadppConfig fit{cfg.eta, cfg.env.gamma, cfg.alpha, cfg.n_samples, cfg.iterations};

  std::vector<ReplacementRecord> records(cfg.n_runs);
  parallel_for(cfg.n_runs, cfg.jobs, [&](std::size_t run) {
    ReplacementRecord& rec = records[run];
    rec.run = run;
    rec.seed = run_seed(cfg.seed_base, run);
    Rng rng(rec.seed);
    LinearModel model = random_model(map.dim(), rng);
    std::vector<std::size_t> actions(cfg.n_bins);
    auto error = [&] {
      for (std::size_t k = 0; k < cfg.n_bins; ++k) {
        actions[k] = induced_action(model, map, xs[k], cfg.eta, cfg.algorithm);
      }
      return policy_error(actions, cfg.env, threshold, cfg.n_bins);
    };
    rec.errors.reserve(cfg.iterations + 1);
    rec.errors.push_back(error());
    for (std::size_t i = 0; i < cfg.iterations; ++i) {
      model = cfg.algorithm == FittedAlgorithm::Sadpp ? sadpp_iteration(fit, model, map, sampler, rng)
                                                      : rfqi_iteration(fit, model, map, sampler, rng);
      rec.errors.push_back(error());
    }
    rec.final_model = std::move(model);
  });
  return records;
}

ReplacementSummary summarize_replacement(std::span<const ReplacementRecord> records,
                                         std::size_t post_transient_start) {
  if (records.empty()) throw AggregationError("no replacement records to aggregate");
  const std::size_t len = records.front().errors.size();
  for (const auto& r : records) {
    if (r.errors.size() != len) throw AggregationError("replacement records differ in length");
  }
  if (post_transient_start >= len) throw AggregationError("post-transient window is empty");
  ReplacementSummary out;
  std::vector<double> column(records.size());
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t r = 0; r < records.size(); ++r) column[r] = records[r].errors[i];
    out.per_iteration.push_back(mean_std(column));
  }
  double m = 0.0;
  double s = 0.0;
  for (std::size_t i = post_transient_start; i < len; ++i) {
    m += out.per_iteration[i].mean;
    s += out.per_iteration[i].std;
  }
  const auto w = static_cast<double>(len - post_transient_start);
  out.post_transient_mean = m / w;
  out.post_transient_std = s / w;
  return out;
}

void write_replacement_csv(const std::filesystem::path& path, const ReplacementConfig& cfg,
                           std::span<const ReplacementRecord> records) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : records) {
    for (std::size_t i = 0; i < r.errors.size(); ++i) {
      rows.push_back({std::to_string(i), format_double(r.errors[i]), std::to_string(r.seed),
                      to_string(cfg.algorithm), std::to_string(cfg.n_samples)});
    }
  }
  write_csv(path, {"iteration", "error", "seed", "algorithm", "N"}, rows);
}

void write_replacement_summary_csv(const std::filesystem::path& path, const ReplacementConfig& cfg,
                                   const ReplacementSummary& summary) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < summary.per_iteration.size(); ++i) {
    rows.push_back({std::to_string(i), format_double(summary.per_iteration[i].mean),
                    format_double(summary.per_iteration[i].std), to_string(cfg.algorithm),
                    std::to_string(cfg.n_samples)});
  }
  write_csv(path, {"iteration", "mean", "std", "algorithm", "N"}, rows);
}

void write_theta_checkpoints(const std::filesystem::path& path, const ReplacementConfig& cfg,
                             std::span<const ReplacementRecord> records) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : records) {
    runs.push_back({{"run", r.run}, {"seed", r.seed}, {"theta", model_to_json(r.final_model)}});
  }
  const nlohmann::json doc = {{"algorithm", to_string(cfg.algorithm)},
                              {"N", cfg.n_samples},
                              {"eta", cfg.eta.to_string()},
                              {"alpha", cfg.alpha},
                              {"n_centers", cfg.n_centers},
                              {"runs", runs}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

TuningResult tune_replacement(const ReplacementConfig& base,
                              std::span<const InverseTemperature> etas,
                              std::span<const double> alphas) {
  if (etas.empty() || alphas.empty()) throw ConfigError("tuning grid is empty");
  if (base.iterations == 0) throw ConfigError("tuning needs at least one iteration");
  TuningResult out;
  bool have_best = false;
  for (const InverseTemperature& eta : etas) {
    for (double alpha : alphas) {
      ReplacementConfig cfg = base;
      cfg.eta = eta;
      cfg.alpha = alpha;
      const auto records = run_replacement(cfg);
      const double score =
          summarize_replacement(records, cfg.iterations / 2 + 1).post_transient_mean;
      const TuningRow row{eta, alpha, score};
      out.rows.push_back(row);
      if (!have_best || score < out.best.score) {
        out.best = row;
        have_best = true;
      }
    }
  }
  return out;
}

}  // namespace dpp
