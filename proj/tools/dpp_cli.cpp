// Command-line front end: generate, solve, rl, sadpp, bench, replacement, bound-check.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dpp/benchmarks.hpp"
#include "dpp/csv.hpp"
#include "dpp/errors.hpp"
#include "dpp/exact.hpp"
#include "dpp/harness.hpp"
#include "dpp/mdp_io.hpp"
#include "dpp/rl.hpp"

namespace fs = std::filesystem;
using namespace dpp;

namespace {

constexpr int kUsageError = 2;

struct MdpSource {
  std::string mdp_path;
  std::string benchmark = "linear";
  std::size_t size = 500;
  double gamma = 0.995;
  std::size_t actions = 2;
  std::uint64_t seed = 0;

  void add_to(CLI::App& app) {
    app.add_option("--mdp", mdp_path, "Load the MDP from a JSON file instead of a benchmark");
    app.add_option("--benchmark", benchmark, "linear | lock | grid | random")->capture_default_str();
    app.add_option("--n", size, "States (linear/lock/random) or free-cell side (grid)")
        ->capture_default_str();
    app.add_option("--gamma", gamma, "Discount factor")->capture_default_str();
    app.add_option("--actions", actions, "Actions of the random benchmark")->capture_default_str();
    app.add_option("--mdp-seed", seed, "Seed of the random benchmark")->capture_default_str();
  }

  TabularMdp load() const {
    if (!mdp_path.empty()) return load_mdp(mdp_path);
    return make_benchmark({parse_benchmark(benchmark), size, gamma, actions, seed});
  }
};

struct EnvFlags {
  ReplacementEnv env;

  void add_to(CLI::App& app) {
    app.add_option("--beta", env.beta, "Exponential rate")->capture_default_str();
    app.add_option("--cost", env.cost, "Replacement cost C")->capture_default_str();
    app.add_option("--slope", env.slope, "Maintenance cost slope, c(x) = slope * x")->capture_default_str();
    app.add_option("--gamma", env.gamma, "Discount factor")->capture_default_str();
    app.add_option("--xmax", env.x_max, "Upper end of the state space")->capture_default_str();
  }
};

void write_json(const fs::path& path, const nlohmann::json& doc) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

std::vector<TrajectoryRow> to_rows(const std::string& algorithm, std::uint64_t seed,
                                   const std::vector<LossPoint>& points) {
  std::vector<TrajectoryRow> rows;
  for (const auto& p : points) rows.push_back({"0", algorithm, seed, p});
  return rows;
}

void print_last(const std::vector<LossPoint>& points) {
  if (points.empty()) return;
  std::cout << "final iteration " << points.back().iteration << " loss "
            << format_double(points.back().loss) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic policy programming workbench"};
  app.require_subcommand(1);

  // generate
  auto* generate = app.add_subcommand("generate", "Write a benchmark MDP as JSON");
  MdpSource gen_src;
  std::string gen_out;
  gen_src.add_to(*generate);
  generate->add_option("--out", gen_out, "Output JSON file")->required();

  // solve
  auto* solve = app.add_subcommand("solve", "Exact and noise-injected solvers with known model");
  MdpSource solve_src;
  std::string solve_algo = "dpp";
  std::string solve_eta = "inf";
  std::size_t solve_iters = 100;
  double solve_noise = 0.0;
  std::uint64_t solve_seed = 0;
  std::string solve_init = "random";
  std::size_t solve_every = 1;
  std::string solve_out;
  solve_src.add_to(*solve);
  solve->add_option("--algo", solve_algo, "dpp | noisy-dpp | noisy-avi | vi")
      ->check(CLI::IsMember({"dpp", "noisy-dpp", "noisy-avi", "vi"}))
      ->capture_default_str();
  solve->add_option("--eta", solve_eta, "Inverse temperature (number or inf)")->capture_default_str();
  solve->add_option("--iters", solve_iters, "Iterations")->capture_default_str();
  solve->add_option("--noise", solve_noise, "Uniform noise bound U for the noisy solvers")
      ->capture_default_str();
  solve->add_option("--seed", solve_seed, "Seed for initialization and noise")->capture_default_str();
  solve->add_option("--init", solve_init, "random | zero")
      ->check(CLI::IsMember({"random", "zero"}))
      ->capture_default_str();
  solve->add_option("--loss-every", solve_every, "Loss cadence in iterations")->capture_default_str();
  solve->add_option("--out", solve_out, "Output directory")->required();

  // rl
  auto* rl = app.add_subcommand("rl", "One generative-model RL run");
  MdpSource rl_src;
  std::string rl_algo = "dpp-rl";
  std::string rl_eta = "inf";
  double rl_omega = 0.51;
  std::size_t rl_samples = 1000;
  std::uint64_t rl_seed = 0;
  std::size_t rl_every = 0;
  bool rl_streaming = false;
  std::string rl_save_samples;
  std::string rl_out;
  rl_src.add_to(*rl);
  rl->add_option("--algo", rl_algo, "dpp-rl | ql | vi")
      ->check(CLI::IsMember({"dpp-rl", "ql", "vi"}))
      ->capture_default_str();
  rl->add_option("--eta", rl_eta, "DPP-RL inverse temperature")->capture_default_str();
  rl->add_option("--omega", rl_omega, "QL step exponent in (0.5, 1]")->capture_default_str();
  rl->add_option("--samples", rl_samples, "Samples per state-action pair")->capture_default_str();
  rl->add_option("--seed", rl_seed, "Seed")->capture_default_str();
  rl->add_option("--loss-every", rl_every, "Loss cadence (0: max(1, K/200))")->capture_default_str();
  rl->add_flag("--streaming", rl_streaming, "Regenerate samples per iteration instead of storing them");
  rl->add_option("--save-samples", rl_save_samples, "Also write the sample tensor to this file");
  rl->add_option("--out", rl_out, "Output directory")->required();

  // bench
  auto* bench = app.add_subcommand("bench", "Seeded multi-run comparison on a discrete benchmark");
  std::string bench_config;
  std::string bench_benchmark = "linear";
  std::size_t bench_n = 500;
  double bench_gamma = 0.995;
  std::vector<std::string> bench_algos;
  std::size_t bench_runs = 1;
  std::uint64_t bench_seed = 0;
  std::size_t bench_iters = 10000;
  std::optional<double> bench_budget;
  std::size_t bench_every = 0;
  std::size_t bench_jobs = 1;
  bool bench_streaming = false;
  bool bench_record_cpu = false;
  std::string bench_out;
  bench->add_option("--config", bench_config, "JSON experiment config (flags given explicitly override it)");
  auto* o_bench_benchmark =
      bench->add_option("--benchmark", bench_benchmark, "linear | lock | grid | random")->capture_default_str();
  auto* o_bench_n = bench->add_option("--n", bench_n, "Benchmark size")->capture_default_str();
  auto* o_bench_gamma = bench->add_option("--gamma", bench_gamma, "Discount factor")->capture_default_str();
  auto* o_bench_algos = bench->add_option(
      "--algo", bench_algos,
      "Algorithm, repeatable: dpp-rl[:eta=X] | ql[:omega=W] | vi[:tol=T] (default: dpp-rl ql)");
  auto* o_bench_runs = bench->add_option("--runs", bench_runs, "Runs per algorithm")->capture_default_str();
  auto* o_bench_seed = bench->add_option("--seed", bench_seed, "Seed base; run r uses base XOR r")
                           ->capture_default_str();
  auto* o_bench_iters = bench->add_option("--budget-iterations", bench_iters,
                                          "Samples per pair, i.e. iterations of DPP-RL and QL")
                            ->capture_default_str();
  auto* o_bench_budget =
      bench->add_option("--budget-seconds", bench_budget, "Stop each run after this much solver cpu time");
  auto* o_bench_every = bench->add_option("--loss-every", bench_every, "Loss cadence (0: max(1, K/200))")
                            ->capture_default_str();
  auto* o_bench_jobs = bench->add_option("--jobs", bench_jobs, "Worker threads")->capture_default_str();
  auto* o_bench_streaming =
      bench->add_flag("--streaming", bench_streaming, "Regenerate sample columns instead of storing them");
  bench->add_flag("--record-cpu", bench_record_cpu,
                  "Write measured cpu_seconds into results.csv (otherwise 0; timings go to timing.csv)");
  bench->add_option("--out", bench_out, "Output directory")->required();

  // replacement
  auto* repl = app.add_subcommand("replacement", "SADPP / RFQI on the optimal replacement problem");
  EnvFlags repl_env;
  std::string repl_algo = "sadpp";
  ReplacementConfig repl_cfg;
  std::string repl_eta = "1";
  std::string repl_out;
  repl_env.add_to(*repl);
  repl->add_option("--algo", repl_algo, "sadpp | rfqi")
      ->check(CLI::IsMember({"sadpp", "rfqi"}))
      ->capture_default_str();
  repl->add_option("--N", repl_cfg.n_samples, "Samples per iteration")->capture_default_str();
  repl->add_option("--iters", repl_cfg.iterations, "Iterations")->capture_default_str();
  repl->add_option("--runs", repl_cfg.n_runs, "Runs")->capture_default_str();
  repl->add_option("--seed", repl_cfg.seed_base, "Seed base; run r uses base XOR r")->capture_default_str();
  repl->add_option("--eta", repl_eta, "SADPP inverse temperature")->capture_default_str();
  repl->add_option("--alpha", repl_cfg.alpha, "Ridge coefficient")->capture_default_str();
  repl->add_option("--centers", repl_cfg.n_centers, "RBF centers per action")->capture_default_str();
  repl->add_option("--bins", repl_cfg.n_bins, "Bins of the error measure")->capture_default_str();
  repl->add_option("--jobs", repl_cfg.jobs, "Worker threads")->capture_default_str();
  repl->add_option("--out", repl_out, "Output directory")->required();

  // sadpp (grid search)
  auto* tune = app.add_subcommand("sadpp", "Grid search of (eta, alpha) on the replacement problem");
  EnvFlags tune_env;
  std::string tune_algo = "sadpp";
  ReplacementConfig tune_cfg;
  tune_cfg.n_runs = 5;
  tune_cfg.seed_base = 1000;
  std::vector<std::string> tune_etas{"0.1", "1", "10"};
  std::vector<double> tune_alphas{1e-4, 1e-3, 1e-2};
  std::string tune_out;
  tune_env.add_to(*tune);
  tune->add_option("--algo", tune_algo, "sadpp | rfqi")
      ->check(CLI::IsMember({"sadpp", "rfqi"}))
      ->capture_default_str();
  tune->add_option("--N", tune_cfg.n_samples, "Samples per iteration")->capture_default_str();
  tune->add_option("--iters", tune_cfg.iterations, "Iterations")->capture_default_str();
  tune->add_option("--runs", tune_cfg.n_runs, "Tuning runs per grid point")->capture_default_str();
  tune->add_option("--seed", tune_cfg.seed_base, "Tuning seed base")->capture_default_str();
  tune->add_option("--eta-grid", tune_etas, "Inverse temperatures to try")->capture_default_str();
  tune->add_option("--alpha-grid", tune_alphas, "Ridge coefficients to try")->capture_default_str();
  tune->add_option("--jobs", tune_cfg.jobs, "Worker threads")->capture_default_str();
  tune->add_option("--out", tune_out, "Output directory")->required();

  // bound-check
  auto* bound = app.add_subcommand("bound-check", "Check exact DPP losses against the loss bound");
  std::size_t bound_s = 10;
  std::size_t bound_a = 3;
  double bound_gamma = 0.9;
  std::string bound_eta = "inf";
  std::size_t bound_k = 500;
  std::uint64_t bound_seed = 0;
  std::size_t bound_instances = 1;
  bound->add_option("--S", bound_s, "States of the random MDPs")->capture_default_str();
  bound->add_option("--A", bound_a, "Actions of the random MDPs")->capture_default_str();
  bound->add_option("--gamma", bound_gamma, "Discount factor")->capture_default_str();
  bound->add_option("--eta", bound_eta, "Inverse temperature (number or inf)")->capture_default_str();
  bound->add_option("--k", bound_k, "Iterations")->capture_default_str();
  bound->add_option("--seed", bound_seed, "Seed of the first instance")->capture_default_str();
  bound->add_option("--instances", bound_instances, "Random MDPs to check")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*generate) {
      save_mdp(gen_src.load(), gen_out);
      return 0;
    }

    if (*solve) {
      const TabularMdp mdp = solve_src.load();
      const InverseTemperature eta = InverseTemperature::parse(solve_eta);
      const QTable q_star = optimal_q(mdp);
      TrackingOptions tracking;
      tracking.q_star = &q_star;
      tracking.loss_every = std::max<std::size_t>(1, solve_every);
      Rng rng(solve_seed);
      const Preferences psi0 = solve_init == "zero"
                                   ? Preferences(mdp.n_states(), mdp.n_actions(), 0.0)
                                   : random_preferences(mdp, rng);
      std::vector<LossPoint> points;
      if (solve_algo == "dpp") {
        points = dpp_run(mdp, psi0, eta, solve_iters, tracking).losses;
      } else if (solve_algo == "noisy-dpp") {
        points = noisy_dpp_run(mdp, psi0, eta, solve_iters, NoiseSpec::uniform(solve_noise),
                               solve_seed, tracking)
                     .losses;
      } else if (solve_algo == "noisy-avi") {
        points = noisy_avi_run(mdp, QTable(psi0), solve_iters, NoiseSpec::uniform(solve_noise),
                               solve_seed, tracking)
                     .losses;
      } else {
        PolicyLossEvaluator loss(mdp, q_star, tracking.eval_tol);
        points.push_back({0, 0.0, loss(greedy_policy(q_star))});
      }
      fs::create_directories(solve_out);
      write_trajectory_csv(fs::path(solve_out) / "trajectory.csv", to_rows(solve_algo, solve_seed, points));
      print_last(points);
      return 0;
    }

    if (*rl) {
      const TabularMdp mdp = rl_src.load();
      const QTable q_star = optimal_q(mdp);
      const GenerativeSampleSet samples(mdp, rl_samples, rl_seed,
                                        rl_streaming ? GenerativeSampleSet::Storage::Streaming
                                                     : GenerativeSampleSet::Storage::Materialized);
      if (!rl_save_samples.empty()) {
        const fs::path parent = fs::path(rl_save_samples).parent_path();
        if (!parent.empty()) fs::create_directories(parent);
        samples.save(rl_save_samples);
      }
      TrackingOptions tracking;
      tracking.q_star = &q_star;
      tracking.loss_every = rl_every != 0 ? rl_every : std::max<std::size_t>(1, rl_samples / 200);
      Rng rng(mix64(rl_seed ^ 0x5EEDF00DULL));
      const double v = mdp.v_max();
      const StateActionTable init = uniform_table(mdp.n_states(), mdp.n_actions(), -v, v, rng);
      std::vector<LossPoint> points;
      fs::create_directories(rl_out);
      if (rl_algo == "dpp-rl") {
        const RlRunResult res = dpp_rl_run(mdp, Preferences(init), InverseTemperature::parse(rl_eta),
                                           samples, tracking);
        points = res.losses;
        std::vector<std::vector<std::string>> rows;
        for (std::size_t k = 0; k < res.backup_norms.size(); ++k) {
          rows.push_back({std::to_string(k), format_double(res.backup_norms[k])});
        }
        write_csv(fs::path(rl_out) / "backup_norms.csv", {"iteration", "backup_norm"}, rows);
      } else if (rl_algo == "ql") {
        points = q_learning_sync_run(mdp, QlConfig{rl_omega}, QTable(init), samples, tracking).losses;
      } else {
        tracking.loss_every = 1;
        points = model_based_vi_run(mdp, samples, 1'000'000, 1e-8 * std::max(v, 1e-300), tracking).losses;
      }
      write_trajectory_csv(fs::path(rl_out) / "trajectory.csv", to_rows(rl_algo, rl_seed, points));
      print_last(points);
      return 0;
    }

    if (*bench) {
      ExperimentConfig cfg;
      if (!bench_config.empty()) {
        std::ifstream in(bench_config);
        if (!in) throw ConfigError("cannot open config " + bench_config);
        nlohmann::json doc;
        try {
          in >> doc;
        } catch (const nlohmann::json::exception& e) {
          throw ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
        cfg = config_from_json(doc);
      }
      const bool from_file = !bench_config.empty();
      auto given = [&](const CLI::Option* o) { return !from_file || o->count() > 0; };
      if (given(o_bench_benchmark)) cfg.benchmark.id = parse_benchmark(bench_benchmark);
      if (given(o_bench_n)) cfg.benchmark.size = bench_n;
      if (given(o_bench_gamma)) cfg.benchmark.gamma = bench_gamma;
      if (o_bench_algos->count() > 0) {
        cfg.algorithms.clear();
        for (const auto& a : bench_algos) cfg.algorithms.push_back(parse_algorithm(a));
      } else if (cfg.algorithms.empty()) {
        cfg.algorithms = {parse_algorithm("dpp-rl"), parse_algorithm("ql")};
      }
      if (given(o_bench_runs)) cfg.n_runs = bench_runs;
      if (given(o_bench_seed)) cfg.seed_base = bench_seed;
      if (given(o_bench_iters)) cfg.samples_per_pair = bench_iters;
      if (o_bench_budget->count() > 0) cfg.budget_seconds = bench_budget;
      if (given(o_bench_every)) cfg.loss_every = bench_every;
      if (given(o_bench_jobs)) cfg.jobs = bench_jobs;
      if (o_bench_streaming->count() > 0) cfg.storage = GenerativeSampleSet::Storage::Streaming;
      validate(cfg);
      const auto records = run_experiment(cfg);
      const bool record_cpu = bench_record_cpu || cfg.budget_seconds.has_value();
      write_experiment(bench_out, cfg, records, record_cpu);
      for (std::size_t i = 0; i < cfg.algorithms.size(); ++i) {
        std::span<const RunRecord> group(records.data() + i * cfg.n_runs, cfg.n_runs);
        const MeanStd s = aggregate_final(group);
        std::cout << group.front().algorithm << " " << group.front().params << ": mean final loss "
                  << format_double(s.mean) << " (std " << format_double(s.std) << ")\n";
      }
      return 0;
    }

    if (*repl) {
      repl_cfg.env = repl_env.env;
      repl_cfg.algorithm = parse_fitted_algorithm(repl_algo);
      repl_cfg.eta = InverseTemperature::parse(repl_eta);
      validate(repl_cfg);
      const auto records = run_replacement(repl_cfg);
      const ReplacementSummary summary = summarize_replacement(records, repl_cfg.iterations / 2 + 1);
      const fs::path out(repl_out);
      fs::create_directories(out);
      write_replacement_csv(out / "replacement.csv", repl_cfg, records);
      write_replacement_summary_csv(out / "replacement_summary.csv", repl_cfg, summary);
      write_theta_checkpoints(out / "thetas.json", repl_cfg, records);
      write_json(out / "manifest.json",
                 {{"schema_version", kCsvSchemaVersion},
                  {"algorithm", repl_algo},
                  {"N", repl_cfg.n_samples},
                  {"iterations", repl_cfg.iterations},
                  {"runs", repl_cfg.n_runs},
                  {"seed_base", repl_cfg.seed_base},
                  {"eta", repl_cfg.eta.to_string()},
                  {"alpha", repl_cfg.alpha},
                  {"n_centers", repl_cfg.n_centers},
                  {"n_bins", repl_cfg.n_bins},
                  {"env",
                   {{"beta", repl_cfg.env.beta},
                    {"cost", repl_cfg.env.cost},
                    {"slope", repl_cfg.env.slope},
                    {"gamma", repl_cfg.env.gamma},
                    {"x_max", repl_cfg.env.x_max}}},
                  {"threshold", optimal_threshold(repl_cfg.env).x_bar}});
      std::cout << "post-transient mean error " << format_double(summary.post_transient_mean)
                << " std " << format_double(summary.post_transient_std) << '\n';
      return 0;
    }

    if (*tune) {
      tune_cfg.env = tune_env.env;
      tune_cfg.algorithm = parse_fitted_algorithm(tune_algo);
      validate(tune_cfg);
      std::vector<InverseTemperature> etas;
      for (const auto& e : tune_etas) etas.push_back(InverseTemperature::parse(e));
      const TuningResult result = tune_replacement(tune_cfg, etas, tune_alphas);
      std::vector<std::vector<std::string>> rows;
      for (const auto& r : result.rows) {
        rows.push_back({r.eta.to_string(), format_double(r.alpha), format_double(r.score)});
      }
      fs::create_directories(tune_out);
      write_csv(fs::path(tune_out) / "tuning.csv", {"eta", "alpha", "score"}, rows);
      std::cout << "best eta " << result.best.eta.to_string() << " alpha "
                << format_double(result.best.alpha) << " score " << format_double(result.best.score)
                << '\n';
      return 0;
    }

    if (*bound) {
      const InverseTemperature eta = InverseTemperature::parse(bound_eta);
      std::size_t violations = 0;
      std::size_t checks = 0;
      double worst = 0.0;
      for (std::size_t i = 0; i < bound_instances; ++i) {
        const TabularMdp mdp = make_random_mdp(bound_s, bound_a, bound_gamma, bound_seed + i);
        const QTable q_star = optimal_q(mdp);
        Rng rng(mix64(bound_seed + i));
        const BoundCheckResult r = check_exact_dpp_bound(mdp, q_star, eta, bound_k,
                                                         random_preferences(mdp, rng));
        violations += r.violations;
        checks += r.checks;
        worst = std::max(worst, r.worst_ratio);
      }
      std::cout << "checks " << checks << " violations " << violations << " worst loss/bound "
                << format_double(worst) << '\n';
      return violations == 0 ? 0 : 1;
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kUsageError;
  } catch (const InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
