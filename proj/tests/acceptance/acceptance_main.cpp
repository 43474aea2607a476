// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "dpp/benchmarks.hpp"
#include "dpp/exact.hpp"
#include "dpp/harness.hpp"
#include "dpp/mdp.hpp"
#include "dpp/random.hpp"
#include "dpp/rl.hpp"
#include "oracles.hpp"

using namespace dpp;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

InverseTemperature temp(double eta) {
  return std::isinf(eta) ? InverseTemperature::infinity() : InverseTemperature(eta);
}

// 1. exact loss bound on random MDPs
Verdict loss_bound_criterion() {
  std::size_t checks = 0;
  std::size_t violations = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    const std::size_t S = 5 + (i * 7) % 16;  // 5..20
    const std::size_t A = 2 + i % 3;         // 2..4
    const double gamma = i % 2 == 0 ? 0.5 : 0.9;
    const TabularMdp mdp = make_random_mdp(S, A, gamma, 5000 + i);
    const oracle::DenseMdp dense = oracle::densify(mdp);
    const oracle::Mat q_star = oracle::policy_iteration_q_star(dense);
    const double v_max = mdp.v_max();
    for (double eta : {1.0, 10.0, kInf}) {
      Rng rng(77 + i);
      DppState state{random_preferences(mdp, rng), 0};
      const double slack = std::isinf(eta) ? 0.0 : std::log(static_cast<double>(A)) / eta;
      for (std::size_t k = 0; k <= 500; ++k) {
        if (k > 0) state = dpp_step(mdp, state, temp(eta));
        const oracle::Mat pi = oracle::softmax_rows(oracle::to_mat(state.psi), eta);
        const double loss = oracle::sup_diff(q_star, oracle::exact_q_pi(dense, pi));
        const double bound = 2.0 * gamma * (4.0 * v_max + slack) /
                             ((1.0 - gamma) * (1.0 - gamma) * static_cast<double>(k + 1));
        ++checks;
        if (loss > bound) ++violations;
        worst = std::max(worst, loss / bound);
      }
    }
  }
  return {violations == 0,
          fmt("%zu checks, %zu violations, worst loss/bound %.3e", checks, violations, worst)};
}

// 2. exact DPP iterates against the auxiliary action-value expression
Verdict identity_criterion() {
  double worst = 0.0;
  double worst_policy = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    const std::size_t S = 4 + i;
    const std::size_t A = 2 + i % 3;
    const double gamma = i % 2 == 0 ? 0.9 : 0.6;
    const TabularMdp mdp = make_random_mdp(S, A, gamma, 6000 + i);
    Rng rng(i);
    const Preferences psi0 = random_preferences(mdp, rng);
    const double eta = i % 3 == 0 ? 0.5 : (i % 3 == 1 ? 1.0 : 10.0);
    const auto r = oracle::check_auxiliary_identity(mdp, psi0, eta, 50);
    worst = std::max(worst, r.max_relative_error);
    worst_policy = std::max(worst_policy, r.max_policy_error);
  }
  return {worst <= 1e-8, fmt("max relative error %.3e (policy rows %.3e), tolerance 1e-8", worst,
                             worst_policy)};
}

// 3. soft-max inequalities
Verdict softmax_criterion() {
  Rng rng(31337);
  std::size_t checks = 0;
  std::size_t violations = 0;
  for (std::size_t L : {2, 4, 16}) {
    std::vector<double> v(L);
    for (int n = 0; n < 10000; ++n) {
      const double scale = std::pow(10.0, rng.uniform(-2.0, 3.0));
      for (double& e : v) e = rng.uniform(-scale, scale);
      const double mx = *std::max_element(v.begin(), v.end());
      for (double eta : {0.1, 1.0, 10.0}) {
        const double m = boltzmann_softmax_backup(v, InverseTemperature(eta));
        const double l = log_sum_exp_backup(v, InverseTemperature(eta));
        const double slack = std::log(static_cast<double>(L)) / eta;
        // one ulp of the operands is allowed for rounding
        const double ulp = 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(mx));
        checks += 2;
        if (mx - m < -ulp || mx - m > slack + ulp) ++violations;
        if (std::abs(l - m) > slack + ulp) ++violations;
      }
    }
  }
  return {violations == 0, fmt("%zu checks, %zu violations", checks, violations)};
}

// 4. noisy DPP averages the noise out, noisy AVI does not
Verdict noise_criterion() {
  const TabularMdp mdp = make_random_mdp(20, 3, 0.9, 777);
  const QTable q_star = optimal_q(mdp, 1e-12);
  TrackingOptions track;
  track.q_star = &q_star;
  track.loss_every = 10;
  const std::size_t K = 20000;
  double dpp_final = 0.0;
  double avi_tail = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    Rng rng(s);
    const Preferences psi0 = random_preferences(mdp, rng);
    const QTable q0(uniform_table(20, 3, -mdp.v_max(), mdp.v_max(), rng));
    const auto d = noisy_dpp_run(mdp, psi0, InverseTemperature::infinity(), K, NoiseSpec::uniform(1.0),
                                 100 + s, track);
    const auto a = noisy_avi_run(mdp, q0, K, NoiseSpec::uniform(1.0), 100 + s, track);
    dpp_final += d.losses.back().loss / 10.0;
    double tail = 0.0;
    std::size_t n = 0;
    for (const LossPoint& p : a.losses) {
      if (4 * p.iteration >= 3 * K) {
        tail += p.loss;
        ++n;
      }
    }
    avi_tail += tail / static_cast<double>(n) / 10.0;
  }
  return {dpp_final < 0.1 * avi_tail,
          fmt("noisy DPP mean final loss %.3e, noisy AVI last-quarter mean %.3e (need < 0.1x)", dpp_final,
              avi_tail)};
}

// 5. DPP-RL sampled backups stay within V_max
Verdict stability_criterion() {
  const TabularMdp mdp = make_linear_mdp(500, 0.995);
  const double v_max = mdp.v_max();
  std::size_t checks = 0;
  std::size_t violations = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const GenerativeSampleSet samples(mdp, 10000, seed);
    Rng rng(seed + 1);
    const auto r = dpp_rl_run(mdp, random_preferences(mdp, rng), InverseTemperature::infinity(), samples);
    for (double b : r.backup_norms) {
      ++checks;
      if (b > v_max) ++violations;
      worst = std::max(worst, b);
    }
  }
  return {violations == 0 && checks == 50000,
          fmt("%zu iterations checked, %zu violations, largest backup %.6g vs V_max %.6g", checks, violations,
              worst, v_max)};
}

// 6. scaled comparison on the chain and the lock
ExperimentConfig ordering_config(BenchmarkId id) {
  ExperimentConfig cfg;
  cfg.benchmark.id = id;
  cfg.benchmark.size = 500;
  cfg.benchmark.gamma = 0.995;
  cfg.algorithms = {parse_algorithm("dpp-rl"), parse_algorithm("ql:omega=0.51"),
                    parse_algorithm("ql:omega=0.75"), parse_algorithm("ql:omega=1")};
  cfg.n_runs = 20;
  cfg.samples_per_pair = 10000;
  cfg.seed_base = 2024;
  cfg.loss_every = cfg.samples_per_pair / 10;
  return cfg;
}

std::string run_orderings(const std::filesystem::path& dir, std::string& detail, bool& pass) {
  std::vector<RunRecord> all;
  pass = true;
  for (BenchmarkId id : {BenchmarkId::Linear, BenchmarkId::CombinationLock}) {
    const ExperimentConfig cfg = ordering_config(id);
    const auto records = run_experiment(cfg);
    std::vector<MeanStd> stats;
    for (std::size_t i = 0; i < cfg.algorithms.size(); ++i) {
      stats.push_back(aggregate_final(std::span<const RunRecord>(records).subspan(i * cfg.n_runs, cfg.n_runs)));
    }
    const bool ordered = stats[0].mean < stats[1].mean && stats[1].mean < stats[2].mean &&
                         stats[2].mean < stats[3].mean && stats[0].std < stats[1].std;
    pass = pass && ordered;
    detail += fmt("%s: dpp-rl %.3g(%.3g) ql.51 %.3g(%.3g) ql.75 %.3g(%.3g) ql1 %.3g(%.3g)%s; ",
                  to_string(id).c_str(), stats[0].mean, stats[0].std, stats[1].mean, stats[1].std,
                  stats[2].mean, stats[2].std, stats[3].mean, stats[3].std, ordered ? "" : " [out of order]");
    all.insert(all.end(), records.begin(), records.end());
  }
  std::filesystem::create_directories(dir);
  write_results_csv(dir / "results.csv", all, false);
  write_summary_csv(dir / "summary.csv", all);
  std::ifstream in(dir / "results.csv", std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 8. SADPP against RFQI on the replacement problem
Verdict replacement_criterion() {
  ReplacementConfig base;
  base.n_samples = 500;
  base.iterations = 100;
  base.n_centers = 10;

  ReplacementConfig tune = base;
  tune.n_runs = 5;
  tune.seed_base = 1000;
  const std::vector<InverseTemperature> etas{InverseTemperature(0.01), InverseTemperature(0.1),
                                             InverseTemperature(1.0), InverseTemperature(10.0),
                                             InverseTemperature::infinity()};
  const std::vector<double> alphas{1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
  tune.algorithm = FittedAlgorithm::Sadpp;
  const TuningRow sadpp_best = tune_replacement(tune, etas, alphas).best;
  tune.algorithm = FittedAlgorithm::Rfqi;
  const std::vector<InverseTemperature> one{InverseTemperature(1.0)};
  const TuningRow rfqi_best = tune_replacement(tune, one, alphas).best;

  const std::size_t start = base.iterations - 50 + 1;  // last 50 iterations
  ReplacementConfig s = base;
  s.n_runs = 20;
  s.seed_base = 0;
  s.algorithm = FittedAlgorithm::Sadpp;
  s.eta = sadpp_best.eta;
  s.alpha = sadpp_best.alpha;
  const ReplacementSummary sadpp = summarize_replacement(run_replacement(s), start);
  ReplacementConfig r = s;
  r.algorithm = FittedAlgorithm::Rfqi;
  r.alpha = rfqi_best.alpha;
  const ReplacementSummary rfqi = summarize_replacement(run_replacement(r), start);
  const bool pass = sadpp.post_transient_mean <= 0.15 && sadpp.post_transient_std <= rfqi.post_transient_std;
  return {pass, fmt("sadpp (eta=%s, alpha=%g) mean %.4f std %.4f; rfqi (alpha=%g) mean %.4f std %.4f",
                    sadpp_best.eta.to_string().c_str(), sadpp_best.alpha, sadpp.post_transient_mean,
                    sadpp.post_transient_std, rfqi_best.alpha, rfqi.post_transient_mean,
                    rfqi.post_transient_std)};
}

bool report(int id, double limit_seconds, const std::function<Verdict()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  bool pass = v.pass;
  std::string timing = fmt("%.1fs", secs);
  if (limit_seconds > 0.0) {
    timing += fmt(" (limit %.0fs)", limit_seconds);
    if (secs > limit_seconds) {
      pass = false;
      timing += " [too slow]";
    }
  }
  std::printf("%s criterion %d: %s [%s]\n", pass ? "PASS" : "FAIL", id, v.detail.c_str(), timing.c_str());
  std::fflush(stdout);
  return pass;
}

}  // namespace

int main() {
  bool ok = true;
  ok &= report(1, 60, loss_bound_criterion);
  ok &= report(2, 10, identity_criterion);
  ok &= report(3, 5, softmax_criterion);
  ok &= report(4, 120, noise_criterion);
  ok &= report(5, 0, stability_criterion);

  const auto out = std::filesystem::current_path() / "acceptance_out";
  std::string first_csv;
  ok &= report(6, 600, [&] {
    Verdict v;
    first_csv = run_orderings(out / "first", v.detail, v.pass);
    return v;
  });
  ok &= report(7, 1, [] {
    const double x = optimal_threshold(ReplacementEnv{}).x_bar;
    return Verdict{std::abs(x - 4.8665) <= 1e-3, fmt("threshold %.6f, expected 4.8665 +- 1e-3", x)};
  });
  ok &= report(8, 300, replacement_criterion);
  ok &= report(9, 0, [&] {
    Verdict v;
    bool unused = false;
    std::string detail;
    const std::string second = run_orderings(out / "second", detail, unused);
    v.pass = !first_csv.empty() && second == first_csv;
    v.detail = fmt("results.csv of two identical runs: %zu and %zu bytes, %s", first_csv.size(), second.size(),
                   v.pass ? "identical" : "different");
    return v;
  });
  return ok ? 0 : 1;
}
