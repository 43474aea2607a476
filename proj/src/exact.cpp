#include "dpp/exact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dpp/errors.hpp"
#include "recorder.hpp"

namespace dpp {

namespace {

void require_bounded_start(const TabularMdp& mdp, const StateActionTable& t, const char* what) {
  if (t.n_states() != mdp.n_states() || t.n_actions() != mdp.n_actions()) {
    throw InvalidInput(std::string(what) + ": initial table shape does not match the MDP");
  }
  if (t.sup_norm() > mdp.v_max() * (1.0 + 1e-12)) {
    throw InvalidInput(std::string(what) + ": initial table must be bounded by V_max");
  }
}

std::vector<double> softmax_state_values(const Preferences& psi, InverseTemperature eta) {
  std::vector<double> m(psi.n_states());
  for (std::size_t x = 0; x < psi.n_states(); ++x) m[x] = boltzmann_softmax_backup(psi.row(x), eta);
  return m;
}

}  // namespace

KlBackupResult kl_regularized_backup(const TabularMdp& mdp, const StochasticPolicy& baseline,
                                     std::span<const double> v, InverseTemperature eta) {
  if (eta.is_infinite()) throw InvalidInput("kl_regularized_backup: eta must be finite");
  if (baseline.n_states() != mdp.n_states() || baseline.n_actions() != mdp.n_actions()) {
    throw InvalidInput("kl_regularized_backup: baseline shape does not match the MDP");
  }
  if (v.size() != mdp.n_states()) throw InvalidInput("kl_regularized_backup: value length mismatch");

  const std::size_t S = mdp.n_states();
  const std::size_t A = mdp.n_actions();
  const double e = eta.value();
  std::vector<double> value(S);
  StateActionTable policy(S, A);
  std::vector<double> backup(A);
  for (std::size_t x = 0; x < S; ++x) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < A; ++a) {
      backup[a] = mdp.reward(x, a) + mdp.gamma() * mdp.expected_next(x, a, v);
      if (baseline(x, a) > 0.0) m = std::max(m, backup[a]);
    }
    if (!std::isfinite(m)) throw InvalidInput("kl_regularized_backup: baseline row is zero");
    double z = 0.0;
    for (std::size_t a = 0; a < A; ++a) {
      const double w = baseline(x, a) > 0.0 ? baseline(x, a) * std::exp(e * (backup[a] - m)) : 0.0;
      policy(x, a) = w;
      z += w;
    }
    for (std::size_t a = 0; a < A; ++a) policy(x, a) /= z;
    value[x] = m + std::log(z) / e;
  }
  return {std::move(value), StochasticPolicy(std::move(policy))};
}

void apply_dpp_operator(const TabularMdp& mdp, const Preferences& psi, InverseTemperature eta,
                        Preferences& out) {
  if (psi.n_states() != mdp.n_states() || psi.n_actions() != mdp.n_actions()) {
    throw InvalidInput("dpp operator: preference shape does not match the MDP");
  }
  if (!out.same_shape(psi)) out = Preferences(psi.n_states(), psi.n_actions());
  const std::vector<double> m = softmax_state_values(psi, eta);
  const double g = mdp.gamma();
  for (std::size_t x = 0; x < mdp.n_states(); ++x) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      out(x, a) = psi(x, a) + mdp.reward(x, a) + g * mdp.expected_next(x, a, m) - m[x];
    }
  }
  clamp_preferences(out);
}

DppState dpp_step(const TabularMdp& mdp, const DppState& state, InverseTemperature eta) {
  DppState next{Preferences(state.psi.n_states(), state.psi.n_actions()), state.iteration + 1};
  apply_dpp_operator(mdp, state.psi, eta, next.psi);
  return next;
}

QTable auxiliary_q_step(const TabularMdp& mdp, const QTable& q_prev, const QTable& q0,
                        const StochasticPolicy& pi_prev, std::size_t k) {
  if (k == 0) throw InvalidInput("auxiliary_q_step: k must be at least 1");
  const QTable t_prev = bellman_policy_backup(mdp, q_prev, pi_prev);
  const QTable t_init = bellman_policy_backup(mdp, q0, pi_prev);
  const double kd = static_cast<double>(k);
  QTable out(q0.n_states(), q0.n_actions());
  auto o = out.values();
  const auto p = t_prev.values();
  const auto i = t_init.values();
  for (std::size_t n = 0; n < o.size(); ++n) o[n] = ((kd - 1.0) / kd) * p[n] + i[n] / kd;
  return out;
}

QTable auxiliary_q_step(const TabularMdp& mdp, const QTable& q_prev, const QTable& q0,
                        const StochasticPolicy& pi_prev, std::size_t k,
                        const StateActionTable& accumulated_error_prev) {
  if (!accumulated_error_prev.same_shape(q0)) {
    throw InvalidInput("auxiliary_q_step: error table shape mismatch");
  }
  QTable out = auxiliary_q_step(mdp, q_prev, q0, pi_prev, k);
  const double kd = static_cast<double>(k);
  auto o = out.values();
  const auto e = accumulated_error_prev.values();
  for (std::size_t n = 0; n < o.size(); ++n) o[n] += e[n] / kd;
  return out;
}

double exact_dpp_loss_bound(double v_max, std::size_t n_actions, InverseTemperature eta,
                            double gamma, std::size_t k) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidInput("loss bound: gamma must lie in [0,1)");
  const double slack = eta.entropy_slack(n_actions);
  const double one_minus = 1.0 - gamma;
  return 2.0 * gamma * (4.0 * v_max + slack) /
         (one_minus * one_minus * static_cast<double>(k + 1));
}

double approximate_dpp_loss_bound(double v_max, std::size_t n_actions, InverseTemperature eta,
                                  double gamma, std::size_t k,
                                  std::span<const double> accumulated_error_norms) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidInput("loss bound: gamma must lie in [0,1)");
  if (accumulated_error_norms.size() != k + 1) {
    throw InvalidInput("loss bound: expected one accumulated-error norm per j = 0..k");
  }
  const double one_minus = 1.0 - gamma;
  const double exact_part = 2.0 * gamma * (4.0 * v_max + eta.entropy_slack(n_actions)) / one_minus;
  // Horner form of sum_j gamma^{k-j} ||E_j||.
  double discounted = 0.0;
  for (double e : accumulated_error_norms) discounted = gamma * discounted + e;
  return (exact_part + discounted) / (one_minus * static_cast<double>(k + 1));
}

Preferences random_preferences(const TabularMdp& mdp, Rng& rng) {
  const double v = mdp.v_max();
  return Preferences(uniform_table(mdp.n_states(), mdp.n_actions(), -v, v, rng));
}

ExactRunResult dpp_run(const TabularMdp& mdp, const Preferences& psi0, InverseTemperature eta,
                       std::size_t iterations, const TrackingOptions& tracking) {
  require_bounded_start(mdp, psi0, "dpp_run");
  detail::LossRecorder recorder(mdp, tracking, iterations);
  CpuStopwatch watch;
  watch.start();
  Preferences psi = psi0;
  Preferences next(psi.n_states(), psi.n_actions());
  std::size_t k = 0;
  recorder.record(k, watch, [&] { return softmax_policy(psi, eta); });
  while (k < iterations && !recorder.over_budget(watch)) {
    apply_dpp_operator(mdp, psi, eta, next);
    std::swap(psi, next);
    ++k;
    recorder.record(k, watch, [&] { return softmax_policy(psi, eta); });
  }
  recorder.record(k, watch, [&] { return softmax_policy(psi, eta); }, true);
  watch.stop();
  return {softmax_policy(psi, eta), std::move(psi), recorder.take()};
}

namespace {

class NoiseSource {
 public:
  NoiseSource(NoiseSpec spec, std::uint64_t seed) : spec_(spec), rng_(seed) {
    if (!(spec.magnitude >= 0.0)) throw InvalidInput("noise magnitude must be nonnegative");
  }

  bool active() const { return spec_.kind == NoiseSpec::Kind::UniformIid; }

  /// Adds a fresh draw to every entry of `target` and to `accumulated`.
  void inject(StateActionTable& target, StateActionTable& accumulated) {
    if (!active()) return;
    auto t = target.values();
    auto e = accumulated.values();
    for (std::size_t n = 0; n < t.size(); ++n) {
      const double eps = rng_.uniform(-spec_.magnitude, spec_.magnitude);
      t[n] += eps;
      e[n] += eps;
    }
  }

 private:
  NoiseSpec spec_;
  Rng rng_;
};

}  // namespace

NoisyRunResult noisy_dpp_run(const TabularMdp& mdp, const Preferences& psi0,
                             InverseTemperature eta, std::size_t iterations, NoiseSpec noise,
                             std::uint64_t seed, const TrackingOptions& tracking) {
  require_bounded_start(mdp, psi0, "noisy_dpp_run");
  NoiseSource source(noise, seed);
  detail::LossRecorder recorder(mdp, tracking, iterations);
  CpuStopwatch watch;
  watch.start();
  Preferences psi = psi0;
  Preferences next(psi.n_states(), psi.n_actions());
  StateActionTable accumulated(psi.n_states(), psi.n_actions(), 0.0);
  std::vector<double> average_error;
  average_error.reserve(iterations);
  std::size_t k = 0;
  recorder.record(k, watch, [&] { return softmax_policy(psi, eta); });
  while (k < iterations && !recorder.over_budget(watch)) {
    apply_dpp_operator(mdp, psi, eta, next);
    source.inject(next, accumulated);
    clamp_preferences(next);
    std::swap(psi, next);
    average_error.push_back(accumulated.sup_norm() / static_cast<double>(k + 1));
    ++k;
    recorder.record(k, watch, [&] { return softmax_policy(psi, eta); });
  }
  recorder.record(k, watch, [&] { return softmax_policy(psi, eta); }, true);
  watch.stop();
  return {softmax_policy(psi, eta), recorder.take(), std::move(average_error)};
}

NoisyRunResult noisy_avi_run(const TabularMdp& mdp, const QTable& q0, std::size_t iterations,
                             NoiseSpec noise, std::uint64_t seed, const TrackingOptions& tracking) {
  require_bounded_start(mdp, q0, "noisy_avi_run");
  NoiseSource source(noise, seed);
  detail::LossRecorder recorder(mdp, tracking, iterations);
  CpuStopwatch watch;
  watch.start();
  QTable q = q0;
  StateActionTable accumulated(q.n_states(), q.n_actions(), 0.0);
  std::vector<double> average_error;
  average_error.reserve(iterations);
  std::size_t k = 0;
  recorder.record(k, watch, [&] { return greedy_policy(q); });
  while (k < iterations && !recorder.over_budget(watch)) {
    q = bellman_optimality_backup(mdp, q);
    source.inject(q, accumulated);
    average_error.push_back(accumulated.sup_norm() / static_cast<double>(k + 1));
    ++k;
    recorder.record(k, watch, [&] { return greedy_policy(q); });
  }
  recorder.record(k, watch, [&] { return greedy_policy(q); }, true);
  watch.stop();
  return {greedy_policy(q), recorder.take(), std::move(average_error)};
}

}  // namespace dpp
