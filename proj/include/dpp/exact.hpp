#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dpp/mdp.hpp"
#include "dpp/random.hpp"
#include "dpp/trajectory.hpp"

namespace dpp {

/// Value and policy of one KL-penalized backup against a baseline policy.
struct KlBackupResult {
  std::vector<double> value;
  StochasticPolicy policy;
};

/// value[x]  = (1/eta) log sum_a base(a|x) exp(eta (r + gamma P v)(x,a))
/// policy    = base * exp(eta (r + gamma P v)), normalized per state.
/// eta must be finite.
KlBackupResult kl_regularized_backup(const TabularMdp& mdp, const StochasticPolicy& baseline,
                                     std::span<const double> v, InverseTemperature eta);

struct DppState {
  Preferences psi;
  /// Completed applications of the DPP operator.
  std::size_t iteration = 0;
};

/// Psi'(x,a) = Psi(x,a) + r(x,a) + gamma (P M_eta Psi)(x,a) - M_eta Psi(x),
/// synchronously over all pairs, then clamped to +-kPreferenceClamp.
DppState dpp_step(const TabularMdp& mdp, const DppState& state, InverseTemperature eta);

/// Writes the DPP operator applied to `psi` into `out` (may not alias).
void apply_dpp_operator(const TabularMdp& mdp, const Preferences& psi, InverseTemperature eta,
                        Preferences& out);

/// Auxiliary action-values used to analyse DPP:
///   Q_k = ((k-1)/k) T^{pi_{k-1}} Q_{k-1} + (1/k) T^{pi_{k-1}} Q_0,   k >= 1.
QTable auxiliary_q_step(const TabularMdp& mdp, const QTable& q_prev, const QTable& q0,
                        const StochasticPolicy& pi_prev, std::size_t k);

/// Same recursion for noisy iterates: adds E_{k-1}/k, the accumulated error
/// through iteration k-1.
QTable auxiliary_q_step(const TabularMdp& mdp, const QTable& q_prev, const QTable& q0,
                        const StochasticPolicy& pi_prev, std::size_t k,
                        const StateActionTable& accumulated_error_prev);

/// Finite-iteration performance-loss bound of exact DPP:
///   2 gamma (4 V_max + log(L)/eta) / ((1-gamma)^2 (k+1)),  log(L)/eta := 0 at eta = inf.
double exact_dpp_loss_bound(double v_max, std::size_t n_actions, InverseTemperature eta,
                            double gamma, std::size_t k);

/// Loss bound of approximate DPP given ||E_j|| for j = 0..k:
///   [2 gamma (4 V_max + log(L)/eta)/(1-gamma) + sum_j gamma^{k-j} ||E_j||] / ((1-gamma)(k+1)).
double approximate_dpp_loss_bound(double v_max, std::size_t n_actions, InverseTemperature eta,
                                  double gamma, std::size_t k,
                                  std::span<const double> accumulated_error_norms);

/// Uniform in [-V_max, V_max].
Preferences random_preferences(const TabularMdp& mdp, Rng& rng);

struct ExactRunResult {
  StochasticPolicy policy;
  Preferences psi;
  std::vector<LossPoint> losses;
};

/// K applications of the DPP operator starting at psi0 (||psi0|| <= V_max).
ExactRunResult dpp_run(const TabularMdp& mdp, const Preferences& psi0, InverseTemperature eta,
                       std::size_t iterations, const TrackingOptions& tracking = {});

struct NoiseSpec {
  enum class Kind { None, UniformIid };
  Kind kind = Kind::None;
  /// Bound U; UniformIid draws every entry independently from [-U, U].
  double magnitude = 0.0;

  static NoiseSpec none() { return {}; }
  static NoiseSpec uniform(double u) { return {Kind::UniformIid, u}; }
};

struct NoisyRunResult {
  StochasticPolicy policy;
  std::vector<LossPoint> losses;
  /// ||E_k|| / (k+1) for k = 0..K-1, where E_k is the accumulated injected noise.
  std::vector<double> average_error;
};

/// Psi_{k+1} = O Psi_k + eps_k.
NoisyRunResult noisy_dpp_run(const TabularMdp& mdp, const Preferences& psi0,
                             InverseTemperature eta, std::size_t iterations, NoiseSpec noise,
                             std::uint64_t seed, const TrackingOptions& tracking = {});

/// Approximate value iteration Q_{k+1} = T Q_k + eps_k; losses are those of
/// the greedy policy of Q_k.
NoisyRunResult noisy_avi_run(const TabularMdp& mdp, const QTable& q0, std::size_t iterations,
                             NoiseSpec noise, std::uint64_t seed,
                             const TrackingOptions& tracking = {});

}  // namespace dpp
