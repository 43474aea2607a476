#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dpp/mdp.hpp"
#include "dpp/trajectory.hpp"

namespace dpp {

/// Pre-drawn generative-model samples: for every (x,a), n_draws i.i.d.
/// successors y ~ P(.|x,a).
///
/// Draw k of pair (x,a) is a pure function of (seed, x, a, k): the uniform
/// counter_draw(seed, (x*A + a)*n_draws + k) pushed through the inverse CDF
/// of the successor row. The tensor can therefore be materialized (S*A*K*4
/// bytes) or regenerated column by column with identical contents.
class GenerativeSampleSet {
 public:
  enum class Storage { Materialized, Streaming };

  GenerativeSampleSet(const TabularMdp& mdp, std::size_t n_draws, std::uint64_t seed,
                      Storage storage = Storage::Materialized);

  std::size_t n_states() const noexcept { return n_states_; }
  std::size_t n_actions() const noexcept { return n_actions_; }
  std::size_t n_draws() const noexcept { return n_draws_; }
  std::uint64_t seed() const noexcept { return seed_; }
  Storage storage() const noexcept { return storage_; }

  /// Successor of draw k for pair (x,a).
  std::uint32_t next_state(std::size_t x, std::size_t a, std::size_t k) const;

  /// Fills `column` (length S*A, row-major [x][a]) with draw k of every pair.
  void column(std::size_t k, std::span<std::uint32_t> column) const;

  /// Raw little-endian uint32 tensor in [state][action][draw] order plus a
  /// JSON sidecar at <path>.json holding {n_states, n_actions, n_draws, seed}.
  void save(const std::filesystem::path& path) const;

 private:
  std::uint32_t draw(std::size_t pair, std::size_t k) const;

  std::size_t n_states_;
  std::size_t n_actions_;
  std::size_t n_draws_;
  std::uint64_t seed_;
  Storage storage_;
  std::vector<std::size_t> offsets_;     // per-pair CDF ranges
  std::vector<double> cdf_;
  std::vector<std::uint32_t> support_;
  std::vector<std::uint32_t> tensor_;    // [draw][pair] when materialized
};

/// Raw tensor loaded back from GenerativeSampleSet::save.
struct SampleTensorFile {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::size_t n_draws = 0;
  std::uint64_t seed = 0;
  std::vector<std::uint32_t> states;  // [state][action][draw]
};
SampleTensorFile load_sample_tensor(const std::filesystem::path& path);

/// One DPP-RL sweep:
///   Psi'(x,a) = Psi(x,a) + r(x,a) + gamma (pi Psi)(y(x,a)) - (pi Psi)(x),
/// with pi = softmax(eta Psi), so (pi Psi) = M_eta Psi. `next_states` holds
/// y(x,a) in row-major [x][a] order. There is no step size.
Preferences dpp_rl_step(const StateActionTable& rewards, const Preferences& psi,
                        std::span<const std::uint32_t> next_states, InverseTemperature eta,
                        double gamma);

/// In-place form used by the run loop. Returns max_{x,a} |r(x,a) + gamma M_eta Psi(y(x,a))|,
/// the sup norm of the sampled Bellman backup.
double dpp_rl_update(const StateActionTable& rewards, const Preferences& psi,
                     std::span<const std::uint32_t> next_states, InverseTemperature eta,
                     double gamma, Preferences& out);

struct RlRunResult {
  StochasticPolicy policy;
  std::vector<LossPoint> losses;
  /// DPP-RL only: sup norm of the sampled backup at every iteration.
  std::vector<double> backup_norms;
  std::size_t iterations_run = 0;
};

/// n_draws iterations of DPP-RL, consuming draw k at iteration k.
RlRunResult dpp_rl_run(const TabularMdp& mdp, const Preferences& psi0, InverseTemperature eta,
                       const GenerativeSampleSet& samples, const TrackingOptions& tracking = {});

struct QlConfig {
  /// Learning step alpha_k = 1/(k+1)^omega, omega in (0.5, 1].
  double omega = 0.51;
};

/// Throws ConfigError unless 0.5 < omega <= 1.
void validate(const QlConfig& cfg);

/// One synchronous Q-learning sweep with step alpha:
///   Q'(x,a) = (1-alpha) Q(x,a) + alpha (r(x,a) + gamma max_b Q(y(x,a), b)).
QTable q_learning_sync_step(const StateActionTable& rewards, const QTable& q,
                            std::span<const std::uint32_t> next_states, double alpha, double gamma);

/// Synchronous Q-learning:
///   Q_{k+1}(x,a) = (1-alpha_k) Q_k(x,a) + alpha_k (r(x,a) + gamma max_b Q_k(y_k, b)).
RlRunResult q_learning_sync_run(const TabularMdp& mdp, const QlConfig& cfg, const QTable& q0,
                                const GenerativeSampleSet& samples,
                                const TrackingOptions& tracking = {});

/// Empirical-frequency model of P built from all draws, with the true rewards and discount.
TabularMdp estimate_model(const TabularMdp& mdp, const GenerativeSampleSet& samples);

struct ModelBasedViResult {
  StochasticPolicy policy;
  /// Loss of the greedy policy after each value-iteration sweep on the fitted model.
  std::vector<LossPoint> losses;
  double final_loss = 0.0;
};

/// Fits the model from the whole sample set, then runs up to `vi_iterations`
/// sweeps of value iteration on it (stopping early once the fitted model's
/// Q* is within `vi_tol`). Losses are measured on the true MDP.
ModelBasedViResult model_based_vi_run(const TabularMdp& mdp, const GenerativeSampleSet& samples,
                                      std::size_t vi_iterations, double vi_tol,
                                      const TrackingOptions& tracking = {});

}  // namespace dpp
