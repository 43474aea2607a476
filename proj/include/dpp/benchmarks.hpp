#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dpp/fapprox.hpp"
#include "dpp/mdp.hpp"
#include "dpp/random.hpp"

namespace dpp {

// Discrete benchmarks. Action 0 is "-1" (left / reset) and action 1 is "+1"
// wherever the original actions are {-1, +1}.

/// Chain of n states; both ends absorbing. From an interior state k, action
/// a moves to l with (l-k)a > 0 with probability proportional to 1/|l-k|.
/// r(x,a) is the expected reward of the transition: +1 for entering an end
/// state, -1 for landing on an interior one. Absorbing self-loops pay 0.
/// Throws ConfigError for n < 3.
TabularMdp make_linear_mdp(std::size_t n_states, double gamma);

/// Stochastic combination lock with goal x_n (the last state). +1 from x_k
/// moves to x_{k+1} paying -0.01, or +1 when entering the goal. The reset
/// action moves to x_l, l < k, with probability proportional to 1/(k-l) and
/// pays 0; reset at x_1 stays put. The goal is absorbing and pays +1 per
/// step under either action.
/// Throws ConfigError for n < 3.
TabularMdp make_combination_lock(std::size_t n_states, double gamma);

/// side x side free cells surrounded by a ring of absorbing firewall cells,
/// so (side+2)^2 states in row-major order, coordinates (h, v) starting at
/// (1, 1) in the top-left corner. The center cell is absorbing with reward
/// -1; firewall x pays -1/||c_x||_2; free cells pay 0. Actions are
/// up/down/left/right: the neighbour in the action direction gets 0.6 and
/// the remaining 0.4 is spread over all cells y != x with weight
/// 1/||c_x - c_y||_2. Throws ConfigError unless side is odd and >= 3.
TabularMdp make_grid_world(std::size_t side, double gamma);

/// Dense random MDP: transition rows uniform(0,1) then normalized, rewards
/// uniform in [-1, 1].
TabularMdp make_random_mdp(std::size_t n_states, std::size_t n_actions, double gamma,
                           std::uint64_t seed);

// ---------------------------------------------------------------------------
// Optimal replacement problem on [0, x_max].

struct ReplacementEnv {
  double beta = 0.5;
  /// Replacement cost C.
  double cost = 30.0;
  /// Maintenance cost c(x) = slope * x.
  double slope = 4.0;
  double gamma = 0.6;
  double x_max = 10.0;

  /// Throws ConfigError on nonpositive beta/cost/slope/x_max or gamma outside [0,1).
  void validate() const;
  double maintenance(double x) const { return slope * x; }
  /// r(x,0) = -c(x), r(x,1) = -C - c(0).
  double reward(double x, std::size_t a) const;
};

/// Upper bound on boundary redraws per transition.
inline constexpr int kMaxReplacementRedraws = 100;

struct ReplacementStep {
  double next_x = 0.0;
  double reward = 0.0;
  /// Times the boundary rule fired.
  int redraws = 0;
};

/// Keep: y = x + Exp(beta). Replace: y = Exp(beta). Whenever y > x_max the
/// product is replaced on the spot: -C - c(0) is added to the reward and y is
/// redrawn from Exp(beta). Throws InvalidInput for x outside [0, x_max].
ReplacementStep replacement_sample(const ReplacementEnv& env, double x, std::size_t a, Rng& rng);

/// Density of replacement_sample's next state on [0, x_max], boundary rule included.
double replacement_density(const ReplacementEnv& env, double x, std::size_t a, double y);

/// x ~ U[0, x_max], a ~ U{0,1}, then one replacement_sample step.
TransitionSampler replacement_sampler(const ReplacementEnv& env);

struct ThresholdPolicy {
  double x_bar = 0.0;
  /// 0 (keep) iff x <= x_bar.
  std::size_t action(double x) const { return x <= x_bar ? 0 : 1; }
};

/// Integral_0^x c'(y)/(1-gamma) (1 - gamma e^{-beta(1-gamma)y}) dy in closed form.
double replacement_threshold_integral(const ReplacementEnv& env, double x);

/// Solves replacement_threshold_integral(x) = C by bisection on [0, x_max].
/// Throws ConfigError when there is no root in the domain.
ThresholdPolicy optimal_threshold(const ReplacementEnv& env);

/// x_k = (k - 1/2) x_max / K for k = 1..K.
std::vector<double> bin_centers(double x_max, std::size_t n_bins);

/// Fraction of the n_bins bin centers where `actions` differs from the threshold policy.
double policy_error(std::span<const std::size_t> actions, const ReplacementEnv& env,
                    const ThresholdPolicy& threshold, std::size_t n_bins);

}  // namespace dpp
