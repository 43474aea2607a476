#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dpp {

/// Sharpness of the soft-max operators. Infinity is a first-class value and
/// turns every soft-max into a hard max (greedy policy, lowest index on ties).
class InverseTemperature {
 public:
  explicit InverseTemperature(double value);

  static InverseTemperature infinity();
  /// Accepts "inf", "infinity" or a positive number.
  static InverseTemperature parse(std::string_view text);

  bool is_infinite() const noexcept;
  double value() const noexcept { return value_; }
  /// log(L)/eta, or 0 when eta is infinite.
  double entropy_slack(std::size_t n_actions) const;
  std::string to_string() const;

  friend bool operator==(const InverseTemperature&, const InverseTemperature&) = default;

 private:
  double value_;
};

/// Dense row-major real matrix indexed [state][action].
class StateActionTable {
 public:
  StateActionTable() = default;
  StateActionTable(std::size_t n_states, std::size_t n_actions, double fill = 0.0);
  StateActionTable(std::size_t n_states, std::size_t n_actions, std::vector<double> values);

  std::size_t n_states() const noexcept { return n_states_; }
  std::size_t n_actions() const noexcept { return n_actions_; }
  std::size_t size() const noexcept { return values_.size(); }

  double& operator()(std::size_t x, std::size_t a) { return values_[x * n_actions_ + a]; }
  double operator()(std::size_t x, std::size_t a) const { return values_[x * n_actions_ + a]; }

  std::span<double> row(std::size_t x) { return {values_.data() + x * n_actions_, n_actions_}; }
  std::span<const double> row(std::size_t x) const {
    return {values_.data() + x * n_actions_, n_actions_};
  }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  bool same_shape(const StateActionTable& other) const noexcept {
    return n_states_ == other.n_states_ && n_actions_ == other.n_actions_;
  }
  /// Largest absolute entry.
  double sup_norm() const noexcept;

  friend bool operator==(const StateActionTable&, const StateActionTable&) = default;

 private:
  std::size_t n_states_ = 0;
  std::size_t n_actions_ = 0;
  std::vector<double> values_;
};

/// Action-value function Q(x,a).
class QTable : public StateActionTable {
 public:
  using StateActionTable::StateActionTable;
  explicit QTable(StateActionTable table) : StateActionTable(std::move(table)) {}
};

/// Action preferences Psi(x,a).
class Preferences : public StateActionTable {
 public:
  using StateActionTable::StateActionTable;
  explicit Preferences(StateActionTable table) : StateActionTable(std::move(table)) {}
};

/// Magnitude at which preference entries are clamped after every update.
/// Far beyond anything exp() can resolve, so soft-max outputs are unaffected.
inline constexpr double kPreferenceClamp = 1e9;

void clamp_preferences(Preferences& psi) noexcept;

/// Row-stochastic table pi(a|x). Rows are validated on construction.
class StochasticPolicy {
 public:
  /// Throws InvalidInput if a row has a negative entry or does not sum to 1 within 1e-12.
  explicit StochasticPolicy(StateActionTable probabilities);

  static StochasticPolicy uniform(std::size_t n_states, std::size_t n_actions);
  static StochasticPolicy deterministic(std::span<const std::size_t> actions,
                                        std::size_t n_actions);

  std::size_t n_states() const noexcept { return table_.n_states(); }
  std::size_t n_actions() const noexcept { return table_.n_actions(); }
  double operator()(std::size_t x, std::size_t a) const { return table_(x, a); }
  std::span<const double> row(std::size_t x) const { return table_.row(x); }
  const StateActionTable& table() const noexcept { return table_; }

  /// Most probable action per state, lowest index on ties.
  std::vector<std::size_t> modal_actions() const;

  friend bool operator==(const StochasticPolicy&, const StochasticPolicy&) = default;

 private:
  StateActionTable table_;
};

struct Successor {
  std::uint32_t state;
  double probability;
};

/// Successor list of one state-action pair (parallel arrays).
struct SuccessorRow {
  std::span<const std::uint32_t> states;
  std::span<const double> probabilities;

  std::size_t size() const noexcept { return states.size(); }
};

/// Finite discounted MDP. Transitions are stored sparsely, one successor
/// list per (x,a); rows are validated once at construction.
class TabularMdp {
 public:
  /// Appends successor rows in (x,a) row-major order.
  class Builder {
   public:
    Builder(std::size_t n_states, std::size_t n_actions, double gamma);

    /// Zero-probability entries are dropped. Validation happens in finish().
    void append_row(std::span<const Successor> row);
    TabularMdp finish(StateActionTable rewards) &&;

   private:
    std::size_t n_states_;
    std::size_t n_actions_;
    double gamma_;
    std::vector<std::size_t> offsets_{0};
    std::vector<std::uint32_t> next_;
    std::vector<double> prob_;
  };

  /// transitions[x][a][y], rewards[x][a].
  static TabularMdp from_dense(const std::vector<std::vector<std::vector<double>>>& transitions,
                               const std::vector<std::vector<double>>& rewards, double gamma);

  std::size_t n_states() const noexcept { return rewards_.n_states(); }
  std::size_t n_actions() const noexcept { return rewards_.n_actions(); }
  double gamma() const noexcept { return gamma_; }
  double r_max() const noexcept { return r_max_; }
  /// R_max / (1 - gamma).
  double v_max() const noexcept { return r_max_ / (1.0 - gamma_); }

  double reward(std::size_t x, std::size_t a) const { return rewards_(x, a); }
  const StateActionTable& rewards() const noexcept { return rewards_; }

  SuccessorRow successors(std::size_t x, std::size_t a) const;
  double probability(std::size_t x, std::size_t a, std::size_t y) const;
  std::size_t nonzeros() const noexcept { return next_.size(); }

  /// Expected next-state value sum_y P(y|x,a) v(y).
  double expected_next(std::size_t x, std::size_t a, std::span<const double> v) const;

 private:
  TabularMdp(std::vector<std::size_t> offsets, std::vector<std::uint32_t> next,
             std::vector<double> prob, StateActionTable rewards, double gamma);

  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> next_;
  std::vector<double> prob_;
  StateActionTable rewards_;
  double gamma_;
  double r_max_;
};

// ---------------------------------------------------------------------------
// Soft-max machinery. All exponentials are shifted by the row maximum.

/// (1/eta) log sum_a exp(eta psi_a). Returns max(psi) for infinite eta.
double log_sum_exp_backup(std::span<const double> psi, InverseTemperature eta);

/// sum_a softmax(eta psi)_a psi_a. Returns max(psi) for infinite eta.
double boltzmann_softmax_backup(std::span<const double> psi, InverseTemperature eta);

/// Writes softmax(eta psi) into out; greedy one-hot (lowest index) for infinite eta.
void softmax_row(std::span<const double> psi, InverseTemperature eta, std::span<double> out);

StochasticPolicy softmax_policy(const Preferences& psi, InverseTemperature eta);

/// Greedy deterministic policy w.r.t. q, lowest action index on ties.
StochasticPolicy greedy_policy(const StateActionTable& q);

std::size_t argmax_lowest(std::span<const double> row) noexcept;

/// (pi q)(x) = sum_a pi(a|x) q(x,a).
std::vector<double> policy_state_values(const StochasticPolicy& pi, const StateActionTable& q);

/// (M q)(x) = max_a q(x,a).
std::vector<double> max_state_values(const StateActionTable& q);

// ---------------------------------------------------------------------------
// Bellman operators.

/// T^pi Q = r + gamma P^pi Q.
QTable bellman_policy_backup(const TabularMdp& mdp, const QTable& q, const StochasticPolicy& pi);

/// T Q = r + gamma P M Q.
QTable bellman_optimality_backup(const TabularMdp& mdp, const QTable& q);

/// Q^pi by fixed-point iteration of T^pi, started from `initial` (zero when
/// absent). The result satisfies ||Q - T^pi Q|| <= tol.
QTable evaluate_policy(const TabularMdp& mdp, const StochasticPolicy& pi, double tol,
                       const QTable* initial = nullptr);

/// Q^pi from a dense LU solve of (I - gamma P^pi) V = r^pi. O(S^3); meant
/// for small and medium state spaces.
QTable evaluate_policy_direct(const TabularMdp& mdp, const StochasticPolicy& pi);

/// Value iteration from zero, stopped when ||Q - Q*|| <= tol is guaranteed.
QTable optimal_q(const TabularMdp& mdp, double tol);
/// Same with the default tolerance 1e-8 * V_max.
QTable optimal_q(const TabularMdp& mdp);

/// max_{x,a} |a - b|.
double linf_loss(const StateActionTable& q_star, const StateActionTable& q_pi);

/// ||Q* - Q^pi|| for a sequence of policies. Remembers the last policy it
/// evaluated (identical policies are not re-evaluated). Up to
/// kDirectSolveStates states, Q^pi comes from evaluate_policy_direct followed
/// by a certifying evaluate_policy pass; larger MDPs warm-start evaluate_policy
/// from the previous Q^pi. Holds a reference to the mdp.
class PolicyLossEvaluator {
 public:
  static constexpr std::size_t kDirectSolveStates = 1000;

  PolicyLossEvaluator(const TabularMdp& mdp, QTable q_star, double tol);

  double operator()(const StochasticPolicy& pi);
  const QTable& q_star() const noexcept { return q_star_; }

 private:
  const TabularMdp* mdp_;
  QTable q_star_;
  double tol_;
  std::optional<StochasticPolicy> last_policy_;
  QTable last_q_;
  double last_loss_ = 0.0;
};

}  // namespace dpp
