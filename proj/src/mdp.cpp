#include "dpp/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "dpp/errors.hpp"

namespace dpp {

namespace {

constexpr double kRowSumTolerance = 1e-12;
// Safety net only; every stopping rule below is reached long before this.
constexpr std::size_t kMaxSweeps = 50'000'000;

double max_of(std::span<const double> row) {
  return *std::max_element(row.begin(), row.end());
}

void require_shape(const StateActionTable& a, const StateActionTable& b, const char* what) {
  if (!a.same_shape(b)) {
    throw InvalidInput(std::string(what) + ": table shapes differ");
  }
}

void require_mdp_shape(const TabularMdp& mdp, const StateActionTable& t, const char* what) {
  if (t.n_states() != mdp.n_states() || t.n_actions() != mdp.n_actions()) {
    throw InvalidInput(std::string(what) + ": table shape does not match the MDP");
  }
}

}  // namespace

// ---------------------------------------------------------------------------

InverseTemperature::InverseTemperature(double value) : value_(value) {
  if (!(value > 0.0)) {
    throw InvalidInput("inverse temperature must be positive");
  }
}

InverseTemperature InverseTemperature::infinity() {
  return InverseTemperature(std::numeric_limits<double>::infinity());
}

InverseTemperature InverseTemperature::parse(std::string_view text) {
  if (text == "inf" || text == "infinity" || text == "INF" || text == "Infinity") {
    return infinity();
  }
  std::string s(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw InvalidInput("cannot parse inverse temperature '" + s + "'");
  }
  if (used != s.size()) {
    throw InvalidInput("cannot parse inverse temperature '" + s + "'");
  }
  return InverseTemperature(v);
}

bool InverseTemperature::is_infinite() const noexcept { return std::isinf(value_); }

double InverseTemperature::entropy_slack(std::size_t n_actions) const {
  if (is_infinite()) return 0.0;
  return std::log(static_cast<double>(n_actions)) / value_;
}

std::string InverseTemperature::to_string() const {
  if (is_infinite()) return "inf";
  std::ostringstream os;
  os << value_;
  return os.str();
}

// ---------------------------------------------------------------------------

StateActionTable::StateActionTable(std::size_t n_states, std::size_t n_actions, double fill)
    : n_states_(n_states), n_actions_(n_actions), values_(n_states * n_actions, fill) {}

StateActionTable::StateActionTable(std::size_t n_states, std::size_t n_actions,
                                   std::vector<double> values)
    : n_states_(n_states), n_actions_(n_actions), values_(std::move(values)) {
  if (values_.size() != n_states * n_actions) {
    throw InvalidInput("state-action table: value count does not match dimensions");
  }
}

double StateActionTable::sup_norm() const noexcept {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

void clamp_preferences(Preferences& psi) noexcept {
  for (double& v : psi.values()) v = std::clamp(v, -kPreferenceClamp, kPreferenceClamp);
}

// ---------------------------------------------------------------------------

StochasticPolicy::StochasticPolicy(StateActionTable probabilities)
    : table_(std::move(probabilities)) {
  for (std::size_t x = 0; x < table_.n_states(); ++x) {
    double sum = 0.0;
    for (double p : table_.row(x)) {
      if (!(p >= 0.0 && p <= 1.0)) {
        throw InvalidInput("policy row " + std::to_string(x) + " has an entry outside [0,1]");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      throw InvalidInput("policy row " + std::to_string(x) + " does not sum to 1");
    }
  }
}

StochasticPolicy StochasticPolicy::uniform(std::size_t n_states, std::size_t n_actions) {
  return StochasticPolicy(
      StateActionTable(n_states, n_actions, 1.0 / static_cast<double>(n_actions)));
}

StochasticPolicy StochasticPolicy::deterministic(std::span<const std::size_t> actions,
                                                 std::size_t n_actions) {
  StateActionTable t(actions.size(), n_actions, 0.0);
  for (std::size_t x = 0; x < actions.size(); ++x) {
    if (actions[x] >= n_actions) throw InvalidInput("deterministic policy: action out of range");
    t(x, actions[x]) = 1.0;
  }
  return StochasticPolicy(std::move(t));
}

std::vector<std::size_t> StochasticPolicy::modal_actions() const {
  std::vector<std::size_t> out(n_states());
  for (std::size_t x = 0; x < n_states(); ++x) out[x] = argmax_lowest(row(x));
  return out;
}

// ---------------------------------------------------------------------------

TabularMdp::Builder::Builder(std::size_t n_states, std::size_t n_actions, double gamma)
    : n_states_(n_states), n_actions_(n_actions), gamma_(gamma) {
  if (n_states == 0 || n_actions == 0) throw InvalidInput("MDP needs at least one state and action");
  if (n_states > std::numeric_limits<std::uint32_t>::max()) {
    throw InvalidInput("MDP state count exceeds 32-bit indices");
  }
  offsets_.reserve(n_states * n_actions + 1);
}

void TabularMdp::Builder::append_row(std::span<const Successor> row) {
  if (offsets_.size() > n_states_ * n_actions_) throw InvalidInput("MDP builder: too many rows");
  for (const Successor& s : row) {
    if (s.probability == 0.0) continue;
    next_.push_back(s.state);
    prob_.push_back(s.probability);
  }
  offsets_.push_back(next_.size());
}

TabularMdp TabularMdp::Builder::finish(StateActionTable rewards) && {
  if (offsets_.size() != n_states_ * n_actions_ + 1) {
    throw InvalidInput("MDP builder: expected one row per state-action pair");
  }
  if (rewards.n_states() != n_states_ || rewards.n_actions() != n_actions_) {
    throw InvalidInput("MDP builder: reward table shape mismatch");
  }
  return TabularMdp(std::move(offsets_), std::move(next_), std::move(prob_), std::move(rewards),
                    gamma_);
}

TabularMdp::TabularMdp(std::vector<std::size_t> offsets, std::vector<std::uint32_t> next,
                       std::vector<double> prob, StateActionTable rewards, double gamma)
    : offsets_(std::move(offsets)),
      next_(std::move(next)),
      prob_(std::move(prob)),
      rewards_(std::move(rewards)),
      gamma_(gamma),
      r_max_(0.0) {
  if (!(gamma_ >= 0.0 && gamma_ < 1.0)) throw InvalidInput("discount must lie in [0,1)");
  const std::size_t S = n_states();
  for (std::size_t row = 0; row + 1 < offsets_.size(); ++row) {
    double sum = 0.0;
    for (std::size_t i = offsets_[row]; i < offsets_[row + 1]; ++i) {
      if (next_[i] >= S) throw InvalidInput("transition to a state index out of range");
      if (!(prob_[i] >= 0.0)) throw InvalidInput("negative transition probability");
      sum += prob_[i];
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      throw InvalidInput("transition row (" + std::to_string(row / n_actions()) + "," +
                         std::to_string(row % n_actions()) + ") does not sum to 1");
    }
  }
  for (double r : rewards_.values()) {
    if (!std::isfinite(r)) throw InvalidInput("rewards must be finite");
  }
  r_max_ = rewards_.sup_norm();
}

TabularMdp TabularMdp::from_dense(const std::vector<std::vector<std::vector<double>>>& transitions,
                                  const std::vector<std::vector<double>>& rewards, double gamma) {
  const std::size_t S = transitions.size();
  if (S == 0 || transitions[0].empty()) throw InvalidInput("empty transition tensor");
  const std::size_t A = transitions[0].size();
  if (rewards.size() != S) throw InvalidInput("reward rows do not match state count");
  Builder b(S, A, gamma);
  StateActionTable r(S, A);
  std::vector<Successor> row;
  for (std::size_t x = 0; x < S; ++x) {
    if (transitions[x].size() != A || rewards[x].size() != A) {
      throw InvalidInput("ragged transition or reward tensor");
    }
    for (std::size_t a = 0; a < A; ++a) {
      if (transitions[x][a].size() != S) throw InvalidInput("transition row length != n_states");
      row.clear();
      for (std::size_t y = 0; y < S; ++y) {
        row.push_back({static_cast<std::uint32_t>(y), transitions[x][a][y]});
      }
      if (std::any_of(row.begin(), row.end(), [](const Successor& s) { return s.probability < 0; })) {
        throw InvalidInput("negative transition probability");
      }
      b.append_row(row);
      r(x, a) = rewards[x][a];
    }
  }
  return std::move(b).finish(std::move(r));
}

SuccessorRow TabularMdp::successors(std::size_t x, std::size_t a) const {
  const std::size_t row = x * n_actions() + a;
  const std::size_t begin = offsets_[row];
  const std::size_t len = offsets_[row + 1] - begin;
  return {std::span<const std::uint32_t>(next_.data() + begin, len),
          std::span<const double>(prob_.data() + begin, len)};
}

double TabularMdp::probability(std::size_t x, std::size_t a, std::size_t y) const {
  const SuccessorRow row = successors(x, a);
  double p = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (row.states[i] == y) p += row.probabilities[i];
  }
  return p;
}

double TabularMdp::expected_next(std::size_t x, std::size_t a, std::span<const double> v) const {
  const std::size_t row = x * n_actions() + a;
  double acc = 0.0;
  for (std::size_t i = offsets_[row]; i < offsets_[row + 1]; ++i) acc += prob_[i] * v[next_[i]];
  return acc;
}

// ---------------------------------------------------------------------------

double log_sum_exp_backup(std::span<const double> psi, InverseTemperature eta) {
  if (psi.empty()) throw InvalidInput("log-sum-exp of an empty row");
  const double m = max_of(psi);
  if (eta.is_infinite()) return m;
  const double e = eta.value();
  double sum = 0.0;
  for (double v : psi) sum += std::exp(e * (v - m));
  return m + std::log(sum) / e;
}

double boltzmann_softmax_backup(std::span<const double> psi, InverseTemperature eta) {
  if (psi.empty()) throw InvalidInput("soft-max of an empty row");
  const double m = max_of(psi);
  if (eta.is_infinite()) return m;
  const double e = eta.value();
  double z = 0.0;
  double shortfall = 0.0;  // sum_a w_a (psi_a - m) <= 0
  for (double v : psi) {
    const double w = std::exp(e * (v - m));
    z += w;
    shortfall += w * (v - m);
  }
  return m + shortfall / z;
}

std::size_t argmax_lowest(std::span<const double> row) noexcept {
  std::size_t best = 0;
  for (std::size_t a = 1; a < row.size(); ++a) {
    if (row[a] > row[best]) best = a;
  }
  return best;
}

void softmax_row(std::span<const double> psi, InverseTemperature eta, std::span<double> out) {
  if (psi.size() != out.size() || psi.empty()) throw InvalidInput("softmax_row: size mismatch");
  if (eta.is_infinite()) {
    std::fill(out.begin(), out.end(), 0.0);
    out[argmax_lowest(psi)] = 1.0;
    return;
  }
  const double m = max_of(psi);
  const double e = eta.value();
  double z = 0.0;
  for (std::size_t a = 0; a < psi.size(); ++a) {
    out[a] = std::exp(e * (psi[a] - m));
    z += out[a];
  }
  for (double& p : out) p /= z;
}

StochasticPolicy softmax_policy(const Preferences& psi, InverseTemperature eta) {
  StateActionTable t(psi.n_states(), psi.n_actions());
  for (std::size_t x = 0; x < psi.n_states(); ++x) softmax_row(psi.row(x), eta, t.row(x));
  return StochasticPolicy(std::move(t));
}

StochasticPolicy greedy_policy(const StateActionTable& q) {
  StateActionTable t(q.n_states(), q.n_actions(), 0.0);
  for (std::size_t x = 0; x < q.n_states(); ++x) t(x, argmax_lowest(q.row(x))) = 1.0;
  return StochasticPolicy(std::move(t));
}

std::vector<double> policy_state_values(const StochasticPolicy& pi, const StateActionTable& q) {
  if (!pi.table().same_shape(q)) throw InvalidInput("policy/table shape mismatch");
  std::vector<double> v(q.n_states(), 0.0);
  for (std::size_t x = 0; x < q.n_states(); ++x) {
    const auto p = pi.row(x);
    const auto r = q.row(x);
    double acc = 0.0;
    for (std::size_t a = 0; a < r.size(); ++a) acc += p[a] * r[a];
    v[x] = acc;
  }
  return v;
}

std::vector<double> max_state_values(const StateActionTable& q) {
  std::vector<double> v(q.n_states());
  for (std::size_t x = 0; x < q.n_states(); ++x) v[x] = max_of(q.row(x));
  return v;
}

// ---------------------------------------------------------------------------

namespace {

QTable backup_from_state_values(const TabularMdp& mdp, std::span<const double> v) {
  QTable out(mdp.n_states(), mdp.n_actions());
  const double g = mdp.gamma();
  for (std::size_t x = 0; x < mdp.n_states(); ++x) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      out(x, a) = mdp.reward(x, a) + g * mdp.expected_next(x, a, v);
    }
  }
  return out;
}

}  // namespace

QTable bellman_policy_backup(const TabularMdp& mdp, const QTable& q, const StochasticPolicy& pi) {
  require_mdp_shape(mdp, q, "bellman_policy_backup");
  require_mdp_shape(mdp, pi.table(), "bellman_policy_backup");
  return backup_from_state_values(mdp, policy_state_values(pi, q));
}

QTable bellman_optimality_backup(const TabularMdp& mdp, const QTable& q) {
  require_mdp_shape(mdp, q, "bellman_optimality_backup");
  return backup_from_state_values(mdp, max_state_values(q));
}

QTable evaluate_policy(const TabularMdp& mdp, const StochasticPolicy& pi, double tol,
                       const QTable* initial) {
  if (!(tol > 0.0)) throw InvalidInput("evaluate_policy: tolerance must be positive");
  require_mdp_shape(mdp, pi.table(), "evaluate_policy");
  const std::size_t S = mdp.n_states();
  const std::size_t A = mdp.n_actions();
  const double g = mdp.gamma();

  // Iterate on V_n = pi Q_n; then Q_{n+1} = r + g P V_n = T^pi Q_n and
  // ||Q_{n+1} - T^pi Q_{n+1}|| <= g ||V_{n+1} - V_n||.
  std::vector<double> v(S, 0.0);
  if (initial != nullptr) {
    require_mdp_shape(mdp, *initial, "evaluate_policy");
    v = policy_state_values(pi, *initial);
  }
  std::vector<double> next(S);
  for (std::size_t sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double change = 0.0;
    for (std::size_t x = 0; x < S; ++x) {
      const auto p = pi.row(x);
      double acc = 0.0;
      for (std::size_t a = 0; a < A; ++a) {
        if (p[a] == 0.0) continue;
        acc += p[a] * (mdp.reward(x, a) + g * mdp.expected_next(x, a, v));
      }
      next[x] = acc;
      change = std::max(change, std::abs(acc - v[x]));
    }
    if (g * change <= tol) return backup_from_state_values(mdp, v);
    v.swap(next);
  }
  throw std::runtime_error("evaluate_policy: sweep limit reached");
}

QTable evaluate_policy_direct(const TabularMdp& mdp, const StochasticPolicy& pi) {
  require_mdp_shape(mdp, pi.table(), "evaluate_policy_direct");
  const auto S = static_cast<Eigen::Index>(mdp.n_states());
  const std::size_t A = mdp.n_actions();
  const double g = mdp.gamma();
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(S, S);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(S);
  for (Eigen::Index x = 0; x < S; ++x) {
    const auto p = pi.row(static_cast<std::size_t>(x));
    for (std::size_t a = 0; a < A; ++a) {
      if (p[a] == 0.0) continue;
      r(x) += p[a] * mdp.reward(static_cast<std::size_t>(x), a);
      const SuccessorRow row = mdp.successors(static_cast<std::size_t>(x), a);
      for (std::size_t i = 0; i < row.size(); ++i) {
        m(x, static_cast<Eigen::Index>(row.states[i])) -= g * p[a] * row.probabilities[i];
      }
    }
  }
  const Eigen::VectorXd v = m.partialPivLu().solve(r);
  return backup_from_state_values(mdp, std::vector<double>(v.data(), v.data() + v.size()));
}

QTable optimal_q(const TabularMdp& mdp, double tol) {
  if (!(tol > 0.0)) throw InvalidInput("optimal_q: tolerance must be positive");
  const std::size_t S = mdp.n_states();
  const std::size_t A = mdp.n_actions();
  const double g = mdp.gamma();
  // ||Q_{n+1} - Q*|| <= g/(1-g) ||Q_{n+1} - Q_n||, and ||Q_{n+1} - Q_n|| <= g ||V_n - V_{n-1}||.
  QTable q(S, A, 0.0);
  std::vector<double> v(S, 0.0);
  for (std::size_t sweep = 0; sweep < kMaxSweeps; ++sweep) {
    QTable next = backup_from_state_values(mdp, v);
    const double change = linf_loss(next, q);
    q = std::move(next);
    if (g == 0.0 || change * g / (1.0 - g) <= tol) return q;
    v = max_state_values(q);
  }
  throw std::runtime_error("optimal_q: sweep limit reached");
}

QTable optimal_q(const TabularMdp& mdp) {
  const double tol = 1e-8 * mdp.v_max();
  return optimal_q(mdp, tol > 0.0 ? tol : 1e-12);
}

double linf_loss(const StateActionTable& q_star, const StateActionTable& q_pi) {
  require_shape(q_star, q_pi, "linf_loss");
  double m = 0.0;
  const auto a = q_star.values();
  const auto b = q_pi.values();
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// ---------------------------------------------------------------------------

PolicyLossEvaluator::PolicyLossEvaluator(const TabularMdp& mdp, QTable q_star, double tol)
    : mdp_(&mdp), q_star_(std::move(q_star)), tol_(tol) {
  require_mdp_shape(mdp, q_star_, "PolicyLossEvaluator");
  if (!(tol > 0.0)) throw InvalidInput("PolicyLossEvaluator: tolerance must be positive");
}

double PolicyLossEvaluator::operator()(const StochasticPolicy& pi) {
  if (last_policy_ && *last_policy_ == pi) return last_loss_;
  QTable q;
  if (mdp_->n_states() <= kDirectSolveStates) {
    // The iterative pass only certifies the residual; it starts at the solution.
    const QTable direct = evaluate_policy_direct(*mdp_, pi);
    q = evaluate_policy(*mdp_, pi, tol_, &direct);
  } else {
    q = evaluate_policy(*mdp_, pi, tol_, last_policy_ ? &last_q_ : nullptr);
  }
  last_loss_ = linf_loss(q_star_, q);
  last_q_ = std::move(q);
  last_policy_ = pi;
  return last_loss_;
}

}  // namespace dpp
