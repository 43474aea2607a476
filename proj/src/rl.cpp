#include "dpp/rl.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "dpp/errors.hpp"
#include "dpp/random.hpp"
#include "recorder.hpp"

namespace dpp {

// ---------------------------------------------------------------------------
// GenerativeSampleSet

GenerativeSampleSet::GenerativeSampleSet(const TabularMdp& mdp, std::size_t n_draws,
                                         std::uint64_t seed, Storage storage)
    : n_states_(mdp.n_states()),
      n_actions_(mdp.n_actions()),
      n_draws_(n_draws),
      seed_(seed),
      storage_(storage) {
  if (n_draws == 0) throw InvalidInput("sample set needs at least one draw per pair");
  const std::size_t pairs = n_states_ * n_actions_;
  offsets_.reserve(pairs + 1);
  offsets_.push_back(0);
  cdf_.reserve(mdp.nonzeros());
  support_.reserve(mdp.nonzeros());
  for (std::size_t x = 0; x < n_states_; ++x) {
    for (std::size_t a = 0; a < n_actions_; ++a) {
      const SuccessorRow row = mdp.successors(x, a);
      double acc = 0.0;
      for (std::size_t i = 0; i < row.size(); ++i) {
        acc += row.probabilities[i];
        cdf_.push_back(acc);
        support_.push_back(row.states[i]);
      }
      offsets_.push_back(cdf_.size());
    }
  }
  if (storage_ == Storage::Materialized) {
    tensor_.resize(pairs * n_draws_);
    for (std::size_t k = 0; k < n_draws_; ++k) {
      for (std::size_t p = 0; p < pairs; ++p) tensor_[k * pairs + p] = draw(p, k);
    }
  }
}

std::uint32_t GenerativeSampleSet::draw(std::size_t pair, std::size_t k) const {
  const double u = unit_from_bits(counter_draw(seed_, pair * n_draws_ + k));
  const auto first = cdf_.begin() + static_cast<std::ptrdiff_t>(offsets_[pair]);
  const auto last = cdf_.begin() + static_cast<std::ptrdiff_t>(offsets_[pair + 1]);
  auto it = std::upper_bound(first, last, u);
  if (it == last) --it;  // u beyond a row sum of 1 - O(eps)
  return support_[static_cast<std::size_t>(it - cdf_.begin())];
}

std::uint32_t GenerativeSampleSet::next_state(std::size_t x, std::size_t a, std::size_t k) const {
  if (x >= n_states_ || a >= n_actions_ || k >= n_draws_) {
    throw InvalidInput("sample index out of range");
  }
  const std::size_t pair = x * n_actions_ + a;
  if (storage_ == Storage::Materialized) return tensor_[k * n_states_ * n_actions_ + pair];
  return draw(pair, k);
}

void GenerativeSampleSet::column(std::size_t k, std::span<std::uint32_t> column) const {
  const std::size_t pairs = n_states_ * n_actions_;
  if (column.size() != pairs) throw InvalidInput("sample column has the wrong length");
  if (k >= n_draws_) throw InvalidInput("sample draw index out of range");
  if (storage_ == Storage::Materialized) {
    std::copy_n(tensor_.begin() + static_cast<std::ptrdiff_t>(k * pairs), pairs, column.begin());
    return;
  }
  for (std::size_t p = 0; p < pairs; ++p) column[p] = draw(p, k);
}

namespace {

void write_u32_le(std::ostream& out, std::uint32_t v) {
  const unsigned char bytes[4] = {static_cast<unsigned char>(v & 0xFFu),
                                  static_cast<unsigned char>((v >> 8) & 0xFFu),
                                  static_cast<unsigned char>((v >> 16) & 0xFFu),
                                  static_cast<unsigned char>((v >> 24) & 0xFFu)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

}  // namespace

void GenerativeSampleSet::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (std::size_t x = 0; x < n_states_; ++x) {
    for (std::size_t a = 0; a < n_actions_; ++a) {
      for (std::size_t k = 0; k < n_draws_; ++k) write_u32_le(out, next_state(x, a, k));
    }
  }
  std::ofstream meta(sidecar_path(path));
  if (!meta) throw std::runtime_error("cannot write sample sidecar for " + path.string());
  const nlohmann::json doc = {{"n_states", n_states_},
                              {"n_actions", n_actions_},
                              {"n_draws", n_draws_},
                              {"seed", seed_},
                              {"layout", "state,action,draw"},
                              {"dtype", "uint32le"}};
  meta << doc.dump(2) << '\n';
}

SampleTensorFile load_sample_tensor(const std::filesystem::path& path) {
  std::ifstream meta(sidecar_path(path));
  if (!meta) throw std::runtime_error("missing sample sidecar " + sidecar_path(path).string());
  nlohmann::json doc;
  meta >> doc;
  SampleTensorFile f;
  f.n_states = doc.at("n_states").get<std::size_t>();
  f.n_actions = doc.at("n_actions").get<std::size_t>();
  f.n_draws = doc.at("n_draws").get<std::size_t>();
  f.seed = doc.at("seed").get<std::uint64_t>();
  const std::size_t count = f.n_states * f.n_actions * f.n_draws;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  f.states.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw InvalidInput("sample tensor file truncated");
    f.states[i] = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                  (static_cast<std::uint32_t>(b[2]) << 16) |
                  (static_cast<std::uint32_t>(b[3]) << 24);
  }
  return f;
}

// ---------------------------------------------------------------------------
// DPP-RL

double dpp_rl_update(const StateActionTable& rewards, const Preferences& psi,
                     std::span<const std::uint32_t> next_states, InverseTemperature eta,
                     double gamma, Preferences& out) {
  if (!rewards.same_shape(psi)) throw InvalidInput("dpp_rl_update: reward/preference shape mismatch");
  const std::size_t S = psi.n_states();
  const std::size_t A = psi.n_actions();
  if (next_states.size() != S * A) throw InvalidInput("dpp_rl_update: sample column length mismatch");
  if (!out.same_shape(psi)) out = Preferences(S, A);

  std::vector<double> m(S);
  for (std::size_t x = 0; x < S; ++x) m[x] = boltzmann_softmax_backup(psi.row(x), eta);

  double backup_norm = 0.0;
  for (std::size_t x = 0; x < S; ++x) {
    for (std::size_t a = 0; a < A; ++a) {
      const std::uint32_t y = next_states[x * A + a];
      if (y >= S) throw InvalidInput("dpp_rl_update: sampled state out of range");
      const double backup = rewards(x, a) + gamma * m[y];
      backup_norm = std::max(backup_norm, std::abs(backup));
      out(x, a) = psi(x, a) + backup - m[x];
    }
  }
  clamp_preferences(out);
  return backup_norm;
}

Preferences dpp_rl_step(const StateActionTable& rewards, const Preferences& psi,
                        std::span<const std::uint32_t> next_states, InverseTemperature eta,
                        double gamma) {
  Preferences out(psi.n_states(), psi.n_actions());
  dpp_rl_update(rewards, psi, next_states, eta, gamma, out);
  return out;
}

namespace {

void require_compatible(const TabularMdp& mdp, const GenerativeSampleSet& samples,
                        const StateActionTable& init, const char* what) {
  if (samples.n_states() != mdp.n_states() || samples.n_actions() != mdp.n_actions()) {
    throw InvalidInput(std::string(what) + ": sample set does not match the MDP");
  }
  if (init.n_states() != mdp.n_states() || init.n_actions() != mdp.n_actions()) {
    throw InvalidInput(std::string(what) + ": initial table does not match the MDP");
  }
  if (init.sup_norm() > mdp.v_max() * (1.0 + 1e-12)) {
    throw InvalidInput(std::string(what) + ": initial table must be bounded by V_max");
  }
}

/// Fetches sample columns with the stopwatch paused.
class ColumnFeed {
 public:
  explicit ColumnFeed(const GenerativeSampleSet& samples)
      : samples_(samples), buffer_(samples.n_states() * samples.n_actions()) {}

  std::span<const std::uint32_t> fetch(std::size_t k, CpuStopwatch& watch) {
    watch.stop();
    samples_.column(k, buffer_);
    watch.start();
    return buffer_;
  }

 private:
  const GenerativeSampleSet& samples_;
  std::vector<std::uint32_t> buffer_;
};

}  // namespace

RlRunResult dpp_rl_run(const TabularMdp& mdp, const Preferences& psi0, InverseTemperature eta,
                       const GenerativeSampleSet& samples, const TrackingOptions& tracking) {
  require_compatible(mdp, samples, psi0, "dpp_rl_run");
  const std::size_t K = samples.n_draws();
  detail::LossRecorder recorder(mdp, tracking, K);
  ColumnFeed feed(samples);
  CpuStopwatch watch;
  watch.start();

  Preferences psi = psi0;
  Preferences next(psi.n_states(), psi.n_actions());
  RlRunResult result{StochasticPolicy::uniform(psi.n_states(), psi.n_actions()), {}, {}, 0};
  result.backup_norms.reserve(K);
  std::size_t k = 0;
  recorder.record(k, watch, [&] { return softmax_policy(psi, eta); });
  while (k < K && !recorder.over_budget(watch)) {
    const auto column = feed.fetch(k, watch);
    result.backup_norms.push_back(
        dpp_rl_update(mdp.rewards(), psi, column, eta, mdp.gamma(), next));
    std::swap(psi, next);
    ++k;
    recorder.record(k, watch, [&] { return softmax_policy(psi, eta); });
  }
  recorder.record(k, watch, [&] { return softmax_policy(psi, eta); }, true);
  watch.stop();
  result.policy = softmax_policy(psi, eta);
  result.losses = recorder.take();
  result.iterations_run = k;
  return result;
}

// ---------------------------------------------------------------------------
// Synchronous Q-learning

namespace {

// In place: every target reads the maxima taken before the sweep.
void ql_update(const StateActionTable& rewards, QTable& q, std::span<const std::uint32_t> next_states,
               double alpha, double gamma, std::vector<double>& m) {
  const std::size_t S = q.n_states();
  const std::size_t A = q.n_actions();
  if (!rewards.same_shape(q)) throw InvalidInput("q-learning: reward/table shape mismatch");
  if (next_states.size() != S * A) throw InvalidInput("q-learning: sample column length mismatch");
  m.resize(S);
  for (std::size_t x = 0; x < S; ++x) m[x] = *std::max_element(q.row(x).begin(), q.row(x).end());
  for (std::size_t x = 0; x < S; ++x) {
    for (std::size_t a = 0; a < A; ++a) {
      const std::uint32_t y = next_states[x * A + a];
      if (y >= S) throw InvalidInput("q-learning: sampled state out of range");
      q(x, a) = (1.0 - alpha) * q(x, a) + alpha * (rewards(x, a) + gamma * m[y]);
    }
  }
}

}  // namespace

QTable q_learning_sync_step(const StateActionTable& rewards, const QTable& q,
                            std::span<const std::uint32_t> next_states, double alpha, double gamma) {
  QTable out = q;
  std::vector<double> m;
  ql_update(rewards, out, next_states, alpha, gamma, m);
  return out;
}

void validate(const QlConfig& cfg) {
  if (!(cfg.omega > 0.5 && cfg.omega <= 1.0)) {
    throw ConfigError("Q-learning exponent omega must lie in (0.5, 1]");
  }
}

RlRunResult q_learning_sync_run(const TabularMdp& mdp, const QlConfig& cfg, const QTable& q0,
                                const GenerativeSampleSet& samples,
                                const TrackingOptions& tracking) {
  validate(cfg);
  require_compatible(mdp, samples, q0, "q_learning_sync_run");
  const std::size_t K = samples.n_draws();
  const std::size_t S = mdp.n_states();
  const std::size_t A = mdp.n_actions();
  const double g = mdp.gamma();
  detail::LossRecorder recorder(mdp, tracking, K);
  ColumnFeed feed(samples);
  CpuStopwatch watch;
  watch.start();

  QTable q = q0;
  std::vector<double> m(S);
  RlRunResult result{StochasticPolicy::uniform(S, A), {}, {}, 0};
  std::size_t k = 0;
  recorder.record(k, watch, [&] { return greedy_policy(q); });
  while (k < K && !recorder.over_budget(watch)) {
    const auto column = feed.fetch(k, watch);
    const double alpha = 1.0 / std::pow(static_cast<double>(k + 1), cfg.omega);
    ql_update(mdp.rewards(), q, column, alpha, g, m);
    ++k;
    recorder.record(k, watch, [&] { return greedy_policy(q); });
  }
  recorder.record(k, watch, [&] { return greedy_policy(q); }, true);
  watch.stop();
  result.policy = greedy_policy(q);
  result.losses = recorder.take();
  result.iterations_run = k;
  return result;
}

// ---------------------------------------------------------------------------
// Model-based Q-value iteration

TabularMdp estimate_model(const TabularMdp& mdp, const GenerativeSampleSet& samples) {
  if (samples.n_states() != mdp.n_states() || samples.n_actions() != mdp.n_actions()) {
    throw InvalidInput("estimate_model: sample set does not match the MDP");
  }
  const std::size_t S = mdp.n_states();
  const std::size_t A = mdp.n_actions();
  const std::size_t K = samples.n_draws();
  TabularMdp::Builder builder(S, A, mdp.gamma());
  std::vector<std::uint32_t> counts(S, 0);
  std::vector<std::uint32_t> touched;
  std::vector<Successor> row;
  for (std::size_t x = 0; x < S; ++x) {
    for (std::size_t a = 0; a < A; ++a) {
      touched.clear();
      for (std::size_t k = 0; k < K; ++k) {
        const std::uint32_t y = samples.next_state(x, a, k);
        if (counts[y]++ == 0) touched.push_back(y);
      }
      std::sort(touched.begin(), touched.end());
      row.clear();
      for (std::uint32_t y : touched) {
        row.push_back({y, static_cast<double>(counts[y]) / static_cast<double>(K)});
        counts[y] = 0;
      }
      builder.append_row(row);
    }
  }
  return std::move(builder).finish(mdp.rewards());
}

ModelBasedViResult model_based_vi_run(const TabularMdp& mdp, const GenerativeSampleSet& samples,
                                      std::size_t vi_iterations, double vi_tol,
                                      const TrackingOptions& tracking) {
  if (!(vi_tol > 0.0)) throw InvalidInput("model_based_vi_run: tolerance must be positive");
  detail::LossRecorder recorder(mdp, tracking, vi_iterations);
  CpuStopwatch watch;
  watch.start();
  const TabularMdp model = estimate_model(mdp, samples);
  const double g = model.gamma();

  QTable q(mdp.n_states(), mdp.n_actions(), 0.0);
  std::size_t k = 0;
  recorder.record(k, watch, [&] { return greedy_policy(q); });
  while (k < vi_iterations && !recorder.over_budget(watch)) {
    QTable next = bellman_optimality_backup(model, q);
    const double change = linf_loss(next, q);
    q = std::move(next);
    ++k;
    recorder.record(k, watch, [&] { return greedy_policy(q); });
    if (g == 0.0 || change * g / (1.0 - g) <= vi_tol) break;
  }
  recorder.record(k, watch, [&] { return greedy_policy(q); }, true);
  watch.stop();
  ModelBasedViResult result{greedy_policy(q), recorder.take(),
                            std::numeric_limits<double>::quiet_NaN()};
  if (!result.losses.empty()) result.final_loss = result.losses.back().loss;
  return result;
}

}  // namespace dpp
