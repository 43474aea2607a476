#include "dpp/benchmarks.hpp"

#include <cmath>
#include <stdexcept>

#include "dpp/errors.hpp"

namespace dpp {

namespace {

void require_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0,1)");
}

}  // namespace

TabularMdp make_linear_mdp(std::size_t n, double gamma) {
  if (n < 3) throw ConfigError("linear MDP needs at least 3 states");
  require_gamma(gamma);
  TabularMdp::Builder builder(n, 2, gamma);
  StateActionTable rewards(n, 2, 0.0);
  std::vector<Successor> row;
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t a = 0; a < 2; ++a) {
      row.clear();
      if (k == 0 || k == n - 1) {
        row.push_back({static_cast<std::uint32_t>(k), 1.0});
        builder.append_row(row);
        continue;
      }
      double z = 0.0;
      if (a == 0) {
        for (std::size_t l = 0; l < k; ++l) z += 1.0 / static_cast<double>(k - l);
        for (std::size_t l = 0; l < k; ++l) {
          row.push_back({static_cast<std::uint32_t>(l), 1.0 / static_cast<double>(k - l) / z});
        }
      } else {
        for (std::size_t l = k + 1; l < n; ++l) z += 1.0 / static_cast<double>(l - k);
        for (std::size_t l = k + 1; l < n; ++l) {
          row.push_back({static_cast<std::uint32_t>(l), 1.0 / static_cast<double>(l - k) / z});
        }
      }
      double r = 0.0;
      for (const Successor& s : row) {
        const bool end = s.state == 0 || s.state == n - 1;
        r += s.probability * (end ? 1.0 : -1.0);
      }
      rewards(k, a) = r;
      builder.append_row(row);
    }
  }
  return std::move(builder).finish(std::move(rewards));
}

TabularMdp make_combination_lock(std::size_t n, double gamma) {
  if (n < 3) throw ConfigError("combination lock needs at least 3 states");
  require_gamma(gamma);
  TabularMdp::Builder builder(n, 2, gamma);
  StateActionTable rewards(n, 2, 0.0);
  std::vector<Successor> row;
  const std::size_t goal = n - 1;
  for (std::size_t k = 0; k < n; ++k) {
    // reset
    row.clear();
    if (k == goal || k == 0) {
      row.push_back({static_cast<std::uint32_t>(k), 1.0});
    } else {
      double z = 0.0;
      for (std::size_t l = 0; l < k; ++l) z += 1.0 / static_cast<double>(k - l);
      for (std::size_t l = 0; l < k; ++l) {
        row.push_back({static_cast<std::uint32_t>(l), 1.0 / static_cast<double>(k - l) / z});
      }
    }
    builder.append_row(row);
    // advance
    row.clear();
    if (k == goal) {
      row.push_back({static_cast<std::uint32_t>(k), 1.0});
      rewards(k, 0) = 1.0;
      rewards(k, 1) = 1.0;
    } else {
      row.push_back({static_cast<std::uint32_t>(k + 1), 1.0});
      rewards(k, 1) = k + 1 == goal ? 1.0 : -0.01;
    }
    builder.append_row(row);
  }
  return std::move(builder).finish(std::move(rewards));
}

TabularMdp make_grid_world(std::size_t side, double gamma) {
  if (side < 3 || side % 2 == 0) throw ConfigError("grid world side must be odd and >= 3");
  require_gamma(gamma);
  const std::size_t w = side + 2;
  const std::size_t n = w * w;
  const std::size_t center = (w / 2) * w + w / 2;
  auto h_of = [&](std::size_t s) { return static_cast<double>(s % w + 1); };
  auto v_of = [&](std::size_t s) { return static_cast<double>(s / w + 1); };
  auto absorbing = [&](std::size_t s) {
    const std::size_t r = s / w;
    const std::size_t c = s % w;
    return s == center || r == 0 || c == 0 || r == w - 1 || c == w - 1;
  };

  TabularMdp::Builder builder(n, 4, gamma);
  StateActionTable rewards(n, 4, 0.0);
  std::vector<double> kernel(n);
  std::vector<Successor> row;
  row.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    if (absorbing(s)) {
      const double r = s == center ? -1.0 : -1.0 / std::hypot(h_of(s), v_of(s));
      for (std::size_t a = 0; a < 4; ++a) {
        rewards(s, a) = r;
        const Successor self{static_cast<std::uint32_t>(s), 1.0};
        builder.append_row({&self, 1});
      }
      continue;
    }
    double z = 0.0;
    for (std::size_t y = 0; y < n; ++y) {
      kernel[y] = y == s ? 0.0 : 1.0 / std::hypot(h_of(s) - h_of(y), v_of(s) - v_of(y));
      z += kernel[y];
    }
    // up, down, left, right
    const std::size_t neighbours[4] = {s - w, s + w, s - 1, s + 1};
    for (std::size_t a = 0; a < 4; ++a) {
      row.clear();
      for (std::size_t y = 0; y < n; ++y) {
        double p = 0.4 * kernel[y] / z;
        if (y == neighbours[a]) p += 0.6;
        row.push_back({static_cast<std::uint32_t>(y), p});
      }
      builder.append_row(row);
    }
  }
  return std::move(builder).finish(std::move(rewards));
}

TabularMdp make_random_mdp(std::size_t n_states, std::size_t n_actions, double gamma,
                           std::uint64_t seed) {
  require_gamma(gamma);
  Rng rng(seed);
  TabularMdp::Builder builder(n_states, n_actions, gamma);
  std::vector<Successor> row(n_states);
  for (std::size_t x = 0; x < n_states; ++x) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      double z = 0.0;
      for (std::size_t y = 0; y < n_states; ++y) {
        row[y] = {static_cast<std::uint32_t>(y), rng.uniform()};
        z += row[y].probability;
      }
      for (auto& s : row) s.probability /= z;
      builder.append_row(row);
    }
  }
  StateActionTable rewards = uniform_table(n_states, n_actions, -1.0, 1.0, rng);
  return std::move(builder).finish(std::move(rewards));
}

// ---------------------------------------------------------------------------

void ReplacementEnv::validate() const {
  if (!(beta > 0.0) || !(cost > 0.0) || !(slope > 0.0) || !(x_max > 0.0)) {
    throw ConfigError("replacement problem: beta, cost, slope and x_max must be positive");
  }
  require_gamma(gamma);
}

double ReplacementEnv::reward(double x, std::size_t a) const {
  if (a > 1) throw InvalidInput("replacement problem has actions {0, 1}");
  return a == 0 ? -maintenance(x) : -cost - maintenance(0.0);
}

ReplacementStep replacement_sample(const ReplacementEnv& env, double x, std::size_t a, Rng& rng) {
  if (!(x >= 0.0 && x <= env.x_max)) throw InvalidInput("replacement state outside [0, x_max]");
  ReplacementStep step;
  step.reward = env.reward(x, a);
  double y = (a == 0 ? x : 0.0) + rng.exponential(env.beta);
  while (y > env.x_max) {
    if (++step.redraws > kMaxReplacementRedraws) {
      throw std::runtime_error("replacement boundary rule exceeded its redraw cap");
    }
    step.reward += -env.cost - env.maintenance(0.0);
    y = rng.exponential(env.beta);
  }
  step.next_x = y;
  return step;
}

double replacement_density(const ReplacementEnv& env, double x, std::size_t a, double y) {
  if (a > 1) throw InvalidInput("replacement problem has actions {0, 1}");
  if (y < 0.0 || y > env.x_max) return 0.0;
  const double b = env.beta;
  const double fresh = b * std::exp(-b * y) / (-std::expm1(-b * env.x_max));
  if (a == 1) return fresh;
  const double kept = y >= x ? b * std::exp(-b * (y - x)) : 0.0;
  return kept + std::exp(-b * (env.x_max - x)) * fresh;
}

TransitionSampler replacement_sampler(const ReplacementEnv& env) {
  env.validate();
  return [env](Rng& rng) {
    SampleTransition s;
    s.x = rng.uniform(0.0, env.x_max);
    s.a = rng.index(2);
    const ReplacementStep step = replacement_sample(env, s.x, s.a, rng);
    s.reward = step.reward;
    s.x_next = step.next_x;
    return s;
  };
}

double replacement_threshold_integral(const ReplacementEnv& env, double x) {
  const double g = env.gamma;
  const double k = env.beta * (1.0 - g);
  return env.slope / (1.0 - g) * (x + g * std::expm1(-k * x) / k);
}

ThresholdPolicy optimal_threshold(const ReplacementEnv& env) {
  env.validate();
  double lo = 0.0;
  double hi = env.x_max;
  if (replacement_threshold_integral(env, hi) < env.cost) {
    throw ConfigError("replacement threshold lies beyond x_max");
  }
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double f = replacement_threshold_integral(env, mid) - env.cost;
    if (std::abs(f) <= 1e-10 || mid == lo || mid == hi) return {mid};
    (f < 0.0 ? lo : hi) = mid;
  }
  return {0.5 * (lo + hi)};
}

std::vector<double> bin_centers(double x_max, std::size_t n_bins) {
  if (n_bins == 0 || !(x_max > 0.0)) throw InvalidInput("bin_centers: need K >= 1 and x_max > 0");
  std::vector<double> out(n_bins);
  for (std::size_t k = 0; k < n_bins; ++k) {
    out[k] = (static_cast<double>(k) + 0.5) * x_max / static_cast<double>(n_bins);
  }
  return out;
}

double policy_error(std::span<const std::size_t> actions, const ReplacementEnv& env,
                    const ThresholdPolicy& threshold, std::size_t n_bins) {
  if (actions.size() != n_bins) throw InvalidInput("policy_error: one action per bin expected");
  const std::vector<double> xs = bin_centers(env.x_max, n_bins);
  std::size_t wrong = 0;
  for (std::size_t k = 0; k < n_bins; ++k) {
    if (actions[k] > 1) throw InvalidInput("policy_error: actions must be 0 or 1");
    if (actions[k] != threshold.action(xs[k])) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(n_bins);
}

}  // namespace dpp
