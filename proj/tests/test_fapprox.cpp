#include <doctest.h>

#include <cmath>
#include <memory>

#include "dpp/benchmarks.hpp"
#include "dpp/errors.hpp"
#include "dpp/exact.hpp"
#include "dpp/fapprox.hpp"
#include "dpp/random.hpp"

using namespace dpp;

TEST_CASE("rbf features") {
  const FeatureMap map = FeatureMap::evenly_spaced_rbf(0.0, 10.0, 10, 2);
  CHECK(map.dim() == 20);
  CHECK(map.per_action() == 10);
  CHECK(map.bandwidth() == doctest::Approx(10.0 / 9.0));
  const double c3 = map.centers()[3];
  const auto f = map.features(c3, 1);
  CHECK(f[10 + 3] == 1.0);
  for (std::size_t i = 0; i < 10; ++i) CHECK(f[i] == 0.0);
  const auto g = map.features(7.3, 0);
  for (std::size_t i = 10; i < 20; ++i) CHECK(g[i] == 0.0);
  for (double v : g) CHECK((std::isfinite(v) && v >= 0.0 && v <= 1.0));

  const FeatureMap two = FeatureMap::rbf({1.0, 3.0}, 0.7, 1);
  const auto mid = two.features(2.0, 0);
  CHECK(mid[0] == doctest::Approx(mid[1]).epsilon(1e-15));
  CHECK(mid[0] == doctest::Approx(std::exp(-1.0 / (2.0 * 0.49))).epsilon(1e-14));
  CHECK_THROWS_AS(map.features(1.0, 2), InvalidInput);
}

TEST_CASE("indicator features") {
  const FeatureMap map = FeatureMap::indicator(0.0, 10.0, 10, 2);
  const auto f = map.features(3.5, 1);
  for (std::size_t i = 0; i < 20; ++i) CHECK(f[i] == (i == 13 ? 1.0 : 0.0));
  CHECK(map.features(10.0, 0)[9] == 1.0);  // right edge belongs to the last bin
}

TEST_CASE("empirical dpp target") {
  const FeatureMap map = FeatureMap::rbf({0.0}, 2.0, 2);  // m = 2, one bump per action
  const SampleTransition s{1.0, 1, -0.6, 2.5};
  SUBCASE("zero model gives the reward") {
    CHECK(empirical_dpp_target(LinearModel{{0.0, 0.0}}, map, s, InverseTemperature(1.0), 0.6) == -0.6);
  }
  SUBCASE("gamma = 0, hard max") {
    const LinearModel model{{1.5, -0.5}};
    const double phi = std::exp(-1.0 / 8.0);
    const double expect = -0.5 * phi - 0.6 - 1.5 * phi;
    CHECK(empirical_dpp_target(model, map, s, InverseTemperature::infinity(), 0.0) ==
          doctest::Approx(expect).epsilon(1e-14));
  }
  SUBCASE("hand evaluation") {
    const LinearModel model{{0.8, 2.0}};
    const double eta = 1.7;
    const double g = 0.6;
    auto m_eta = [&](double x) {
      const double phi = std::exp(-x * x / 8.0);
      const double p0 = 0.8 * phi;
      const double p1 = 2.0 * phi;
      const double w0 = std::exp(eta * p0);
      const double w1 = std::exp(eta * p1);
      return (w0 * p0 + w1 * p1) / (w0 + w1);
    };
    const double psi = 2.0 * std::exp(-1.0 / 8.0);
    const double expect = psi - 0.6 + g * m_eta(2.5) - m_eta(1.0);
    CHECK(empirical_dpp_target(model, map, s, InverseTemperature(eta), g) ==
          doctest::Approx(expect).epsilon(1e-13));
  }
}

TEST_CASE("fitted q target") {
  const FeatureMap map = FeatureMap::rbf({0.0}, 1.0, 2);
  const LinearModel model{{1.0, 3.0}};
  const SampleTransition s{0.0, 0, 2.0, 0.0};
  CHECK(fitted_q_target(model, map, s, 0.5) == doctest::Approx(2.0 + 0.5 * 3.0));
  CHECK(fitted_q_target(model, map, s, 0.0) == 2.0);
}

TEST_CASE("ridge solve") {
  SUBCASE("huge alpha shrinks to zero") {
    Rng rng(1);
    Eigen::MatrixXd F(30, 4);
    Eigen::VectorXd t(30);
    for (int i = 0; i < 30; ++i) {
      t(i) = rng.uniform(-1.0, 1.0);
      for (int j = 0; j < 4; ++j) F(i, j) = rng.uniform(-1.0, 1.0);
    }
    const LinearModel m = ridge_solve(F, t, 1e9);
    double norm = 0.0;
    for (double v : m.theta) norm += v * v;
    CHECK(std::sqrt(norm) <= t.norm() * F.norm() / (1e9 * 30.0));
  }
  SUBCASE("one by one closed form") {
    Eigen::MatrixXd F(1, 1);
    F(0, 0) = 1.0;
    Eigen::VectorXd t(1);
    t(0) = 3.0;
    CHECK(ridge_solve(F, t, 0.25).theta[0] == doctest::Approx(3.0 / 1.25).epsilon(1e-15));
  }
  SUBCASE("orthonormal interpolation") {
    const Eigen::MatrixXd F = Eigen::MatrixXd::Identity(5, 5);
    Eigen::VectorXd t(5);
    t << 1.0, -2.0, 3.5, 0.0, 7.0;
    const LinearModel m = ridge_solve(F, t, 0.0);
    for (int i = 0; i < 5; ++i) CHECK(m.theta[i] == doctest::Approx(t(i)).epsilon(1e-14));
  }
  SUBCASE("normal equations and monotone shrinkage") {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
      const int N = 40;
      const int m = 6;
      Eigen::MatrixXd F(N, m);
      Eigen::VectorXd t(N);
      for (int i = 0; i < N; ++i) {
        t(i) = rng.uniform(-5.0, 5.0);
        for (int j = 0; j < m; ++j) F(i, j) = rng.uniform(-1.0, 1.0);
      }
      double prev = std::numeric_limits<double>::infinity();
      for (double alpha : {0.0, 1e-4, 1e-2, 1.0, 100.0}) {
        const LinearModel model = ridge_solve(F, t, alpha);
        const Eigen::VectorXd theta = Eigen::Map<const Eigen::VectorXd>(model.theta.data(), m);
        const Eigen::MatrixXd lhs = F.transpose() * F + alpha * N * Eigen::MatrixXd::Identity(m, m);
        const Eigen::VectorXd rhs = F.transpose() * t;
        CHECK((lhs * theta - rhs).norm() <= 1e-8 * rhs.norm());
        CHECK(theta.norm() <= prev * (1.0 + 1e-12));
        prev = theta.norm();
      }
    }
  }
  SUBCASE("singular system without regularization") {
    Eigen::MatrixXd F(3, 2);
    F << 1.0, 1.0, 2.0, 2.0, 3.0, 3.0;
    const Eigen::VectorXd t = Eigen::VectorXd::Ones(3);
    CHECK_THROWS_AS(ridge_solve(F, t, 0.0), SingularSystem);
    CHECK_NOTHROW(ridge_solve(F, t, 1e-3));
  }
}

namespace {

/// Cycles through a fixed list of transitions.
TransitionSampler cycling(std::vector<SampleTransition> list) {
  auto state = std::make_shared<std::size_t>(0);
  return [list = std::move(list), state](Rng&) { return list[(*state)++ % list.size()]; };
}

}  // namespace

TEST_CASE("sadpp and rfqi iterations") {
  const ReplacementEnv env;
  const FeatureMap map = FeatureMap::evenly_spaced_rbf(0.0, 10.0, 10, 2);
  SadppConfig cfg;
  cfg.n_samples = 200;

  SUBCASE("zero rewards keep a zero model") {
    const TransitionSampler zero = [](Rng& rng) {
      SampleTransition s;
      s.x = rng.uniform(0.0, 10.0);
      s.a = rng.index(2);
      s.x_next = rng.uniform(0.0, 10.0);
      return s;
    };
    Rng rng(1);
    const LinearModel z{std::vector<double>(20, 0.0)};
    CHECK(sadpp_iteration(cfg, z, map, zero, rng) == z);
    CHECK(rfqi_iteration(cfg, z, map, zero, rng) == z);
  }
  SUBCASE("seeded runs are bit-reproducible") {
    const TransitionSampler sampler = replacement_sampler(env);
    Rng r0(5);
    LinearModel a = random_model(20, r0);
    LinearModel b = a;
    Rng ra(9);
    Rng rb(9);
    for (int k = 0; k < 5; ++k) {
      a = sadpp_iteration(cfg, a, map, sampler, ra);
      b = sadpp_iteration(cfg, b, map, sampler, rb);
    }
    CHECK(a == b);
  }
  SUBCASE("rfqi with gamma = 0 regresses the reward") {
    SadppConfig c = cfg;
    c.gamma = 0.0;
    Rng rng(3);
    std::vector<SampleTransition> batch;
    for (int i = 0; i < 100; ++i) {
      SampleTransition s;
      s.x = rng.uniform(0.0, 10.0);
      s.a = rng.index(2);
      s.reward = env.reward(s.x, s.a);
      s.x_next = rng.uniform(0.0, 10.0);
      batch.push_back(s);
    }
    Rng r2(4);
    const LinearModel fit = rfqi_fit(c, random_model(20, r2), map, batch);
    Eigen::MatrixXd F(100, 20);
    Eigen::VectorXd t(100);
    for (int i = 0; i < 100; ++i) {
      const auto phi = map.features(batch[i].x, batch[i].a);
      for (int j = 0; j < 20; ++j) F(i, j) = phi[j];
      t(i) = batch[i].reward;
    }
    const LinearModel direct = ridge_solve(F, t, c.alpha);
    for (int j = 0; j < 20; ++j) CHECK(fit.theta[j] == doctest::Approx(direct.theta[j]).epsilon(1e-10));
  }
  SUBCASE("tabular features: one sadpp iteration is the exact dpp step") {
    // 10 cells on [0,10], deterministic successors
    const std::size_t S = 10;
    std::vector<std::vector<std::vector<double>>> P(S, std::vector<std::vector<double>>(2, std::vector<double>(S, 0.0)));
    std::vector<std::vector<double>> r(S, std::vector<double>(2));
    std::vector<SampleTransition> all;
    Rng rng(8);
    for (std::size_t x = 0; x < S; ++x) {
      for (std::size_t a = 0; a < 2; ++a) {
        const std::size_t y = a == 0 ? (x + 1) % S : (x * 3 + 1) % S;
        P[x][a][y] = 1.0;
        r[x][a] = rng.uniform(-1.0, 1.0);
        all.push_back({x + 0.5, a, r[x][a], y + 0.5});
      }
    }
    const TabularMdp mdp = TabularMdp::from_dense(P, r, 0.7);
    const FeatureMap tab = FeatureMap::indicator(0.0, 10.0, S, 2);
    const LinearModel model = random_model(tab.dim(), rng);
    Preferences psi(S, 2);
    for (std::size_t x = 0; x < S; ++x) {
      for (std::size_t a = 0; a < 2; ++a) psi(x, a) = model.value(tab, x + 0.5, a);
    }
    SadppConfig c;
    c.gamma = 0.7;
    c.alpha = 1e-12;
    c.n_samples = all.size();
    for (double eta : {0.5, 4.0}) {
      c.eta = InverseTemperature(eta);
      Rng unused(0);
      const LinearModel next = sadpp_iteration(c, model, tab, cycling(all), unused);
      const Preferences exact = dpp_step(mdp, {psi, 0}, InverseTemperature(eta)).psi;
      for (std::size_t x = 0; x < S; ++x) {
        for (std::size_t a = 0; a < 2; ++a) CHECK(std::abs(next.value(tab, x + 0.5, a) - exact(x, a)) <= 1e-6);
      }
    }
  }
  SUBCASE("tabular single action: rfqi approximates the policy backup") {
    const std::size_t S = 10;
    const TabularMdp mdp = make_random_mdp(S, 1, 0.8, 21);
    const FeatureMap tab = FeatureMap::indicator(0.0, 10.0, S, 1);
    Rng rng(2);
    const LinearModel model = random_model(S, rng);
    QTable q(S, 1);
    for (std::size_t x = 0; x < S; ++x) q(x, 0) = model.value(tab, x + 0.5, 0);
    const QTable backup = bellman_policy_backup(mdp, q, StochasticPolicy::uniform(S, 1));
    const TransitionSampler sampler = [&mdp](Rng& g) {
      SampleTransition s;
      const std::size_t x = g.index(10);
      s.x = x + 0.5;
      s.a = 0;
      s.reward = mdp.reward(x, 0);
      double u = g.uniform();
      std::size_t y = 0;
      while (y + 1 < 10 && (u -= mdp.probability(x, 0, y)) >= 0.0) ++y;
      s.x_next = y + 0.5;
      return s;
    };
    SadppConfig c;
    c.gamma = 0.8;
    c.alpha = 1e-12;
    c.n_samples = 200000;
    const LinearModel next = rfqi_iteration(c, model, tab, sampler, rng);
    for (std::size_t x = 0; x < S; ++x) CHECK(std::abs(next.theta[x] - backup(x, 0)) <= 0.05);
  }
  SUBCASE("config validation") {
    SadppConfig c;
    c.alpha = -1.0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = SadppConfig{};
    c.n_samples = 0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = SadppConfig{};
    c.gamma = 1.0;
    CHECK_THROWS_AS(validate(c), ConfigError);
  }
}

TEST_CASE("induced action") {
  const FeatureMap map = FeatureMap::rbf({0.0}, 1.0, 2);
  const LinearModel equal{{1.0, 1.0}};
  CHECK(induced_action(equal, map, 0.0, InverseTemperature(1.0), FittedAlgorithm::Sadpp) == 0);
  const LinearModel pref{{1.0, 3.0}};
  for (double eta : {0.01, 1.0, 100.0}) {
    CHECK(induced_action(pref, map, 0.0, InverseTemperature(eta), FittedAlgorithm::Sadpp) == 1);
  }
  CHECK(induced_action(pref, map, 0.0, InverseTemperature::infinity(), FittedAlgorithm::Rfqi) == 1);

  const FeatureMap rbf = FeatureMap::evenly_spaced_rbf(0.0, 10.0, 10, 2);
  Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    const LinearModel m = random_model(20, rng);
    LinearModel scaled = m;
    const double factor = 2.0 + 5.0 * rng.uniform();
    for (double& v : scaled.theta) v *= factor;
    const double x = rng.uniform(0.0, 10.0);
    CHECK(induced_action(m, rbf, x, InverseTemperature(1.0), FittedAlgorithm::Sadpp) ==
          induced_action(scaled, rbf, x, InverseTemperature(1.0), FittedAlgorithm::Sadpp));
  }
}

TEST_CASE("model json round trip") {
  Rng rng(3);
  const LinearModel m = random_model(20, rng);
  for (double v : m.theta) CHECK((v >= -1.0 && v <= 1.0));
  CHECK(model_from_json(model_to_json(m)) == m);
  CHECK(model_from_json(nlohmann::json::parse(model_to_json(m).dump())) == m);
  CHECK_THROWS_AS(model_from_json(nlohmann::json{{"theta", 1}}), InvalidInput);
}
