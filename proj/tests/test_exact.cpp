#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dpp/benchmarks.hpp"
#include "dpp/errors.hpp"
#include "dpp/exact.hpp"
#include "dpp/random.hpp"
#include "oracles.hpp"

using namespace dpp;

namespace {

constexpr double kLogHalfOnePlusE = 0.620114506958277525;
constexpr double kEOverOnePlusE = 0.731058578630004879;
constexpr double kOneOverOnePlusE = 0.268941421369995121;

double rel_close(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("kl regularized backup") {
  SUBCASE("single action collapses to the plain backup") {
    const TabularMdp m = TabularMdp::from_dense({{{0.3, 0.7}}, {{1.0, 0.0}}}, {{1.0}, {-2.0}}, 0.9);
    const std::vector<double> v{4.0, -1.0};
    const auto res = kl_regularized_backup(m, StochasticPolicy::uniform(2, 1), v, InverseTemperature(2.0));
    CHECK(res.value[0] == doctest::Approx(1.0 + 0.9 * (0.3 * 4.0 - 0.7)).epsilon(1e-14));
    CHECK(res.value[1] == doctest::Approx(-2.0 + 0.9 * 4.0).epsilon(1e-14));
    CHECK(res.policy == StochasticPolicy::uniform(2, 1));
  }
  SUBCASE("uniform baseline closed form") {
    // gamma = 0 so the backups are the rewards (0, 1)
    const TabularMdp m = TabularMdp::from_dense({{{1.0}, {1.0}}}, {{0.0, 1.0}}, 0.0);
    const auto res = kl_regularized_backup(m, StochasticPolicy::uniform(1, 2), std::vector<double>{0.0},
                                           InverseTemperature(1.0));
    CHECK(std::abs(res.value[0] - kLogHalfOnePlusE) <= 1e-15);
    CHECK(std::abs(res.policy(0, 0) - kOneOverOnePlusE) <= 1e-15);
    CHECK(std::abs(res.policy(0, 1) - kEOverOnePlusE) <= 1e-15);
    const auto sharp = kl_regularized_backup(m, StochasticPolicy::uniform(1, 2),
                                             std::vector<double>{0.0}, InverseTemperature(1e6));
    CHECK(std::abs(sharp.value[0] - 1.0) <= 1e-5);
  }
  SUBCASE("nonuniform baseline reweights") {
    const TabularMdp m = TabularMdp::from_dense({{{1.0}, {1.0}, {1.0}}}, {{0.5, -1.0, 2.0}}, 0.0);
    const StochasticPolicy base(StateActionTable(1, 3, std::vector<double>{0.2, 0.5, 0.3}));
    const auto res = kl_regularized_backup(m, base, std::vector<double>{0.0}, InverseTemperature(0.7));
    long double z = 0.0L;
    const double w[3] = {0.2, 0.5, 0.3};
    const double r[3] = {0.5, -1.0, 2.0};
    for (int a = 0; a < 3; ++a) z += w[a] * std::exp(0.7L * r[a]);
    CHECK(res.value[0] == doctest::Approx(static_cast<double>(std::log(z) / 0.7L)).epsilon(1e-14));
    for (int a = 0; a < 3; ++a) {
      CHECK(res.policy(0, a) ==
            doctest::Approx(static_cast<double>(w[a] * std::exp(0.7L * r[a]) / z)).epsilon(1e-14));
    }
  }
  SUBCASE("errors") {
    const TabularMdp m = make_random_mdp(3, 2, 0.5, 1);
    CHECK_THROWS_AS(kl_regularized_backup(m, StochasticPolicy::uniform(3, 2), std::vector<double>(3, 0.0),
                                          InverseTemperature::infinity()),
                    InvalidInput);
    CHECK_THROWS_AS(kl_regularized_backup(m, StochasticPolicy::uniform(3, 2), std::vector<double>(2, 0.0),
                                          InverseTemperature(1.0)),
                    InvalidInput);
  }
}

TEST_CASE("dpp step") {
  SUBCASE("single state scalar map") {
    const double r = 0.8;
    const double g = 0.75;
    const TabularMdp m = TabularMdp::from_dense({{{1.0}}}, {{r}}, g);
    DppState s{Preferences(1, 1, 1.5), 0};
    s = dpp_step(m, s, InverseTemperature(1.0));
    CHECK(s.psi(0, 0) == doctest::Approx(r + g * 1.5).epsilon(1e-15));
    CHECK(s.iteration == 1);
    for (int k = 0; k < 400; ++k) s = dpp_step(m, s, InverseTemperature::infinity());
    CHECK(s.psi(0, 0) == doctest::Approx(r / (1.0 - g)).epsilon(1e-12));
  }
  SUBCASE("zero reward keeps zero") {
    TabularMdp m = TabularMdp::from_dense({{{0.5, 0.5}, {0.0, 1.0}}, {{1.0, 0.0}, {0.2, 0.8}}},
                                          {{0.0, 0.0}, {0.0, 0.0}}, 0.9);
    const DppState s = dpp_step(m, {Preferences(2, 2, 0.0), 0}, InverseTemperature(1.0));
    CHECK(s.psi.sup_norm() == 0.0);
  }
  SUBCASE("auxiliary action-value identity") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const TabularMdp m = make_random_mdp(4, 2, 0.9, 300 + seed);
      Rng rng(seed);
      const Preferences psi0 = random_preferences(m, rng);
      const auto check = oracle::check_auxiliary_identity(m, psi0, 1.0, 20);
      CHECK(check.max_relative_error <= 1e-8);
      CHECK(check.max_policy_error <= 1e-8);
      CHECK(check.max_aux_bound_ratio <= 1.0);
    }
  }
  SUBCASE("matches a dense recomputation") {
    const TabularMdp m = make_random_mdp(5, 3, 0.8, 17);
    Rng rng(3);
    const Preferences psi = random_preferences(m, rng);
    const double eta = 2.0;
    const auto d = oracle::densify(m);
    const auto p = oracle::to_mat(psi);
    const auto pi = oracle::softmax_rows(p, eta);
    std::vector<double> mv(5, 0.0);
    for (std::size_t x = 0; x < 5; ++x) {
      for (std::size_t a = 0; a < 3; ++a) mv[x] += pi[x][a] * p[x][a];
    }
    const Preferences next = dpp_step(m, {psi, 0}, InverseTemperature(eta)).psi;
    for (std::size_t x = 0; x < 5; ++x) {
      for (std::size_t a = 0; a < 3; ++a) {
        double pm = 0.0;
        for (std::size_t y = 0; y < 5; ++y) pm += d.P[x][a][y] * mv[y];
        CHECK(next(x, a) == doctest::Approx(p[x][a] + d.r[x][a] + 0.8 * pm - mv[x]).epsilon(1e-13));
      }
    }
  }
  SUBCASE("preferences are clamped") {
    const TabularMdp m = TabularMdp::from_dense({{{1.0}, {1.0}}}, {{1.0, 0.0}}, 0.5);
    Preferences psi(1, 2, std::vector<double>{0.0, -kPreferenceClamp});
    const DppState s = dpp_step(m, {psi, 0}, InverseTemperature::infinity());
    CHECK(s.psi(0, 1) >= -kPreferenceClamp);
  }
}

TEST_CASE("auxiliary_q_step") {
  const TabularMdp m = make_random_mdp(4, 3, 0.85, 5);
  Rng rng(1);
  const QTable q0(uniform_table(4, 3, -2.0, 2.0, rng));
  const StochasticPolicy pi = softmax_policy(Preferences(uniform_table(4, 3, -1.0, 1.0, rng)),
                                             InverseTemperature(1.0));
  SUBCASE("k = 1 ignores q_prev") {
    const QTable a = auxiliary_q_step(m, QTable(4, 3, 0.0), q0, pi, 1);
    const QTable b = auxiliary_q_step(m, QTable(uniform_table(4, 3, -9.0, 9.0, rng)), q0, pi, 1);
    CHECK(a == b);
    CHECK(linf_loss(a, bellman_policy_backup(m, q0, pi)) <= 1e-14);
  }
  SUBCASE("zero reward keeps zero") {
    const TabularMdp z = TabularMdp::from_dense({{{0.5, 0.5}}, {{0.1, 0.9}}}, {{0.0}, {0.0}}, 0.9);
    QTable q(2, 1, 0.0);
    for (std::size_t k = 1; k <= 10; ++k) {
      q = auxiliary_q_step(z, q, QTable(2, 1, 0.0), StochasticPolicy::uniform(2, 1), k);
      CHECK(q.sup_norm() == 0.0);
    }
  }
  SUBCASE("matches the dense recursion") {
    const QTable prev(uniform_table(4, 3, -2.0, 2.0, rng));
    const auto d = oracle::densify(m);
    const auto t_prev = oracle::policy_backup(d, oracle::to_mat(prev), oracle::to_mat(pi.table()));
    const auto t_0 = oracle::policy_backup(d, oracle::to_mat(q0), oracle::to_mat(pi.table()));
    const QTable q = auxiliary_q_step(m, prev, q0, pi, 7);
    for (std::size_t x = 0; x < 4; ++x) {
      for (std::size_t a = 0; a < 3; ++a) {
        CHECK(q(x, a) == doctest::Approx(6.0 / 7.0 * t_prev[x][a] + t_0[x][a] / 7.0).epsilon(1e-13));
      }
    }
    StateActionTable err(4, 3, 0.35);
    const QTable qe = auxiliary_q_step(m, prev, q0, pi, 7, err);
    CHECK(qe(2, 1) == doctest::Approx(q(2, 1) + 0.05).epsilon(1e-13));
  }
  CHECK_THROWS_AS(auxiliary_q_step(m, q0, q0, pi, 0), InvalidInput);
}

TEST_CASE("exact loss bound") {
  CHECK(exact_dpp_loss_bound(10.0, 3, InverseTemperature(1.0), 0.0, 5) == 0.0);
  CHECK(exact_dpp_loss_bound(200.0, 2, InverseTemperature::infinity(), 0.995, 0) ==
        doctest::Approx(6.368e7).epsilon(1e-12));
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < 50; ++k) {
    const double b = exact_dpp_loss_bound(5.0, 4, InverseTemperature(2.0), 0.9, k);
    CHECK(b <= prev);
    prev = b;
  }
  prev = std::numeric_limits<double>::infinity();
  for (double eta : {0.1, 1.0, 10.0, 1e3}) {
    const double b = exact_dpp_loss_bound(5.0, 4, InverseTemperature(eta), 0.9, 10);
    CHECK(b <= prev);
    prev = b;
  }
  CHECK(exact_dpp_loss_bound(5.0, 4, InverseTemperature::infinity(), 0.9, 10) <= prev);
}

TEST_CASE("approximate loss bound") {
  const InverseTemperature eta(3.0);
  std::vector<double> zeros(6, 0.0);
  CHECK(approximate_dpp_loss_bound(7.0, 3, eta, 0.8, 5, zeros) ==
        doctest::Approx(exact_dpp_loss_bound(7.0, 3, eta, 0.8, 5)).epsilon(1e-14));
  const std::vector<double> e{0.3, 1.1, 2.5, 0.9};
  CHECK(approximate_dpp_loss_bound(7.0, 3, eta, 0.0, 3, e) == doctest::Approx(0.9 / 4.0).epsilon(1e-14));
  Rng rng(77);
  for (int i = 0; i < 20; ++i) {
    const std::size_t k = rng.index(30);
    std::vector<double> errs(k + 1);
    for (double& v : errs) v = rng.uniform(0.0, 5.0);
    const double g = rng.uniform(0.1, 0.95);
    double sum = 0.0;
    for (std::size_t j = 0; j <= k; ++j) sum += std::pow(g, static_cast<double>(k - j)) * errs[j];
    const double expect = (2.0 * g * (4.0 * 3.0 + std::log(3.0) / 3.0) / (1.0 - g) + sum) /
                          ((1.0 - g) * static_cast<double>(k + 1));
    CHECK(approximate_dpp_loss_bound(3.0, 3, eta, g, k, errs) == doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK_THROWS_AS(approximate_dpp_loss_bound(7.0, 3, eta, 0.8, 5, e), InvalidInput);
}

TEST_CASE("dpp run") {
  SUBCASE("losses respect the exact bound and vanish") {
    for (double eta : {1.0, 10.0, std::numeric_limits<double>::infinity()}) {
      const TabularMdp m = make_random_mdp(8, 3, 0.9, 900);
      const auto d = oracle::densify(m);
      const QTable q_star(StateActionTable(8, 3, [&] {
        std::vector<double> v;
        for (const auto& row : oracle::policy_iteration_q_star(d)) v.insert(v.end(), row.begin(), row.end());
        return v;
      }()));
      Rng rng(4);
      const InverseTemperature t = std::isinf(eta) ? InverseTemperature::infinity() : InverseTemperature(eta);
      TrackingOptions track;
      track.q_star = &q_star;
      const auto res = dpp_run(m, random_preferences(m, rng), t, 300, track);
      REQUIRE(res.losses.size() == 301);
      for (const LossPoint& p : res.losses) {
        CHECK(p.loss <= exact_dpp_loss_bound(m.v_max(), 3, t, 0.9, p.iteration));
      }
      CHECK(res.losses.back().loss < 1e-3 * std::max(1e-12, res.losses.front().loss) + 1e-9);
    }
  }
  SUBCASE("single state keeps the trivial policy") {
    const TabularMdp m = TabularMdp::from_dense({{{1.0}}}, {{1.0}}, 0.5);
    const auto res = dpp_run(m, Preferences(1, 1, 0.0), InverseTemperature(1.0), 10);
    CHECK(res.policy(0, 0) == 1.0);
  }
  SUBCASE("initial table must be bounded by V_max") {
    const TabularMdp m = make_random_mdp(3, 2, 0.5, 1);
    CHECK_THROWS_AS(dpp_run(m, Preferences(3, 2, 10.0 * m.v_max()), InverseTemperature(1.0), 3),
                    InvalidInput);
  }
}

TEST_CASE("noisy dpp and avi") {
  const TabularMdp m = make_random_mdp(10, 3, 0.9, 61);
  const QTable q_star = optimal_q(m, 1e-12);
  TrackingOptions track;
  track.q_star = &q_star;
  Rng rng(2);
  const Preferences psi0 = random_preferences(m, rng);

  SUBCASE("no noise reproduces exact dpp") {
    const auto a = dpp_run(m, psi0, InverseTemperature(2.0), 50, track);
    const auto b = noisy_dpp_run(m, psi0, InverseTemperature(2.0), 50, NoiseSpec::none(), 99, track);
    CHECK(a.policy == b.policy);
    REQUIRE(a.losses.size() == b.losses.size());
    for (std::size_t i = 0; i < a.losses.size(); ++i) {
      CHECK(a.losses[i].iteration == b.losses[i].iteration);
      CHECK(a.losses[i].loss == b.losses[i].loss);
    }
  }
  SUBCASE("seeded runs are identical") {
    const auto a = noisy_dpp_run(m, psi0, InverseTemperature(1.0), 100, NoiseSpec::uniform(1.0), 5, track);
    const auto b = noisy_dpp_run(m, psi0, InverseTemperature(1.0), 100, NoiseSpec::uniform(1.0), 5, track);
    CHECK(a.policy == b.policy);
    CHECK(a.average_error == b.average_error);
    for (std::size_t i = 0; i < a.losses.size(); ++i) CHECK(a.losses[i].loss == b.losses[i].loss);
  }
  SUBCASE("average accumulated error shrinks") {
    const auto r = noisy_dpp_run(m, psi0, InverseTemperature::infinity(), 2000, NoiseSpec::uniform(1.0), 8);
    REQUIRE(r.average_error.size() == 2000);
    const double head = std::accumulate(r.average_error.begin(), r.average_error.begin() + 200, 0.0);
    const double tail = std::accumulate(r.average_error.end() - 200, r.average_error.end(), 0.0);
    CHECK(tail < 0.2 * head);
  }
  SUBCASE("avi without noise converges") {
    const auto r = noisy_avi_run(m, QTable(10, 3, 0.0), 400, NoiseSpec::none(), 0, track);
    CHECK(r.losses.back().loss <= 1e-8);
  }
  SUBCASE("avi on zero rewards has zero loss") {
    const TabularMdp z = TabularMdp::from_dense({{{0.5, 0.5}, {1.0, 0.0}}, {{0.3, 0.7}, {0.0, 1.0}}},
                                                {{0.0, 0.0}, {0.0, 0.0}}, 0.9);
    const QTable zs(2, 2, 0.0);
    TrackingOptions tz;
    tz.q_star = &zs;
    const auto r = noisy_avi_run(z, zs, 30, NoiseSpec::none(), 0, tz);
    for (const LossPoint& p : r.losses) CHECK(p.loss == 0.0);
  }
  SUBCASE("noisy avi keeps a positive loss") {
    const auto r = noisy_avi_run(m, QTable(10, 3, 0.0), 2000, NoiseSpec::uniform(1.0), 13, track);
    double tail = 0.0;
    std::size_t n = 0;
    for (const LossPoint& p : r.losses) {
      if (p.iteration >= 1000) {
        tail += p.loss;
        ++n;
      }
    }
    CHECK(tail / static_cast<double>(n) > 1e-3);
  }
}
