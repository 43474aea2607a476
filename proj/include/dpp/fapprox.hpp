#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dpp/mdp.hpp"
#include "dpp/random.hpp"

namespace dpp {

/// Features over a one-dimensional state and a finite action set. Each
/// action owns a block of `per_action()` entries; features of (x,a) are zero
/// outside block a.
class FeatureMap {
 public:
  enum class Kind { Rbf, Indicator };

  /// Gaussian bumps exp(-(x-c)^2 / (2 sigma^2)) at the given centers.
  static FeatureMap rbf(std::vector<double> centers, double bandwidth, std::size_t n_actions);
  /// `n_centers` centers evenly spaced on [lo, hi] (endpoints included) with
  /// bandwidth equal to the spacing.
  static FeatureMap evenly_spaced_rbf(double lo, double hi, std::size_t n_centers,
                                      std::size_t n_actions);
  /// One-hot bin indicators: [lo, hi] split into n_bins equal bins.
  static FeatureMap indicator(double lo, double hi, std::size_t n_bins, std::size_t n_actions);

  Kind kind() const noexcept { return kind_; }
  std::size_t n_actions() const noexcept { return n_actions_; }
  std::size_t per_action() const noexcept { return centers_.size(); }
  std::size_t dim() const noexcept { return n_actions_ * centers_.size(); }
  std::span<const double> centers() const noexcept { return centers_; }
  double bandwidth() const noexcept { return bandwidth_; }

  /// Writes Phi(x,a) (length dim()) into out.
  void features(double x, std::size_t a, std::span<double> out) const;
  std::vector<double> features(double x, std::size_t a) const;

 private:
  FeatureMap(Kind kind, std::vector<double> centers, double bandwidth, double lo, double hi,
             std::size_t n_actions);

  /// Value of basis function i of the shared per-action block at x.
  double basis(std::size_t i, double x) const;

  Kind kind_;
  std::vector<double> centers_;  // bin lower edges for Indicator
  double bandwidth_;             // bin width for Indicator
  double lo_;
  double hi_;
  std::size_t n_actions_;
};

/// theta^T Phi(x,a).
struct LinearModel {
  std::vector<double> theta;

  double value(const FeatureMap& map, double x, std::size_t a) const;
  /// Values of every action at x.
  std::vector<double> action_values(const FeatureMap& map, double x) const;

  friend bool operator==(const LinearModel&, const LinearModel&) = default;
};

/// Uniform in [-1, 1].
LinearModel random_model(std::size_t dim, Rng& rng);

nlohmann::json model_to_json(const LinearModel& model);
LinearModel model_from_json(const nlohmann::json& doc);

struct SampleTransition {
  double x = 0.0;
  std::size_t a = 0;
  double reward = 0.0;
  double x_next = 0.0;
};

/// Draws (X_n, A_n) from the sampling distribution and X'_n ~ P(.|X_n, A_n).
using TransitionSampler = std::function<SampleTransition(Rng&)>;

struct SadppConfig {
  InverseTemperature eta{1.0};
  double gamma = 0.6;
  /// Ridge coefficient; the penalty is alpha * N * ||theta||^2.
  double alpha = 1e-3;
  std::size_t n_samples = 500;
  std::size_t iterations = 100;
};

/// Throws ConfigError for alpha < 0, N = 0, or gamma outside [0,1).
void validate(const SadppConfig& cfg);

/// O_n Psi = Psi(X,A) + r + gamma M_eta Psi(X') - M_eta Psi(X).
double empirical_dpp_target(const LinearModel& model, const FeatureMap& map,
                            const SampleTransition& sample, InverseTemperature eta, double gamma);

/// r + gamma max_a' Q(X', a').
double fitted_q_target(const LinearModel& model, const FeatureMap& map,
                       const SampleTransition& sample, double gamma);

/// theta = (Phi^T Phi + alpha N I)^{-1} Phi^T t with N = rows(features),
/// via a Cholesky factorization. alpha = 0 with a (numerically) singular Gram
/// matrix throws SingularSystem.
LinearModel ridge_solve(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                        double alpha);

/// One SADPP regression on a given batch.
LinearModel sadpp_fit(const SadppConfig& cfg, const LinearModel& model, const FeatureMap& map,
                      std::span<const SampleTransition> batch);
/// One RFQI regression on a given batch.
LinearModel rfqi_fit(const SadppConfig& cfg, const LinearModel& model, const FeatureMap& map,
                     std::span<const SampleTransition> batch);

/// Draws cfg.n_samples fresh transitions and performs one regression.
LinearModel sadpp_iteration(const SadppConfig& cfg, const LinearModel& model,
                            const FeatureMap& map, const TransitionSampler& sampler, Rng& rng);
LinearModel rfqi_iteration(const SadppConfig& cfg, const LinearModel& model,
                           const FeatureMap& map, const TransitionSampler& sampler, Rng& rng);

enum class FittedAlgorithm { Sadpp, Rfqi };

/// SADPP: most probable action of softmax(eta Psi(x,.)), i.e. argmax Psi(x,.).
/// RFQI: argmax Q(x,.). Lowest index on ties in both cases.
std::size_t induced_action(const LinearModel& model, const FeatureMap& map, double x,
                           InverseTemperature eta, FittedAlgorithm algorithm);

}  // namespace dpp
