#include "dpp/fapprox.hpp"

#include <algorithm>
#include <cmath>

#include "dpp/errors.hpp"

namespace dpp {

FeatureMap::FeatureMap(Kind kind, std::vector<double> centers, double bandwidth, double lo,
                       double hi, std::size_t n_actions)
    : kind_(kind),
      centers_(std::move(centers)),
      bandwidth_(bandwidth),
      lo_(lo),
      hi_(hi),
      n_actions_(n_actions) {
  if (centers_.empty()) throw InvalidInput("feature map needs at least one basis function");
  if (n_actions_ == 0) throw InvalidInput("feature map needs at least one action");
  if (!(bandwidth_ > 0.0) || !std::isfinite(bandwidth_)) {
    throw InvalidInput("feature bandwidth must be positive and finite");
  }
}

FeatureMap FeatureMap::rbf(std::vector<double> centers, double bandwidth, std::size_t n_actions) {
  const double lo = centers.empty() ? 0.0 : *std::min_element(centers.begin(), centers.end());
  const double hi = centers.empty() ? 0.0 : *std::max_element(centers.begin(), centers.end());
  return FeatureMap(Kind::Rbf, std::move(centers), bandwidth, lo, hi, n_actions);
}

FeatureMap FeatureMap::evenly_spaced_rbf(double lo, double hi, std::size_t n_centers,
                                         std::size_t n_actions) {
  if (n_centers < 2 || !(hi > lo)) throw InvalidInput("evenly spaced RBFs need hi > lo and >= 2 centers");
  const double spacing = (hi - lo) / static_cast<double>(n_centers - 1);
  std::vector<double> centers(n_centers);
  for (std::size_t i = 0; i < n_centers; ++i) centers[i] = lo + spacing * static_cast<double>(i);
  centers.back() = hi;
  return FeatureMap(Kind::Rbf, std::move(centers), spacing, lo, hi, n_actions);
}

FeatureMap FeatureMap::indicator(double lo, double hi, std::size_t n_bins, std::size_t n_actions) {
  if (n_bins == 0 || !(hi > lo)) throw InvalidInput("indicator features need hi > lo and >= 1 bin");
  const double width = (hi - lo) / static_cast<double>(n_bins);
  std::vector<double> edges(n_bins);
  for (std::size_t i = 0; i < n_bins; ++i) edges[i] = lo + width * static_cast<double>(i);
  return FeatureMap(Kind::Indicator, std::move(edges), width, lo, hi, n_actions);
}

double FeatureMap::basis(std::size_t i, double x) const {
  if (kind_ == Kind::Rbf) {
    const double d = (x - centers_[i]) / bandwidth_;
    return std::exp(-0.5 * d * d);
  }
  const auto n = static_cast<std::ptrdiff_t>(centers_.size());
  auto bin = static_cast<std::ptrdiff_t>(std::floor((x - lo_) / bandwidth_));
  bin = std::clamp<std::ptrdiff_t>(bin, 0, n - 1);
  return static_cast<std::size_t>(bin) == i ? 1.0 : 0.0;
}

void FeatureMap::features(double x, std::size_t a, std::span<double> out) const {
  if (a >= n_actions_) throw InvalidInput("feature map: action out of range");
  if (out.size() != dim()) throw InvalidInput("feature map: output length mismatch");
  if (!std::isfinite(x)) throw InvalidInput("feature map: state must be finite");
  std::fill(out.begin(), out.end(), 0.0);
  const std::size_t m = per_action();
  for (std::size_t i = 0; i < m; ++i) out[a * m + i] = basis(i, x);
}

std::vector<double> FeatureMap::features(double x, std::size_t a) const {
  std::vector<double> out(dim());
  features(x, a, out);
  return out;
}

// ---------------------------------------------------------------------------

double LinearModel::value(const FeatureMap& map, double x, std::size_t a) const {
  if (theta.size() != map.dim()) throw InvalidInput("linear model: theta length does not match features");
  if (a >= map.n_actions()) throw InvalidInput("linear model: action out of range");
  const std::size_t m = map.per_action();
  std::vector<double> block(map.dim());
  map.features(x, a, block);
  double v = 0.0;
  for (std::size_t i = 0; i < m; ++i) v += theta[a * m + i] * block[a * m + i];
  return v;
}

std::vector<double> LinearModel::action_values(const FeatureMap& map, double x) const {
  std::vector<double> out(map.n_actions());
  for (std::size_t a = 0; a < out.size(); ++a) out[a] = value(map, x, a);
  return out;
}

LinearModel random_model(std::size_t dim, Rng& rng) {
  LinearModel model{std::vector<double>(dim)};
  for (double& t : model.theta) t = rng.uniform(-1.0, 1.0);
  return model;
}

nlohmann::json model_to_json(const LinearModel& model) { return model.theta; }

LinearModel model_from_json(const nlohmann::json& doc) {
  if (!doc.is_array()) throw InvalidInput("model JSON must be an array of numbers");
  LinearModel model;
  for (const auto& v : doc) {
    if (!v.is_number()) throw InvalidInput("model JSON must be an array of numbers");
    model.theta.push_back(v.get<double>());
  }
  return model;
}

// ---------------------------------------------------------------------------

void validate(const SadppConfig& cfg) {
  if (!(cfg.alpha >= 0.0) || !std::isfinite(cfg.alpha)) throw ConfigError("ridge coefficient must be >= 0");
  if (cfg.n_samples == 0) throw ConfigError("need at least one sample per iteration");
  if (!(cfg.gamma >= 0.0 && cfg.gamma < 1.0)) throw ConfigError("gamma must lie in [0,1)");
}

double empirical_dpp_target(const LinearModel& model, const FeatureMap& map,
                            const SampleTransition& sample, InverseTemperature eta, double gamma) {
  const std::vector<double> here = model.action_values(map, sample.x);
  const std::vector<double> next = model.action_values(map, sample.x_next);
  if (sample.a >= here.size()) throw InvalidInput("sample action out of range");
  return here[sample.a] + sample.reward + gamma * boltzmann_softmax_backup(next, eta) -
         boltzmann_softmax_backup(here, eta);
}

double fitted_q_target(const LinearModel& model, const FeatureMap& map,
                       const SampleTransition& sample, double gamma) {
  const std::vector<double> next = model.action_values(map, sample.x_next);
  return sample.reward + gamma * *std::max_element(next.begin(), next.end());
}

LinearModel ridge_solve(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                        double alpha) {
  if (features.rows() != targets.size()) throw InvalidInput("ridge_solve: row count mismatch");
  if (features.rows() == 0 || features.cols() == 0) throw InvalidInput("ridge_solve: empty system");
  if (!(alpha >= 0.0)) throw InvalidInput("ridge_solve: alpha must be >= 0");
  const auto n = static_cast<double>(features.rows());
  Eigen::MatrixXd gram = features.transpose() * features;
  gram.diagonal().array() += alpha * n;
  const Eigen::VectorXd rhs = features.transpose() * targets;
  const Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success || (alpha == 0.0 && llt.rcond() < 1e-14)) {
    throw SingularSystem("ridge_solve: Gram matrix is singular; use alpha > 0");
  }
  const Eigen::VectorXd theta = llt.solve(rhs);
  return LinearModel{std::vector<double>(theta.data(), theta.data() + theta.size())};
}

namespace {

template <class Target>
LinearModel fit(const SadppConfig& cfg, const LinearModel& model, const FeatureMap& map,
                std::span<const SampleTransition> batch, Target&& target) {
  validate(cfg);
  if (batch.empty()) throw InvalidInput("regression batch is empty");
  if (model.theta.size() != map.dim()) throw InvalidInput("theta length does not match features");
  const auto rows = static_cast<Eigen::Index>(batch.size());
  const auto cols = static_cast<Eigen::Index>(map.dim());
  Eigen::MatrixXd phi(rows, cols);
  Eigen::VectorXd t(rows);
  std::vector<double> f(map.dim());
  for (Eigen::Index n = 0; n < rows; ++n) {
    const SampleTransition& s = batch[static_cast<std::size_t>(n)];
    map.features(s.x, s.a, f);
    for (Eigen::Index j = 0; j < cols; ++j) phi(n, j) = f[static_cast<std::size_t>(j)];
    t(n) = target(s);
  }
  return ridge_solve(phi, t, cfg.alpha);
}

std::vector<SampleTransition> draw_batch(const SadppConfig& cfg, const TransitionSampler& sampler,
                                         Rng& rng) {
  validate(cfg);
  std::vector<SampleTransition> batch(cfg.n_samples);
  for (auto& s : batch) s = sampler(rng);
  return batch;
}

}  // namespace

LinearModel sadpp_fit(const SadppConfig& cfg, const LinearModel& model, const FeatureMap& map,
                      std::span<const SampleTransition> batch) {
  return fit(cfg, model, map, batch, [&](const SampleTransition& s) {
    return empirical_dpp_target(model, map, s, cfg.eta, cfg.gamma);
  });
}

LinearModel rfqi_fit(const SadppConfig& cfg, const LinearModel& model, const FeatureMap& map,
                     std::span<const SampleTransition> batch) {
  return fit(cfg, model, map, batch,
             [&](const SampleTransition& s) { return fitted_q_target(model, map, s, cfg.gamma); });
}

LinearModel sadpp_iteration(const SadppConfig& cfg, const LinearModel& model,
                            const FeatureMap& map, const TransitionSampler& sampler, Rng& rng) {
  const auto batch = draw_batch(cfg, sampler, rng);
  return sadpp_fit(cfg, model, map, batch);
}

LinearModel rfqi_iteration(const SadppConfig& cfg, const LinearModel& model,
                           const FeatureMap& map, const TransitionSampler& sampler, Rng& rng) {
  const auto batch = draw_batch(cfg, sampler, rng);
  return rfqi_fit(cfg, model, map, batch);
}

std::size_t induced_action(const LinearModel& model, const FeatureMap& map, double x,
                           InverseTemperature /*eta*/, FittedAlgorithm /*algorithm*/) {
  // softmax is monotone in Psi for every eta > 0, so the most probable SADPP
  // action and the greedy RFQI action are both the lowest-index argmax.
  return argmax_lowest(model.action_values(map, x));
}

}  // namespace dpp
