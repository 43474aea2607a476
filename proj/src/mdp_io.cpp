#include "dpp/mdp_io.hpp"

#include <fstream>

#include "dpp/errors.hpp"

namespace dpp {

nlohmann::json mdp_to_json(const TabularMdp& mdp) {
  const std::size_t S = mdp.n_states();
  const std::size_t A = mdp.n_actions();
  nlohmann::json rewards = nlohmann::json::array();
  nlohmann::json transitions = nlohmann::json::array();
  std::vector<double> dense(S);
  for (std::size_t x = 0; x < S; ++x) {
    nlohmann::json r_row = nlohmann::json::array();
    nlohmann::json t_state = nlohmann::json::array();
    for (std::size_t a = 0; a < A; ++a) {
      r_row.push_back(mdp.reward(x, a));
      std::fill(dense.begin(), dense.end(), 0.0);
      const SuccessorRow row = mdp.successors(x, a);
      for (std::size_t i = 0; i < row.size(); ++i) dense[row.states[i]] += row.probabilities[i];
      t_state.push_back(dense);
    }
    rewards.push_back(std::move(r_row));
    transitions.push_back(std::move(t_state));
  }
  return {{"n_states", S},
          {"n_actions", A},
          {"gamma", mdp.gamma()},
          {"rewards", std::move(rewards)},
          {"transitions", std::move(transitions)}};
}

TabularMdp mdp_from_json(const nlohmann::json& doc) {
  try {
    const auto S = doc.at("n_states").get<std::size_t>();
    const auto A = doc.at("n_actions").get<std::size_t>();
    const auto gamma = doc.at("gamma").get<double>();
    auto rewards = doc.at("rewards").get<std::vector<std::vector<double>>>();
    auto transitions = doc.at("transitions").get<std::vector<std::vector<std::vector<double>>>>();
    if (rewards.size() != S || transitions.size() != S) {
      throw InvalidInput("MDP JSON: n_states does not match array lengths");
    }
    if (S > 0 && (rewards[0].size() != A || transitions[0].size() != A)) {
      throw InvalidInput("MDP JSON: n_actions does not match array lengths");
    }
    return TabularMdp::from_dense(transitions, rewards, gamma);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("MDP JSON: ") + e.what());
  }
}

void save_mdp(const TabularMdp& mdp, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << mdp_to_json(mdp).dump() << '\n';
}

TabularMdp load_mdp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("MDP JSON: ") + e.what());
  }
  return mdp_from_json(doc);
}

}  // namespace dpp
