#pragma once

#include <filesystem>

#include <json.hpp>

#include "dpp/mdp.hpp"

namespace dpp {

/// JSON layout:
///   {"n_states": S, "n_actions": A, "gamma": g,
///    "rewards": [[r(x,a) for a] for x],
///    "transitions": [[[P(y|x,a) for y] for a] for x]}
/// Doubles are written in shortest round-trip form, so save/load is bit-stable.
nlohmann::json mdp_to_json(const TabularMdp& mdp);
TabularMdp mdp_from_json(const nlohmann::json& doc);

void save_mdp(const TabularMdp& mdp, const std::filesystem::path& path);
TabularMdp load_mdp(const std::filesystem::path& path);

}  // namespace dpp
