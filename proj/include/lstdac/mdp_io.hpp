#pragma once

#include "lstdac/mdp.hpp"
#include "lstdac/mrp_transform.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace lstdac {

using json = nlohmann::json;

/// {num_states, num_actions, initial_state, termination_state (or null),
///  available (2-D 0/1 array), trans [[x,u,j,p],...], cost [[x,u,c],...]}
/// Doubles are written in shortest round-trip form, so no precision is lost.
json mdp_to_json(const FiniteMdp& mdp);
FiniteMdp mdp_from_json(const json& doc);

/// {mdp, goal_states, unsafe_states, initial_state}
json mrp_to_json(const MrpProblem& problem);
MrpProblem mrp_from_json(const json& doc);

/// Sidecar {"<s_index>": m_index}; the termination state maps to null.
json origin_map_to_json(const SspProblem& ssp);
/// Rebuilds an SspProblem from its model and origin-map sidecar. Unsafe
/// states are recovered as the non-terminal states with positive cost.
SspProblem ssp_from_json(const json& mdp_doc, const json& origin_doc);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

} // namespace lstdac
