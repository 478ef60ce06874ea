#include "lstdac/mdp_io.hpp"

#include "lstdac/errors.hpp"

#include <fstream>
#include <sstream>

namespace lstdac {

json mdp_to_json(const FiniteMdp& mdp) {
  json doc;
  doc["num_states"] = mdp.num_states();
  doc["num_actions"] = mdp.num_actions();
  doc["initial_state"] = mdp.initial_state();
  doc["termination_state"] = mdp.termination_state() ? json(*mdp.termination_state()) : json(nullptr);
  json available = json::array();
  json trans = json::array();
  json cost = json::array();
  for (StateIndex x = 0; x < mdp.num_states(); ++x) {
    json row = json::array();
    for (ActionIndex u = 0; u < mdp.num_actions(); ++u) {
      row.push_back(mdp.available(x, u) ? 1 : 0);
      for (const auto& t : mdp.row(x, u)) trans.push_back({x, u, t.next, t.prob});
      if (mdp.available(x, u) || mdp.cost(x, u) != 0.0) cost.push_back({x, u, mdp.cost(x, u)});
    }
    available.push_back(std::move(row));
  }
  doc["available"] = std::move(available);
  doc["trans"] = std::move(trans);
  doc["cost"] = std::move(cost);
  return doc;
}

FiniteMdp mdp_from_json(const json& doc) {
  try {
    const auto ns = doc.at("num_states").get<std::size_t>();
    const auto na = doc.at("num_actions").get<std::size_t>();
    std::optional<StateIndex> term;
    if (!doc.at("termination_state").is_null()) term = doc.at("termination_state").get<StateIndex>();
    FiniteMdp mdp(ns, na, doc.at("initial_state").get<StateIndex>(), term);

    const auto& available = doc.at("available");
    if (available.size() != ns) throw ValidationError("mdp json: available has wrong row count");
    for (StateIndex x = 0; x < ns; ++x) {
      if (available[x].size() != na) throw ValidationError("mdp json: available row has wrong width");
      for (ActionIndex u = 0; u < na; ++u) mdp.set_available(x, u, available[x][u].get<int>() != 0);
    }
    std::vector<std::vector<Transition>> rows(ns * na);
    for (const auto& q : doc.at("trans")) {
      const auto x = q.at(0).get<StateIndex>();
      const auto u = q.at(1).get<ActionIndex>();
      if (x >= ns || u >= na) throw ValidationError("mdp json: transition index out of range");
      rows[x * na + u].push_back({q.at(2).get<StateIndex>(), q.at(3).get<double>()});
    }
    for (StateIndex x = 0; x < ns; ++x) {
      for (ActionIndex u = 0; u < na; ++u) mdp.set_row(x, u, std::move(rows[x * na + u]));
    }
    for (const auto& t : doc.at("cost")) {
      mdp.set_cost(t.at(0).get<StateIndex>(), t.at(1).get<ActionIndex>(), t.at(2).get<double>());
    }
    return mdp;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("mdp json: ") + e.what());
  } catch (const std::out_of_range& e) {
    throw ValidationError(std::string("mdp json: ") + e.what());
  }
}

json mrp_to_json(const MrpProblem& problem) {
  return {{"mdp", mdp_to_json(problem.mdp)},
          {"goal_states", problem.goal_states},
          {"unsafe_states", problem.unsafe_states},
          {"initial_state", problem.initial_state()}};
}

MrpProblem mrp_from_json(const json& doc) {
  MrpProblem problem;
  try {
    problem.mdp = mdp_from_json(doc.at("mdp"));
    problem.goal_states = doc.at("goal_states").get<std::vector<StateIndex>>();
    problem.unsafe_states = doc.at("unsafe_states").get<std::vector<StateIndex>>();
    if (doc.at("initial_state").get<StateIndex>() != problem.mdp.initial_state()) {
      throw ValidationError("mrp json: initial_state disagrees with the model");
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("mrp json: ") + e.what());
  }
  return problem;
}

json origin_map_to_json(const SspProblem& ssp) {
  json doc = json::object();
  for (std::size_t s = 0; s < ssp.origin_map.size(); ++s) {
    doc[std::to_string(s)] = ssp.origin_map[s] ? json(*ssp.origin_map[s]) : json(nullptr);
  }
  return doc;
}

SspProblem ssp_from_json(const json& mdp_doc, const json& origin_doc) {
  SspProblem ssp;
  ssp.mdp = mdp_from_json(mdp_doc);
  if (!ssp.mdp.termination_state()) throw ValidationError("ssp json: model has no termination state");
  ssp.origin_map.assign(ssp.mdp.num_states(), std::nullopt);
  try {
    for (const auto& [key, value] : origin_doc.items()) {
      const auto s = static_cast<std::size_t>(std::stoul(key));
      if (s >= ssp.origin_map.size()) throw ValidationError("ssp json: origin index out of range");
      if (!value.is_null()) ssp.origin_map[s] = value.get<StateIndex>();
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("ssp json: ") + e.what());
  } catch (const std::logic_error& e) {
    throw ValidationError(std::string("ssp json: bad origin key: ") + e.what());
  }
  const StateIndex term = ssp.termination_state();
  for (StateIndex s = 0; s < ssp.mdp.num_states(); ++s) {
    if (s == term) continue;
    for (ActionIndex u = 0; u < ssp.mdp.num_actions(); ++u) {
      if (ssp.mdp.available(s, u) && ssp.mdp.cost(s, u) > 0.0) {
        ssp.unsafe_states.push_back(s);
        break;
      }
    }
  }
  return ssp;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::ios_base::failure("cannot write " + path.string());
  out << text;
  if (!out) throw std::ios_base::failure("write failed for " + path.string());
}

} // namespace lstdac
