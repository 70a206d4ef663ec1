#pragma once

// JSON and CSV encodings of instances, game states and switch logs.

#include <iosfwd>
#include <span>
#include <string>

#include <json.hpp>

#include "hfl/coalition_game.hpp"
#include "hfl/model.hpp"

namespace hfl {

nlohmann::json to_json(const NetworkInstance& inst);
NetworkInstance instance_from_json(const nlohmann::json& j);

/// assignment, bandwidth (Hz), agg_counts and chi.
nlohmann::json to_json(const GameState& state);
GameState state_from_json(const nlohmann::json& j);

/// Header: iteration,device,from,to,rule,accepted,psi_before,psi_after
void write_switch_log_csv(std::ostream& out, std::span<const SwitchRecord> log);

/// Shortest round-trip decimal form of a double ("%.17g").
std::string format_double(double v);

}  // namespace hfl
